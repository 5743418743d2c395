#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lrgp::harness {

struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> feature_names;
  std::string target_name;
};

// Header-row CSV with comma separators and plain numeric fields. The named
// target column becomes y; remaining columns become features in header order.
// An empty target name selects the last column. Throws DataError with the
// offending line/column on malformed input.
Dataset load_csv(const std::string& path, const std::string& target_column = "");

}  // namespace lrgp::harness
