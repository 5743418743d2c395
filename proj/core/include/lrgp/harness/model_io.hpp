#pragma once

#include <string>

#include <Eigen/Dense>

#include "lrgp/gp.hpp"

namespace lrgp::harness {

// A fitted model bundled with the training split it was fitted on, so
// prediction needs nothing else.
struct SavedModel {
  LowRankGPModel model;
  Eigen::MatrixXd x_train;
  Eigen::VectorXd y_train;
};

void save_model(const std::string& path, const SavedModel& saved);
SavedModel load_model(const std::string& path);

}  // namespace lrgp::harness
