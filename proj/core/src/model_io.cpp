#include "lrgp/harness/model_io.hpp"

#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "lrgp/errors.hpp"

namespace lrgp::harness {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

std::string method_name(GpMethod m) {
  switch (m) {
    case GpMethod::Mgp: return "mgp";
    case GpMethod::Fgp: return "fgp";
    case GpMethod::ExactGp: return "exact";
  }
  return "?";
}

GpMethod method_from_name(const std::string& s) {
  if (s == "mgp") return GpMethod::Mgp;
  if (s == "fgp") return GpMethod::Fgp;
  if (s == "exact") return GpMethod::ExactGp;
  throw DataError("model file: unknown method '" + s + "'");
}

}  // namespace

void save_model(const std::string& path, const SavedModel& saved) {
  const auto& m = saved.model;
  json j;
  j["format"] = "lrgp-model-v1";
  j["method"] = method_name(m.method);
  j["noise_variance"] = m.noise_variance;
  j["rank"] = m.rank;
  j["shared_lengthscale"] = m.shared_lengthscale;
  j["kernel"]["family"] =
      m.kernel.family == KernelFamily::GaussianArd ? "gaussian" : "matern";
  j["kernel"]["signal_variance"] = m.kernel.signal_variance;
  j["kernel"]["lengthscale_inverse_sq"] =
      vector_to_json(m.kernel.lengthscale_inverse_sq);
  j["kernel"]["nu"] = m.kernel.nu;
  j["kernel"]["alpha"] = m.kernel.alpha;
  if (m.projection) j["projection"] = matrix_to_json(*m.projection);
  j["input_standardizer"]["mean"] = vector_to_json(m.input_standardizer.mean);
  j["input_standardizer"]["scale"] = vector_to_json(m.input_standardizer.scale);
  j["output_standardizer"]["mean"] = vector_to_json(m.output_standardizer.mean);
  j["output_standardizer"]["scale"] = vector_to_json(m.output_standardizer.scale);
  if (m.spectral) {
    j["spectral"]["standardized"] = matrix_to_json(m.spectral->standardized);
    j["spectral"]["seed"] = m.spectral->seed;
  }
  j["mercer_alpha"] = vector_to_json(m.mercer_alpha);
  j["x_train"] = matrix_to_json(saved.x_train);
  j["y_train"] = vector_to_json(saved.y_train);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open model file for writing: " + path);
  out << j.dump(2) << '\n';
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("model file parse error: " + std::string(e.what()));
  }
  if (j.value("format", "") != "lrgp-model-v1") {
    throw DataError("model file: unrecognized format");
  }

  SavedModel saved;
  auto& m = saved.model;
  m.method = method_from_name(j.at("method").get<std::string>());
  m.noise_variance = j.at("noise_variance").get<double>();
  m.rank = j.at("rank").get<int>();
  m.shared_lengthscale = j.at("shared_lengthscale").get<bool>();
  const auto& jk = j.at("kernel");
  m.kernel.family = jk.at("family").get<std::string>() == "gaussian"
                        ? KernelFamily::GaussianArd
                        : KernelFamily::Matern;
  m.kernel.signal_variance = jk.at("signal_variance").get<double>();
  m.kernel.lengthscale_inverse_sq = vector_from_json(jk.at("lengthscale_inverse_sq"));
  m.kernel.nu = jk.at("nu").get<double>();
  m.kernel.alpha = jk.at("alpha").get<double>();
  if (j.contains("projection")) m.projection = matrix_from_json(j.at("projection"));
  m.input_standardizer.mean = vector_from_json(j.at("input_standardizer").at("mean"));
  m.input_standardizer.scale = vector_from_json(j.at("input_standardizer").at("scale"));
  m.output_standardizer.mean = vector_from_json(j.at("output_standardizer").at("mean"));
  m.output_standardizer.scale =
      vector_from_json(j.at("output_standardizer").at("scale"));
  if (j.contains("spectral")) {
    SpectralSample s;
    s.standardized = matrix_from_json(j.at("spectral").at("standardized"));
    s.seed = j.at("spectral").at("seed").get<std::uint64_t>();
    s.kernel_params = m.kernel;
    m.spectral = std::move(s);
  }
  m.mercer_alpha = vector_from_json(j.at("mercer_alpha"));
  if (m.method == GpMethod::Mgp) {
    m.mercer_ordering = multi_index_sequence(m.kernel.input_dim(), m.rank);
  }
  saved.x_train = matrix_from_json(j.at("x_train"));
  saved.y_train = vector_from_json(j.at("y_train"));
  return saved;
}

}  // namespace lrgp::harness
