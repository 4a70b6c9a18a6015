#include "rqgnn/checkpoint.hpp"

#include "rqgnn/error.hpp"

#include <fstream>

namespace rqgnn {

namespace {

std::vector<double> row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

nlohmann::json tensor_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"values", row_major(m)}};
}

Matrix tensor_from(const nlohmann::json& doc, const std::string& name) {
  const auto shape = doc.at("shape").get<std::vector<Eigen::Index>>();
  const auto values = doc.at("values").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(values.size())) {
    throw ConfigError("checkpoint tensor '" + name + "' has inconsistent shape");
  }
  Matrix m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < shape[0]; ++r) {
    for (Eigen::Index c = 0; c < shape[1]; ++c) m(r, c) = values[k++];
  }
  return m;
}

Matrix row_from(const nlohmann::json& doc) {
  const auto values = doc.get<std::vector<double>>();
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = values[k];
  return m;
}

}  // namespace

nlohmann::json checkpoint_to_json(const ModelParams& params) {
  const ModelConfig& c = params.config;
  nlohmann::json doc;
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"F", c.feature_dim},  {"d", c.hidden},
                   {"q", c.wavelets},     {"K", c.order},
                   {"kernel_id", c.kernel_id},
                   {"scales", dyadic_scales(c.wavelets, 2.0)},
                   {"dropout", c.dropout}};
  nlohmann::json tensors = nlohmann::json::object();
  params.for_each_trainable([&](const std::string& name, const Matrix& m) {
    if (name.rfind("bn.", 0) != 0) tensors[name] = tensor_json(m);
  });
  doc["params"] = tensors;
  doc["bn"] = {{"gamma", row_major(params.bn_gamma)},
               {"beta", row_major(params.bn_beta)},
               {"running_mean", row_major(params.running_mean)},
               {"running_var", row_major(params.running_var)}};
  return doc;
}

ModelParams checkpoint_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version");
    }
    const auto& cfg = doc.at("config");
    ModelParams p;
    p.config.feature_dim = cfg.at("F").get<int>();
    p.config.hidden = cfg.at("d").get<int>();
    p.config.wavelets = cfg.at("q").get<int>();
    p.config.order = cfg.at("K").get<int>();
    p.config.kernel_id = cfg.at("kernel_id").get<std::string>();
    p.config.dropout = cfg.value("dropout", 0.4);
    kernel_by_id(p.config.kernel_id);
    const auto& tensors = doc.at("params");
    p.for_each_trainable([&](const std::string& name, Matrix& m) {
      if (name.rfind("bn.", 0) != 0) m = tensor_from(tensors.at(name), name);
    });
    const auto& bn = doc.at("bn");
    p.bn_gamma = row_from(bn.at("gamma"));
    p.bn_beta = row_from(bn.at("beta"));
    p.running_mean = row_from(bn.at("running_mean"));
    p.running_var = row_from(bn.at("running_var"));
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params).dump(1) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace rqgnn
