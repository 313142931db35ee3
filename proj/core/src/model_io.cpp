#include "fsml/model_io.hpp"

#include <fstream>

#include "fsml/base64.hpp"
#include "fsml/errors.hpp"

namespace fsml {
namespace {

using nlohmann::json;

// Matrices are stored row-major.
json matrix_to_json(const Matrix& m) {
  std::vector<float> values;
  values.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(static_cast<float>(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64::encode_f32(values)}};
}

Matrix matrix_from_json(const json& j, const char* what) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw DataError(std::string(what) + ": negative shape");
  const auto values = base64::decode_f32(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw DataError(std::string(what) + ": payload has " + std::to_string(values.size()) +
                    " values, shape needs " + std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
  }
  return m;
}

json vector_to_json(const Vector& v) {
  std::vector<float> values(v.data(), v.data() + v.size());
  return base64::encode_f32(values);
}

Vector vector_from_json(const json& j) {
  const auto values = base64::decode_f32(j.get<std::string>());
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

template <typename M>
void round_f32(M& m) {
  m = m.template cast<float>().template cast<double>();
}

}  // namespace

ModelParams ModelParams::initial(int embed_dim, double beta, int mlp_layers, int mlp_hidden, Rng& rng) {
  ModelParams m;
  m.embed_dim = embed_dim;
  m.proj = Matrix::Identity(embed_dim, embed_dim);
  m.beta = beta;
  m.threshold.mlp = Mlp::random(kRawFeatureCount, mlp_hidden, mlp_layers, rng);
  m.round_to_f32();
  return m;
}

void ModelParams::round_to_f32() {
  round_f32(proj);
  for (auto& layer : threshold.mlp.layers()) {
    round_f32(layer.weights);
    round_f32(layer.bias);
  }
}

json model_to_json(const ModelParams& model) {
  json layers = json::array();
  for (const auto& l : model.threshold.mlp.layers()) {
    layers.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", vector_to_json(l.bias)}});
  }
  json j = {{"embed_dim", model.embed_dim},
            {"proj", matrix_to_json(model.proj)},
            {"beta", model.beta},
            {"r", model.threshold.r},
            {"alpha", model.threshold.alpha},
            {"rho", model.threshold.rho},
            {"mlp", {{"layers", std::move(layers)}}},
            {"epsilon", model.threshold.epsilon}};
  if (model.fixed_threshold) j["fixed_threshold"] = *model.fixed_threshold;
  return j;
}

ModelParams model_from_json(const json& j) {
  try {
    ModelParams m;
    m.embed_dim = j.at("embed_dim").get<int>();
    m.proj = matrix_from_json(j.at("proj"), "proj");
    if (m.proj.cols() != m.embed_dim) throw DataError("proj column count differs from embed_dim");
    m.beta = j.at("beta").get<double>();
    m.threshold.r = j.at("r").get<double>();
    m.threshold.alpha = j.at("alpha").get<double>();
    m.threshold.rho = j.at("rho").get<double>();
    m.threshold.epsilon = j.at("epsilon").get<double>();
    std::vector<MlpLayer> layers;
    for (const auto& l : j.at("mlp").at("layers")) {
      layers.push_back({matrix_from_json(l.at("weights"), "mlp weights"), vector_from_json(l.at("bias"))});
    }
    try {
      m.threshold.mlp = Mlp(std::move(layers));
      m.threshold.validate();
    } catch (const ConfigError& e) {
      throw DataError(e.what());
    }
    if (!(m.beta >= 0.0 && m.beta <= 1.0)) throw DataError("beta must be in [0, 1]");
    if (j.contains("fixed_threshold")) m.fixed_threshold = j.at("fixed_threshold").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
}

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  write_json_file(model_to_json(model), path);
}

ModelParams load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace fsml
