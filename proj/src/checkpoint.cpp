#include "dmae/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace dmae {

using nlohmann::json;

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::vector<double> to_vector(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

Matrix matrix_from(const json& values, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto flat = values.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw ParseError(std::string("checkpoint: '") + what + "' has wrong length");
  }
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

}  // namespace

json dmm_to_json(const DmmParams& params) {
  json j;
  j["kind"] = params.kind.name();
  if (params.kind.tag() == DissimilarityTag::PeriodicEuclidean) {
    const Vector& p = params.kind.period();
    j["period"] = std::vector<double>(p.data(), p.data() + p.size());
  }
  j["alpha"] = params.alpha;
  j["clusters"] = params.clusters();
  j["dim"] = params.dim();
  j["theta"] = to_vector(params.theta);
  j["phi"] = std::vector<double>(params.phi.data(), params.phi.data() + params.phi.size());
  if (params.kind.needs_metric()) {
    json cov = json::array();
    for (const auto& factor : params.cov) {
      std::vector<double> packed;
      for (Eigen::Index r = 0; r < factor.rows(); ++r) {
        for (Eigen::Index c = 0; c <= r; ++c) packed.push_back(factor(r, c));
      }
      cov.push_back(packed);
    }
    j["cov"] = cov;
  }
  return j;
}

DmmParams dmm_from_json(const json& j) {
  try {
    std::optional<Vector> period;
    if (j.contains("period")) {
      const auto p = j.at("period").get<std::vector<double>>();
      period = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
    }
    DmmParams params;
    params.kind = DissimilarityKind::from_name(j.at("kind").get<std::string>(), period);
    params.alpha = j.at("alpha").get<double>();
    const auto k = j.at("clusters").get<Eigen::Index>();
    const auto m = j.at("dim").get<Eigen::Index>();
    params.theta = matrix_from(j.at("theta"), k, m, "theta");
    const auto phi = j.at("phi").get<std::vector<double>>();
    params.phi = Eigen::Map<const Vector>(phi.data(), static_cast<Eigen::Index>(phi.size()));
    if (j.contains("cov")) {
      for (const auto& packed_json : j.at("cov")) {
        const auto packed = packed_json.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(packed.size()) != m * (m + 1) / 2) {
          throw ParseError("checkpoint: packed covariance factor has wrong length");
        }
        Matrix factor = Matrix::Zero(m, m);
        std::size_t idx = 0;
        for (Eigen::Index r = 0; r < m; ++r) {
          for (Eigen::Index c = 0; c <= r; ++c) factor(r, c) = packed[idx++];
        }
        params.cov.push_back(std::move(factor));
      }
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

json mlp_to_json(const MlpParams& mlp) {
  json j;
  j["dims"] = mlp.dims();
  json layers = json::array();
  for (const auto& layer : mlp.layers) {
    layers.push_back({{"in", layer.in_dim()},
                      {"out", layer.out_dim()},
                      {"activation", layer.activation == Activation::Relu ? "relu" : "linear"},
                      {"weight", to_vector(layer.weight)},
                      {"bias", std::vector<double>(layer.bias.data(),
                                                   layer.bias.data() + layer.bias.size())}});
  }
  j["layers"] = layers;
  return j;
}

MlpParams mlp_from_json(const json& j) {
  try {
    MlpParams mlp;
    for (const auto& lj : j.at("layers")) {
      DenseLayer layer;
      const auto in = lj.at("in").get<Eigen::Index>();
      const auto out = lj.at("out").get<Eigen::Index>();
      const auto act = lj.at("activation").get<std::string>();
      if (act != "relu" && act != "linear") throw ParseError("checkpoint: unknown activation");
      layer.activation = act == "relu" ? Activation::Relu : Activation::Linear;
      layer.weight = matrix_from(lj.at("weight"), out, in, "weight");
      const auto bias = lj.at("bias").get<std::vector<double>>();
      layer.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      mlp.layers.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

json load_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace dmae
