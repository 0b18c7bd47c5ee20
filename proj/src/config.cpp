#include "dmae/config.hpp"

#include "dmae/checkpoint.hpp"

#include <toml.hpp>

#include <set>
#include <sstream>

namespace dmae {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::Dmm:
      return "dmm";
    case Mode::AeDmm:
      return "ae_dmm";
    case Mode::Dmae:
      return "dmae";
  }
  return "dmm";
}

LabeledDataset make_dataset(const DatasetSpec& spec) {
  if (spec.name == "pinwheel") {
    const int arms = spec.groups > 0 ? spec.groups : 5;
    if (spec.n % arms != 0) throw ConfigError("dataset.n must be a multiple of the arm count");
    return gen_pinwheel(spec.n / arms, arms, spec.radial_std, spec.angular_std, spec.rate,
                        spec.seed, spec.twist);
  }
  if (spec.name == "toroidal") {
    const int blobs = spec.groups > 0 ? spec.groups : 4;
    if (spec.n % blobs != 0) throw ConfigError("dataset.n must be a multiple of the blob count");
    return gen_toroidal(spec.n / blobs, blobs, spec.sigma, spec.seed);
  }
  if (spec.name == "moons") return gen_moons(spec.n, spec.noise_std, spec.seed);
  if (spec.name == "circles") {
    return gen_circles(spec.n, spec.noise_std, spec.radius_factor, spec.seed);
  }
  if (spec.name == "csv") return load_csv(spec.path, spec.label_column);
  throw ConfigError("dataset.name: unknown dataset '" + spec.name + "'");
}

std::uint64_t ExperimentConfig::trial_seed(int t) const {
  if (!seeds.empty()) return seeds.at(static_cast<std::size_t>(t));
  return seed + static_cast<std::uint64_t>(t);
}

std::vector<std::string> ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("'" + key + "' " + why);
  };
  if (clusters < 1) fail("clusters", "must be at least 1");
  if (n_trials < 1) fail("n_trials", "must be at least 1");
  if (!seeds.empty() && static_cast<int>(seeds.size()) < n_trials) {
    fail("seeds", "must list at least n_trials seeds");
  }
  if (!(alpha > 0.0)) fail("dmm.alpha", "must be positive");
  if (!(lr > 0.0)) fail("dmm.lr", "must be positive");
  if (epochs < 0) fail("dmm.epochs", "must be non-negative");
  if (batch_size < 1) fail("dmm.batch_size", "must be at least 1");
  if (kmeans_n_init < 1) fail("kmeans.n_init", "must be at least 1");
  if (kmeans_max_iter < 1) fail("kmeans.max_iter", "must be at least 1");
  if (deep()) {
    if (encoder_dims.size() < 2) fail("autoencoder.encoder", "needs at least two widths");
    if (decoder_dims.size() < 2) fail("autoencoder.decoder", "needs at least two widths");
    if (encoder_dims.back() != decoder_dims.front()) {
      fail("autoencoder.decoder", "must start at the encoder's latent width");
    }
    if (decoder_dims.back() != encoder_dims.front()) {
      fail("autoencoder.decoder", "must end at the encoder's input width");
    }
    if (pretrain_epochs < 0) fail("autoencoder.pretrain_epochs", "must be non-negative");
    if (!(pretrain_lr > 0.0)) fail("autoencoder.pretrain_lr", "must be positive");
    if (train_epochs < 0) fail("dmae.epochs", "must be non-negative");
    if (!(train_lr > 0.0)) fail("dmae.lr", "must be positive");
    if (init_epochs < 0) fail("dmae.init_epochs", "must be non-negative");
    try {
      CompositeLossWeights{lambda_r, lambda_c}.validate();
    } catch (const ConfigError& e) {
      fail("dmae.lambda_r", std::string("/ lambda_c: ") + e.what());
    }
  }

  std::vector<std::string> warnings;
  auto band = [&](const std::string& key, double v, double lo, double hi) {
    if (v < lo || v > hi) {
      std::ostringstream msg;
      msg << "'" << key << "' = " << v << " is outside the explored range [" << lo << ", " << hi
          << "]";
      warnings.push_back(msg.str());
    }
  };
  const bool synthetic = dataset.synthetic();
  band("dmm.alpha", alpha, 0.5, 1e4);
  const double lr_hi = synthetic ? 1e-3 : 1.0;
  const double ep_lo = synthetic ? 40 : 50;
  const double ep_hi = synthetic ? 250 : 500;
  band("dmm.lr", lr, 1e-5, lr_hi);
  band("dmm.epochs", epochs, ep_lo, ep_hi);
  if (deep()) {
    band("autoencoder.pretrain_lr", pretrain_lr, 1e-5, lr_hi);
    band("autoencoder.pretrain_epochs", pretrain_epochs, ep_lo, ep_hi);
    if (mode == Mode::Dmae) {
      band("dmae.lr", train_lr, 1e-5, lr_hi);
      band("dmae.epochs", train_epochs, ep_lo, ep_hi);
      band("dmae.lambda_r", lambda_r, 0.0, 1.0);
      band("dmae.lambda_c", lambda_c, 0.0, 1.0);
    }
  }
  if (batch_size != 32) warnings.push_back("'dmm.batch_size' differs from the usual 32");
  return warnings;
}

namespace {

// Reads typed values from one TOML table and rejects keys nobody asked for.
class Section {
 public:
  Section(const toml::table* table, std::string prefix)
      : table_(table), prefix_(std::move(prefix)) {}

  std::string key_path(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  const toml::node* find(std::string_view key) {
    if (table_ == nullptr) return nullptr;
    seen_.insert(std::string(key));
    return table_->get(key);
  }

  [[noreturn]] void type_error(std::string_view key, std::string_view expected) const {
    throw ConfigError("'" + key_path(key) + "' must be " + std::string(expected));
  }

  void read(std::string_view key, double& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    if (auto v = node->value_exact<double>()) {
      out = *v;
    } else if (auto i = node->value_exact<std::int64_t>()) {
      out = static_cast<double>(*i);
    } else {
      type_error(key, "a number");
    }
  }

  void read(std::string_view key, int& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    auto v = node->value_exact<std::int64_t>();
    if (!v) type_error(key, "an integer");
    out = static_cast<int>(*v);
  }

  void read(std::string_view key, std::uint64_t& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    auto v = node->value_exact<std::int64_t>();
    if (!v || *v < 0) type_error(key, "a non-negative integer");
    out = static_cast<std::uint64_t>(*v);
  }

  void read(std::string_view key, bool& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    auto v = node->value_exact<bool>();
    if (!v) type_error(key, "a boolean");
    out = *v;
  }

  void read(std::string_view key, std::string& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    auto v = node->value_exact<std::string>();
    if (!v) type_error(key, "a string");
    out = *v;
  }

  std::optional<std::string> read_string(std::string_view key) {
    const toml::node* node = find(key);
    if (node == nullptr) return std::nullopt;
    if (auto v = node->value_exact<std::string>()) return *v;
    if (auto i = node->value_exact<std::int64_t>()) return std::to_string(*i);
    type_error(key, "a string or integer");
  }

  template <typename T>
  void read_array(std::string_view key, std::vector<T>& out) {
    const toml::node* node = find(key);
    if (node == nullptr) return;
    const toml::array* arr = node->as_array();
    if (arr == nullptr) type_error(key, "an array");
    std::vector<T> values;
    for (const auto& item : *arr) {
      if constexpr (std::is_floating_point_v<T>) {
        if (auto v = item.value_exact<double>()) {
          values.push_back(*v);
        } else if (auto i = item.value_exact<std::int64_t>()) {
          values.push_back(static_cast<T>(*i));
        } else {
          type_error(key, "an array of numbers");
        }
      } else {
        auto v = item.value_exact<std::int64_t>();
        if (!v || *v < 0) type_error(key, "an array of non-negative integers");
        values.push_back(static_cast<T>(*v));
      }
    }
    out = std::move(values);
  }

  const toml::table* table(std::string_view key) {
    const toml::node* node = find(key);
    if (node == nullptr) return nullptr;
    const toml::table* t = node->as_table();
    if (t == nullptr) type_error(key, "a table");
    return t;
  }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [key, node] : *table_) {
      if (!seen_.count(std::string(key.str()))) {
        throw ConfigError("unknown key '" + key_path(key.str()) + "'");
      }
    }
  }

 private:
  const toml::table* table_;
  std::string prefix_;
  std::set<std::string> seen_;
};

LossScale parse_scale(const std::string& text, const std::string& key) {
  if (text == "alpha") return LossScale::Alpha;
  if (text == "unit") return LossScale::Unit;
  throw ConfigError("'" + key + "' must be \"alpha\" or \"unit\"");
}

}  // namespace

ExperimentConfig parse_config(std::string_view toml_text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw ConfigError(msg.str());
  }

  ExperimentConfig cfg;
  Section top(&root, "");
  top.read("name", cfg.name);
  std::string mode = "dmm";
  top.read("mode", mode);
  if (mode == "dmm") {
    cfg.mode = Mode::Dmm;
  } else if (mode == "ae_dmm") {
    cfg.mode = Mode::AeDmm;
  } else if (mode == "dmae") {
    cfg.mode = Mode::Dmae;
  } else {
    throw ConfigError("'mode' must be one of dmm, ae_dmm, dmae (got '" + mode + "')");
  }
  top.read("clusters", cfg.clusters);
  top.read("n_trials", cfg.n_trials);
  top.read("seed", cfg.seed);
  top.read_array("seeds", cfg.seeds);

  Section ds(top.table("dataset"), "dataset");
  ds.read("name", cfg.dataset.name);
  ds.read("n", cfg.dataset.n);
  ds.read("seed", cfg.dataset.seed);
  ds.read("noise_std", cfg.dataset.noise_std);
  ds.read("radial_std", cfg.dataset.radial_std);
  ds.read("angular_std", cfg.dataset.angular_std);
  ds.read("rate", cfg.dataset.rate);
  std::string twist = "exponential";
  ds.read("twist", twist);
  if (twist == "exponential") {
    cfg.dataset.twist = PinwheelTwist::Exponential;
  } else if (twist == "linear") {
    cfg.dataset.twist = PinwheelTwist::Linear;
  } else {
    throw ConfigError("'dataset.twist' must be \"exponential\" or \"linear\"");
  }
  ds.read("sigma", cfg.dataset.sigma);
  ds.read("radius_factor", cfg.dataset.radius_factor);
  ds.read("groups", cfg.dataset.groups);
  std::string path;
  ds.read("path", path);
  cfg.dataset.path = path;
  cfg.dataset.label_column = ds.read_string("label_column");
  ds.finish();

  Section dis(top.table("dissimilarity"), "dissimilarity");
  std::string kind = "euclidean";
  dis.read("kind", kind);
  std::vector<double> period;
  dis.read_array("period", period);
  dis.finish();
  std::optional<Vector> period_vec;
  if (!period.empty()) {
    period_vec = Eigen::Map<const Vector>(period.data(), static_cast<Eigen::Index>(period.size()));
  }
  try {
    cfg.kind = DissimilarityKind::from_name(kind, period_vec);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("'dissimilarity.kind': ") + e.what());
  }

  Section dmm(top.table("dmm"), "dmm");
  dmm.read("alpha", cfg.alpha);
  dmm.read("lr", cfg.lr);
  dmm.read("epochs", cfg.epochs);
  dmm.read("batch_size", cfg.batch_size);
  std::string optimizer = "adam";
  dmm.read("optimizer", optimizer);
  if (optimizer == "adam") {
    cfg.optimizer = OptimizerKind::Adam;
  } else if (optimizer == "sgd") {
    cfg.optimizer = OptimizerKind::Sgd;
  } else {
    throw ConfigError("'dmm.optimizer' must be \"adam\" or \"sgd\"");
  }
  dmm.read("stop_gradient", cfg.stop_gradient);
  std::string scale = "alpha";
  dmm.read("loss_scale", scale);
  cfg.loss_scale = parse_scale(scale, "dmm.loss_scale");
  dmm.read("unit_det_metric", cfg.unit_det_metric);
  dmm.finish();

  Section km(top.table("kmeans"), "kmeans");
  km.read("n_init", cfg.kmeans_n_init);
  km.read("max_iter", cfg.kmeans_max_iter);
  km.read("tol", cfg.kmeans_tol);
  km.finish();

  Section ae(top.table("autoencoder"), "autoencoder");
  ae.read_array("encoder", cfg.encoder_dims);
  ae.read_array("decoder", cfg.decoder_dims);
  ae.read("pretrain_epochs", cfg.pretrain_epochs);
  ae.read("pretrain_lr", cfg.pretrain_lr);
  ae.finish();

  Section deep(top.table("dmae"), "dmae");
  deep.read("epochs", cfg.train_epochs);
  deep.read("lr", cfg.train_lr);
  deep.read("lambda_r", cfg.lambda_r);
  deep.read("lambda_c", cfg.lambda_c);
  std::string deep_scale = "unit";
  deep.read("loss_scale", deep_scale);
  cfg.deep_loss_scale = parse_scale(deep_scale, "dmae.loss_scale");
  std::string decoder_input = "theta_tilde";
  deep.read("decoder_input", decoder_input);
  if (decoder_input == "theta_tilde") {
    cfg.decoder_input = DecoderInput::ThetaTilde;
  } else if (decoder_input == "latent") {
    cfg.decoder_input = DecoderInput::Latent;
  } else {
    throw ConfigError("'dmae.decoder_input' must be \"theta_tilde\" or \"latent\"");
  }
  deep.read("init_epochs", cfg.init_epochs);
  deep.finish();

  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  json j;
  j["name"] = cfg.name;
  j["mode"] = mode_name(cfg.mode);
  j["clusters"] = cfg.clusters;
  j["n_trials"] = cfg.n_trials;
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < cfg.n_trials; ++t) seeds.push_back(cfg.trial_seed(t));
  j["seeds"] = seeds;
  j["dataset"] = {{"name", cfg.dataset.name},
                  {"n", cfg.dataset.n},
                  {"seed", cfg.dataset.seed},
                  {"noise_std", cfg.dataset.noise_std},
                  {"radial_std", cfg.dataset.radial_std},
                  {"angular_std", cfg.dataset.angular_std},
                  {"rate", cfg.dataset.rate},
                  {"twist", cfg.dataset.twist == PinwheelTwist::Exponential ? "exponential" : "linear"},
                  {"sigma", cfg.dataset.sigma},
                  {"radius_factor", cfg.dataset.radius_factor},
                  {"groups", cfg.dataset.groups}};
  if (!cfg.dataset.synthetic()) {
    j["dataset"]["path"] = cfg.dataset.path.string();
    if (cfg.dataset.label_column) j["dataset"]["label_column"] = *cfg.dataset.label_column;
  }
  j["dissimilarity"] = {{"kind", cfg.kind.name()}};
  if (cfg.kind.tag() == DissimilarityTag::PeriodicEuclidean) {
    const Vector& p = cfg.kind.period();
    j["dissimilarity"]["period"] = std::vector<double>(p.data(), p.data() + p.size());
  }
  j["dmm"] = {{"alpha", cfg.alpha},
              {"lr", cfg.lr},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"optimizer", cfg.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
              {"stop_gradient", cfg.stop_gradient},
              {"loss_scale", cfg.loss_scale == LossScale::Alpha ? "alpha" : "unit"},
              {"unit_det_metric", cfg.unit_det_metric}};
  j["kmeans"] = {{"n_init", cfg.kmeans_n_init},
                 {"max_iter", cfg.kmeans_max_iter},
                 {"tol", cfg.kmeans_tol}};
  if (cfg.deep()) {
    j["autoencoder"] = {{"encoder", cfg.encoder_dims},
                        {"decoder", cfg.decoder_dims},
                        {"pretrain_epochs", cfg.pretrain_epochs},
                        {"pretrain_lr", cfg.pretrain_lr}};
    j["dmae"] = {
        {"epochs", cfg.train_epochs},
        {"lr", cfg.train_lr},
        {"lambda_r", cfg.lambda_r},
        {"lambda_c", cfg.lambda_c},
        {"loss_scale", cfg.deep_loss_scale == LossScale::Alpha ? "alpha" : "unit"},
        {"decoder_input", cfg.decoder_input == DecoderInput::ThetaTilde ? "theta_tilde" : "latent"},
        {"init_epochs", cfg.init_epochs}};
  }
  return j;
}

}  // namespace dmae
