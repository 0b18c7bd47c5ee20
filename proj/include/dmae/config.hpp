#pragma once

#include "dmae/common.hpp"
#include "dmae/data.hpp"
#include "dmae/deepnet.hpp"
#include "dmae/dissim.hpp"
#include "dmae/dmm.hpp"
#include "dmae/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dmae {

enum class Mode { Dmm, AeDmm, Dmae };

std::string_view mode_name(Mode mode);

struct DatasetSpec {
  /// pinwheel | toroidal | moons | circles | csv
  std::string name = "moons";
  /// Total number of samples for the generators.
  int n = 1000;
  std::uint64_t seed = 0;
  double noise_std = 0.1;
  double radial_std = 0.3;
  double angular_std = 0.05;
  double rate = 0.25;
  PinwheelTwist twist = PinwheelTwist::Exponential;
  double sigma = 0.05;
  double radius_factor = 0.1;
  /// Arms (pinwheel) or blobs (toroidal).
  int groups = 0;
  std::filesystem::path path;
  std::optional<std::string> label_column;

  bool synthetic() const { return name != "csv"; }
};

LabeledDataset make_dataset(const DatasetSpec& spec);

/// Every tunable of one experiment. Defaults follow the synthetic setting:
/// batch 32, Adam, K-means with 10 restarts.
struct ExperimentConfig {
  std::string name = "experiment";
  Mode mode = Mode::Dmm;
  DatasetSpec dataset;
  int clusters = 2;
  int n_trials = 10;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;

  DissimilarityKind kind;

  // Shallow DMM (dmm mode, the clustering phase of ae_dmm, latent init for dmae).
  double alpha = 1.0;
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool stop_gradient = false;
  LossScale loss_scale = LossScale::Alpha;
  bool unit_det_metric = true;

  int kmeans_n_init = 10;
  int kmeans_max_iter = 300;
  double kmeans_tol = 1e-6;

  std::vector<int> encoder_dims;
  std::vector<int> decoder_dims;
  int pretrain_epochs = 100;
  double pretrain_lr = 1e-3;

  int train_epochs = 100;
  double train_lr = 1e-4;
  double lambda_r = 1.0;
  double lambda_c = 1.0;
  LossScale deep_loss_scale = LossScale::Unit;
  DecoderInput decoder_input = DecoderInput::ThetaTilde;
  /// Shallow DMM epochs on the latent codes after K-means (non-Euclidean kinds).
  int init_epochs = 0;

  /// Seed of trial t: seeds[t] when given, else seed + t.
  std::uint64_t trial_seed(int t) const;
  bool deep() const { return mode != Mode::Dmm; }

  /// Hard errors (ConfigError); returns soft warnings for values outside the
  /// explored bands.
  std::vector<std::string> validate() const;
};

/// Parses TOML text. Unknown keys and wrong types raise ConfigError naming
/// the offending key.
ExperimentConfig parse_config(std::string_view toml_text, std::string_view source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace dmae
