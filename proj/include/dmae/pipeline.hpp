#pragma once

#include "dmae/config.hpp"
#include "dmae/data.hpp"
#include "dmae/deepnet.hpp"
#include "dmae/dmm.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmae {

/// splitmix64 finalizer; gives each phase of a trial its own stream.
std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

enum Stream : std::uint64_t {
  kEncoderInit = 1,
  kDecoderInit = 2,
  kPretrainBatches = 3,
  kKMeans = 4,
  kShallowBatches = 5,
  kJointBatches = 6,
};

/// A fitted clustering model: optional deep encoder in front of a DMM.
struct TrainedModel {
  std::optional<MlpParams> encoder;
  std::optional<MlpParams> decoder;
  DmmParams dmm;

  Matrix embed(const Matrix& X) const;
  Matrix responsibilities(const Matrix& X) const;
  Labels predict(const Matrix& X) const;
};

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  double acc = 0.0;
  double nmi = 0.0;
  /// Metrics of the K-means initialization the trial started from.
  double init_acc = 0.0;
  double init_nmi = 0.0;
  double clustering_loss = 0.0;
  std::optional<double> reconstruction_loss;
  double wall_seconds = 0.0;
  std::vector<std::string> checkpoints;
  std::optional<TrainedModel> model;
};

struct Aggregate {
  int completed = 0;
  int failed = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double mean_nmi = 0.0;
  double std_nmi = 0.0;
};

/// Per-trial results plus mean / population standard deviation over the
/// completed trials.
struct TrialReport {
  std::string name;
  Mode mode = Mode::Dmm;
  std::string dataset;
  std::vector<TrialResult> trials;

  Aggregate aggregate() const;
};

struct RunOptions {
  int parallel_trials = 1;
  /// Checkpoints go to <out_dir>/trial_<i>/ when set.
  std::optional<std::filesystem::path> out_dir;
  bool keep_models = false;
};

/// A pretrained autoencoder, shareable between the ae_dmm and dmae regimes
/// of the same seed.
struct Autoencoder {
  MlpParams encoder;
  MlpParams decoder;
  double reconstruction_loss = 0.0;
  std::vector<double> epoch_losses;
};

/// Minimizes the plain reconstruction loss of decoder(encoder(x)).
Autoencoder pretrain_autoencoder(const ExperimentConfig& config, const Matrix& X,
                                 std::uint64_t seed);

struct DmmTraining {
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

/// Mini-batch descent on the shallow clustering loss with post-step projection.
DmmTraining train_dmm(DmmParams& params, const Matrix& H, const ExperimentConfig& config,
                      int epochs, std::uint64_t seed);

/// One trial of each regime. `pretrained` skips autoencoder pretraining.
TrialResult dmm_trial(const ExperimentConfig& config, const LabeledDataset& data,
                      std::uint64_t seed);
TrialResult ae_dmm_trial(const ExperimentConfig& config, const LabeledDataset& data,
                         std::uint64_t seed, const Autoencoder* pretrained = nullptr);
TrialResult dmae_trial(const ExperimentConfig& config, const LabeledDataset& data,
                       std::uint64_t seed, const Autoencoder* pretrained = nullptr);

TrialReport run_dmm(const ExperimentConfig& config, const LabeledDataset& data,
                    const RunOptions& options = {});
TrialReport run_ae_dmm(const ExperimentConfig& config, const LabeledDataset& data,
                       const RunOptions& options = {});
TrialReport run_dmae(const ExperimentConfig& config, const LabeledDataset& data,
                     const RunOptions& options = {});

/// Dispatches on config.mode.
TrialReport run_experiment(const ExperimentConfig& config, const LabeledDataset& data,
                           const RunOptions& options = {});

struct GridBounds {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
};

/// Data bounding box padded by 5%, or [0, period] per axis for periodic kinds.
GridBounds default_bounds(const Matrix& X, const DissimilarityKind& kind);

struct DecisionGrid {
  int resolution = 0;
  /// resolution^2 lattice points, row-major with x varying fastest.
  Matrix points;
  Labels labels;
  Vector responsibility;
};

/// Predicted labels and max responsibilities over a regular lattice that
/// includes both bounds. Throws NotTwoDimensional for non-2-D inputs.
DecisionGrid decision_grid(const TrainedModel& model, const GridBounds& bounds, int resolution);

std::string grid_to_csv(const DecisionGrid& grid);

/// Deterministic report ({"schema": 1, ...}); wall times are kept out so
/// repeated runs produce identical bytes.
nlohmann::json report_to_json(const TrialReport& report, const ExperimentConfig& config);

/// Wall-clock seconds per trial.
nlohmann::json timing_to_json(const TrialReport& report);

}  // namespace dmae
