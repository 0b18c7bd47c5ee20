#include "dmae/pipeline.hpp"

#include "dmae/baseline.hpp"
#include "dmae/checkpoint.hpp"
#include "dmae/metrics.hpp"
#include "dmae/optim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace dmae {

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

Matrix gather_rows(const Matrix& X, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

void check_finite_loss(double loss, const char* what, int epoch) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << what << " became non-finite in epoch " << epoch;
    throw NonFiniteGradient(msg.str());
  }
}

void add_mlp_slots(std::vector<ParamSlot>& slots, MlpParams& mlp, const MlpGradients& g,
                   const std::string& prefix) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    slots.push_back({flat(mlp.layers[l].weight), flat(g.weight[l]),
                     prefix + ".weight" + std::to_string(l)});
    slots.push_back({flat(mlp.layers[l].bias), flat(g.bias[l]),
                     prefix + ".bias" + std::to_string(l)});
  }
}

void add_dmm_slots(std::vector<ParamSlot>& slots, DmmParams& params, const DmmGradients& g) {
  slots.push_back({flat(params.theta), flat(g.theta), "theta"});
  slots.push_back({flat(params.phi), flat(g.phi), "phi"});
  for (std::size_t k = 0; k < params.cov.size(); ++k) {
    slots.push_back({flat(params.cov[k]), flat(g.cov[k]), "cov" + std::to_string(k)});
  }
}

double clustering_loss_value(const DmmParams& params, const Matrix& H, const ExperimentConfig& cfg,
                             LossScale scale) {
  return clustering_loss(params, H, {scale, cfg.stop_gradient}).loss;
}

void score(TrialResult& result, const LabeledDataset& data, const Labels& predicted) {
  result.acc = acc(data.y, predicted);
  result.nmi = nmi(data.y, predicted);
}

void score_init(TrialResult& result, const LabeledDataset& data, const Labels& predicted) {
  result.init_acc = acc(data.y, predicted);
  result.init_nmi = nmi(data.y, predicted);
}

KMeansResult kmeans_for(const ExperimentConfig& cfg, const Matrix& H, std::uint64_t seed) {
  KMeansOptions opts;
  opts.clusters = cfg.clusters;
  opts.max_iter = cfg.kmeans_max_iter;
  opts.tol = cfg.kmeans_tol;
  opts.n_init = cfg.kmeans_n_init;
  opts.seed = derive(seed, kKMeans);
  return kmeans(H, opts);
}

template <typename Body>
TrialResult guarded_trial(std::uint64_t seed, Body&& body) {
  TrialResult result;
  result.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(result);
    result.completed = true;
  } catch (const NonFiniteGradient& e) {
    result.completed = false;
    result.error = e.what();
  } catch (const DomainError& e) {
    result.completed = false;
    result.error = e.what();
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

Matrix TrainedModel::embed(const Matrix& X) const {
  return encoder ? forward(*encoder, X) : X;
}

Matrix TrainedModel::responsibilities(const Matrix& X) const { return encode(dmm, embed(X)); }

Labels TrainedModel::predict(const Matrix& X) const { return dmae::predict(dmm, embed(X)); }

Aggregate TrialReport::aggregate() const {
  Aggregate agg;
  double sum_acc = 0.0;
  double sum_nmi = 0.0;
  for (const auto& t : trials) {
    if (!t.completed) {
      ++agg.failed;
      continue;
    }
    ++agg.completed;
    sum_acc += t.acc;
    sum_nmi += t.nmi;
  }
  if (agg.completed == 0) return agg;
  const double n = agg.completed;
  agg.mean_acc = sum_acc / n;
  agg.mean_nmi = sum_nmi / n;
  double var_acc = 0.0;
  double var_nmi = 0.0;
  for (const auto& t : trials) {
    if (!t.completed) continue;
    var_acc += (t.acc - agg.mean_acc) * (t.acc - agg.mean_acc);
    var_nmi += (t.nmi - agg.mean_nmi) * (t.nmi - agg.mean_nmi);
  }
  agg.std_acc = std::sqrt(var_acc / n);
  agg.std_nmi = std::sqrt(var_nmi / n);
  return agg;
}

Autoencoder pretrain_autoencoder(const ExperimentConfig& cfg, const Matrix& X,
                                 std::uint64_t seed) {
  Autoencoder ae;
  std::mt19937_64 enc_rng(derive(seed, kEncoderInit));
  std::mt19937_64 dec_rng(derive(seed, kDecoderInit));
  ae.encoder = make_mlp(cfg.encoder_dims, enc_rng);
  ae.decoder = make_mlp(cfg.decoder_dims, dec_rng);
  require_dims(X.cols() == ae.encoder.in_dim(), "autoencoder: input width does not match encoder");

  Optimizer opt(cfg.optimizer, cfg.pretrain_lr);
  MlpCache enc_cache;
  MlpCache dec_cache;
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = minibatches(static_cast<std::size_t>(X.rows()),
                                     static_cast<std::size_t>(cfg.batch_size),
                                     derive(derive(seed, kPretrainBatches), epoch));
    for (const auto& batch : batches) {
      const Matrix xb = gather_rows(X, batch);
      const Matrix h = forward(ae.encoder, xb, &enc_cache);
      const Matrix xt = forward(ae.decoder, h, &dec_cache);
      const double loss = reconstruction_loss(xb, xt);
      check_finite_loss(loss, "reconstruction loss", epoch);
      epoch_loss += loss;
      Matrix g_h;
      const MlpGradients g_dec = backward(ae.decoder, dec_cache, 2.0 * (xt - xb), &g_h);
      const MlpGradients g_enc = backward(ae.encoder, enc_cache, g_h);
      std::vector<ParamSlot> slots;
      add_mlp_slots(slots, ae.encoder, g_enc, "encoder");
      add_mlp_slots(slots, ae.decoder, g_dec, "decoder");
      opt.step(slots);
    }
    ae.epoch_losses.push_back(epoch_loss);
  }
  ae.reconstruction_loss = reconstruction_loss(X, forward(ae.decoder, forward(ae.encoder, X)));
  return ae;
}

DmmTraining train_dmm(DmmParams& params, const Matrix& H, const ExperimentConfig& cfg,
                      int epochs, std::uint64_t seed) {
  DmmTraining out;
  const LossOptions lopts{cfg.loss_scale, cfg.stop_gradient};
  const ProjectionOptions popts{cfg.unit_det_metric};
  Optimizer opt(cfg.optimizer, cfg.lr);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0;
    const auto batches = minibatches(static_cast<std::size_t>(H.rows()),
                                     static_cast<std::size_t>(cfg.batch_size),
                                     derive(derive(seed, kShallowBatches), epoch));
    for (const auto& batch : batches) {
      const Matrix hb = gather_rows(H, batch);
      const ClusteringState st = clustering_loss(params, hb, lopts);
      check_finite_loss(st.loss, "clustering loss", epoch);
      epoch_loss += st.loss;
      const DmmGradients g = clustering_loss_backward(params, st);
      std::vector<ParamSlot> slots;
      add_dmm_slots(slots, params, g);
      opt.step(slots);
      project(params, popts);
    }
    out.epoch_losses.push_back(epoch_loss);
  }
  out.final_loss = clustering_loss_value(params, H, cfg, cfg.loss_scale);
  return out;
}

TrialResult dmm_trial(const ExperimentConfig& cfg, const LabeledDataset& data,
                      std::uint64_t seed) {
  return guarded_trial(seed, [&](TrialResult& result) {
    const KMeansResult km = kmeans_for(cfg, data.x, seed);
    DmmParams params = init_dmm_from_kmeans(km.centroids, cfg.kind, cfg.alpha);
    score_init(result, data, predict(params, data.x));
    const DmmTraining tr = train_dmm(params, data.x, cfg, cfg.epochs, seed);
    result.clustering_loss = tr.final_loss;
    TrainedModel model{std::nullopt, std::nullopt, std::move(params)};
    score(result, data, model.predict(data.x));
    result.model = std::move(model);
  });
}

TrialResult ae_dmm_trial(const ExperimentConfig& cfg, const LabeledDataset& data,
                         std::uint64_t seed, const Autoencoder* pretrained) {
  return guarded_trial(seed, [&](TrialResult& result) {
    const Autoencoder ae = pretrained ? *pretrained : pretrain_autoencoder(cfg, data.x, seed);
    const Matrix H = forward(ae.encoder, data.x);
    const KMeansResult km = kmeans_for(cfg, H, seed);
    DmmParams params = init_dmm_from_kmeans(km.centroids, cfg.kind, cfg.alpha);
    score_init(result, data, predict(params, H));
    const DmmTraining tr = train_dmm(params, H, cfg, cfg.epochs, seed);
    result.clustering_loss = tr.final_loss;
    result.reconstruction_loss = ae.reconstruction_loss;
    TrainedModel model{ae.encoder, ae.decoder, std::move(params)};
    score(result, data, model.predict(data.x));
    result.model = std::move(model);
  });
}

TrialResult dmae_trial(const ExperimentConfig& cfg, const LabeledDataset& data,
                       std::uint64_t seed, const Autoencoder* pretrained) {
  return guarded_trial(seed, [&](TrialResult& result) {
    Autoencoder ae = pretrained ? *pretrained : pretrain_autoencoder(cfg, data.x, seed);
    const Matrix H = forward(ae.encoder, data.x);
    const KMeansResult km = kmeans_for(cfg, H, seed);
    DmmParams params = init_dmm_from_kmeans(km.centroids, cfg.kind, cfg.alpha);
    if (cfg.kind.tag() != DissimilarityTag::Euclidean && cfg.init_epochs > 0) {
      train_dmm(params, H, cfg, cfg.init_epochs, seed);
    }
    score_init(result, data, predict(params, H));

    ComposedOptions copts;
    copts.weights = {cfg.lambda_r, cfg.lambda_c};
    copts.clustering = {cfg.deep_loss_scale, cfg.stop_gradient};
    copts.decoder_input = cfg.decoder_input;
    const ProjectionOptions popts{cfg.unit_det_metric};
    Optimizer opt(cfg.optimizer, cfg.train_lr);
    MlpParams& enc = ae.encoder;
    MlpParams& dec = ae.decoder;
    for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
      const auto batches = minibatches(static_cast<std::size_t>(data.x.rows()),
                                       static_cast<std::size_t>(cfg.batch_size),
                                       derive(derive(seed, kJointBatches), epoch));
      for (const auto& batch : batches) {
        const Matrix xb = gather_rows(data.x, batch);
        const ComposedState st = composed_loss(enc, params, dec, xb, copts);
        check_finite_loss(st.loss, "composed loss", epoch);
        const ComposedGradients g = composed_backward(enc, params, dec, st);
        std::vector<ParamSlot> slots;
        add_mlp_slots(slots, enc, g.encoder, "encoder");
        add_mlp_slots(slots, dec, g.decoder, "decoder");
        add_dmm_slots(slots, params, g.dmm);
        opt.step(slots);
        project(params, popts);
      }
    }
    const ComposedState final_state = composed_loss(enc, params, dec, data.x, copts);
    result.clustering_loss = final_state.clustering;
    result.reconstruction_loss = final_state.reconstruction;
    TrainedModel model{std::move(enc), std::move(dec), std::move(params)};
    score(result, data, model.predict(data.x));
    result.model = std::move(model);
  });
}

namespace {

template <typename TrialFn>
TrialReport run_trials(const ExperimentConfig& cfg, const LabeledDataset& data, Mode mode,
                       const RunOptions& options, TrialFn&& trial) {
  TrialReport report;
  report.name = cfg.name;
  report.mode = mode;
  report.dataset = data.name;
  report.trials.resize(static_cast<std::size_t>(cfg.n_trials));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < cfg.n_trials; t = next++) {
      TrialResult r = trial(cfg.trial_seed(t));
      r.index = t;
      if (options.out_dir && r.model) {
        char dir[32];
        std::snprintf(dir, sizeof dir, "trial_%02d", t);
        const std::filesystem::path base = *options.out_dir / dir;
        save_json(base / "dmm.json", dmm_to_json(r.model->dmm));
        r.checkpoints.push_back(std::string(dir) + "/dmm.json");
        if (r.model->encoder) {
          save_json(base / "encoder.json", mlp_to_json(*r.model->encoder));
          r.checkpoints.push_back(std::string(dir) + "/encoder.json");
        }
        if (r.model->decoder) {
          save_json(base / "decoder.json", mlp_to_json(*r.model->decoder));
          r.checkpoints.push_back(std::string(dir) + "/decoder.json");
        }
      }
      if (!options.keep_models && t != 0) r.model.reset();
      report.trials[static_cast<std::size_t>(t)] = std::move(r);
    }
  };
  const int threads = std::max(1, std::min(options.parallel_trials, cfg.n_trials));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

void require_mode(const ExperimentConfig& cfg, Mode mode) {
  if (cfg.mode != mode) {
    throw ConfigError("config mode is '" + std::string(mode_name(cfg.mode)) + "', expected '" +
                      std::string(mode_name(mode)) + "'");
  }
  cfg.validate();
}

}  // namespace

TrialReport run_dmm(const ExperimentConfig& cfg, const LabeledDataset& data,
                    const RunOptions& options) {
  require_mode(cfg, Mode::Dmm);
  return run_trials(cfg, data, Mode::Dmm, options,
                    [&](std::uint64_t seed) { return dmm_trial(cfg, data, seed); });
}

TrialReport run_ae_dmm(const ExperimentConfig& cfg, const LabeledDataset& data,
                       const RunOptions& options) {
  require_mode(cfg, Mode::AeDmm);
  return run_trials(cfg, data, Mode::AeDmm, options,
                    [&](std::uint64_t seed) { return ae_dmm_trial(cfg, data, seed); });
}

TrialReport run_dmae(const ExperimentConfig& cfg, const LabeledDataset& data,
                     const RunOptions& options) {
  require_mode(cfg, Mode::Dmae);
  return run_trials(cfg, data, Mode::Dmae, options,
                    [&](std::uint64_t seed) { return dmae_trial(cfg, data, seed); });
}

TrialReport run_experiment(const ExperimentConfig& cfg, const LabeledDataset& data,
                           const RunOptions& options) {
  switch (cfg.mode) {
    case Mode::Dmm:
      return run_dmm(cfg, data, options);
    case Mode::AeDmm:
      return run_ae_dmm(cfg, data, options);
    case Mode::Dmae:
      return run_dmae(cfg, data, options);
  }
  return {};
}

GridBounds default_bounds(const Matrix& X, const DissimilarityKind& kind) {
  if (X.cols() != 2) throw NotTwoDimensional("decision grid needs 2-D data");
  if (kind.tag() == DissimilarityTag::PeriodicEuclidean) {
    return {0.0, kind.period_at(0), 0.0, kind.period_at(1)};
  }
  const Eigen::RowVector2d lo = X.colwise().minCoeff();
  const Eigen::RowVector2d hi = X.colwise().maxCoeff();
  const Eigen::RowVector2d pad = 0.05 * (hi - lo);
  return {lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1]};
}

DecisionGrid decision_grid(const TrainedModel& model, const GridBounds& bounds, int resolution) {
  const Eigen::Index in_dim = model.encoder ? model.encoder->in_dim() : model.dmm.dim();
  if (in_dim != 2) throw NotTwoDimensional("decision grid needs a model over 2-D inputs");
  if (resolution < 1) throw ConfigError("grid resolution must be positive");
  DecisionGrid grid;
  grid.resolution = resolution;
  grid.points.resize(static_cast<Eigen::Index>(resolution) * resolution, 2);
  auto at = [resolution](double lo, double hi, int i) {
    return resolution == 1 ? lo : lo + (hi - lo) * i / (resolution - 1);
  };
  Eigen::Index row = 0;
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix, ++row) {
      grid.points(row, 0) = at(bounds.x_min, bounds.x_max, ix);
      grid.points(row, 1) = at(bounds.y_min, bounds.y_max, iy);
    }
  }
  grid.labels = model.predict(grid.points);
  grid.responsibility = max_responsibility(model.responsibilities(grid.points));
  return grid;
}

std::string grid_to_csv(const DecisionGrid& grid) {
  std::ostringstream out;
  out << "x,y,label,responsibility\n";
  char buf[128];
  for (Eigen::Index i = 0; i < grid.points.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g\n", grid.points(i, 0),
                  grid.points(i, 1), grid.labels[static_cast<std::size_t>(i)],
                  grid.responsibility[i]);
    out << buf;
  }
  return out.str();
}

nlohmann::json report_to_json(const TrialReport& report, const ExperimentConfig& cfg) {
  using nlohmann::json;
  json j;
  j["schema"] = 1;
  j["name"] = report.name;
  j["mode"] = mode_name(report.mode);
  j["dataset"] = report.dataset;
  j["dissimilarity"] = cfg.kind.name();
  j["config"] = config_to_json(cfg);
  json trials = json::array();
  for (const auto& t : report.trials) {
    json tj = {{"index", t.index},
               {"seed", t.seed},
               {"status", t.completed ? "completed" : "failed"}};
    if (t.completed) {
      tj["acc"] = t.acc;
      tj["nmi"] = t.nmi;
      tj["init_acc"] = t.init_acc;
      tj["init_nmi"] = t.init_nmi;
      tj["clustering_loss"] = t.clustering_loss;
      tj["reconstruction_loss"] =
          t.reconstruction_loss ? json(*t.reconstruction_loss) : json(nullptr);
    } else {
      tj["error"] = t.error;
    }
    tj["checkpoints"] = t.checkpoints;
    trials.push_back(std::move(tj));
  }
  j["trials"] = trials;
  const Aggregate agg = report.aggregate();
  j["aggregate"] = {{"completed", agg.completed}, {"failed", agg.failed},
                    {"mean_acc", agg.mean_acc},   {"std_acc", agg.std_acc},
                    {"mean_nmi", agg.mean_nmi},   {"std_nmi", agg.std_nmi}};
  return j;
}

nlohmann::json timing_to_json(const TrialReport& report) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : report.trials) {
    j.push_back({{"index", t.index}, {"seed", t.seed}, {"wall_seconds", t.wall_seconds}});
  }
  return j;
}

}  // namespace dmae
