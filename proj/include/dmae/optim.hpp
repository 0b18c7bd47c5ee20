#pragma once

#include "dmae/common.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dmae {

enum class OptimizerKind { Sgd, Adam };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One trainable tensor viewed as a flat buffer, paired with its gradient.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
  std::string name;
};

template <typename Derived>
std::span<double> flat(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> flat(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

/// First-order optimizer with per-slot moment buffers. Slots must be passed
/// in the same order and with the same sizes on every call.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, AdamSettings adam = {});

  /// Applies one update. Throws NonFiniteGradient before touching any
  /// parameter if a gradient entry is NaN or infinite.
  void step(const std::vector<ParamSlot>& slots);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  double lr_;
  AdamSettings adam_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Shuffled index batches covering [0, n) exactly once; the last batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed);

struct GradCheckReport {
  /// ||analytic - numeric|| / (||analytic|| + 1e-12).
  double rel_error = 0.0;
  /// Largest per-coordinate |analytic - numeric|.
  double max_abs_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::vector<double> numeric;
};

/// Central differences (f(p + eps e_j) - f(p - eps e_j)) / 2 eps against an
/// analytic gradient.
GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss,
                           std::span<const double> params, std::span<const double> analytic,
                           double epsilon = 1e-5);

}  // namespace dmae
