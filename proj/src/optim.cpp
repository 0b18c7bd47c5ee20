#include "dmae/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace dmae {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, AdamSettings adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
}

void Optimizer::step(const std::vector<ParamSlot>& slots) {
  for (const auto& slot : slots) {
    require_dims(slot.value.size() == slot.grad.size(),
                 "optimizer: gradient size differs for '" + slot.name + "'");
    for (std::size_t j = 0; j < slot.grad.size(); ++j) {
      if (!std::isfinite(slot.grad[j])) {
        std::ostringstream msg;
        msg << "non-finite gradient in '" << slot.name << "' at index " << j << " after "
            << steps_ << " steps";
        throw NonFiniteGradient(msg.str());
      }
    }
  }

  if (kind_ == OptimizerKind::Adam) {
    if (first_.empty()) {
      for (const auto& slot : slots) {
        first_.emplace_back(slot.value.size(), 0.0);
        second_.emplace_back(slot.value.size(), 0.0);
      }
    }
    require_dims(first_.size() == slots.size(), "optimizer: slot count changed between steps");
    for (std::size_t s = 0; s < slots.size(); ++s) {
      require_dims(first_[s].size() == slots[s].value.size(),
                   "optimizer: slot '" + slots[s].name + "' changed size");
    }
  }

  ++steps_;
  if (kind_ == OptimizerKind::Sgd) {
    for (const auto& slot : slots) {
      for (std::size_t j = 0; j < slot.value.size(); ++j) slot.value[j] -= lr_ * slot.grad[j];
    }
    return;
  }

  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(adam_.beta1, t);
  const double c2 = 1.0 - std::pow(adam_.beta2, t);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& m = first_[s];
    auto& v = second_[s];
    const auto& slot = slots[s];
    for (std::size_t j = 0; j < slot.value.size(); ++j) {
      const double g = slot.grad[j];
      m[j] = adam_.beta1 * m[j] + (1.0 - adam_.beta1) * g;
      v[j] = adam_.beta2 * v[j] + (1.0 - adam_.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      slot.value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + adam_.eps);
    }
  }
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("minibatches: batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

GradCheckReport grad_check(const std::function<double(std::span<const double>)>& loss,
                           std::span<const double> params, std::span<const double> analytic,
                           double epsilon) {
  require_dims(params.size() == analytic.size(), "grad_check: gradient size differs");
  GradCheckReport report;
  report.numeric.resize(params.size());
  std::vector<double> probe(params.begin(), params.end());
  double diff_sq = 0.0;
  double norm_sq = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + epsilon;
    const double up = loss(probe);
    probe[j] = saved - epsilon;
    const double down = loss(probe);
    probe[j] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    report.numeric[j] = numeric;
    const double err = std::abs(analytic[j] - numeric);
    if (err > report.max_abs_error) {
      report.max_abs_error = err;
      report.worst_coordinate = j;
    }
    diff_sq += err * err;
    norm_sq += analytic[j] * analytic[j];
  }
  report.rel_error = std::sqrt(diff_sq) / (std::sqrt(norm_sq) + 1e-12);
  return report;
}

}  // namespace dmae
