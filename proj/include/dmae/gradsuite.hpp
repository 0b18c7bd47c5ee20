#pragma once

#include "dmae/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dmae {

/// One row of the finite-difference gradient suite: the worst relative error
/// over all random instances of one case.
struct GradSuiteRow {
  std::string component;
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_error <= tolerance; }
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  int instances = 20;
  double epsilon = 1e-5;
  /// Corrupts one analytic coordinate so the suite must fail. Testing only.
  bool inject_fault = false;
};

inline constexpr double kShallowGradTolerance = 1e-5;
inline constexpr double kDeepGradTolerance = 1e-4;

/// d(x, theta) against its gradients in theta, x and (Mahalanobis) W.
std::vector<GradSuiteRow> gradcheck_dissim(const GradSuiteOptions& options);
/// The shallow clustering loss against theta, phi, covariance factors and inputs.
std::vector<GradSuiteRow> gradcheck_dmm(const GradSuiteOptions& options);
/// The composed deep loss against every encoder, DMM and decoder parameter.
std::vector<GradSuiteRow> gradcheck_deepnet(const GradSuiteOptions& options);

}  // namespace dmae
