#pragma once

#include "dmae/common.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace dmae {

enum class DissimilarityTag {
  Euclidean,
  SquaredEuclidean,
  Manhattan,
  NegDotProduct,
  ItakuraSaito,
  KullbackLeibler,
  Mahalanobis,
  PeriodicEuclidean,
};

/// A dissimilarity d(x, theta), convex in the cluster descriptor.
///
/// PeriodicEuclidean carries a period per dimension; a single-entry period
/// vector is broadcast to every dimension.
class DissimilarityKind {
 public:
  DissimilarityKind() = default;
  explicit DissimilarityKind(DissimilarityTag tag);

  static DissimilarityKind periodic(Vector period);

  /// Parses the lowercase config tag ("euclidean", "kl", ...).
  static DissimilarityKind from_name(std::string_view name,
                                     std::optional<Vector> period = std::nullopt);

  DissimilarityTag tag() const { return tag_; }
  std::string name() const;
  const Vector& period() const { return period_; }
  double period_at(Eigen::Index j) const {
    return period_.size() == 1 ? period_[0] : period_[j];
  }

  bool needs_metric() const { return tag_ == DissimilarityTag::Mahalanobis; }
  bool requires_positive() const {
    return tag_ == DissimilarityTag::ItakuraSaito || tag_ == DissimilarityTag::KullbackLeibler;
  }

  bool operator==(const DissimilarityKind& other) const;

 private:
  DissimilarityTag tag_ = DissimilarityTag::Euclidean;
  Vector period_;
};

std::string_view tag_name(DissimilarityTag tag);

namespace dissim {

inline constexpr double kPositiveFloor = 1e-12;

// `metric` is the positive-definite matrix W of the Mahalanobis quadratic
// form and must be non-null exactly when kind.needs_metric().

double eval(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
            const Matrix* metric = nullptr);

Vector grad_theta(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                  const Matrix* metric = nullptr);

Vector grad_x(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
              const Matrix* metric = nullptr);

/// d/dW of sqrt((x-mu)^T W (x-mu)); Mahalanobis only.
Matrix grad_metric(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                   const Matrix& metric);

/// Displacement x - center, wrapped into [-P/2, P/2] for PeriodicEuclidean.
Vector displacement(const DissimilarityKind& kind, const VecRef& x, const VecRef& center);

/// Entry (i, k) is eval(kind, H.row(i), centers.row(k), metrics[k]).
/// `metrics` must hold one matrix per center for Mahalanobis and may be
/// empty otherwise.
Matrix pairwise(const DissimilarityKind& kind, const Matrix& H, const Matrix& centers,
                const std::vector<Matrix>& metrics = {});

/// Throws DomainError unless every entry is strictly positive (KL/IS only).
void check_domain(const DissimilarityKind& kind, const Matrix& values, std::string_view what);

}  // namespace dissim
}  // namespace dmae
