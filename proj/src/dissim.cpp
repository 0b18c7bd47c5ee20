#include "dmae/dissim.hpp"

#include <cmath>
#include <sstream>

namespace dmae {

namespace {

struct TagName {
  DissimilarityTag tag;
  std::string_view name;
};

constexpr TagName kTagNames[] = {
    {DissimilarityTag::Euclidean, "euclidean"},
    {DissimilarityTag::SquaredEuclidean, "sq_euclidean"},
    {DissimilarityTag::Manhattan, "manhattan"},
    {DissimilarityTag::NegDotProduct, "neg_dot"},
    {DissimilarityTag::ItakuraSaito, "itakura_saito"},
    {DissimilarityTag::KullbackLeibler, "kl"},
    {DissimilarityTag::Mahalanobis, "mahalanobis"},
    {DissimilarityTag::PeriodicEuclidean, "periodic_euclidean"},
};

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_shapes(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                  const Matrix* metric) {
  if (x.size() != center.size()) {
    std::ostringstream msg;
    msg << "dissimilarity: point has " << x.size() << " dims, descriptor has " << center.size();
    throw DimensionMismatch(msg.str());
  }
  if (kind.needs_metric()) {
    if (metric == nullptr) throw DimensionMismatch("mahalanobis: missing metric matrix");
    require_dims(metric->rows() == x.size() && metric->cols() == x.size(),
                 "mahalanobis: metric must be m x m");
  }
  if (kind.tag() == DissimilarityTag::PeriodicEuclidean) {
    require_dims(kind.period().size() == 1 || kind.period().size() == x.size(),
                 "periodic_euclidean: period length must be 1 or match dimension");
  }
  if (kind.requires_positive()) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!(x[j] > 0.0) || !(center[j] > 0.0)) {
        std::ostringstream msg;
        msg << kind.name() << ": inputs must be strictly positive (coordinate " << j
            << ": x=" << x[j] << ", theta=" << center[j] << ")";
        throw DomainError(msg.str());
      }
    }
  }
}

double floored(double v) { return std::max(v, dissim::kPositiveFloor); }

}  // namespace

std::string_view tag_name(DissimilarityTag tag) {
  for (const auto& entry : kTagNames) {
    if (entry.tag == tag) return entry.name;
  }
  return "unknown";
}

DissimilarityKind::DissimilarityKind(DissimilarityTag tag) : tag_(tag) {
  if (tag == DissimilarityTag::PeriodicEuclidean) period_ = Vector::Ones(1);
}

DissimilarityKind DissimilarityKind::periodic(Vector period) {
  if (period.size() == 0) throw ConfigError("periodic_euclidean: empty period");
  for (Eigen::Index j = 0; j < period.size(); ++j) {
    if (!(period[j] > 0.0)) throw ConfigError("periodic_euclidean: period must be positive");
  }
  DissimilarityKind kind(DissimilarityTag::PeriodicEuclidean);
  kind.period_ = std::move(period);
  return kind;
}

DissimilarityKind DissimilarityKind::from_name(std::string_view name,
                                               std::optional<Vector> period) {
  for (const auto& entry : kTagNames) {
    if (entry.name != name) continue;
    if (entry.tag == DissimilarityTag::PeriodicEuclidean) {
      return periodic(period ? *period : Vector::Ones(1));
    }
    return DissimilarityKind(entry.tag);
  }
  throw ConfigError("unknown dissimilarity '" + std::string(name) + "'");
}

std::string DissimilarityKind::name() const { return std::string(tag_name(tag_)); }

bool DissimilarityKind::operator==(const DissimilarityKind& other) const {
  if (tag_ != other.tag_) return false;
  if (period_.size() != other.period_.size()) return false;
  return period_ == other.period_;
}

namespace dissim {

Vector displacement(const DissimilarityKind& kind, const VecRef& x, const VecRef& center) {
  Vector diff = x - center;
  if (kind.tag() == DissimilarityTag::PeriodicEuclidean) {
    for (Eigen::Index j = 0; j < diff.size(); ++j) {
      const double p = kind.period_at(j);
      diff[j] -= p * std::nearbyint(diff[j] / p);
    }
  }
  return diff;
}

double eval(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
            const Matrix* metric) {
  check_shapes(kind, x, center, metric);
  switch (kind.tag()) {
    case DissimilarityTag::Euclidean:
      return (x - center).norm();
    case DissimilarityTag::SquaredEuclidean:
      return (x - center).squaredNorm();
    case DissimilarityTag::Manhattan:
      return (x - center).cwiseAbs().sum();
    case DissimilarityTag::NegDotProduct:
      return -x.dot(center);
    case DissimilarityTag::ItakuraSaito: {
      double total = 0.0;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double ratio = floored(x[j]) / floored(center[j]);
        total += ratio - std::log(ratio) - 1.0;
      }
      return total;
    }
    case DissimilarityTag::KullbackLeibler: {
      double total = 0.0;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double xj = floored(x[j]);
        total += xj * std::log(xj / floored(center[j]));
      }
      return total;
    }
    case DissimilarityTag::Mahalanobis: {
      const Vector diff = x - center;
      const double q = diff.dot(*metric * diff);
      return std::sqrt(std::max(q, 0.0));
    }
    case DissimilarityTag::PeriodicEuclidean:
      return displacement(kind, x, center).norm();
  }
  return 0.0;
}

// Gradients are written w.r.t. the displacement r = x - center where the
// function only depends on r; grad_theta is then -grad_x.
namespace {

Vector grad_displacement(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                         const Matrix* metric) {
  switch (kind.tag()) {
    case DissimilarityTag::Euclidean:
    case DissimilarityTag::PeriodicEuclidean: {
      const Vector r = displacement(kind, x, center);
      const double n = r.norm();
      if (n == 0.0) return Vector::Zero(r.size());
      return r / n;
    }
    case DissimilarityTag::SquaredEuclidean:
      return 2.0 * (x - center);
    case DissimilarityTag::Manhattan:
      return (x - center).unaryExpr(&sign0);
    case DissimilarityTag::Mahalanobis: {
      const Vector r = x - center;
      const Vector wr = *metric * r;
      const double q = r.dot(wr);
      if (!(q > 0.0)) return Vector::Zero(r.size());
      return wr / std::sqrt(q);
    }
    default:
      break;
  }
  throw Error("grad_displacement: not a displacement-based dissimilarity");
}

bool displacement_based(DissimilarityTag tag) {
  return tag == DissimilarityTag::Euclidean || tag == DissimilarityTag::SquaredEuclidean ||
         tag == DissimilarityTag::Manhattan || tag == DissimilarityTag::Mahalanobis ||
         tag == DissimilarityTag::PeriodicEuclidean;
}

}  // namespace

Vector grad_theta(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                  const Matrix* metric) {
  check_shapes(kind, x, center, metric);
  if (displacement_based(kind.tag())) return -grad_displacement(kind, x, center, metric);
  Vector g(x.size());
  switch (kind.tag()) {
    case DissimilarityTag::NegDotProduct:
      return -x;
    case DissimilarityTag::ItakuraSaito:
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double y = floored(center[j]);
        g[j] = -floored(x[j]) / (y * y) + 1.0 / y;
      }
      return g;
    case DissimilarityTag::KullbackLeibler:
      for (Eigen::Index j = 0; j < x.size(); ++j) g[j] = -floored(x[j]) / floored(center[j]);
      return g;
    default:
      break;
  }
  return g;
}

Vector grad_x(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
              const Matrix* metric) {
  check_shapes(kind, x, center, metric);
  if (displacement_based(kind.tag())) return grad_displacement(kind, x, center, metric);
  Vector g(x.size());
  switch (kind.tag()) {
    case DissimilarityTag::NegDotProduct:
      return -center;
    case DissimilarityTag::ItakuraSaito:
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        g[j] = 1.0 / floored(center[j]) - 1.0 / floored(x[j]);
      }
      return g;
    case DissimilarityTag::KullbackLeibler:
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double xj = floored(x[j]);
        g[j] = std::log(xj / floored(center[j])) + 1.0;
      }
      return g;
    default:
      break;
  }
  return g;
}

Matrix grad_metric(const DissimilarityKind& kind, const VecRef& x, const VecRef& center,
                   const Matrix& metric) {
  if (!kind.needs_metric()) throw Error("grad_metric: only defined for mahalanobis");
  check_shapes(kind, x, center, &metric);
  const Vector r = x - center;
  const double q = r.dot(metric * r);
  if (!(q > 0.0)) return Matrix::Zero(r.size(), r.size());
  return (r * r.transpose()) / (2.0 * std::sqrt(q));
}

Matrix pairwise(const DissimilarityKind& kind, const Matrix& H, const Matrix& centers,
                const std::vector<Matrix>& metrics) {
  require_dims(H.cols() == centers.cols(), "pairwise: point and descriptor widths differ");
  if (kind.needs_metric()) {
    require_dims(static_cast<Eigen::Index>(metrics.size()) == centers.rows(),
                 "pairwise: one metric per cluster required");
  }
  Matrix D(H.rows(), centers.rows());
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
      const Matrix* metric = kind.needs_metric() ? &metrics[k] : nullptr;
      D(i, k) = eval(kind, H.row(i).transpose(), centers.row(k).transpose(), metric);
    }
  }
  return D;
}

void check_domain(const DissimilarityKind& kind, const Matrix& values, std::string_view what) {
  if (!kind.requires_positive()) return;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (!(values(i, j) > 0.0)) {
        std::ostringstream msg;
        msg << kind.name() << ": " << what << " entry (" << i << ", " << j
            << ") is not strictly positive";
        throw DomainError(msg.str());
      }
    }
  }
}

}  // namespace dissim
}  // namespace dmae
