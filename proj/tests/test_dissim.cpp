#include "dmae/dissim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

using namespace dmae;
using dmae::test::mat;
using dmae::test::vec;

namespace {

const std::vector<DissimilarityTag> kTags = {
    DissimilarityTag::Euclidean,    DissimilarityTag::SquaredEuclidean,
    DissimilarityTag::Manhattan,    DissimilarityTag::NegDotProduct,
    DissimilarityTag::ItakuraSaito, DissimilarityTag::KullbackLeibler,
    DissimilarityTag::Mahalanobis,  DissimilarityTag::PeriodicEuclidean,
};

DissimilarityKind make_kind(DissimilarityTag tag) {
  if (tag == DissimilarityTag::PeriodicEuclidean) return DissimilarityKind::periodic(vec({1.0}));
  return DissimilarityKind(tag);
}

// Points valid for the kind: positive for KL/IS, inside [0,1) for periodic.
Vector sample(const DissimilarityKind& kind, Eigen::Index m, std::mt19937_64& rng) {
  if (kind.requires_positive()) return test::randu(m, 1, rng, 0.2, 2.0);
  if (kind.tag() == DissimilarityTag::PeriodicEuclidean) return test::randu(m, 1, rng, 0.0, 1.0);
  return test::randn(m, 1, rng);
}

Matrix random_metric(Eigen::Index m, std::mt19937_64& rng) {
  Matrix L = test::randn(m, m, rng, 0.3).triangularView<Eigen::Lower>();
  L.diagonal() = test::randu(m, 1, rng, 0.5, 1.5);
  return L * L.transpose();
}

Vector central_diff(const std::function<double(const Vector&)>& f, const Vector& at) {
  const double h = 1e-6;
  Vector g(at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Vector up = at;
    Vector down = at;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("dissim") {

TEST_CASE("documented values") {
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  CHECK(dissim::eval(euclid, vec({0, 0}), vec({3, 4})) == doctest::Approx(5.0).epsilon(1e-15));

  const DissimilarityKind kl(DissimilarityTag::KullbackLeibler);
  CHECK(dissim::eval(kl, vec({0.5, 0.5}), vec({0.5, 0.5})) == 0.0);

  const DissimilarityKind is(DissimilarityTag::ItakuraSaito);
  CHECK(std::abs(dissim::eval(is, vec({2}), vec({1})) - (2.0 - std::log(2.0) - 1.0)) < 1e-15);
  CHECK(dissim::eval(is, vec({2}), vec({1})) == doctest::Approx(0.30685).epsilon(1e-5));

  const DissimilarityKind maha(DissimilarityTag::Mahalanobis);
  const Matrix I = Matrix::Identity(2, 2);
  CHECK(dissim::eval(maha, vec({1, 0}), vec({0, 0}), &I) == 1.0);
}

TEST_CASE("documented gradients") {
  const DissimilarityKind sq(DissimilarityTag::SquaredEuclidean);
  CHECK(dissim::grad_theta(sq, vec({1, 1}), vec({0, 0})).isApprox(vec({-2, -2})));
  CHECK(dissim::grad_x(sq, vec({1, 1}), vec({0, 0})).isApprox(vec({2, 2})));

  const DissimilarityKind dot(DissimilarityTag::NegDotProduct);
  const Vector x = vec({0.3, -1.2, 2.0});
  const Vector mu = vec({1.5, 0.25, -0.75});
  CHECK(dissim::grad_theta(dot, x, mu) == -x);
  CHECK(dissim::grad_x(dot, x, mu) == -mu);
  CHECK(dissim::eval(dot, x, mu) == doctest::Approx(-x.dot(mu)));

  const DissimilarityKind kl(DissimilarityTag::KullbackLeibler);
  const Vector g = dissim::grad_theta(kl, vec({0.5, 0.5}), vec({0.25, 0.75}));
  CHECK(g[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  auto f = [&](const Vector& q) { return dissim::eval(kl, vec({0.5, 0.5}), q); };
  CHECK((central_diff(f, vec({0.25, 0.75})) - g).norm() < 1e-7);
}

TEST_CASE("periodic gradient follows the wrapped displacement") {
  const DissimilarityKind per = DissimilarityKind::periodic(vec({1.0}));
  CHECK(dissim::eval(per, vec({0.95}), vec({0.05})) == doctest::Approx(0.1).epsilon(1e-12));
  const Vector gx = dissim::grad_x(per, vec({0.95}), vec({0.05}));
  // Moving x up brings it closer to 0.05 across the boundary.
  CHECK(gx[0] == doctest::Approx(-1.0));
  auto f = [&](const Vector& x) { return dissim::eval(per, x, vec({0.05})); };
  CHECK(std::abs(central_diff(f, vec({0.95}))[0] - gx[0]) < 1e-8);
  CHECK(dissim::grad_theta(per, vec({0.95}), vec({0.05}))[0] == doctest::Approx(1.0));
}

TEST_CASE("kinks use the zero subgradient") {
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  CHECK(dissim::grad_theta(euclid, vec({1, 2}), vec({1, 2})).isZero(0.0));
  CHECK(dissim::grad_x(euclid, vec({1, 2}), vec({1, 2})).isZero(0.0));
  const DissimilarityKind man(DissimilarityTag::Manhattan);
  const Vector g = dissim::grad_theta(man, vec({1, 2}), vec({1, 0}));
  CHECK(g[0] == 0.0);
  CHECK(g[1] == -1.0);
}

TEST_CASE("errors") {
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  CHECK_THROWS_AS(dissim::eval(euclid, vec({1, 2}), vec({1, 2, 3})), DimensionMismatch);
  CHECK_THROWS_AS(dissim::grad_x(euclid, vec({1}), vec({1, 2})), DimensionMismatch);
  const DissimilarityKind kl(DissimilarityTag::KullbackLeibler);
  CHECK_THROWS_AS(dissim::eval(kl, vec({0.5, 0.0}), vec({0.5, 0.5})), DomainError);
  CHECK_THROWS_AS(dissim::eval(kl, vec({0.5, 0.5}), vec({-0.5, 1.5})), DomainError);
  const DissimilarityKind is(DissimilarityTag::ItakuraSaito);
  CHECK_THROWS_AS(dissim::eval(is, vec({-1.0}), vec({1.0})), DomainError);
  CHECK_THROWS_AS(dissim::grad_theta(is, vec({1.0}), vec({0.0})), DomainError);
  const DissimilarityKind maha(DissimilarityTag::Mahalanobis);
  CHECK_THROWS_AS(dissim::eval(maha, vec({1, 0}), vec({0, 0})), DimensionMismatch);
  const Matrix W = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(dissim::eval(maha, vec({1, 0}), vec({0, 0}), &W), DimensionMismatch);
  CHECK_THROWS_AS(dissim::pairwise(euclid, Matrix::Zero(2, 2), Matrix::Zero(3, 3)),
                  DimensionMismatch);
  CHECK_THROWS_AS(DissimilarityKind::from_name("cosine"), ConfigError);
  CHECK_THROWS_AS(DissimilarityKind::periodic(vec({1.0, -1.0})), ConfigError);
}

TEST_CASE("names round-trip") {
  for (const auto tag : kTags) {
    const DissimilarityKind kind = make_kind(tag);
    const auto period = tag == DissimilarityTag::PeriodicEuclidean
                            ? std::optional<Vector>(kind.period())
                            : std::nullopt;
    CHECK(DissimilarityKind::from_name(kind.name(), period) == kind);
  }
  CHECK(DissimilarityKind::from_name("sq_euclidean").tag() == DissimilarityTag::SquaredEuclidean);
  CHECK(DissimilarityKind::from_name("neg_dot").tag() == DissimilarityTag::NegDotProduct);
}

TEST_CASE("pairwise matches per-pair eval bit for bit") {
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  const Matrix one = dissim::pairwise(euclid, mat(1, 2, {1, 2}), mat(1, 2, {4, 6}));
  CHECK(one.rows() == 1);
  CHECK(one.cols() == 1);
  CHECK(one(0, 0) == dissim::eval(euclid, vec({1, 2}), vec({4, 6})));
  const Matrix d = dissim::pairwise(euclid, mat(2, 2, {0, 0, 3, 4}), mat(1, 2, {0, 0}));
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 0) == 5.0);

  std::mt19937_64 rng(11);
  for (const auto tag : kTags) {
    const DissimilarityKind kind = make_kind(tag);
    Matrix H(10, 3);
    Matrix C(10, 3);
    for (Eigen::Index i = 0; i < 10; ++i) {
      H.row(i) = sample(kind, 3, rng).transpose();
      C.row(i) = sample(kind, 3, rng).transpose();
    }
    std::vector<Matrix> metrics;
    if (kind.needs_metric()) {
      for (int k = 0; k < 10; ++k) metrics.push_back(random_metric(3, rng));
    }
    const Matrix D = dissim::pairwise(kind, H, C, metrics);
    int checked = 0;
    for (Eigen::Index i = 0; i < 10; ++i) {
      for (Eigen::Index k = 0; k < 10; ++k) {
        const Matrix* W = kind.needs_metric() ? &metrics[static_cast<std::size_t>(k)] : nullptr;
        checked += D(i, k) == dissim::eval(kind, test::row(H, i), test::row(C, k), W);
      }
    }
    CHECK_MESSAGE(checked == 100, kind.name());
  }
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 rng(5);
  for (const auto tag : kTags) {
    const DissimilarityKind kind = make_kind(tag);
    for (int rep = 0; rep < 20; ++rep) {
      const Vector x = sample(kind, 4, rng);
      Vector c = sample(kind, 4, rng);
      if (tag == DissimilarityTag::PeriodicEuclidean) {
        // Keep every coordinate of the wrapped displacement away from +-P/2.
        c = x + test::randu(4, 1, rng, -0.4, 0.4);
      }
      Matrix W;
      if (kind.needs_metric()) W = random_metric(4, rng);
      const Matrix* metric = kind.needs_metric() ? &W : nullptr;
      auto in_theta = [&](const Vector& t) { return dissim::eval(kind, x, t, metric); };
      auto in_x = [&](const Vector& p) { return dissim::eval(kind, p, c, metric); };
      const Vector gt = dissim::grad_theta(kind, x, c, metric);
      const Vector gx = dissim::grad_x(kind, x, c, metric);
      CHECK_MESSAGE((gt - central_diff(in_theta, c)).norm() / (gt.norm() + 1e-12) <= 1e-5,
                    kind.name());
      CHECK_MESSAGE((gx - central_diff(in_x, x)).norm() / (gx.norm() + 1e-12) <= 1e-5,
                    kind.name());
    }
  }
}

TEST_CASE("metric gradient of the Mahalanobis form") {
  std::mt19937_64 rng(8);
  const DissimilarityKind maha(DissimilarityTag::Mahalanobis);
  const Vector x = test::randn(3, 1, rng);
  const Vector c = test::randn(3, 1, rng);
  const Matrix W = random_metric(3, rng);
  const Matrix G = dissim::grad_metric(maha, x, c, W);
  const double h = 1e-6;
  for (Eigen::Index a = 0; a < 3; ++a) {
    for (Eigen::Index b = 0; b < 3; ++b) {
      Matrix up = W;
      Matrix down = W;
      up(a, b) += h;
      down(a, b) -= h;
      const double num =
          (dissim::eval(maha, x, c, &up) - dissim::eval(maha, x, c, &down)) / (2 * h);
      CHECK(G(a, b) == doctest::Approx(num).epsilon(1e-6));
    }
  }
}

TEST_CASE("non-negativity and identity of indiscernibles") {
  std::mt19937_64 rng(3);
  const std::vector<DissimilarityTag> metric_like = {
      DissimilarityTag::Euclidean,    DissimilarityTag::SquaredEuclidean,
      DissimilarityTag::Manhattan,    DissimilarityTag::KullbackLeibler,
      DissimilarityTag::ItakuraSaito, DissimilarityTag::PeriodicEuclidean,
  };
  for (const auto tag : metric_like) {
    const DissimilarityKind kind = make_kind(tag);
    for (int rep = 0; rep < 50; ++rep) {
      Vector x = sample(kind, 3, rng);
      Vector c = sample(kind, 3, rng);
      if (tag == DissimilarityTag::KullbackLeibler) {
        x /= x.sum();
        c /= c.sum();
      }
      CHECK(dissim::eval(kind, x, c) >= 0.0);
      CHECK(std::abs(dissim::eval(kind, x, x)) <= 1e-15);
    }
  }
}

TEST_CASE("Mahalanobis with identity metric equals Euclidean") {
  std::mt19937_64 rng(4);
  const DissimilarityKind maha(DissimilarityTag::Mahalanobis);
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  const Matrix I = Matrix::Identity(5, 5);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector x = test::randn(5, 1, rng, 3.0);
    const Vector c = test::randn(5, 1, rng, 3.0);
    CHECK(dissim::eval(maha, x, c, &I) == doctest::Approx(dissim::eval(euclid, x, c)).epsilon(1e-14));
  }
}

TEST_CASE("periodic distance is invariant to whole-period shifts") {
  const DissimilarityKind per = DissimilarityKind::periodic(vec({1.0, 2.0}));
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> shift(-3, 3);
  std::uniform_int_distribution<int> grid(0, 63);
  for (int rep = 0; rep < 200; ++rep) {
    // Dyadic coordinates: every shifted value is exactly representable.
    const Vector x = vec({grid(rng) / 64.0, grid(rng) / 32.0});
    const Vector c = vec({grid(rng) / 64.0, grid(rng) / 32.0});
    const Vector moved = x + vec({1.0 * shift(rng), 2.0 * shift(rng)});
    CHECK(dissim::eval(per, moved, c) == dissim::eval(per, x, c));
  }
  for (int rep = 0; rep < 200; ++rep) {
    const Vector x = vec({test::randu(1, 1, rng, 0, 1)(0, 0), test::randu(1, 1, rng, 0, 2)(0, 0)});
    const Vector c = vec({test::randu(1, 1, rng, 0, 1)(0, 0), test::randu(1, 1, rng, 0, 2)(0, 0)});
    const Vector moved = x + vec({1.0 * shift(rng), 2.0 * shift(rng)});
    CHECK(std::abs(dissim::eval(per, moved, c) - dissim::eval(per, x, c)) <= 1e-12);
  }
}

TEST_CASE("convexity in the descriptor") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  for (const auto tag : kTags) {
    const DissimilarityKind kind = make_kind(tag);
    for (int rep = 0; rep < 200; ++rep) {
      const Vector x = sample(kind, 3, rng);
      Vector t1 = sample(kind, 3, rng);
      Vector t2 = sample(kind, 3, rng);
      if (tag == DissimilarityTag::ItakuraSaito) {
        // x/y - log(x/y) - 1 is convex in y on (0, 2x].
        t1 = x.cwiseProduct(test::randu(3, 1, rng, 0.1, 2.0));
        t2 = x.cwiseProduct(test::randu(3, 1, rng, 0.1, 2.0));
      } else if (tag == DissimilarityTag::PeriodicEuclidean) {
        // Convex within the cell of half a period around x.
        t1 = x + test::randu(3, 1, rng, -0.5, 0.5);
        t2 = x + test::randu(3, 1, rng, -0.5, 0.5);
      }
      Matrix W;
      if (kind.needs_metric()) W = random_metric(3, rng);
      const Matrix* metric = kind.needs_metric() ? &W : nullptr;
      const double l = lam(rng);
      const double lhs = dissim::eval(kind, x, l * t1 + (1 - l) * t2, metric);
      const double rhs =
          l * dissim::eval(kind, x, t1, metric) + (1 - l) * dissim::eval(kind, x, t2, metric);
      CHECK_MESSAGE(lhs <= rhs + 1e-9, kind.name());
    }
  }
}

TEST_CASE("displacement wraps into half a period") {
  const DissimilarityKind per = DissimilarityKind::periodic(vec({1.0}));
  CHECK(dissim::displacement(per, vec({0.95}), vec({0.05}))[0] == doctest::Approx(-0.1));
  CHECK(dissim::displacement(per, vec({0.05}), vec({0.95}))[0] == doctest::Approx(0.1));
  CHECK(dissim::displacement(per, vec({3.3}), vec({0.2}))[0] == doctest::Approx(0.1));
  CHECK(per.period_at(4) == 1.0);
}

}  // TEST_SUITE
