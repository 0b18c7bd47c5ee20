#include "dmae/data.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace dmae;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path dir = fs::temp_directory_path() / "dmae_test_data";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

std::vector<int> label_counts(const LabeledDataset& d) {
  std::vector<int> counts(static_cast<std::size_t>(d.classes()), 0);
  for (int y : d.y) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::string parse_error_message(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("pinwheel shape, balance, determinism") {
  const auto a = gen_pinwheel(200, 5, 0.3, 0.05, 0.25, 42);
  CHECK(a.x.rows() == 1000);
  CHECK(a.x.cols() == 2);
  CHECK(label_counts(a) == std::vector<int>(5, 200));
  const auto b = gen_pinwheel(200, 5, 0.3, 0.05, 0.25, 42);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(gen_pinwheel(200, 5, 0.3, 0.05, 0.25, 43).x != a.x);
  CHECK(a.metadata["seed"] == 42);
  CHECK(a.metadata["twist"] == "exponential");
}

TEST_CASE("pinwheel degenerate limit collapses to the arm tips") {
  for (auto twist : {PinwheelTwist::Exponential, PinwheelTwist::Linear}) {
    const auto d = gen_pinwheel(3, 5, 0.0, 0.0, 0.0, 1, twist);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double angle = 2.0 * std::numbers::pi * d.y[static_cast<std::size_t>(i)] / 5;
      CHECK(d.x(i, 0) == doctest::Approx(std::cos(angle)).epsilon(1e-15));
      CHECK(d.x(i, 1) == doctest::Approx(std::sin(angle)).epsilon(1e-15));
    }
  }
}

TEST_CASE("pinwheel twist forms: linear rotates by rate*u, exponential by rate*exp(u)") {
  // Zero angular spread: each point sits at radius u and angle base + twist(u).
  for (auto twist : {PinwheelTwist::Exponential, PinwheelTwist::Linear}) {
    const auto d = gen_pinwheel(50, 5, 0.3, 0.0, 0.25, 3, twist);
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double u = std::hypot(d.x(i, 0), d.x(i, 1));
      const double base = 2.0 * std::numbers::pi * d.y[static_cast<std::size_t>(i)] / 5;
      const double expect = base + 0.25 * (twist == PinwheelTwist::Linear ? u : std::exp(u));
      // u can come out negative, in which case the point is reflected.
      const double sign = std::cos(expect) * d.x(i, 0) + std::sin(expect) * d.x(i, 1) >= 0 ? 1 : -1;
      CHECK(d.x(i, 0) == doctest::Approx(sign * u * std::cos(expect)).epsilon(1e-12));
      CHECK(d.x(i, 1) == doctest::Approx(sign * u * std::sin(expect)).epsilon(1e-12));
    }
  }
}

TEST_CASE("toroidal: points in the unit square, balanced, wraps") {
  const auto d = gen_toroidal(250, 4, 0.05, 7);
  CHECK(d.x.rows() == 1000);
  CHECK(label_counts(d) == std::vector<int>(4, 250));
  CHECK(d.x.minCoeff() >= 0.0);
  CHECK(d.x.maxCoeff() < 1.0);
  CHECK(wrap_unit(0.95 + 0.1) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(wrap_unit(-0.25) == 0.75);
  CHECK(wrap_unit(1.0) == 0.0);
  CHECK(wrap_unit(-1e-18) == 0.0);
  // The (0.95, 0.95) blob straddles the boundary.
  int wrapped = 0;
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    if (d.y[static_cast<std::size_t>(i)] == 3 && d.x(i, 0) < 0.5) ++wrapped;
  }
  CHECK(wrapped > 0);
}

TEST_CASE("toroidal: shifting the centers shifts every sample modulo 1") {
  const Eigen::Vector2d shift(0.3, 0.625);
  const auto a = gen_toroidal(100, 4, 0.05, 9);
  const auto b = gen_toroidal(100, 4, 0.05, 9, shift);
  CHECK(a.y == b.y);
  for (Eigen::Index i = 0; i < a.x.rows(); ++i) {
    for (int j = 0; j < 2; ++j) {
      double diff = std::abs(wrap_unit(a.x(i, j) + shift[j]) - b.x(i, j));
      diff = std::min(diff, 1.0 - diff);
      CHECK(diff <= 1e-12);
    }
  }
}

TEST_CASE("moons") {
  const auto d = gen_moons(1000, 0.1, 5);
  CHECK(label_counts(d) == std::vector<int>{500, 500});
  CHECK(gen_moons(1000, 0.1, 5).x == d.x);
  const auto clean = gen_moons(1000, 0.0, 5);
  for (Eigen::Index i = 0; i < clean.x.rows(); ++i) {
    const double x = clean.x(i, 0);
    const double y = clean.x(i, 1);
    if (clean.y[static_cast<std::size_t>(i)] == 0) {
      CHECK(std::abs(x * x + y * y - 1.0) <= 1e-12);
      CHECK(y >= -1e-12);
    } else {
      CHECK(std::abs((x - 1.0) * (x - 1.0) + (y - 0.5) * (y - 0.5) - 1.0) <= 1e-12);
      CHECK(y <= 0.5 + 1e-12);
    }
  }
}

TEST_CASE("circles") {
  const auto d = gen_circles(1000, 0.1, 0.1, 5);
  CHECK(label_counts(d) == std::vector<int>{500, 500});
  CHECK(gen_circles(1000, 0.1, 0.1, 5).x == d.x);
  const auto clean = gen_circles(1000, 0.0, 0.1, 5);
  for (Eigen::Index i = 0; i < clean.x.rows(); ++i) {
    const double r = std::hypot(clean.x(i, 0), clean.x(i, 1));
    CHECK(r == doctest::Approx(clean.y[static_cast<std::size_t>(i)] == 0 ? 1.0 : 0.1).epsilon(1e-15));
  }
  CHECK_THROWS_AS(gen_circles(10, 0.1, 1.5, 0), ConfigError);
}

TEST_CASE("csv: header detection, labels, errors") {
  const auto with_header = load_csv(temp_file("h.csv", "a,b\n1,2\n3,4\n5,6\n"));
  CHECK(with_header.x == test::mat(3, 2, {1, 2, 3, 4, 5, 6}));
  CHECK(with_header.y == Labels{-1, -1, -1});

  const auto no_header = load_csv(temp_file("n.csv", "1,2\r\n3,4\r\n"));
  CHECK(no_header.x == test::mat(2, 2, {1, 2, 3, 4}));

  const auto p = temp_file("l.csv", "x0,label,x1\n0.5,1,2\n1.5,0,3\n");
  const auto by_name = load_csv(p, "label");
  CHECK(by_name.x == test::mat(2, 2, {0.5, 2, 1.5, 3}));
  CHECK(by_name.y == Labels{1, 0});
  CHECK(load_csv(p, "1").y == Labels{1, 0});
  CHECK_THROWS_AS(load_csv(p, "nope"), ParseError);
  CHECK_THROWS_AS(load_csv(p, "x0").y, ParseError);

  CHECK(parse_error_message(temp_file("bad.csv", "a,b\n1,2\nfoo,4\n")).find("row 2, column 1") !=
        std::string::npos);
  CHECK_THROWS_AS(load_csv(temp_file("rag.csv", "1,2\n3\n")), RaggedRows);
  CHECK_THROWS_AS(load_csv(temp_file("empty.csv", "")), ParseError);
  CHECK_THROWS_AS(load_csv(fs::temp_directory_path() / "dmae_test_data" / "missing.csv"), ParseError);
}

TEST_CASE("csv round trip is lossless at 17 significant digits") {
  std::mt19937_64 rng(13);
  LabeledDataset d;
  d.x = test::randn(50, 3, rng) * 1e3;
  d.x(0, 0) = 1.0 / 3.0;
  d.x(1, 1) = -5e-310;
  d.x(2, 2) = 1.7976931348623157e308;
  for (int i = 0; i < 50; ++i) d.y.push_back(i % 4);
  const fs::path p = fs::temp_directory_path() / "dmae_test_data" / "rt.csv";
  fs::create_directories(p.parent_path());
  write_csv(d, p);
  const auto back = load_csv(p, "label");
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(metadata_path("dir/pin.csv") == fs::path("dir/pin.meta.json"));
}

}  // TEST_SUITE
