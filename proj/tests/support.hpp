#pragma once

#include "dmae/common.hpp"

#include <random>

namespace dmae::test {

inline Matrix randn(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline Matrix randu(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo,
                    double hi) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uni(rng);
  return m;
}

inline Vector row(const Matrix& m, Eigen::Index i) { return m.row(i).transpose(); }

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Matrix mat(Eigen::Index rows, Eigen::Index cols, std::initializer_list<double> values) {
  Matrix m(rows, cols);
  Eigen::Index i = 0;
  for (double x : values) m.data()[i++] = x;
  return m;
}

}  // namespace dmae::test
