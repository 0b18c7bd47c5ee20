#include "dmae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dmae {

namespace {

std::map<int, Eigen::Index> dense_index(const Labels& labels) {
  std::map<int, Eigen::Index> index;
  for (int label : labels) index.emplace(label, 0);
  Eigen::Index next = 0;
  for (auto& [label, idx] : index) idx = next++;
  return index;
}

void check_pair(const Labels& truth, const Labels& predicted) {
  if (truth.size() != predicted.size()) throw LengthMismatch("label vectors differ in length");
  if (truth.empty()) throw EmptyInput("label vectors are empty");
}

}  // namespace

ContingencyTable::ContingencyTable(const Labels& truth, const Labels& predicted) {
  check_pair(truth, predicted);
  const auto rows = dense_index(truth);
  const auto cols = dense_index(predicted);
  counts_ = decltype(counts_)::Zero(static_cast<Eigen::Index>(rows.size()),
                                    static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++counts_(rows.at(truth[i]), cols.at(predicted[i]));
  }
  row_totals_ = counts_.rowwise().sum();
  col_totals_ = counts_.colwise().sum().transpose();
  total_ = static_cast<long>(truth.size());
}

// Shortest augmenting path formulation of the Hungarian method on costs
// (max - profit), O(n^3).
std::vector<int> hungarian_max(const Eigen::MatrixXd& profit) {
  const Eigen::Index n = std::max(profit.rows(), profit.cols());
  if (n == 0) return {};
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  cost.topLeftCorner(profit.rows(), profit.cols()) = profit;
  const double top = cost.maxCoeff();
  cost = (top - cost.array()).matrix();

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (Eigen::Index row = 1; row <= n; ++row) {
    match[0] = row;
    Eigen::Index col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const Eigen::Index row0 = match[col0];
      double delta = inf;
      Eigen::Index col1 = 0;
      for (Eigen::Index col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
        if (reduced < minv[col]) {
          minv[col] = reduced;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (Eigen::Index col = 0; col <= n; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const Eigen::Index col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (Eigen::Index col = 1; col <= n; ++col) {
    assignment[static_cast<std::size_t>(match[col] - 1)] = static_cast<int>(col - 1);
  }
  return assignment;
}

double acc(const Labels& truth, const Labels& predicted) {
  const ContingencyTable table(truth, predicted);
  // Rows are predicted clusters so the assignment is the mapping g(cluster) -> class.
  Eigen::MatrixXd profit(table.predicted_clusters(), table.true_classes());
  for (Eigen::Index p = 0; p < profit.rows(); ++p) {
    for (Eigen::Index t = 0; t < profit.cols(); ++t) {
      profit(p, t) = static_cast<double>(table.at(t, p));
    }
  }
  const auto g = hungarian_max(profit);
  long matched = 0;
  for (Eigen::Index p = 0; p < profit.rows(); ++p) {
    const int t = g[static_cast<std::size_t>(p)];
    if (t < profit.cols()) matched += table.at(t, p);
  }
  return static_cast<double>(matched) / static_cast<double>(table.total());
}

double nmi(const Labels& truth, const Labels& predicted) {
  const ContingencyTable table(truth, predicted);
  const double n = static_cast<double>(table.total());
  // Terms are summed in sorted order so that relabeling either side (which
  // only permutes rows or columns) gives a bit-identical result.
  auto sorted_sum = [](std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  };
  auto entropy = [&](const auto& totals) {
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < totals.size(); ++i) {
      if (totals[i] == 0) continue;
      const double p = static_cast<double>(totals[i]) / n;
      terms.push_back(-p * std::log(p));
    }
    return sorted_sum(terms);
  };
  const double h_true = entropy(table.true_totals());
  const double h_pred = entropy(table.predicted_totals());
  // Both single-cluster: the partitions coincide.
  if (h_true + h_pred == 0.0) return 1.0;

  std::vector<double> terms;
  for (Eigen::Index t = 0; t < table.true_classes(); ++t) {
    for (Eigen::Index p = 0; p < table.predicted_clusters(); ++p) {
      const long c = table.at(t, p);
      if (c == 0) continue;
      const double joint = static_cast<double>(c) / n;
      const double pt = static_cast<double>(table.true_totals()[t]) / n;
      const double pp = static_cast<double>(table.predicted_totals()[p]) / n;
      terms.push_back(joint * std::log(joint / (pt * pp)));
    }
  }
  return 2.0 * sorted_sum(terms) / (h_true + h_pred);
}

}  // namespace dmae
