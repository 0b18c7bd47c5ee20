#pragma once

#include "dmae/common.hpp"

#include <vector>

namespace dmae {

/// Joint counts of true classes (rows) against predicted clusters (columns).
/// Labels are remapped to dense indices in increasing label order.
class ContingencyTable {
 public:
  ContingencyTable(const Labels& truth, const Labels& predicted);

  Eigen::Index true_classes() const { return counts_.rows(); }
  Eigen::Index predicted_clusters() const { return counts_.cols(); }
  long at(Eigen::Index t, Eigen::Index p) const { return counts_(t, p); }
  long total() const { return total_; }
  const Eigen::Matrix<long, Eigen::Dynamic, 1>& true_totals() const { return row_totals_; }
  const Eigen::Matrix<long, Eigen::Dynamic, 1>& predicted_totals() const { return col_totals_; }

 private:
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts_;
  Eigen::Matrix<long, Eigen::Dynamic, 1> row_totals_;
  Eigen::Matrix<long, Eigen::Dynamic, 1> col_totals_;
  long total_ = 0;
};

/// Maximum-profit assignment on a rectangular matrix (padded to square with
/// zero profit). Entry r of the result is the column assigned to row r.
std::vector<int> hungarian_max(const Eigen::MatrixXd& profit);

/// Unsupervised accuracy under the best one-to-one cluster-to-class mapping.
double acc(const Labels& truth, const Labels& predicted);

/// 2 I(y, y^) / (H(y) + H(y^)), natural log; 1 when both entropies vanish.
double nmi(const Labels& truth, const Labels& predicted);

}  // namespace dmae
