#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mortgee/correlation.hpp"
#include "mortgee/design.hpp"

namespace mortgee::kernels {

/// Execution policy for the per-cluster accumulation kernels. Both paths
/// produce bit-identical results: work is split into a fixed number of
/// chunks whose partials are combined in a fixed order, so the floating
/// point summation tree does not depend on the thread count.
enum class Exec { serial, parallel };

bool openmp_enabled();

/// Number of reduction chunks. Fixed (not thread-count dependent) so the
/// combine order is stable across parallelism settings.
inline constexpr int kReductionChunks = 16;

/// Precomputed cluster traversal: clusters in canonical (label-sorted)
/// order, each with its row indices sorted by wave. Fit results are then
/// invariant under permutation of the input's cluster order.
struct ClusterPlan {
  std::vector<std::vector<int>> rows;   // per cluster, design row indices
  std::vector<std::vector<int>> waves;  // aligned global wave indices
  std::vector<int> cluster_ids;         // original cluster index per entry
  int max_cluster_size = 0;

  std::size_t n_clusters() const { return rows.size(); }
};

ClusterPlan make_plan(const DesignMatrix& design);

/// bread = sum_i A_i' R_i^{-1} A_i and rhs = sum_i A_i' R_i^{-1} z_i with
/// A_i = W_i^{1/2} X_i and z_i = W_i^{1/2} y_i: the two sides of the
/// estimating-equation solve for a Gaussian identity-link GEE.
struct CrossProducts {
  Eigen::MatrixXd bread;
  Eigen::VectorXd rhs;
};

CrossProducts cross_products(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& sqrt_w, const ClusterPlan& plan,
                             const WorkingCorrelation& corr, Exec exec);

/// meat = sum_i g_i g_i' with g_i = A_i' R_i^{-1} u_i, where u_i is the
/// cluster's Pearson residual vector (already weight-scaled).
Eigen::MatrixXd sandwich_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& pearson,
                              const Eigen::VectorXd& sqrt_w, const ClusterPlan& plan,
                              const WorkingCorrelation& corr, Exec exec);

}  // namespace mortgee::kernels
