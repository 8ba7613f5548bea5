#pragma once

#include <Eigen/Dense>
#include <span>

#include "mortgee/model_spec.hpp"

namespace mortgee {

/// A working correlation structure with estimated parameters. The
/// materialized matrix is symmetric with unit diagonal and is kept inside
/// its positive-definite region (clamped with a 1e-6 margin).
struct WorkingCorrelation {
  CorrelationKind kind = CorrelationKind::independence;
  double rho = 0.0;            // exchangeable / ar1
  Eigen::MatrixXd rho_matrix;  // unstructured, n_max x n_max
  int n_max = 0;               // largest cluster size (wave-grid length)
};

/// Margin keeping estimated parameters strictly inside the PD region.
inline constexpr double kCorrClampMargin = 1e-6;

/// Correlation matrix for a cluster observed at n consecutive waves:
/// identity; [rho^{|j-k|}]; [rho + (1-rho) 1{j=k}]; [rho_jk].
Eigen::MatrixXd materialize(const WorkingCorrelation& corr, int n);

/// Correlation matrix for a cluster observed at the given wave indices
/// (subset of the full grid); AR(1) entries decay with wave separation.
Eigen::MatrixXd materialize_at(const WorkingCorrelation& corr, std::span<const int> waves);

/// One cluster's Pearson residuals aligned with its wave indices.
struct ClusterResidualView {
  const double* r = nullptr;
  const int* wave = nullptr;  // global wave indices, strictly increasing
  int n = 0;
};

/// Moment estimators of the correlation parameters from Pearson residuals
/// r_ij = e_ij * sqrt(w_ij), standardized by phi in the denominator:
///   exchangeable: sum_i sum_{j<k} r_ij r_ik / (phi (sum_i n_i(n_i-1)/2 - p))
///   ar1:          sum over wave-adjacent pairs  / (phi (sum_i (n_i-1) - p))
///   unstructured: sum_i r_ij r_ik / (phi (N_jk - p)), N_jk = clusters seeing both waves
/// Estimates are clamped into the open PD region. Clusters with no usable
/// pairs at all give rho = 0; a positive pair count with a non-positive
/// denominator is an error.
WorkingCorrelation estimate_corr_params(std::span<const ClusterResidualView> clusters,
                                        CorrelationKind kind, double phi, int p,
                                        int n_max);

}  // namespace mortgee
