#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mortgee/correlation.hpp"
#include "mortgee/design.hpp"
#include "mortgee/kernels.hpp"

namespace mortgee {

struct FitOptions {
  double tol = 1e-8;  // max absolute coefficient change
  int max_iter = 50;
  kernels::Exec exec = kernels::Exec::parallel;
  /// When false, a fit hitting max_iter is returned with converged=false
  /// instead of throwing; used by model comparison so one stubborn
  /// structure does not abort the whole table.
  bool error_on_no_convergence = true;
};

/// Dispersion floor; a smaller moment estimate means an (exactly or
/// numerically) perfect fit, which pins rho at 0.
inline constexpr double kPhiFloor = 1e-12;

/// Pivot tolerance for declaring the (column-equilibrated) normal matrix
/// singular.
inline constexpr double kPivotTol = 1e-10;

struct GeeFit {
  Eigen::VectorXd beta;
  double phi = 0.0;
  WorkingCorrelation corr;
  Eigen::MatrixXd v_naive;   // phi * B^{-1}
  Eigen::MatrixXd v_robust;  // B^{-1} M B^{-1}
  Eigen::VectorXd pearson;   // per-row residual * sqrt(weight)
  int iterations = 0;
  bool converged = false;
  double quasi_lik = 0.0;
  CorrelationKind kind = CorrelationKind::independence;
  std::vector<std::string> terms;
  Eigen::Index n_obs = 0;
  Eigen::Index n_params = 0;

  double se_naive(Eigen::Index j) const { return std::sqrt(v_naive(j, j)); }
  double se_robust(Eigen::Index j) const { return std::sqrt(v_robust(j, j)); }
};

/// Solves the Gaussian identity-link GEE by Liang-Zeger iteration:
/// residuals -> dispersion -> correlation moments -> weighted GLS update,
/// starting from the independence (WLS) solution. Columns are equilibrated
/// by their max-abs before factorization and unscaled afterwards.
GeeFit fit(const DesignMatrix& design, CorrelationKind kind, const FitOptions& options = {});

}  // namespace mortgee
