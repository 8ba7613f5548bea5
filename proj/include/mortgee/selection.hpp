#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mortgee/gee.hpp"

namespace mortgee {

/// One line of the model-comparison table, in the column order
/// Model, QIC, QICu, Quasi Lik, CIC, Params, QICC.
struct CriteriaRow {
  std::string model_label;
  double qic = 0.0;
  double qicu = 0.0;
  double quasi_lik = 0.0;
  double cic = 0.0;
  int params = 0;
  double qicc = 0.0;
  bool converged = true;  // non-converged rows are kept but not ranked
};

/// Gaussian quasi-likelihood under working independence, constant dropped:
/// Q = -(1/(2 phi)) sum_ij w_ij (y_ij - yhat_ij)^2, with phi taken from the
/// scored fit.
double quasi_likelihood(const GeeFit& fit, const DesignMatrix& design);

/// trace(Omega_I * covariance) with Omega_I = (X' W X) / phi, the
/// model-based information of the independence working model at the scored
/// fit's dispersion. Scoring a fit with its own naive covariance gives
/// exactly p.
double cic_trace(const GeeFit& fit, const DesignMatrix& design,
                 const Eigen::MatrixXd& covariance);

/// Full criteria row: QIC = -2Q + 2 CIC, QICu = -2Q + 2p, and the
/// small-sample correction QICC = QIC + 2p(p+1)/(N-p-1).
CriteriaRow qic(const GeeFit& fit, const GeeFit& independence_fit,
                const DesignMatrix& design, std::string label = "");

/// Scores every fit on the shared design and ranks ascending by QIC, ties
/// broken by CIC then label. Non-converged fits are scored and appended
/// after the ranked rows.
std::vector<CriteriaRow> compare(const DesignMatrix& design,
                                 const std::vector<std::pair<std::string, GeeFit>>& fits);

std::string render_criteria_csv(const std::vector<CriteriaRow>& rows);
std::string render_criteria_text(const std::vector<CriteriaRow>& rows);

}  // namespace mortgee
