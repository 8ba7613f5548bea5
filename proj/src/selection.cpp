#include "mortgee/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mortgee/csv.hpp"
#include "mortgee/errors.hpp"

namespace mortgee {

namespace {

void check_same_design(const GeeFit& fit, const DesignMatrix& design) {
  if (fit.n_obs != design.n() || fit.n_params != design.p())
    fail(errc::design_mismatch, "fit and design dimensions disagree");
  const auto names = design.column_names();
  if (fit.terms != names)
    fail(errc::design_mismatch, "fit and design column names disagree");
}

double weighted_rss(const GeeFit& fit, const DesignMatrix& design) {
  const Eigen::VectorXd e = design.y - design.X * fit.beta;
  return e.cwiseProduct(e).cwiseProduct(design.w).sum();
}

double quasi_lik_value(const GeeFit& fit, const DesignMatrix& design) {
  return -weighted_rss(fit, design) / (2.0 * fit.phi);
}

CriteriaRow make_row(const GeeFit& fit, const DesignMatrix& design, std::string label) {
  const double q = quasi_lik_value(fit, design);
  const double cic = cic_trace(fit, design, fit.v_robust);
  const auto p = static_cast<double>(fit.n_params);
  const auto n = static_cast<double>(fit.n_obs);

  CriteriaRow row;
  row.model_label = std::move(label);
  row.quasi_lik = q;
  row.cic = cic;
  row.params = static_cast<int>(fit.n_params);
  row.qic = -2.0 * q + 2.0 * cic;
  row.qicu = -2.0 * q + 2.0 * p;
  row.qicc = n - p - 1.0 > 0.0
                 ? row.qic + 2.0 * p * (p + 1.0) / (n - p - 1.0)
                 : std::numeric_limits<double>::quiet_NaN();
  row.converged = fit.converged;
  return row;
}

}  // namespace

double quasi_likelihood(const GeeFit& fit, const DesignMatrix& design) {
  check_same_design(fit, design);
  if (!fit.converged) fail(errc::not_converged, "fit did not converge");
  if (!(fit.phi > 0.0)) fail(errc::not_converged, "fit has non-positive dispersion");
  return quasi_lik_value(fit, design);
}

double cic_trace(const GeeFit& fit, const DesignMatrix& design,
                 const Eigen::MatrixXd& covariance) {
  check_same_design(fit, design);
  // Omega_I = X' W X / phi; trace(Omega_I V) as an elementwise sum, using
  // that both factors are symmetric.
  const Eigen::MatrixXd info =
      design.X.transpose() * design.w.asDiagonal() * design.X / fit.phi;
  return (info.array() * covariance.array()).sum();
}

CriteriaRow qic(const GeeFit& fit, const GeeFit& independence_fit,
                const DesignMatrix& design, std::string label) {
  check_same_design(fit, design);
  check_same_design(independence_fit, design);
  if (independence_fit.kind != CorrelationKind::independence)
    fail(errc::design_mismatch, "reference fit must use the independence structure");
  if (!fit.converged) fail(errc::not_converged, "fit did not converge");
  return make_row(fit, design, std::move(label));
}

std::vector<CriteriaRow> compare(const DesignMatrix& design,
                                 const std::vector<std::pair<std::string, GeeFit>>& fits) {
  std::vector<CriteriaRow> rows;
  rows.reserve(fits.size());
  for (const auto& [label, fit] : fits) {
    check_same_design(fit, design);
    rows.push_back(make_row(fit, design, label));
  }
  std::sort(rows.begin(), rows.end(), [](const CriteriaRow& a, const CriteriaRow& b) {
    if (a.converged != b.converged) return a.converged;  // ranked rows first
    if (!a.converged) return a.model_label < b.model_label;
    if (a.qic != b.qic) return a.qic < b.qic;
    if (a.cic != b.cic) return a.cic < b.cic;
    return a.model_label < b.model_label;
  });
  return rows;
}

std::string render_criteria_csv(const std::vector<CriteriaRow>& rows) {
  std::ostringstream os;
  os << "model,qic,qicu,quasi_lik,cic,params,qicc,converged\n";
  for (const auto& r : rows) {
    os << r.model_label << ',' << csv::fmt17(r.qic) << ',' << csv::fmt17(r.qicu) << ','
       << csv::fmt17(r.quasi_lik) << ',' << csv::fmt17(r.cic) << ',' << r.params << ','
       << csv::fmt17(r.qicc) << ',' << (r.converged ? "true" : "false") << '\n';
  }
  return os.str();
}

std::string render_criteria_text(const std::vector<CriteriaRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Model", "QIC", "QICu", "Quasi Lik", "CIC", "Params", "QICC"});
  for (const auto& r : rows) {
    std::string label = r.model_label + (r.converged ? "" : " (not converged)");
    cells.push_back({label, csv::fmt3(r.qic), csv::fmt3(r.qicu), csv::fmt3(r.quasi_lik),
                     csv::fmt3(r.cic), std::to_string(r.params), csv::fmt3(r.qicc)});
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j)
      width[j] = std::max(width[j], row[j].size());

  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      os << row[j];
      if (j + 1 < row.size()) os << std::string(width[j] - row[j].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mortgee
