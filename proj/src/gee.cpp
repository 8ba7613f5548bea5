#include "mortgee/gee.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "mortgee/errors.hpp"

namespace mortgee {

namespace {

/// LDLT with a singularity check on the equilibrated scale.
class CheckedSolver {
 public:
  explicit CheckedSolver(const Eigen::MatrixXd& bread) : ldlt_(bread) {
    if (ldlt_.info() != Eigen::Success || ldlt_.vectorD().minCoeff() < kPivotTol)
      fail(errc::singular,
           "normal matrix is singular at pivot tolerance 1e-10; "
           "the design is rank deficient");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }
  Eigen::MatrixXd inverse(Eigen::Index p) const {
    return ldlt_.solve(Eigen::MatrixXd::Identity(p, p));
  }

 private:
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

/// Pearson residual sum of squares in canonical cluster order.
double sum_sq_canonical(const Eigen::VectorXd& pearson, const kernels::ClusterPlan& plan) {
  double ss = 0.0;
  for (const auto& rows : plan.rows)
    for (int r : rows) ss += pearson(r) * pearson(r);
  return ss;
}

std::vector<ClusterResidualView> residual_views(const Eigen::VectorXd& pearson,
                                                const kernels::ClusterPlan& plan,
                                                std::vector<std::vector<double>>& scratch) {
  scratch.assign(plan.n_clusters(), {});
  std::vector<ClusterResidualView> views(plan.n_clusters());
  for (std::size_t c = 0; c < plan.n_clusters(); ++c) {
    auto& buf = scratch[c];
    buf.resize(plan.rows[c].size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = pearson(plan.rows[c][i]);
    views[c] = ClusterResidualView{buf.data(), plan.waves[c].data(),
                                   static_cast<int>(buf.size())};
  }
  return views;
}

}  // namespace

GeeFit fit(const DesignMatrix& design, CorrelationKind kind, const FitOptions& options) {
  const Eigen::Index n = design.n();
  const Eigen::Index p = design.p();
  if (n == 0) fail(errc::empty_input, "empty design");
  if (design.y.size() != n) fail(errc::design_mismatch, "design has no response");
  if (p == 0) fail(errc::singular, "design has no columns");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(design.w(i) > 0.0) || !std::isfinite(design.w(i)))
      fail(errc::bad_value, "weights must be positive and finite");

  const kernels::ClusterPlan plan = kernels::make_plan(design);
  const int n_max = plan.max_cluster_size;

  if (kind == CorrelationKind::unstructured) {
    const std::size_t grid = design.wave_years.empty()
                                 ? static_cast<std::size_t>(n_max)
                                 : design.wave_years.size();
    for (const auto& rows : plan.rows)
      if (rows.size() != grid)
        fail(errc::unbalanced,
             "unstructured working correlation requires a balanced panel "
             "(every cluster observed at every wave)");
  }

  // Column equilibration: scale each column by its max-abs entry.
  Eigen::VectorXd colmax = design.X.cwiseAbs().colwise().maxCoeff();
  for (Eigen::Index j = 0; j < p; ++j)
    if (colmax(j) == 0.0)
      fail(errc::singular, "design column '" + design.columns[static_cast<std::size_t>(j)].name +
                               "' is identically zero");
  const Eigen::VectorXd scale = colmax.cwiseInverse();
  const Eigen::MatrixXd Xs = design.X * scale.asDiagonal();
  const Eigen::VectorXd sqrt_w = design.w.cwiseSqrt();

  const WorkingCorrelation independence{CorrelationKind::independence, 0.0, {}, n_max};

  // beta in the equilibrated coordinate system; natural beta = scale .* bs.
  auto cp0 = kernels::cross_products(Xs, design.y, sqrt_w, plan, independence, options.exec);
  Eigen::VectorXd bs = CheckedSolver(cp0.bread).solve(cp0.rhs);

  GeeFit out;
  out.kind = kind;
  out.terms = design.column_names();
  out.n_obs = n;
  out.n_params = p;

  WorkingCorrelation corr = independence;
  corr.kind = kind;
  if (kind == CorrelationKind::unstructured)
    corr.rho_matrix = Eigen::MatrixXd::Identity(n_max, n_max);

  Eigen::VectorXd pearson(n);
  std::vector<std::vector<double>> scratch;
  bool degenerate = false;
  double phi = 0.0;

  auto residual_pass = [&]() {
    const Eigen::VectorXd e = design.y - Xs * bs;
    pearson = e.cwiseProduct(sqrt_w);
    phi = sum_sq_canonical(pearson, plan) / static_cast<double>(n - p);
    if (phi <= kPhiFloor) {
      phi = kPhiFloor;
      degenerate = true;
      corr = WorkingCorrelation{kind, 0.0,
                                kind == CorrelationKind::unstructured
                                    ? Eigen::MatrixXd::Identity(n_max, n_max)
                                    : Eigen::MatrixXd{},
                                n_max};
    }
  };

  for (int it = 1; it <= options.max_iter; ++it) {
    residual_pass();
    if (degenerate) {
      out.converged = true;
      out.iterations = it;
      break;
    }
    if (kind != CorrelationKind::independence) {
      const auto views = residual_views(pearson, plan, scratch);
      corr = estimate_corr_params(views, kind, phi, static_cast<int>(p), n_max);
    }
    const auto cp = kernels::cross_products(Xs, design.y, sqrt_w, plan, corr, options.exec);
    const Eigen::VectorXd bs_new = CheckedSolver(cp.bread).solve(cp.rhs);
    const double delta =
        ((bs_new - bs).cwiseProduct(scale)).cwiseAbs().maxCoeff();
    bs = bs_new;
    out.iterations = it;
    if (delta < options.tol) {
      out.converged = true;
      break;
    }
  }

  if (!out.converged && options.error_on_no_convergence)
    fail(errc::no_convergence,
         "GEE did not converge in " + std::to_string(options.max_iter) + " iterations");

  // Final state at the last beta: residuals, dispersion, correlation, and
  // both covariance estimates.
  if (!degenerate) {
    residual_pass();
    if (!degenerate && kind != CorrelationKind::independence) {
      const auto views = residual_views(pearson, plan, scratch);
      corr = estimate_corr_params(views, kind, phi, static_cast<int>(p), n_max);
    }
  }

  const auto cp = kernels::cross_products(Xs, design.y, sqrt_w, plan, corr, options.exec);
  const CheckedSolver solver(cp.bread);
  const Eigen::MatrixXd bread_inv = solver.inverse(p);
  const Eigen::MatrixXd meat =
      kernels::sandwich_meat(Xs, pearson, sqrt_w, plan, corr, options.exec);

  Eigen::MatrixXd v_naive = phi * bread_inv;
  Eigen::MatrixXd v_robust = bread_inv * meat * bread_inv;

  // Undo the column equilibration.
  out.beta = scale.cwiseProduct(bs);
  v_naive = scale.asDiagonal() * v_naive * scale.asDiagonal();
  v_robust = scale.asDiagonal() * v_robust * scale.asDiagonal();
  out.v_naive = 0.5 * (v_naive + v_naive.transpose());
  out.v_robust = 0.5 * (v_robust + v_robust.transpose());

  out.phi = phi;
  out.corr = corr;
  out.pearson = pearson;
  out.quasi_lik = -sum_sq_canonical(pearson, plan) / (2.0 * phi);
  return out;
}

}  // namespace mortgee
