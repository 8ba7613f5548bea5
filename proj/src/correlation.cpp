#include "mortgee/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mortgee/errors.hpp"

namespace mortgee {

namespace {

void check_params(const WorkingCorrelation& corr) {
  switch (corr.kind) {
    case CorrelationKind::independence:
      break;
    case CorrelationKind::exchangeable: {
      const double lower = corr.n_max > 1 ? -1.0 / (corr.n_max - 1) : -1.0;
      if (!(corr.rho > lower && corr.rho < 1.0))
        fail(errc::not_positive_definite,
             "exchangeable rho " + std::to_string(corr.rho) + " outside (" +
                 std::to_string(lower) + ", 1)");
      break;
    }
    case CorrelationKind::ar1:
      if (!(std::abs(corr.rho) < 1.0))
        fail(errc::not_positive_definite,
             "ar1 rho " + std::to_string(corr.rho) + " outside (-1, 1)");
      break;
    case CorrelationKind::unstructured: {
      if (corr.rho_matrix.rows() != corr.n_max || corr.rho_matrix.cols() != corr.n_max)
        fail(errc::dimension, "unstructured rho matrix size mismatch");
      Eigen::LLT<Eigen::MatrixXd> llt(corr.rho_matrix);
      if (llt.info() != Eigen::Success)
        fail(errc::not_positive_definite, "unstructured R is not positive definite");
      break;
    }
  }
}

}  // namespace

Eigen::MatrixXd materialize(const WorkingCorrelation& corr, int n) {
  std::vector<int> waves(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) waves[static_cast<std::size_t>(i)] = i;
  return materialize_at(corr, waves);
}

Eigen::MatrixXd materialize_at(const WorkingCorrelation& corr, std::span<const int> waves) {
  const int n = static_cast<int>(waves.size());
  check_params(corr);

  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n);
  switch (corr.kind) {
    case CorrelationKind::independence:
      break;
    case CorrelationKind::exchangeable:
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (j != k) R(j, k) = corr.rho;
      break;
    case CorrelationKind::ar1:
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (j != k) R(j, k) = std::pow(corr.rho, std::abs(waves[j] - waves[k]));
      break;
    case CorrelationKind::unstructured:
      for (int j = 0; j < n; ++j) {
        if (waves[j] < 0 || waves[j] >= corr.n_max)
          fail(errc::dimension, "wave index " + std::to_string(waves[j]) +
                                    " exceeds correlation dimension " +
                                    std::to_string(corr.n_max));
        for (int k = 0; k < n; ++k)
          if (j != k) R(j, k) = corr.rho_matrix(waves[j], waves[k]);
      }
      break;
  }
  return R;
}

WorkingCorrelation estimate_corr_params(std::span<const ClusterResidualView> clusters,
                                        CorrelationKind kind, double phi, int p,
                                        int n_max) {
  if (!(phi > 0.0)) fail(errc::bad_value, "phi must be positive");

  WorkingCorrelation corr;
  corr.kind = kind;
  corr.n_max = n_max;

  switch (kind) {
    case CorrelationKind::independence:
      break;

    case CorrelationKind::exchangeable: {
      double num = 0.0;
      long pairs = 0;
      for (const auto& c : clusters) {
        for (int j = 0; j < c.n; ++j)
          for (int k = j + 1; k < c.n; ++k) num += c.r[j] * c.r[k];
        pairs += static_cast<long>(c.n) * (c.n - 1) / 2;
      }
      if (pairs == 0) break;  // size-1 clusters only: rho has no effect
      const double denom = phi * (static_cast<double>(pairs) - p);
      if (!(denom > 0.0))
        fail(errc::insufficient_pairs,
             "exchangeable estimator has non-positive denominator (pairs=" +
                 std::to_string(pairs) + ", p=" + std::to_string(p) + ")");
      const double lower = n_max > 1 ? -1.0 / (n_max - 1) : -1.0;
      corr.rho = std::clamp(num / denom, lower + kCorrClampMargin, 1.0 - kCorrClampMargin);
      break;
    }

    case CorrelationKind::ar1: {
      // Numerator over pairs adjacent on the wave grid; denominator uses
      // the position count sum_i (n_i - 1). The two agree on gap-free
      // panels, which is the mortality case.
      double num = 0.0;
      long positions = 0;
      long adjacent = 0;
      for (const auto& c : clusters) {
        for (int j = 0; j + 1 < c.n; ++j)
          if (c.wave[j + 1] == c.wave[j] + 1) {
            num += c.r[j] * c.r[j + 1];
            ++adjacent;
          }
        positions += c.n > 0 ? c.n - 1 : 0;
      }
      if (adjacent == 0) break;
      const double denom = phi * (static_cast<double>(positions) - p);
      if (!(denom > 0.0))
        fail(errc::insufficient_pairs,
             "ar1 estimator has non-positive denominator (lags=" +
                 std::to_string(positions) + ", p=" + std::to_string(p) + ")");
      corr.rho =
          std::clamp(num / denom, -1.0 + kCorrClampMargin, 1.0 - kCorrClampMargin);
      break;
    }

    case CorrelationKind::unstructured: {
      for (const auto& c : clusters)
        if (c.n != n_max)
          fail(errc::unbalanced,
               "unstructured working correlation requires a balanced panel");
      Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n_max, n_max);
      Eigen::MatrixXd count = Eigen::MatrixXd::Zero(n_max, n_max);
      for (const auto& c : clusters)
        for (int j = 0; j < c.n; ++j)
          for (int k = j + 1; k < c.n; ++k) {
            num(c.wave[j], c.wave[k]) += c.r[j] * c.r[k];
            count(c.wave[j], c.wave[k]) += 1.0;
          }
      corr.rho_matrix = Eigen::MatrixXd::Identity(n_max, n_max);
      for (int j = 0; j < n_max; ++j)
        for (int k = j + 1; k < n_max; ++k) {
          if (count(j, k) == 0.0) continue;  // wave pair never observed
          const double denom = phi * (count(j, k) - p);
          if (!(denom > 0.0))
            fail(errc::insufficient_pairs,
                 "unstructured estimator has non-positive denominator for wave pair (" +
                     std::to_string(j) + "," + std::to_string(k) + "): " +
                     std::to_string(static_cast<long>(count(j, k))) +
                     " clusters, p=" + std::to_string(p));
          const double rho = std::clamp(num(j, k) / denom, -1.0 + kCorrClampMargin,
                                        1.0 - kCorrClampMargin);
          corr.rho_matrix(j, k) = rho;
          corr.rho_matrix(k, j) = rho;
        }
      Eigen::LLT<Eigen::MatrixXd> llt(corr.rho_matrix);
      if (llt.info() != Eigen::Success)
        fail(errc::not_positive_definite,
             "estimated unstructured R is not positive definite");
      break;
    }
  }
  return corr;
}

}  // namespace mortgee
