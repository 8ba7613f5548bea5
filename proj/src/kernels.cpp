#include "mortgee/kernels.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "mortgee/errors.hpp"

#ifdef MORTGEE_HAVE_OPENMP
#include <omp.h>
#endif

namespace mortgee::kernels {

bool openmp_enabled() {
#ifdef MORTGEE_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

ClusterPlan make_plan(const DesignMatrix& design) {
  const std::size_t n_clusters = design.cluster_labels.size();
  ClusterPlan plan;
  plan.rows.assign(n_clusters, {});
  for (std::size_t r = 0; r < design.cluster.size(); ++r)
    plan.rows[static_cast<std::size_t>(design.cluster[r])].push_back(static_cast<int>(r));

  // Canonical cluster order: sort by label, not storage order.
  std::vector<int> order(n_clusters);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return design.cluster_labels[static_cast<std::size_t>(a)] <
           design.cluster_labels[static_cast<std::size_t>(b)];
  });

  ClusterPlan sorted;
  for (int id : order) {
    auto rows = std::move(plan.rows[static_cast<std::size_t>(id)]);
    if (rows.empty()) continue;
    std::vector<int> waves(rows.size());
    bool have_waves = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      waves[i] = design.wave[static_cast<std::size_t>(rows[i])];
      if (waves[i] < 0) have_waves = false;
    }
    if (have_waves) {
      std::vector<std::size_t> idx(rows.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return waves[a] < waves[b]; });
      std::vector<int> rows2(rows.size()), waves2(rows.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        rows2[i] = rows[idx[i]];
        waves2[i] = waves[idx[i]];
      }
      rows = std::move(rows2);
      waves = std::move(waves2);
    } else {
      // No wave bookkeeping: treat stored order as consecutive waves.
      std::iota(waves.begin(), waves.end(), 0);
    }
    sorted.max_cluster_size =
        std::max(sorted.max_cluster_size, static_cast<int>(rows.size()));
    sorted.rows.push_back(std::move(rows));
    sorted.waves.push_back(std::move(waves));
    sorted.cluster_ids.push_back(id);
  }
  return sorted;
}

namespace {

/// Cholesky factors of the materialized correlation matrices, one per
/// distinct wave pattern. Built serially, read concurrently.
class CorrelationCache {
 public:
  CorrelationCache(const ClusterPlan& plan, const WorkingCorrelation& corr) {
    if (corr.kind == CorrelationKind::independence) return;
    for (const auto& waves : plan.waves) {
      auto [it, inserted] = factors_.try_emplace(waves);
      if (inserted) {
        Eigen::MatrixXd R = materialize_at(corr, waves);
        it->second.compute(R);
        if (it->second.info() != Eigen::Success)
          fail(errc::not_positive_definite,
               "working correlation matrix is not positive definite");
      }
    }
  }

  bool identity() const { return factors_.empty(); }

  const Eigen::LLT<Eigen::MatrixXd>& factor(const std::vector<int>& waves) const {
    return factors_.at(waves);
  }

 private:
  std::map<std::vector<int>, Eigen::LLT<Eigen::MatrixXd>> factors_;
};

struct ChunkRange {
  std::size_t begin, end;
};

ChunkRange chunk_range(std::size_t n, int chunk) {
  const auto k = static_cast<std::size_t>(kReductionChunks);
  const auto c = static_cast<std::size_t>(chunk);
  return {n * c / k, n * (c + 1) / k};
}

/// Gathers one cluster's weighted rows: A = diag(sqrt_w) X restricted to
/// the cluster, z likewise.
void gather(const Eigen::MatrixXd& X, const Eigen::VectorXd* z,
            const Eigen::VectorXd& sqrt_w, const std::vector<int>& rows,
            Eigen::MatrixXd& A, Eigen::VectorXd& zv) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  A.resize(n, X.cols());
  if (z) zv.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    A.row(i) = sqrt_w(r) * X.row(r);
    if (z) zv(i) = sqrt_w(r) * (*z)(r);
  }
}

}  // namespace

CrossProducts cross_products(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& sqrt_w, const ClusterPlan& plan,
                             const WorkingCorrelation& corr, Exec exec) {
  const Eigen::Index p = X.cols();
  const CorrelationCache cache(plan, corr);
  const std::size_t nc = plan.n_clusters();

  std::vector<Eigen::MatrixXd> bread_part(kReductionChunks);
  std::vector<Eigen::VectorXd> rhs_part(kReductionChunks);

  auto run_chunk = [&](int chunk) {
    Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd A, SA;
    Eigen::VectorXd z;
    const auto [lo, hi] = chunk_range(nc, chunk);
    for (std::size_t c = lo; c < hi; ++c) {
      gather(X, &y, sqrt_w, plan.rows[c], A, z);
      if (cache.identity()) {
        bread.noalias() += A.transpose() * A;
        rhs.noalias() += A.transpose() * z;
      } else {
        SA = cache.factor(plan.waves[c]).solve(A);
        bread.noalias() += A.transpose() * SA;
        rhs.noalias() += SA.transpose() * z;
      }
    }
    bread_part[static_cast<std::size_t>(chunk)] = std::move(bread);
    rhs_part[static_cast<std::size_t>(chunk)] = std::move(rhs);
  };

  if (exec == Exec::parallel) {
#ifdef MORTGEE_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int chunk = 0; chunk < kReductionChunks; ++chunk) run_chunk(chunk);
  } else {
    for (int chunk = 0; chunk < kReductionChunks; ++chunk) run_chunk(chunk);
  }

  CrossProducts out;
  out.bread = Eigen::MatrixXd::Zero(p, p);
  out.rhs = Eigen::VectorXd::Zero(p);
  for (int chunk = 0; chunk < kReductionChunks; ++chunk) {
    out.bread += bread_part[static_cast<std::size_t>(chunk)];
    out.rhs += rhs_part[static_cast<std::size_t>(chunk)];
  }
  return out;
}

Eigen::MatrixXd sandwich_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& pearson,
                              const Eigen::VectorXd& sqrt_w, const ClusterPlan& plan,
                              const WorkingCorrelation& corr, Exec exec) {
  const Eigen::Index p = X.cols();
  const CorrelationCache cache(plan, corr);
  const std::size_t nc = plan.n_clusters();

  std::vector<Eigen::MatrixXd> meat_part(kReductionChunks);

  auto run_chunk = [&](int chunk) {
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd A;
    Eigen::VectorXd u, su, g;
    const auto [lo, hi] = chunk_range(nc, chunk);
    for (std::size_t c = lo; c < hi; ++c) {
      const auto& rows = plan.rows[c];
      gather(X, nullptr, sqrt_w, rows, A, u);
      u.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i)
        u(static_cast<Eigen::Index>(i)) = pearson(rows[i]);
      if (cache.identity()) {
        g.noalias() = A.transpose() * u;
      } else {
        su = cache.factor(plan.waves[c]).solve(u);
        g.noalias() = A.transpose() * su;
      }
      meat.noalias() += g * g.transpose();
    }
    meat_part[static_cast<std::size_t>(chunk)] = std::move(meat);
  };

  if (exec == Exec::parallel) {
#ifdef MORTGEE_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int chunk = 0; chunk < kReductionChunks; ++chunk) run_chunk(chunk);
  } else {
    for (int chunk = 0; chunk < kReductionChunks; ++chunk) run_chunk(chunk);
  }

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (int chunk = 0; chunk < kReductionChunks; ++chunk)
    meat += meat_part[static_cast<std::size_t>(chunk)];
  return meat;
}

}  // namespace mortgee::kernels
