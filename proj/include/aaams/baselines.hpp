#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "aaams/agglomerator.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"
#include "aaams/postprocess.hpp"
#include "aaams/updates.hpp"

namespace aaams {

struct BaselineConfig {
  double delta = 0.01;
  double grouping_radius = 0.0;  // <= 0: 10 * delta
  int neighbor_count = 64;
  int max_iterations = 300;
  KernelProfile profile;
  int grid_width = 0, grid_height = 0;
  double xi = 1e-8;  // variance floor for degenerate neighbor distances
};

namespace detail {

inline double effective_grouping_radius(const BaselineConfig& cfg) {
  return cfg.grouping_radius > 0.0 ? cfg.grouping_radius : 10.0 * cfg.delta;
}

// Greedy mode grouping in ascending point order.
inline Partition group_modes(const std::vector<Eigen::VectorXd>& converged,
                             double radius) {
  Partition part;
  part.labels.assign(converged.size(), -1);
  for (size_t i = 0; i < converged.size(); ++i) {
    int label = -1;
    for (size_t m = 0; m < part.modes.size(); ++m) {
      if ((converged[i] - part.modes[m]).norm() <= radius) {
        label = static_cast<int>(m);
        break;
      }
    }
    if (label < 0) {
      label = static_cast<int>(part.modes.size());
      part.modes.push_back(converged[i]);
    }
    part.labels[i] = label;
  }
  return part;
}

}  // namespace detail

/// Fixed-bandwidth mean shift: every point iterated to convergence under the
/// global scalar bandwidth, converged points grouped by proximity.
inline Partition run_standard_ms(const PointStore& store, const Scales& sigma,
                                 const BaselineConfig& cfg = {}) {
  if (sigma.range <= 0.0 || (store.domain_split() && sigma.spatial <= 0.0))
    throw std::invalid_argument("run_standard_ms: sigma must be > 0");
  const auto index = build_index(store, cfg.grid_width, cfg.grid_height);
  std::vector<Eigen::VectorXd> converged(static_cast<size_t>(store.size()));
  detail::parallel_for(store.size(), 0, [&](int64_t i) {
    Eigen::VectorXd loc = store.point(i);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      NeighborContext ctx;
      ctx.point_ids = index->k_nearest(loc, cfg.neighbor_count);
      const UpdateResult res =
          update_scalar(loc, ctx, store, sigma, cfg.profile);
      if (res.status != UpdateStatus::kOk) break;
      const double shift = (res.location - loc).norm();
      loc = res.location;
      if (shift <= cfg.delta) break;
    }
    converged[static_cast<size_t>(i)] = std::move(loc);
  });
  return detail::group_modes(converged, detail::effective_grouping_radius(cfg));
}

/// Isotropic variable-bandwidth mean shift: per-point sigma_i from the k-th
/// nearest neighbor distance, iterated over internally range-normalized data.
inline Partition run_variable_ms(const PointStore& store, int k,
                                 double sigma_scale,
                                 const BaselineConfig& cfg = {}) {
  if (k < 1 || k >= store.size())
    throw std::invalid_argument("run_variable_ms: need 1 <= k < n");
  if (sigma_scale <= 0.0)
    throw std::invalid_argument("run_variable_ms: sigma_scale must be > 0");
  const int d = store.dim();
  const int64_t n = store.size();

  // per-dimension range normalization
  Eigen::VectorXd lo = store.points().rowwise().minCoeff();
  Eigen::VectorXd hi = store.points().rowwise().maxCoeff();
  Eigen::VectorXd scale = (hi - lo).cwiseMax(1e-300);
  for (int j = 0; j < d; ++j)
    if (hi[j] == lo[j]) scale[j] = 1.0;
  Eigen::MatrixXd norm_pts = scale.cwiseInverse().asDiagonal() *
                             (store.points().colwise() - lo);
  const PointStore norm_store(std::move(norm_pts), store.domain_split());
  const KdTreeIndex index(norm_store);

  // sigma_i ~ distance to the k-th nearest neighbor (self excluded)
  std::vector<double> sigma_sq(static_cast<size_t>(n));
  detail::parallel_for(n, 0, [&](int64_t i) {
    const auto ids = index.k_nearest(norm_store.point(i), k + 1);
    const double dist =
        (norm_store.point(i) - norm_store.point(ids.back())).norm();
    double s = sigma_scale * dist;
    if (s * s < cfg.xi) s = std::sqrt(cfg.xi);
    sigma_sq[static_cast<size_t>(i)] = s * s;
  });

  // per-point-bandwidth fixed point: weight of x_j is K'(t_j) sigma_j^-(d+2),
  // the sigma_j^-d part coming from the normalization constant
  const double support = std::sqrt(cfg.profile.cutoff_sq());
  std::vector<Eigen::VectorXd> converged(static_cast<size_t>(n));
  detail::parallel_for(n, 0, [&](int64_t i) {
    Eigen::VectorXd loc = norm_store.point(i);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const auto ids = index.k_nearest(loc, cfg.neighbor_count);
      Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
      double den = 0.0;
      for (int j : ids) {
        const double s2 = sigma_sq[static_cast<size_t>(j)];
        const double t = (loc - norm_store.point(j)).squaredNorm() / s2;
        const double w = cfg.profile.weight(t) *
                         std::pow(s2, -0.5 * (d + 2));
        if (w <= 0.0) continue;
        num += w * norm_store.point(j);
        den += w;
      }
      if (den <= 0.0) break;
      const Eigen::VectorXd next = num / den;
      const double shift = (next - loc).norm();
      loc = next;
      if (shift <= cfg.delta) break;
    }
    converged[static_cast<size_t>(i)] = std::move(loc);
  });
  (void)support;

  Partition part = detail::group_modes(
      converged, detail::effective_grouping_radius(cfg));
  // map modes back to the original units
  for (auto& mode : part.modes)
    mode = (scale.asDiagonal() * mode + lo).eval();
  return part;
}

/// Adapter so baseline partitions can flow through the same post-processing
/// and emission paths as the main algorithm.
inline RunResult to_run_result(const Partition& part, const PointStore& store,
                               const Scales& sigma) {
  RunResult r;
  r.labels = part.labels;
  const int k = part.cluster_count();
  const ClusterBandwidth base =
      ClusterBandwidth::isotropic(store.dim(), store.domain_split(), sigma);
  r.cluster_ids.resize(static_cast<size_t>(k));
  r.sizes.assign(static_cast<size_t>(k), 0);
  for (int i = 0; i < k; ++i) r.cluster_ids[static_cast<size_t>(i)] = i;
  for (int lbl : part.labels) ++r.sizes[static_cast<size_t>(lbl)];
  r.modes = part.modes;
  r.bandwidths.assign(static_cast<size_t>(k), base);
  return r;
}

}  // namespace aaams
