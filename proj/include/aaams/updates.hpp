#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "aaams/bandwidth.hpp"
#include "aaams/cluster_state.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"

namespace aaams {

/// Neighborhood of a cluster location: the points, their (live) owner
/// clusters, and the distinct owner set G.
struct NeighborContext {
  std::vector<int> point_ids;
  std::vector<int> owners;     // parallel to point_ids
  std::vector<int> owner_set;  // unique, ascending

  bool empty() const { return point_ids.empty(); }
};

inline NeighborContext make_context(const std::vector<int>& neighbor_ids,
                                    const ClusterSet& set) {
  NeighborContext ctx;
  ctx.point_ids = neighbor_ids;
  ctx.owners.reserve(neighbor_ids.size());
  for (int id : neighbor_ids) ctx.owners.push_back(set.find(id));
  ctx.owner_set = ctx.owners;
  std::sort(ctx.owner_set.begin(), ctx.owner_set.end());
  ctx.owner_set.erase(std::unique(ctx.owner_set.begin(), ctx.owner_set.end()),
                      ctx.owner_set.end());
  return ctx;
}

enum class UpdateMode { kScalar, kPartial, kFull };
enum class UpdateStatus { kOk, kIsolated, kDegenerate };

struct UpdateResult {
  UpdateStatus status = UpdateStatus::kIsolated;
  Eigen::VectorXd location;
};

namespace detail {

// Mean-shift weight of neighbor `id` under the base isotropic bandwidth.
// Joint data uses the product weight J = K'_r(t1) K_s(t2).
inline double base_weight(const PointStore& store,
                          const Eigen::Ref<const Eigen::VectorXd>& loc, int id,
                          const Scales& sigma, const KernelProfile& profile) {
  if (const auto& split = store.domain_split()) {
    const double tr =
        (loc.head(split->range_dim) - store.range_part(id)).squaredNorm() /
        (sigma.range * sigma.range);
    const double ts =
        (loc.tail(split->spatial_dim) - store.spatial_part(id)).squaredNorm() /
        (sigma.spatial * sigma.spatial);
    return profile.weight(tr) * profile.value(ts);
  }
  const double t =
      (loc - store.point(id)).squaredNorm() / (sigma.range * sigma.range);
  return profile.weight(t);
}

// Same with a full per-cluster bandwidth in place of the base scalar.
inline double banded_weight(const PointStore& store,
                            const Eigen::Ref<const Eigen::VectorXd>& loc, int id,
                            const ClusterBandwidth& bw,
                            const KernelProfile& profile) {
  if (bw.is_joint()) {
    const auto& split = *store.domain_split();
    const double tr = mahalanobis_sq(loc.head(split.range_dim),
                                     store.range_part(id), bw.range());
    const double ts = mahalanobis_sq(loc.tail(split.spatial_dim),
                                     store.spatial_part(id), bw.spatial());
    return profile.weight(tr) * profile.value(ts);
  }
  return profile.weight(mahalanobis_sq(loc, store.point(id), bw.range()));
}

template <typename WeightFn>
UpdateResult weighted_mean(const PointStore& store,
                           const NeighborContext& ctx, WeightFn&& weight_of) {
  Eigen::VectorXd num = Eigen::VectorXd::Zero(store.dim());
  double den = 0.0;
  for (int id : ctx.point_ids) {
    const double w = weight_of(id);
    if (w <= 0.0) continue;
    num += w * store.point(id);
    den += w;
  }
  if (den <= 0.0) return {UpdateStatus::kIsolated, {}};
  return {UpdateStatus::kOk, num / den};
}

}  // namespace detail

/// Standard mean-shift step under the fixed base bandwidth.
inline UpdateResult update_scalar(const Eigen::Ref<const Eigen::VectorXd>& loc,
                                  const NeighborContext& ctx,
                                  const PointStore& store, const Scales& sigma_base,
                                  const KernelProfile& profile = {}) {
  return detail::weighted_mean(store, ctx, [&](int id) {
    return detail::base_weight(store, loc, id, sigma_base, profile);
  });
}

/// Locally homoscedastic step: neighborhood weighted under the cluster's own
/// bandwidth. Equivalently the neighborhood expectation conditioned on the
/// cluster's current distribution estimate.
inline UpdateResult update_partial(const Eigen::Ref<const Eigen::VectorXd>& loc,
                                   const ClusterBandwidth& bandwidth,
                                   const NeighborContext& ctx,
                                   const PointStore& store,
                                   const KernelProfile& profile = {}) {
  return detail::weighted_mean(store, ctx, [&](int id) {
    return detail::banded_weight(store, loc, id, bandwidth, profile);
  });
}

/// Full anisotropic step: per-owner precision accumulation followed by a
/// d x d symmetric solve. Normalizer determinants enter in log space and are
/// shifted by the smallest exponent; the common factor cancels in the solve.
inline UpdateResult update_full(const Eigen::Ref<const Eigen::VectorXd>& loc,
                                const NeighborContext& ctx,
                                const PointStore& store, const ClusterSet& set,
                                const KernelProfile& profile = {},
                                double condition_limit = 1e12) {
  const int d = store.dim();
  if (ctx.owner_set.empty()) return {UpdateStatus::kIsolated, {}};

  double log_ref = std::numeric_limits<double>::infinity();
  for (int g : ctx.owner_set)
    log_ref = std::min(log_ref, set[g].bandwidth.log_det());

  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  double total_weight = 0.0;
  for (int g : ctx.owner_set) {
    const ClusterBandwidth& bw = set[g].bandwidth;
    double w_sum = 0.0;
    Eigen::VectorXd wx_sum = Eigen::VectorXd::Zero(d);
    for (size_t i = 0; i < ctx.point_ids.size(); ++i) {
      if (ctx.owners[i] != g) continue;
      const int id = ctx.point_ids[i];
      const double w = detail::banded_weight(store, loc, id, bw, profile);
      if (w <= 0.0) continue;
      w_sum += w;
      wx_sum += w * store.point(id);
    }
    if (w_sum <= 0.0) continue;
    const double scale = std::exp(-0.5 * (bw.log_det() - log_ref));
    const Eigen::MatrixXd precision = scale * bw.full_inverse();
    lhs += precision * w_sum;
    rhs += precision * wx_sum;
    total_weight += w_sum;
  }
  if (total_weight <= 0.0) return {UpdateStatus::kIsolated, {}};

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (lhs + lhs.transpose()));
  if (solver.info() != Eigen::Success) return {UpdateStatus::kDegenerate, {}};
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  if (lo <= 0.0 || hi / lo > condition_limit)
    return {UpdateStatus::kDegenerate, {}};
  Eigen::VectorXd f = solver.eigenvectors() *
                      solver.eigenvalues().cwiseInverse().asDiagonal() *
                      (solver.eigenvectors().transpose() * rhs);
  return {UpdateStatus::kOk, std::move(f)};
}

/// Joint-domain entry point: the selected update with product kernels and
/// block-diagonal bandwidths. Single-domain stores fall through to the same
/// code paths.
inline UpdateResult update_joint(const Eigen::Ref<const Eigen::VectorXd>& loc,
                                 const NeighborContext& ctx,
                                 const PointStore& store, const ClusterSet& set,
                                 int cluster_id, UpdateMode mode,
                                 const Scales& sigma_base,
                                 const KernelProfile& profile = {}) {
  switch (mode) {
    case UpdateMode::kScalar:
      return update_scalar(loc, ctx, store, sigma_base, profile);
    case UpdateMode::kPartial:
      return update_partial(loc, set[cluster_id].bandwidth, ctx, store, profile);
    case UpdateMode::kFull:
      return update_full(loc, ctx, store, set, profile);
  }
  return {UpdateStatus::kIsolated, {}};
}

/// Update selection: scalar until the cluster's own estimate is significant,
/// full once every neighborhood owner's estimate is, partial in between.
inline UpdateMode dispatch(ClusterSet& set, int cluster_id,
                           const NeighborContext& ctx, const GateParams& gate) {
  if (!bandwidth_confident(set, cluster_id, gate)) return UpdateMode::kScalar;
  if (ctx.owner_set.empty()) return UpdateMode::kScalar;
  for (int g : ctx.owner_set)
    if (!bandwidth_confident(set, g, gate)) return UpdateMode::kPartial;
  return UpdateMode::kFull;
}

}  // namespace aaams
