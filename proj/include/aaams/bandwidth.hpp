#pragma once

#include <optional>
#include <stdexcept>

#include <Eigen/Core>

#include "aaams/cluster_state.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"

namespace aaams {

struct BandwidthEstimate {
  ClusterBandwidth sigma;
  Eigen::VectorXd eta;
  double weight_total = 0.0;
};

enum class EstimateStatus { kOk, kNoMass };

struct EstimateResult {
  EstimateStatus status = EstimateStatus::kNoMass;
  BandwidthEstimate estimate;
};

/// Density-weighted trajectory variance: eta = wx/w, Sigma = wxx/w - eta eta'
/// + xi I, eigenvalue-clamped at xi. Joint data is estimated per block.
inline EstimateResult estimate_bandwidth(const TrajectoryMoments& moments,
                                         const Scales& xi,
                                         const std::optional<DomainSplit>& split =
                                             std::nullopt) {
  if (moments.count < 1)
    throw std::invalid_argument("estimate_bandwidth: empty trajectory set");
  if (!(moments.w > 0.0)) return {EstimateStatus::kNoMass, {}};
  BandwidthEstimate est;
  est.weight_total = moments.w;
  est.eta = moments.wx / moments.w;
  const Eigen::MatrixXd var =
      moments.wxx / moments.w - est.eta * est.eta.transpose();
  const int d = static_cast<int>(var.rows());
  if (split) {
    const int dr = split->range_dim, ds = split->spatial_dim;
    Eigen::MatrixXd vr = var.topLeftCorner(dr, dr);
    vr.diagonal().array() += xi.range;
    Eigen::MatrixXd vs = var.bottomRightCorner(ds, ds);
    vs.diagonal().array() += xi.spatial;
    est.sigma = ClusterBandwidth::joint(clamp_spd(vr, xi.range),
                                        clamp_spd(vs, xi.spatial));
  } else {
    Eigen::MatrixXd v = var;
    v.diagonal().array() += xi.range;
    est.sigma = ClusterBandwidth::single(clamp_spd(v, xi.range));
    (void)d;
  }
  return {EstimateStatus::kOk, std::move(est)};
}

/// Everything the significance gate needs. `size_threshold` is
/// max(dim(x^r), dim(x^s))^2 (or d^2 single-domain), used when the cheap
/// member-count test replaces ESS on dense data.
struct GateParams {
  double lambda = 5.0;
  bool dense_size_gate = false;
  int size_threshold = 0;
  Scales xi;
  std::optional<DomainSplit> split;
  KernelProfile profile;

  static GateParams make(double lambda, bool dense, const Scales& xi,
                         const std::optional<DomainSplit>& split, int dim,
                         const KernelProfile& profile = {}) {
    GateParams g;
    g.lambda = lambda;
    g.dense_size_gate = dense;
    const int m = split ? std::max(split->range_dim, split->spatial_dim) : dim;
    g.size_threshold = m * m;
    g.xi = xi;
    g.split = split;
    g.profile = profile;
    return g;
  }
};

/// Refresh the cached ESS of a cluster if its trajectory moments changed.
inline void ensure_ess_current(ClusterSet& set, int cid, const GateParams& gate) {
  Cluster& c = set[cid];
  if (c.ess_version == c.moments_version) return;
  if (c.moments.count == 0) {
    c.ess = 0.0;
  } else {
    const EstimateResult est = estimate_bandwidth(c.moments, gate.xi, gate.split);
    c.ess = est.status == EstimateStatus::kOk
                ? effective_sample_size(c, est.estimate.sigma, gate.profile)
                : 0.0;
  }
  c.ess_version = c.moments_version;
}

/// Is this cluster's bandwidth estimate trustworthy?
inline bool bandwidth_confident(ClusterSet& set, int cid, const GateParams& gate) {
  if (gate.dense_size_gate)
    return set.cluster_size(cid) >= gate.size_threshold;
  ensure_ess_current(set, cid, gate);
  return set[cid].ess >= gate.lambda;
}

/// Replace the cluster's bandwidth with the fresh estimate iff the gate
/// passes; otherwise the previous bandwidth is kept untouched.
inline void maybe_update_bandwidth(ClusterSet& set, int cid, const GateParams& gate) {
  Cluster& c = set[cid];
  if (c.absorbed())
    throw std::invalid_argument("maybe_update_bandwidth: absorbed cluster");
  if (c.moments.count == 0) return;
  const EstimateResult est = estimate_bandwidth(c.moments, gate.xi, gate.split);
  if (est.status == EstimateStatus::kNoMass) {
    if (!gate.dense_size_gate) {
      c.ess = 0.0;
      c.ess_version = c.moments_version;
    }
    return;
  }
  bool pass;
  if (gate.dense_size_gate) {
    pass = set.cluster_size(cid) >= gate.size_threshold;
  } else {
    c.ess = effective_sample_size(c, est.estimate.sigma, gate.profile);
    c.ess_version = c.moments_version;
    pass = c.ess >= gate.lambda;
  }
  if (pass) {
    c.bandwidth = est.estimate.sigma;
    c.anisotropic = true;
    if (c.status == ClusterStatus::kScalarPhase)
      c.status = ClusterStatus::kAnisotropicPhase;
  }
}

}  // namespace aaams
