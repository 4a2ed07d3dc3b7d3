#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "aaams/bandwidth.hpp"
#include "aaams/cluster_state.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"
#include "aaams/updates.hpp"

namespace aaams {

struct PerturbConfig {
  bool enabled = false;
  int max_count = 3;
  double initial_magnitude = 0.0;  // <= 0: 2 * delta
  double damping = 0.5;
};

struct RunConfig {
  Scales sigma_base = Scales::uniform(1.0);
  Scales epsilon = Scales::uniform(0.0);  // <= 0: sigma_base per domain
  double lambda = 5.0;                    // minimum ESS
  double delta = 0.01;                    // convergence epsilon on ||m_u||
  Scales xi = Scales::uniform(0.0);       // <= 0: 1e-4 * sigma_base^2 per domain
  int neighbor_count = 64;                // n'
  int max_iterations = 300;
  PerturbConfig perturbation;
  bool dense_size_gate = false;           // member-count gate instead of ESS
  std::uint64_t seed = 0;
  int grid_width = 0, grid_height = 0;    // > 0: structured spatial grid index
  KernelProfile profile;
  int threads = 0;                        // precompute parallelism; 0 = auto
  std::ostream* diagnostics = nullptr;    // per-iteration JSON lines
};

struct IterationStats {
  int iteration = 0;
  std::int64_t alive = 0;
  std::int64_t converged = 0;
  std::int64_t merges = 0;
};

struct RunResult {
  std::vector<int> labels;                 // per point: surviving cluster id
  std::vector<int> cluster_ids;            // ascending
  std::vector<Eigen::VectorXd> modes;      // aligned with cluster_ids
  std::vector<ClusterBandwidth> bandwidths;
  std::vector<int> sizes;
  int iterations_used = 0;
  std::vector<std::int64_t> alive_per_iteration;
  bool max_iterations_reached = false;
};

/// Merge predicate: the moving cluster is closing in on y, and the shift
/// bearings at both locations point the same way.
inline bool merge_check(const Eigen::Ref<const Eigen::VectorXd>& u_loc,
                        const Eigen::Ref<const Eigen::VectorXd>& y,
                        const Eigen::Ref<const Eigen::VectorXd>& m_u,
                        const Eigen::Ref<const Eigen::VectorXd>& y_shift,
                        const Eigen::Ref<const Eigen::VectorXd>& prev_u_loc) {
  return (u_loc - y).squaredNorm() < (prev_u_loc - y).squaredNorm() &&
         m_u.dot(y_shift) > 0.0;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Alg-style driver: per iteration each live unconverged cluster is updated,
/// scanned for merges, and gets its bandwidth refreshed; repeated until every
/// shift magnitude drops to delta or the iteration budget runs out.
class AgglomerationEngine {
 public:
  using Observer =
      std::function<void(const AgglomerationEngine&, const IterationStats&)>;

  AgglomerationEngine(const PointStore& store, RunConfig config)
      : store_(store), cfg_(normalized(config, store)) {
    index_ = build_index(store_, cfg_.grid_width, cfg_.grid_height);
    density_ = compute_density(store_, cfg_.sigma_base, *index_, cfg_.profile,
                               cfg_.threads);
    clusters_ = std::make_unique<ClusterSet>(store_, cfg_.sigma_base);
    gate_ = GateParams::make(cfg_.lambda, cfg_.dense_size_gate, cfg_.xi,
                             store_.domain_split(), store_.dim(), cfg_.profile);
    prepare_first_sweep();
  }

  static RunConfig normalized(RunConfig cfg, const PointStore& store) {
    if (cfg.sigma_base.range <= 0.0 ||
        (store.domain_split() && cfg.sigma_base.spatial <= 0.0))
      throw std::invalid_argument("RunConfig: sigma_base must be > 0");
    if (cfg.delta <= 0.0)
      throw std::invalid_argument("RunConfig: delta must be > 0");
    if (cfg.max_iterations < 1)
      throw std::invalid_argument("RunConfig: max_iterations must be >= 1");
    if (cfg.epsilon.range <= 0.0) cfg.epsilon.range = cfg.sigma_base.range;
    if (cfg.epsilon.spatial <= 0.0) cfg.epsilon.spatial = cfg.sigma_base.spatial;
    if (cfg.xi.range <= 0.0)
      cfg.xi.range = 1e-4 * cfg.sigma_base.range * cfg.sigma_base.range;
    if (cfg.xi.spatial <= 0.0)
      cfg.xi.spatial = 1e-4 * cfg.sigma_base.spatial * cfg.sigma_base.spatial;
    if (cfg.perturbation.initial_magnitude <= 0.0)
      cfg.perturbation.initial_magnitude = 2.0 * cfg.delta;
    if (cfg.neighbor_count < 1)
      throw std::invalid_argument("RunConfig: neighbor_count must be >= 1");
    return cfg;
  }

  /// One full pass over the alive set. Returns true while work remains.
  bool step() {
    const std::vector<int> order = clusters_->alive_ids();
    std::int64_t merges = 0;
    for (int u : order) {
      Cluster& c = (*clusters_)[u];
      if (c.absorbed() || c.converged()) continue;

      if (!c.neighbors_valid) {
        c.neighbor_cache = index_->k_nearest(c.location, cfg_.neighbor_count);
        c.neighbors_valid = true;
      }
      const NeighborContext ctx = make_context(c.neighbor_cache, *clusters_);
      const UpdateMode mode = dispatch(*clusters_, u, ctx, gate_);

      UpdateResult res;
      if (mode == UpdateMode::kScalar && c.updates_done == 0) {
        // first scalar step was cached by the preparation sweep
        if (first_shifts_.isolated[static_cast<size_t>(u)]) {
          res.status = UpdateStatus::kIsolated;
        } else {
          res.status = UpdateStatus::kOk;
          res.location = c.location + first_shifts_.of(u);
        }
      } else {
        res = compute_update(c, ctx, mode);
      }
      if (res.status == UpdateStatus::kIsolated) {
        c.shift.setZero();
        c.shift_norm = 0.0;
        c.status = ClusterStatus::kConverged;
        continue;
      }

      const Eigen::VectorXd prev_loc = c.location;
      c.shift = res.location - prev_loc;
      c.shift_norm = c.shift.norm();
      c.location = res.location;
      ++c.updates_done;
      c.density_here = density_at(c.location, density_, *index_);
      clusters_->push_trajectory_point(u, c.location, c.density_here);

      c.neighbor_cache = index_->k_nearest(c.location, cfg_.neighbor_count);
      c.neighbors_valid = true;

      for (int y : c.neighbor_cache) {
        const int other = clusters_->find(y);
        if (other == u) continue;
        if (!within_epsilon(c.location, y)) continue;
        if (!merge_check(c.location, store_.point(y), c.shift,
                         first_shifts_.of(y), prev_loc))
          continue;
        const double rho_u = c.density_here;
        const double rho_o = (*clusters_)[other].density_here;
        int winner = u, loser = other;
        if (rho_o > rho_u || (rho_o == rho_u && other < u)) {
          winner = other;
          loser = u;
        }
        clusters_->absorb(winner, loser);
        ++merges;
        if (loser == u) break;
      }
      if (c.absorbed()) continue;

      maybe_update_bandwidth(*clusters_, u, gate_);

      if (c.shift_norm <= cfg_.delta) {
        if (cfg_.perturbation.enabled &&
            c.perturb_count < cfg_.perturbation.max_count) {
          perturb(c);
        } else {
          c.status = ClusterStatus::kConverged;
        }
      }
    }

    ++iteration_;
    IterationStats stats;
    stats.iteration = iteration_;
    stats.alive = clusters_->alive_count();
    stats.merges = merges;
    for (int id : clusters_->alive_ids())
      if ((*clusters_)[id].converged()) ++stats.converged;
    if (!alive_history_.empty() && stats.alive > alive_history_.back())
      throw std::logic_error("alive set grew between iterations");
    alive_history_.push_back(stats.alive);
    if (cfg_.diagnostics) {
      *cfg_.diagnostics << "{\"iteration\":" << stats.iteration
                        << ",\"alive_count\":" << stats.alive
                        << ",\"converged_count\":" << stats.converged
                        << ",\"merges_this_iter\":" << stats.merges << "}\n";
    }
    last_stats_ = stats;
    return unconverged_remaining();
  }

  RunResult run_to_convergence(const Observer& observer = {}) {
    bool more = unconverged_remaining();
    while (more && iteration_ < cfg_.max_iterations) {
      more = step();
      if (observer) observer(*this, last_stats_);
    }
    return make_result(more);
  }

  /// Displace a just-converged cluster along a seeded pseudo-random direction
  /// with geometrically damped magnitude; the displaced point is not added to
  /// the trajectory set.
  void perturb(Cluster& c) {
    const int k = c.perturb_count;
    const double mag = cfg_.perturbation.initial_magnitude *
                       std::pow(cfg_.perturbation.damping, k);
    std::mt19937_64 rng(detail::splitmix64(
        cfg_.seed ^ detail::splitmix64(static_cast<std::uint64_t>(c.id) * 2654435761ULL +
                                       static_cast<std::uint64_t>(k))));
    std::normal_distribution<double> normal;
    Eigen::VectorXd dir(store_.dim());
    for (int d = 0; d < store_.dim(); ++d) dir[d] = normal(rng);
    const double n = dir.norm();
    if (n < 1e-12) dir.setUnit(0); else dir /= n;
    c.location += mag * dir;
    c.shift = mag * dir;
    c.shift_norm = mag;
    ++c.perturb_count;
    c.neighbors_valid = false;
    c.density_here = density_at(c.location, density_, *index_);
  }

  bool unconverged_remaining() const {
    for (int id : clusters_->alive_ids())
      if (!(*clusters_)[id].converged()) return true;
    return false;
  }

  const PointStore& store() const { return store_; }
  const RunConfig& config() const { return cfg_; }
  const ClusterSet& clusters() const { return *clusters_; }
  AliveSet alive_set() const { return {clusters_->alive_ids(), iteration_}; }
  const NeighborIndex& index() const { return *index_; }
  const DensityField& density() const { return density_; }
  const FirstShiftCache& first_shifts() const { return first_shifts_; }
  int iteration() const { return iteration_; }
  const std::vector<std::int64_t>& alive_history() const { return alive_history_; }

 private:
  void prepare_first_sweep() {
    const auto n = store_.size();
    first_shifts_.shift = Eigen::MatrixXd::Zero(store_.dim(), n);
    first_shifts_.isolated.assign(static_cast<size_t>(n), 0);
    detail::parallel_for(n, cfg_.threads, [&](int64_t i) {
      Cluster& c = (*clusters_)[static_cast<int>(i)];
      c.neighbor_cache =
          index_->k_nearest(store_.point(i), cfg_.neighbor_count);
      c.neighbors_valid = true;
      NeighborContext ctx;
      ctx.point_ids = c.neighbor_cache;
      const UpdateResult res = update_scalar(store_.point(i), ctx, store_,
                                             cfg_.sigma_base, cfg_.profile);
      if (res.status == UpdateStatus::kOk)
        first_shifts_.shift.col(i) = res.location - store_.point(i);
      else
        first_shifts_.isolated[static_cast<size_t>(i)] = 1;
      c.density_here = density_.at(static_cast<int>(i));
    });
  }

  bool within_epsilon(const Eigen::Ref<const Eigen::VectorXd>& loc,
                      int point_id) const {
    if (const auto& split = store_.domain_split()) {
      const double dr =
          (loc.head(split->range_dim) - store_.range_part(point_id)).norm();
      if (dr > cfg_.epsilon.range) return false;
      const double ds =
          (loc.tail(split->spatial_dim) - store_.spatial_part(point_id)).norm();
      return ds <= cfg_.epsilon.spatial;
    }
    return (loc - store_.point(point_id)).norm() <= cfg_.epsilon.range;
  }

  UpdateResult compute_update(const Cluster& c, const NeighborContext& ctx,
                              UpdateMode mode) {
    switch (mode) {
      case UpdateMode::kScalar:
        return update_scalar(c.location, ctx, store_, cfg_.sigma_base,
                             cfg_.profile);
      case UpdateMode::kPartial:
        return update_partial(c.location, c.bandwidth, ctx, store_, cfg_.profile);
      case UpdateMode::kFull: {
        UpdateResult res =
            update_full(c.location, ctx, store_, *clusters_, cfg_.profile);
        if (res.status == UpdateStatus::kDegenerate)
          res = update_partial(c.location, c.bandwidth, ctx, store_, cfg_.profile);
        return res;
      }
    }
    return {UpdateStatus::kIsolated, {}};
  }

  RunResult make_result(bool still_unconverged) const {
    RunResult r;
    r.labels.resize(static_cast<size_t>(store_.size()));
    for (int64_t i = 0; i < store_.size(); ++i)
      r.labels[static_cast<size_t>(i)] = clusters_->find(static_cast<int>(i));
    r.cluster_ids = clusters_->alive_ids();
    r.modes.reserve(r.cluster_ids.size());
    r.bandwidths.reserve(r.cluster_ids.size());
    r.sizes.reserve(r.cluster_ids.size());
    for (int id : r.cluster_ids) {
      r.modes.push_back((*clusters_)[id].location);
      r.bandwidths.push_back((*clusters_)[id].bandwidth);
      r.sizes.push_back(clusters_->cluster_size(id));
    }
    r.iterations_used = iteration_;
    r.alive_per_iteration = alive_history_;
    r.max_iterations_reached = still_unconverged;
    return r;
  }

  const PointStore& store_;
  RunConfig cfg_;
  std::unique_ptr<NeighborIndex> index_;
  DensityField density_;
  std::unique_ptr<ClusterSet> clusters_;
  GateParams gate_;
  FirstShiftCache first_shifts_;
  int iteration_ = 0;
  std::vector<std::int64_t> alive_history_;
  IterationStats last_stats_;
};

inline RunResult run(const PointStore& store, const RunConfig& config,
                     const AgglomerationEngine::Observer& observer = {}) {
  AgglomerationEngine engine(store, config);
  return engine.run_to_convergence(observer);
}

}  // namespace aaams
