#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"

namespace aaams {

/// Per-cluster bandwidth. Single-domain clusters hold one SPD matrix; joint
/// clusters hold one per domain (the full matrix is block-diagonal and never
/// gains cross-domain terms).
class ClusterBandwidth {
 public:
  ClusterBandwidth() = default;

  static ClusterBandwidth single(SpdMatrix sigma) {
    ClusterBandwidth b;
    b.range_ = std::move(sigma);
    return b;
  }

  static ClusterBandwidth joint(SpdMatrix range, SpdMatrix spatial) {
    ClusterBandwidth b;
    b.range_ = std::move(range);
    b.spatial_ = std::move(spatial);
    return b;
  }

  static ClusterBandwidth isotropic(int dim,
                                    const std::optional<DomainSplit>& split,
                                    const Scales& sigma) {
    if (split) {
      return joint(
          SpdMatrix::isotropic(split->range_dim, sigma.range * sigma.range),
          SpdMatrix::isotropic(split->spatial_dim,
                               sigma.spatial * sigma.spatial));
    }
    return single(SpdMatrix::isotropic(dim, sigma.range * sigma.range));
  }

  bool is_joint() const { return spatial_.has_value(); }
  const SpdMatrix& range() const { return range_; }
  const SpdMatrix& spatial() const { return *spatial_; }

  int dim() const {
    return range_.dim() + (spatial_ ? spatial_->dim() : 0);
  }

  double log_det() const {
    return range_.log_det() + (spatial_ ? spatial_->log_det() : 0.0);
  }

  /// Full-vector squared Mahalanobis distance (block sums in joint mode).
  double mahalanobis_sq_full(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (!spatial_) return aaams::mahalanobis_sq(x, y, range_);
    const int dr = range_.dim(), ds = spatial_->dim();
    return aaams::mahalanobis_sq(x.head(dr), y.head(dr), range_) +
           aaams::mahalanobis_sq(x.tail(ds), y.tail(ds), *spatial_);
  }

  Eigen::MatrixXd full_matrix() const {
    if (!spatial_) return range_.matrix();
    const int dr = range_.dim(), ds = spatial_->dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dr + ds, dr + ds);
    m.topLeftCorner(dr, dr) = range_.matrix();
    m.bottomRightCorner(ds, ds) = spatial_->matrix();
    return m;
  }

  Eigen::MatrixXd full_inverse() const {
    if (!spatial_) return range_.inverse();
    const int dr = range_.dim(), ds = spatial_->dim();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dr + ds, dr + ds);
    m.topLeftCorner(dr, dr) = range_.inverse();
    m.bottomRightCorner(ds, ds) = spatial_->inverse();
    return m;
  }

  double min_eigenvalue_range() const { return range_.min_eigenvalue(); }
  double min_eigenvalue_spatial() const {
    return spatial_ ? spatial_->min_eigenvalue()
                    : std::numeric_limits<double>::infinity();
  }

 private:
  SpdMatrix range_;
  std::optional<SpdMatrix> spatial_;
};

/// Running density-weighted sums over a cluster's trajectory set. Unions of
/// trajectory sets are realized as plain addition of these sums.
struct TrajectoryMoments {
  double w = 0.0;           // sum rho(v)
  Eigen::VectorXd wx;       // sum rho(v) v
  Eigen::MatrixXd wxx;      // sum rho(v) v v'
  int64_t count = 0;        // |T_u|

  TrajectoryMoments() = default;
  explicit TrajectoryMoments(int dim)
      : wx(Eigen::VectorXd::Zero(dim)), wxx(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::Ref<const Eigen::VectorXd>& v, double rho) {
    w += rho;
    wx += rho * v;
    // materialize the outer product first: its entries are bitwise symmetric,
    // and scaling them entrywise keeps wxx exactly symmetric under summation
    const Eigen::MatrixXd outer = v * v.transpose();
    wxx += rho * outer;
    ++count;
  }

  TrajectoryMoments& operator+=(const TrajectoryMoments& o) {
    w += o.w;
    wx += o.wx;
    wxx += o.wxx;
    count += o.count;
    return *this;
  }

  void clear() {
    w = 0.0;
    wx.setZero();
    wxx.setZero();
    count = 0;
  }
};

enum class ClusterStatus { kScalarPhase, kAnisotropicPhase, kConverged, kAbsorbed };

struct Cluster {
  int id = -1;
  Eigen::VectorXd location;   // u^tau
  Eigen::VectorXd shift;      // m_u
  double shift_norm = std::numeric_limits<double>::infinity();
  ClusterBandwidth bandwidth;
  TrajectoryMoments moments;
  std::vector<Eigen::VectorXd> reservoir;  // recent trajectory points, for ESS
  double ess = 0.0;
  std::uint64_t moments_version = 0;
  std::uint64_t ess_version = std::numeric_limits<std::uint64_t>::max();
  ClusterStatus status = ClusterStatus::kScalarPhase;
  bool anisotropic = false;   // passed the bandwidth gate at least once
  int perturb_count = 0;
  bool just_perturbed = false;
  int updates_done = 0;
  double density_here = 0.0;  // rho at the current location
  std::vector<int> neighbor_cache;
  bool neighbors_valid = false;

  bool converged() const { return status == ClusterStatus::kConverged; }
  bool absorbed() const { return status == ClusterStatus::kAbsorbed; }
};

/// All clusters plus the point-to-cluster membership (union-find keyed by
/// point id, which doubles as the principle member's cluster id).
class ClusterSet {
 public:
  static constexpr int kReservoirCap = 64;

  ClusterSet(const PointStore& store, const Scales& sigma_base)
      : clusters_(static_cast<size_t>(store.size())),
        parent_(static_cast<size_t>(store.size())),
        sizes_(static_cast<size_t>(store.size()), 1),
        alive_count_(store.size()) {
    const int d = store.dim();
    const ClusterBandwidth base =
        ClusterBandwidth::isotropic(d, store.domain_split(), sigma_base);
    for (int64_t i = 0; i < store.size(); ++i) {
      Cluster& c = clusters_[static_cast<size_t>(i)];
      c.id = static_cast<int>(i);
      c.location = store.point(i);
      c.shift = Eigen::VectorXd::Zero(d);
      c.bandwidth = base;
      c.moments = TrajectoryMoments(d);
      parent_[static_cast<size_t>(i)] = static_cast<int>(i);
    }
  }

  int64_t size() const { return static_cast<int64_t>(clusters_.size()); }
  int64_t alive_count() const { return alive_count_; }

  Cluster& operator[](int id) { return clusters_[static_cast<size_t>(id)]; }
  const Cluster& operator[](int id) const {
    return clusters_[static_cast<size_t>(id)];
  }

  /// Owner cluster of a point (or the live representative of a cluster id).
  int find(int id) const {
    int root = id;
    while (parent_[static_cast<size_t>(root)] != root)
      root = parent_[static_cast<size_t>(root)];
    while (parent_[static_cast<size_t>(id)] != id) {
      const int next = parent_[static_cast<size_t>(id)];
      parent_[static_cast<size_t>(id)] = root;
      id = next;
    }
    return root;
  }

  int cluster_size(int cid) const { return sizes_[static_cast<size_t>(cid)]; }

  /// Merge `loser` into `winner`: membership union plus moment addition.
  void absorb(int winner, int loser) {
    if (winner == loser)
      throw std::invalid_argument("absorb: winner and loser are the same");
    Cluster& w = clusters_[static_cast<size_t>(winner)];
    Cluster& l = clusters_[static_cast<size_t>(loser)];
    if (w.absorbed() || l.absorbed())
      throw std::invalid_argument("absorb: cluster already absorbed");
    w.moments += l.moments;
    ++w.moments_version;
    merge_reservoirs(w.reservoir, l.reservoir);
    parent_[static_cast<size_t>(loser)] = winner;
    sizes_[static_cast<size_t>(winner)] += sizes_[static_cast<size_t>(loser)];
    sizes_[static_cast<size_t>(loser)] = 0;
    l.status = ClusterStatus::kAbsorbed;
    l.moments.clear();
    l.reservoir.clear();
    l.neighbor_cache.clear();
    l.neighbors_valid = false;
    --alive_count_;
  }

  std::vector<int> alive_ids() const {
    std::vector<int> ids;
    ids.reserve(static_cast<size_t>(alive_count_));
    for (const Cluster& c : clusters_)
      if (!c.absorbed()) ids.push_back(c.id);
    return ids;
  }

  void push_trajectory_point(int cid, const Eigen::Ref<const Eigen::VectorXd>& v,
                             double rho) {
    Cluster& c = clusters_[static_cast<size_t>(cid)];
    c.moments.add(v, rho);
    ++c.moments_version;
    if (static_cast<int>(c.reservoir.size()) < kReservoirCap) {
      c.reservoir.emplace_back(v);
    } else {
      // ring overwrite keeps the newest points without reshuffling
      c.reservoir[static_cast<size_t>(c.moments.count - 1) % kReservoirCap] = v;
    }
  }

 private:
  static void merge_reservoirs(std::vector<Eigen::VectorXd>& dst,
                               std::vector<Eigen::VectorXd>& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()),
               std::make_move_iterator(src.end()));
    src.clear();
    const size_t m = dst.size();
    if (m <= kReservoirCap) return;
    std::vector<Eigen::VectorXd> kept;
    kept.reserve(kReservoirCap);
    for (int j = 0; j < kReservoirCap; ++j)
      kept.push_back(std::move(dst[(static_cast<size_t>(j) * m) / kReservoirCap]));
    dst = std::move(kept);
  }

  std::vector<Cluster> clusters_;
  mutable std::vector<int> parent_;
  std::vector<int> sizes_;
  int64_t alive_count_;
};

/// Alive-id snapshot per iteration; cardinality may only shrink over time.
struct AliveSet {
  std::vector<int> ids;
  int iteration = 0;
};

inline ClusterSet init_clusters(const PointStore& store, const Scales& sigma_base) {
  return ClusterSet(store, sigma_base);
}

/// Kernel-weighted trajectory point count against a candidate bandwidth.
/// Exact over the stored trajectory whenever it fits the reservoir; larger
/// sets are estimated from the retained subsample, scaled back to count units.
inline double effective_sample_size(const Cluster& c,
                                    const ClusterBandwidth& estimate,
                                    const KernelProfile& profile = {}) {
  if (c.moments.count == 0 || c.reservoir.empty()) return 0.0;
  Eigen::VectorXd tbar = Eigen::VectorXd::Zero(c.reservoir.front().size());
  for (const auto& v : c.reservoir) tbar += v;
  tbar /= static_cast<double>(c.reservoir.size());
  const double w0 = profile.weight(0.0);
  double sum = 0.0;
  for (const auto& v : c.reservoir)
    sum += profile.weight(estimate.mahalanobis_sq_full(tbar, v));
  const double scale =
      static_cast<double>(c.moments.count) / static_cast<double>(c.reservoir.size());
  return scale * sum / w0;
}

}  // namespace aaams
