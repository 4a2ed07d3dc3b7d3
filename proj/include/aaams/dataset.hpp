#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "aaams/geometry.hpp"

namespace aaams {

/// Sub-vector sizes for joint-domain data: the first `range_dim` components
/// form the range domain (e.g. L*a*b*), the remaining `spatial_dim` the
/// spatial domain (e.g. pixel row/col).
struct DomainSplit {
  int range_dim = 0;
  int spatial_dim = 0;
};

/// One scale value per domain. Single-domain data only reads `range`.
struct Scales {
  double range = 1.0;
  double spatial = 1.0;

  static Scales uniform(double v) { return Scales{v, v}; }
};

/// Immutable point set, stored column-per-point.
class PointStore {
 public:
  PointStore(Eigen::MatrixXd points_cols,
             std::optional<DomainSplit> split = std::nullopt)
      : points_(std::move(points_cols)), split_(split) {
    if (points_.cols() < 1 || points_.rows() < 1)
      throw std::invalid_argument("PointStore: need at least one point");
    if (split_) {
      if (split_->range_dim < 1 || split_->spatial_dim < 1 ||
          split_->range_dim + split_->spatial_dim != dim())
        throw std::invalid_argument("PointStore: bad domain split");
    }
  }

  int64_t size() const { return points_.cols(); }
  int dim() const { return static_cast<int>(points_.rows()); }
  const std::optional<DomainSplit>& domain_split() const { return split_; }

  Eigen::MatrixXd::ConstColXpr point(int64_t i) const { return points_.col(i); }
  const Eigen::MatrixXd& points() const { return points_; }

  auto range_part(int64_t i) const {
    return points_.col(i).head(split_ ? split_->range_dim : dim());
  }
  auto spatial_part(int64_t i) const {
    return points_.col(i).tail(split_ ? split_->spatial_dim : 0);
  }

  /// CSV: one row per point, comma- or whitespace-separated numeric columns.
  static PointStore from_csv(const std::string& path,
                             std::optional<DomainSplit> split = std::nullopt);
  void save_csv(const std::string& path) const;

  /// Binary little-endian layout: [n: u64][d: u64][n*d doubles row-major].
  static PointStore from_binary(const std::string& path,
                                std::optional<DomainSplit> split = std::nullopt);
  void save_binary(const std::string& path) const;

 private:
  Eigen::MatrixXd points_;  // d x n
  std::optional<DomainSplit> split_;
};

/// Exact neighbor queries over an immutable point set. Returned ids are
/// ordered by (distance, id) ascending.
class NeighborIndex {
 public:
  virtual ~NeighborIndex() = default;
  virtual std::vector<int> k_nearest(const Eigen::Ref<const Eigen::VectorXd>& q,
                                     int k) const = 0;
  virtual std::vector<int> radius(const Eigen::Ref<const Eigen::VectorXd>& q,
                                  double r) const = 0;
  virtual int nearest(const Eigen::Ref<const Eigen::VectorXd>& q) const = 0;
};

namespace detail {

// (squared distance, id) with deterministic id tie-break.
using DistId = std::pair<double, int>;

inline void sort_dist_ids(std::vector<DistId>& v) {
  std::sort(v.begin(), v.end());
}

inline std::vector<int> strip_ids(const std::vector<DistId>& v) {
  std::vector<int> ids;
  ids.reserve(v.size());
  for (const auto& [d, i] : v) ids.push_back(i);
  return ids;
}

}  // namespace detail

/// kd-tree over the full d-dimensional space.
class KdTreeIndex : public NeighborIndex {
 public:
  explicit KdTreeIndex(const PointStore& store, int leaf_size = 16)
      : pts_(store.points()), leaf_size_(std::max(1, leaf_size)) {
    ids_.resize(store.size());
    std::iota(ids_.begin(), ids_.end(), 0);
    root_ = build(0, static_cast<int>(ids_.size()));
  }

  std::vector<int> k_nearest(const Eigen::Ref<const Eigen::VectorXd>& q,
                             int k) const override {
    k = std::min<int>(k, static_cast<int>(pts_.cols()));
    if (k <= 0) return {};
    std::priority_queue<detail::DistId> heap;  // max-heap on (dist, id)
    search_knn(root_, q, k, heap);
    std::vector<detail::DistId> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    detail::sort_dist_ids(out);
    return detail::strip_ids(out);
  }

  std::vector<int> radius(const Eigen::Ref<const Eigen::VectorXd>& q,
                          double r) const override {
    std::vector<detail::DistId> out;
    search_radius(root_, q, r * r, out);
    detail::sort_dist_ids(out);
    return detail::strip_ids(out);
  }

  int nearest(const Eigen::Ref<const Eigen::VectorXd>& q) const override {
    auto ids = k_nearest(q, 1);
    return ids.empty() ? -1 : ids[0];
  }

 private:
  struct Node {
    int axis = -1;
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf id range
    bool leaf = false;
  };

  int build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= leaf_size_) {
      node.leaf = true;
      // deterministic leaf order
      std::sort(ids_.begin() + begin, ids_.begin() + end);
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    // split along the widest dimension at the median
    int axis = 0;
    double best_extent = -1.0;
    for (int d = 0; d < pts_.rows(); ++d) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int i = begin; i < end; ++i) {
        const double v = pts_(d, ids_[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_extent) {
        best_extent = hi - lo;
        axis = d;
      }
    }
    const int mid = begin + (end - begin) / 2;
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid,
                     ids_.begin() + end, [&](int a, int b) {
                       const double va = pts_(axis, a), vb = pts_(axis, b);
                       return va < vb || (va == vb && a < b);
                     });
    node.axis = axis;
    node.split = pts_(axis, ids_[mid]);
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search_knn(int node_id, const Eigen::Ref<const Eigen::VectorXd>& q,
                  int k, std::priority_queue<detail::DistId>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.leaf) {
      for (int i = node.begin; i < node.end; ++i) {
        const int id = ids_[i];
        const double d2 = (q - pts_.col(id)).squaredNorm();
        detail::DistId cand{d2, id};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_knn(near, q, k, heap);
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().first)
      search_knn(far, q, k, heap);
  }

  void search_radius(int node_id, const Eigen::Ref<const Eigen::VectorXd>& q,
                     double r2, std::vector<detail::DistId>& out) const {
    const Node& node = nodes_[node_id];
    if (node.leaf) {
      for (int i = node.begin; i < node.end; ++i) {
        const int id = ids_[i];
        const double d2 = (q - pts_.col(id)).squaredNorm();
        if (d2 <= r2) out.push_back({d2, id});
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_radius(near, q, r2, out);
    if (delta * delta <= r2) search_radius(far, q, r2, out);
  }

  const Eigen::MatrixXd& pts_;
  int leaf_size_;
  std::vector<int> ids_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Spatial bucket grid for structured (image) data. k_nearest ranks by the
/// spatial sub-vector only; radius and nearest are exact in the full space
/// (full distance lower-bounds never undercut the spatial ring bound).
class GridIndex : public NeighborIndex {
 public:
  GridIndex(const PointStore& store, int width, int height)
      : store_(store), width_(width), height_(height) {
    if (!store.domain_split())
      throw std::invalid_argument("GridIndex: store has no domain split");
    if (width < 1 || height < 1)
      throw std::invalid_argument("GridIndex: bad grid dimensions");
    split_ = *store.domain_split();
    if (split_.spatial_dim != 2)
      throw std::invalid_argument("GridIndex: spatial domain must be 2-D");
    buckets_.resize(static_cast<size_t>(width_) * height_);
    for (int64_t i = 0; i < store.size(); ++i) {
      const auto sp = store.spatial_part(i);
      const int r = clampi(static_cast<int>(std::floor(sp[0])), 0, height_ - 1);
      const int c = clampi(static_cast<int>(std::floor(sp[1])), 0, width_ - 1);
      buckets_[static_cast<size_t>(r) * width_ + c].push_back(static_cast<int>(i));
    }
  }

  std::vector<int> k_nearest(const Eigen::Ref<const Eigen::VectorXd>& q,
                             int k) const override {
    k = std::min<int>(k, static_cast<int>(store_.size()));
    if (k <= 0) return {};
    const double qr = q[split_.range_dim], qc = q[split_.range_dim + 1];
    std::priority_queue<detail::DistId> heap;
    const int max_ring = std::max(width_, height_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (static_cast<int>(heap.size()) == k) {
        const double bound = std::max(0.0, static_cast<double>(ring - 1));
        if (bound * bound > heap.top().first) break;
      }
      for_ring_cells(qr, qc, ring, [&](int id) {
        const auto sp = store_.spatial_part(id);
        const double dr = sp[0] - qr, dc = sp[1] - qc;
        detail::DistId cand{dr * dr + dc * dc, id};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      });
    }
    std::vector<detail::DistId> out;
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    detail::sort_dist_ids(out);
    return detail::strip_ids(out);
  }

  std::vector<int> radius(const Eigen::Ref<const Eigen::VectorXd>& q,
                          double r) const override {
    std::vector<detail::DistId> out;
    const double qr = q[split_.range_dim], qc = q[split_.range_dim + 1];
    const double r2 = r * r;
    const int max_ring = static_cast<int>(std::ceil(r)) + 1;
    for (int ring = 0; ring <= max_ring; ++ring) {
      for_ring_cells(qr, qc, ring, [&](int id) {
        const double d2 = (q - store_.point(id)).squaredNorm();
        if (d2 <= r2) out.push_back({d2, id});
      });
    }
    detail::sort_dist_ids(out);
    return detail::strip_ids(out);
  }

  int nearest(const Eigen::Ref<const Eigen::VectorXd>& q) const override {
    const double qr = q[split_.range_dim], qc = q[split_.range_dim + 1];
    detail::DistId best{std::numeric_limits<double>::infinity(), -1};
    const int max_ring = std::max(width_, height_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best.second >= 0) {
        const double bound = std::max(0.0, static_cast<double>(ring - 1));
        if (bound * bound > best.first) break;
      }
      for_ring_cells(qr, qc, ring, [&](int id) {
        const double d2 = (q - store_.point(id)).squaredNorm();
        if (detail::DistId{d2, id} < best) best = {d2, id};
      });
    }
    return best.second;
  }

 private:
  static int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

  template <typename Fn>
  void for_ring_cells(double qr, double qc, int ring, Fn&& fn) const {
    const int cr = clampi(static_cast<int>(std::floor(qr)), 0, height_ - 1);
    const int cc = clampi(static_cast<int>(std::floor(qc)), 0, width_ - 1);
    const auto visit = [&](int r, int c) {
      if (r < 0 || r >= height_ || c < 0 || c >= width_) return;
      for (int id : buckets_[static_cast<size_t>(r) * width_ + c]) fn(id);
    };
    if (ring == 0) {
      visit(cr, cc);
      return;
    }
    for (int c = cc - ring; c <= cc + ring; ++c) {
      visit(cr - ring, c);
      visit(cr + ring, c);
    }
    for (int r = cr - ring + 1; r <= cr + ring - 1; ++r) {
      visit(r, cc - ring);
      visit(r, cc + ring);
    }
  }

  const PointStore& store_;
  int width_, height_;
  DomainSplit split_;
  std::vector<std::vector<int>> buckets_;
};

inline std::unique_ptr<NeighborIndex> build_index(const PointStore& store,
                                                  int grid_width = 0,
                                                  int grid_height = 0) {
  if (grid_width > 0 && grid_height > 0)
    return std::make_unique<GridIndex>(store, grid_width, grid_height);
  return std::make_unique<KdTreeIndex>(store);
}

/// Per-point local density, globally normalized so the maximum is 1.
struct DensityField {
  std::vector<double> rho;

  double at(int id) const { return rho[static_cast<size_t>(id)]; }
};

namespace detail {

template <typename Fn>
void parallel_for(int64_t n, int threads, Fn&& fn) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int workers = threads > 0 ? std::min(threads, hw) : hw;
  workers = static_cast<int>(std::min<int64_t>(workers, n));
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int64_t begin = w * chunk;
    const int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (int64_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Kernel density contribution of point j as seen from q, with the base
// (isotropic per-domain) bandwidth.
inline double base_kernel_value(const PointStore& store,
                                const Eigen::Ref<const Eigen::VectorXd>& q,
                                int j, const Scales& sigma,
                                const KernelProfile& profile) {
  if (store.domain_split()) {
    const auto& split = *store.domain_split();
    const double tr =
        (q.head(split.range_dim) - store.range_part(j)).squaredNorm() /
        (sigma.range * sigma.range);
    const double ts =
        (q.tail(split.spatial_dim) - store.spatial_part(j)).squaredNorm() /
        (sigma.spatial * sigma.spatial);
    return profile.value(tr) * profile.value(ts);
  }
  const double t =
      (q - store.point(j)).squaredNorm() / (sigma.range * sigma.range);
  return profile.value(t);
}

inline double density_support_radius(const PointStore& store,
                                     const Scales& sigma,
                                     const KernelProfile& profile) {
  const double cut = std::sqrt(profile.cutoff_sq());
  if (store.domain_split()) {
    return cut * std::sqrt(sigma.range * sigma.range +
                           sigma.spatial * sigma.spatial);
  }
  return cut * sigma.range;
}

}  // namespace detail

inline DensityField compute_density(const PointStore& store,
                                    const Scales& sigma_base,
                                    const NeighborIndex& index,
                                    const KernelProfile& profile = {},
                                    int threads = 0) {
  if (sigma_base.range <= 0.0 ||
      (store.domain_split() && sigma_base.spatial <= 0.0))
    throw std::invalid_argument("compute_density: sigma_base must be > 0");
  DensityField field;
  field.rho.assign(static_cast<size_t>(store.size()), 0.0);
  const double r = detail::density_support_radius(store, sigma_base, profile);
  detail::parallel_for(store.size(), threads, [&](int64_t i) {
    const Eigen::VectorXd q = store.point(i);
    double sum = 0.0;
    for (int j : index.radius(q, r))
      sum += detail::base_kernel_value(store, q, j, sigma_base, profile);
    field.rho[static_cast<size_t>(i)] = sum;
  });
  const double max_rho = *std::max_element(field.rho.begin(), field.rho.end());
  if (max_rho > 0.0)
    for (double& v : field.rho) v /= max_rho;
  return field;
}

inline double density_at(const Eigen::Ref<const Eigen::VectorXd>& q,
                         const DensityField& field, const NeighborIndex& index) {
  return field.at(index.nearest(q));
}

/// Mean-shift vector of the first iteration for every data point, stored once
/// and reused for merge bearing checks and the first cluster update.
struct FirstShiftCache {
  Eigen::MatrixXd shift;        // d x n
  std::vector<char> isolated;   // truncated support was empty

  Eigen::MatrixXd::ConstColXpr of(int id) const { return shift.col(id); }
};

// ---------------------------------------------------------------------------
// Point ingestion

inline PointStore PointStore::from_csv(const std::string& path,
                                       std::optional<DomainSplit> split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no points");
  Eigen::MatrixXd pts(rows.front().size(), rows.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t d = 0; d < rows[i].size(); ++d)
      pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = rows[i][d];
  return PointStore(std::move(pts), split);
}

inline void PointStore::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int64_t i = 0; i < size(); ++i) {
    for (int d = 0; d < dim(); ++d) {
      if (d) out << ',';
      out << points_(d, i);
    }
    out << '\n';
  }
}

inline PointStore PointStore::from_binary(const std::string& path,
                                          std::optional<DomainSplit> split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  uint64_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  if (!in || n == 0 || d == 0) throw std::runtime_error(path + ": bad header");
  Eigen::MatrixXd pts(d, n);
  std::vector<double> row(d);
  for (uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(d * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated data");
    for (uint64_t k = 0; k < d; ++k)
      pts(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = row[k];
  }
  return PointStore(std::move(pts), split);
}

inline void PointStore::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const uint64_t n = static_cast<uint64_t>(size());
  const uint64_t d = static_cast<uint64_t>(dim());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  std::vector<double> row(d);
  for (uint64_t i = 0; i < n; ++i) {
    for (uint64_t k = 0; k < d; ++k)
      row[k] = points_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(d * sizeof(double)));
  }
}

}  // namespace aaams
