#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "aaams/agglomerator.hpp"
#include "aaams/bandwidth.hpp"
#include "aaams/cluster_state.hpp"
#include "aaams/dataset.hpp"
#include "aaams/geometry.hpp"

namespace aaams {

struct PostprocessConfig {
  int min_size = 10;
  double db_threshold = 1.0;
  bool structured = false;       // image data: contiguity + grid adjacency
  int grid_width = 0, grid_height = 0;
  bool db_fixpoint = false;      // default: single merge sweep
  Scales xi = Scales::uniform(1e-6);
};

/// Final labeling with per-cluster mode and stand-alone covariance.
struct Partition {
  std::vector<int> labels;              // compacted to [0, k)
  std::vector<Eigen::VectorXd> modes;
  std::vector<ClusterBandwidth> sigmas;

  int cluster_count() const { return static_cast<int>(modes.size()); }
};

/// Bhattacharyya divergence between two Gaussians. All three log-determinants
/// go through the same solver path, so equal inputs give exactly zero.
inline double bhattacharyya(const Eigen::Ref<const Eigen::VectorXd>& mu_a,
                            const SpdMatrix& sigma_a,
                            const Eigen::Ref<const Eigen::VectorXd>& mu_b,
                            const SpdMatrix& sigma_b) {
  if (mu_a.size() != mu_b.size() || sigma_a.dim() != sigma_b.dim() ||
      mu_a.size() != sigma_a.dim())
    throw std::invalid_argument("bhattacharyya: dimension mismatch");
  const auto log_det_of = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s(m);
    if (s.info() != Eigen::Success || s.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("bhattacharyya: singular average covariance");
    return std::make_pair(s, s.eigenvalues().array().log().sum());
  };
  const Eigen::MatrixXd mid = 0.5 * (sigma_a.matrix() + sigma_b.matrix());
  const auto [solver_m, log_det_m] = log_det_of(mid);
  const double log_det_a = log_det_of(sigma_a.matrix()).second;
  const double log_det_b = log_det_of(sigma_b.matrix()).second;
  const Eigen::VectorXd d = mu_a - mu_b;
  const Eigen::VectorXd t = solver_m.eigenvectors().transpose() * d;
  const double quad = (t.array().square() / solver_m.eigenvalues().array()).sum();
  return 0.125 * quad + 0.5 * (log_det_m - 0.5 * (log_det_a + log_det_b));
}

/// Density-weighted mean and covariance of a cluster's member data points.
inline std::pair<Eigen::VectorXd, ClusterBandwidth> standalone_covariance(
    const std::vector<int>& members, const PointStore& store,
    const DensityField& density, const Scales& xi) {
  if (members.empty())
    throw std::invalid_argument("standalone_covariance: empty cluster");
  TrajectoryMoments moments(store.dim());
  for (int id : members) moments.add(store.point(id), density.at(id));
  const EstimateResult est =
      estimate_bandwidth(moments, xi, store.domain_split());
  if (est.status != EstimateStatus::kOk)
    throw std::runtime_error("standalone_covariance: zero total weight");
  return {est.estimate.eta, est.estimate.sigma};
}

/// Split every cluster of a label map into its 4-connected components; each
/// component becomes a separate cluster. Returns compacted labels and count.
inline std::pair<std::vector<int>, int> enforce_contiguity(
    const std::vector<int>& labels, int width, int height) {
  if (static_cast<int64_t>(labels.size()) !=
      static_cast<int64_t>(width) * height)
    throw std::invalid_argument("enforce_contiguity: label/size mismatch");
  std::vector<int> out(labels.size(), -1);
  int next = 0;
  std::deque<int> queue;
  for (size_t start = 0; start < labels.size(); ++start) {
    if (out[start] >= 0) continue;
    const int lbl = labels[start];
    const int comp = next++;
    out[start] = comp;
    queue.push_back(static_cast<int>(start));
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      const int r = p / width, c = p % width;
      const int nbr[4] = {p - width, p + width, p - 1, p + 1};
      const bool ok[4] = {r > 0, r + 1 < height, c > 0, c + 1 < width};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k]) continue;
        const int q = nbr[k];
        if (out[q] < 0 && labels[q] == lbl) {
          out[q] = comp;
          queue.push_back(q);
        }
      }
    }
  }
  return {std::move(out), next};
}

namespace detail {

struct PostNode {
  std::vector<int> members;
  Eigen::VectorXd mode;
  std::optional<ClusterBandwidth> sigma;  // dropped for contiguity splits
  bool alive = true;
  // standalone stats, filled before the d_B sweep
  Eigen::VectorXd sa_mu;
  std::optional<ClusterBandwidth> sa_sigma;
};

// d_B between two nodes' standalone Gaussians; for structured (image) data
// only the range block matters.
inline double node_db(const PostNode& a, const PostNode& b, bool structured,
                      const std::optional<DomainSplit>& split) {
  if (structured && split) {
    const int dr = split->range_dim;
    return bhattacharyya(a.sa_mu.head(dr), a.sa_sigma->range(),
                         b.sa_mu.head(dr), b.sa_sigma->range());
  }
  if (split) {
    return bhattacharyya(a.sa_mu, SpdMatrix(a.sa_sigma->full_matrix()),
                         b.sa_mu, SpdMatrix(b.sa_sigma->full_matrix()));
  }
  return bhattacharyya(a.sa_mu, a.sa_sigma->range(), b.sa_mu,
                       b.sa_sigma->range());
}

// d_B on the trajectory bandwidths used while min-size merging (standalone
// stats do not exist yet at that stage).
inline double node_db_pre(const PostNode& a, const PostNode& b, bool structured,
                          const std::optional<DomainSplit>& split) {
  if (structured && split) {
    const int dr = split->range_dim;
    return bhattacharyya(a.mode.head(dr), a.sigma->range(), b.mode.head(dr),
                         b.sigma->range());
  }
  if (split) {
    return bhattacharyya(a.mode, SpdMatrix(a.sigma->full_matrix()), b.mode,
                         SpdMatrix(b.sigma->full_matrix()));
  }
  return bhattacharyya(a.mode, a.sigma->range(), b.mode, b.sigma->range());
}

struct EdgeSet {
  std::set<std::pair<int, int>> edges;

  void add(int a, int b) {
    if (a == b) return;
    edges.insert({std::min(a, b), std::max(a, b)});
  }

  std::vector<int> neighbors_of(int node) const {
    std::vector<int> out;
    for (const auto& [a, b] : edges) {
      if (a == node) out.push_back(b);
      if (b == node) out.push_back(a);
    }
    return out;
  }
};

inline bool graph_connected(int n, const std::vector<char>& alive,
                            const EdgeSet& edges) {
  std::vector<int> uf(static_cast<size_t>(n));
  std::iota(uf.begin(), uf.end(), 0);
  const auto find = [&](int x) {
    while (uf[static_cast<size_t>(x)] != x) {
      uf[static_cast<size_t>(x)] = uf[static_cast<size_t>(uf[static_cast<size_t>(x)])];
      x = uf[static_cast<size_t>(x)];
    }
    return x;
  };
  for (const auto& [a, b] : edges.edges) uf[static_cast<size_t>(find(a))] = find(b);
  int root = -1;
  for (int i = 0; i < n; ++i) {
    if (!alive[static_cast<size_t>(i)]) continue;
    if (root < 0) root = find(i);
    else if (find(i) != root) return false;
  }
  return true;
}

}  // namespace detail

/// Alg-2 style pipeline: contiguity (structured data), adjacency graph,
/// minimum-size merging, stand-alone covariances, Bhattacharyya merge sweep,
/// label compaction.
inline Partition postprocess(const RunResult& result, const PointStore& store,
                             const DensityField& density,
                             const PostprocessConfig& cfg) {
  const auto& split = store.domain_split();
  const int64_t n = store.size();
  std::vector<detail::PostNode> nodes;
  std::vector<int> point_node(static_cast<size_t>(n), -1);

  // seed nodes from the run result
  {
    std::vector<int> cluster_to_node(
        result.cluster_ids.empty() ? 0 : result.cluster_ids.back() + 1, -1);
    for (size_t k = 0; k < result.cluster_ids.size(); ++k) {
      cluster_to_node[static_cast<size_t>(result.cluster_ids[k])] =
          static_cast<int>(k);
      detail::PostNode node;
      node.mode = result.modes[k];
      node.sigma = result.bandwidths[k];
      nodes.push_back(std::move(node));
    }
    for (int64_t i = 0; i < n; ++i) {
      const int nd = cluster_to_node[static_cast<size_t>(
          result.labels[static_cast<size_t>(i)])];
      point_node[static_cast<size_t>(i)] = nd;
      nodes[static_cast<size_t>(nd)].members.push_back(static_cast<int>(i));
    }
  }

  // 1) contiguity on structured data; split components become new nodes with
  //    the mode recomputed at the highest-density member
  if (cfg.structured) {
    if (cfg.grid_width * cfg.grid_height != n)
      throw std::invalid_argument("postprocess: grid dims do not match store");
    auto [comp_labels, comp_count] =
        enforce_contiguity(point_node, cfg.grid_width, cfg.grid_height);
    std::vector<std::vector<int>> comp_members(static_cast<size_t>(comp_count));
    std::vector<int> comp_origin(static_cast<size_t>(comp_count), -1);
    for (int64_t i = 0; i < n; ++i) {
      comp_members[static_cast<size_t>(comp_labels[static_cast<size_t>(i)])]
          .push_back(static_cast<int>(i));
      comp_origin[static_cast<size_t>(comp_labels[static_cast<size_t>(i)])] =
          point_node[static_cast<size_t>(i)];
    }
    std::vector<int> components_per_node(nodes.size(), 0);
    for (int c = 0; c < comp_count; ++c)
      ++components_per_node[static_cast<size_t>(comp_origin[static_cast<size_t>(c)])];
    std::vector<detail::PostNode> split_nodes;
    split_nodes.reserve(static_cast<size_t>(comp_count));
    for (int c = 0; c < comp_count; ++c) {
      const int origin = comp_origin[static_cast<size_t>(c)];
      detail::PostNode node;
      node.members = std::move(comp_members[static_cast<size_t>(c)]);
      if (components_per_node[static_cast<size_t>(origin)] == 1) {
        node.mode = nodes[static_cast<size_t>(origin)].mode;
        node.sigma = nodes[static_cast<size_t>(origin)].sigma;
      } else {
        int best = node.members.front();
        for (int id : node.members)
          if (density.at(id) > density.at(best)) best = id;
        node.mode = store.point(best);
      }
      split_nodes.push_back(std::move(node));
    }
    nodes = std::move(split_nodes);
    for (size_t k = 0; k < nodes.size(); ++k)
      for (int id : nodes[k].members)
        point_node[static_cast<size_t>(id)] = static_cast<int>(k);
  }

  // 2) adjacency graph
  detail::EdgeSet edges;
  std::vector<char> alive(nodes.size(), 1);
  if (cfg.structured) {
    const int w = cfg.grid_width, h = cfg.grid_height;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int p = r * w + c;
        if (c + 1 < w) edges.add(point_node[static_cast<size_t>(p)],
                                 point_node[static_cast<size_t>(p + 1)]);
        if (r + 1 < h) edges.add(point_node[static_cast<size_t>(p)],
                                 point_node[static_cast<size_t>(p + w)]);
      }
    }
  } else if (nodes.size() > 1) {
    std::vector<double> dist;
    for (size_t i = 0; i < nodes.size(); ++i)
      for (size_t j = i + 1; j < nodes.size(); ++j)
        dist.push_back((nodes[i].mode - nodes[j].mode).norm());
    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    double threshold = sorted[sorted.size() / 2];
    if (threshold <= 0.0) {
      auto it = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
      threshold = it == sorted.end() ? 0.0 : *it;
    }
    while (true) {
      edges.edges.clear();
      size_t k = 0;
      for (size_t i = 0; i < nodes.size(); ++i)
        for (size_t j = i + 1; j < nodes.size(); ++j, ++k)
          if (dist[k] <= threshold)
            edges.add(static_cast<int>(i), static_cast<int>(j));
      if (detail::graph_connected(static_cast<int>(nodes.size()), alive, edges))
        break;
      threshold = threshold > 0.0 ? threshold * 2.0 : sorted.back();
    }
  }

  const auto merge_into = [&](int src, int dst) {
    auto& s = nodes[static_cast<size_t>(src)];
    auto& d = nodes[static_cast<size_t>(dst)];
    d.members.insert(d.members.end(), s.members.begin(), s.members.end());
    for (int nb : edges.neighbors_of(src))
      if (nb != dst) edges.add(dst, nb);
    std::erase_if(edges.edges, [&](const std::pair<int, int>& e) {
      return e.first == src || e.second == src;
    });
    s.alive = false;
    s.members.clear();
    alive[static_cast<size_t>(src)] = 0;
  };

  // 3) merge undersized clusters into their closest adjacent cluster
  while (true) {
    int src = -1;
    size_t src_size = 0;
    int alive_total = 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i].alive) continue;
      ++alive_total;
      const size_t sz = nodes[i].members.size();
      if (sz < static_cast<size_t>(cfg.min_size) &&
          (src < 0 || sz < src_size)) {
        src = static_cast<int>(i);
        src_size = sz;
      }
    }
    if (src < 0 || alive_total <= 1) break;
    const std::vector<int> adj = edges.neighbors_of(src);
    if (adj.empty()) break;
    int target = -1;
    double best = std::numeric_limits<double>::infinity();
    const bool use_db =
        nodes[static_cast<size_t>(src)].sigma.has_value() &&
        std::any_of(adj.begin(), adj.end(), [&](int a) {
          return nodes[static_cast<size_t>(a)].sigma.has_value();
        });
    for (int a : adj) {
      const auto& cand = nodes[static_cast<size_t>(a)];
      double score;
      if (use_db) {
        if (!cand.sigma) continue;
        score = detail::node_db_pre(nodes[static_cast<size_t>(src)], cand,
                                    cfg.structured, split);
      } else {
        score = (nodes[static_cast<size_t>(src)].mode - cand.mode).norm();
      }
      if (score < best || (score == best && a < target)) {
        best = score;
        target = a;
      }
    }
    if (target < 0) break;
    merge_into(src, target);
  }

  // 4) stand-alone covariances of the remaining clusters
  for (auto& node : nodes) {
    if (!node.alive) continue;
    auto [mu, sigma] = standalone_covariance(node.members, store, density, cfg.xi);
    node.sa_mu = std::move(mu);
    node.sa_sigma = std::move(sigma);
  }

  // 5) Bhattacharyya merge sweep(s), ascending d_B, pairs below threshold
  std::vector<int> group(nodes.size());
  std::iota(group.begin(), group.end(), 0);
  const auto find_group = [&](int x) {
    while (group[static_cast<size_t>(x)] != x) {
      group[static_cast<size_t>(x)] =
          group[static_cast<size_t>(group[static_cast<size_t>(x)])];
      x = group[static_cast<size_t>(x)];
    }
    return x;
  };
  while (true) {
    struct ScoredEdge {
      double db;
      int a, b;
      bool operator<(const ScoredEdge& o) const {
        return std::tie(db, a, b) < std::tie(o.db, o.a, o.b);
      }
    };
    std::vector<ScoredEdge> scored;
    for (const auto& [a, b] : edges.edges) {
      if (!nodes[static_cast<size_t>(a)].alive ||
          !nodes[static_cast<size_t>(b)].alive)
        continue;
      scored.push_back({detail::node_db(nodes[static_cast<size_t>(a)],
                                        nodes[static_cast<size_t>(b)],
                                        cfg.structured, split),
                        a, b});
    }
    std::sort(scored.begin(), scored.end());
    int merged = 0;
    for (const auto& e : scored) {
      if (e.db >= cfg.db_threshold) break;
      const int ra = find_group(e.a), rb = find_group(e.b);
      if (ra == rb) continue;
      // larger cluster keeps its mode; ties go to the lower node index
      const size_t sa = nodes[static_cast<size_t>(ra)].members.size();
      const size_t sb = nodes[static_cast<size_t>(rb)].members.size();
      const int keep = (sa > sb || (sa == sb && ra < rb)) ? ra : rb;
      const int drop = keep == ra ? rb : ra;
      group[static_cast<size_t>(drop)] = keep;
      nodes[static_cast<size_t>(keep)].members.insert(
          nodes[static_cast<size_t>(keep)].members.end(),
          nodes[static_cast<size_t>(drop)].members.begin(),
          nodes[static_cast<size_t>(drop)].members.end());
      nodes[static_cast<size_t>(drop)].members.clear();
      nodes[static_cast<size_t>(drop)].alive = false;
      alive[static_cast<size_t>(drop)] = 0;
      ++merged;
    }
    if (merged == 0 || !cfg.db_fixpoint) break;
    // fixpoint mode: contract the graph and recompute the union statistics
    for (auto& node : nodes) {
      if (!node.alive) continue;
      auto [mu, sigma] =
          standalone_covariance(node.members, store, density, cfg.xi);
      node.sa_mu = std::move(mu);
      node.sa_sigma = std::move(sigma);
    }
    detail::EdgeSet contracted;
    for (const auto& [a, b] : edges.edges)
      contracted.add(find_group(a), find_group(b));
    edges = std::move(contracted);
  }

  // 6) compact labels; refresh output covariances over the final memberships
  Partition part;
  part.labels.assign(static_cast<size_t>(n), -1);
  std::vector<int> final_ids;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].alive) final_ids.push_back(static_cast<int>(i));
  std::sort(final_ids.begin(), final_ids.end());
  for (size_t k = 0; k < final_ids.size(); ++k) {
    const auto& node = nodes[static_cast<size_t>(final_ids[k])];
    for (int id : node.members)
      part.labels[static_cast<size_t>(id)] = static_cast<int>(k);
    part.modes.push_back(node.mode);
    auto [mu, sigma] = standalone_covariance(node.members, store, density, cfg.xi);
    part.sigmas.push_back(std::move(sigma));
  }
  return part;
}

}  // namespace aaams
