#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace aaams {

namespace detail {

struct Contingency {
  std::vector<std::int64_t> row;  // per label of a
  std::vector<std::int64_t> col;  // per label of b
  std::unordered_map<std::uint64_t, std::int64_t> cells;
  std::int64_t n = 0;

  template <typename Fn>
  void for_each_cell(Fn&& fn) const {
    for (const auto& [key, count] : cells)
      fn(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), count);
  }
};

inline std::vector<int> compact_labels(const std::vector<int>& labels, int& k) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = remap.insert({labels[i], static_cast<int>(remap.size())});
    out[i] = it->second;
  }
  k = static_cast<int>(remap.size());
  return out;
}

inline Contingency contingency(const std::vector<int>& a,
                               const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("metrics: partitions differ in size or are empty");
  Contingency t;
  int ka = 0, kb = 0;
  const std::vector<int> ca = compact_labels(a, ka);
  const std::vector<int> cb = compact_labels(b, kb);
  t.row.assign(static_cast<size_t>(ka), 0);
  t.col.assign(static_cast<size_t>(kb), 0);
  t.n = static_cast<std::int64_t>(a.size());
  for (size_t i = 0; i < ca.size(); ++i) {
    ++t.row[static_cast<size_t>(ca[i])];
    ++t.col[static_cast<size_t>(cb[i])];
    const std::uint64_t key =
        (static_cast<std::uint64_t>(ca[i]) << 32) | static_cast<std::uint32_t>(cb[i]);
    ++t.cells[key];
  }
  return t;
}

inline double choose2(std::int64_t m) {
  return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
}

}  // namespace detail

/// Fraction of point pairs on which the two labelings agree (same cluster in
/// both, or different in both).
inline double pri(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  const double total = detail::choose2(t.n);
  if (total <= 0.0) return 1.0;
  double same_a = 0.0, same_b = 0.0, same_both = 0.0;
  for (auto m : t.row) same_a += detail::choose2(m);
  for (auto m : t.col) same_b += detail::choose2(m);
  t.for_each_cell([&](int, int, std::int64_t m) { same_both += detail::choose2(m); });
  return (total - same_a - same_b + 2.0 * same_both) / total;
}

/// Variation of information H(a|b) + H(b|a), in nats.
inline double voi(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  const double n = static_cast<double>(t.n);
  double h_a = 0.0, h_b = 0.0, mi = 0.0;
  for (auto m : t.row)
    if (m > 0) h_a -= (m / n) * std::log(m / n);
  for (auto m : t.col)
    if (m > 0) h_b -= (m / n) * std::log(m / n);
  t.for_each_cell([&](int i, int j, std::int64_t m) {
    const double p = m / n;
    const double pi = static_cast<double>(t.row[static_cast<size_t>(i)]) / n;
    const double pj = static_cast<double>(t.col[static_cast<size_t>(j)]) / n;
    mi += p * std::log(p / (pi * pj));
  });
  return std::max(0.0, h_a + h_b - 2.0 * mi);
}

/// Global consistency error: the milder direction of the mean local
/// refinement error.
inline double gce(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  double err_ab = 0.0, err_ba = 0.0;
  t.for_each_cell([&](int i, int j, std::int64_t m) {
    const double ri = static_cast<double>(t.row[static_cast<size_t>(i)]);
    const double cj = static_cast<double>(t.col[static_cast<size_t>(j)]);
    err_ab += static_cast<double>(m) * (ri - static_cast<double>(m)) / ri;
    err_ba += static_cast<double>(m) * (cj - static_cast<double>(m)) / cj;
  });
  return std::min(err_ab, err_ba) / static_cast<double>(t.n);
}

/// Adjusted Rand index (used against synthetic ground truth).
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = detail::contingency(a, b);
  double sum_cells = 0.0, sum_row = 0.0, sum_col = 0.0;
  t.for_each_cell([&](int, int, std::int64_t m) { sum_cells += detail::choose2(m); });
  for (auto m : t.row) sum_row += detail::choose2(m);
  for (auto m : t.col) sum_col += detail::choose2(m);
  const double total = detail::choose2(t.n);
  if (total <= 0.0) return 1.0;
  const double expected = sum_row * sum_col / total;
  const double maximum = 0.5 * (sum_row + sum_col);
  if (maximum == expected) return 1.0;
  return (sum_cells - expected) / (maximum - expected);
}

namespace detail {

// Felzenszwalb-Huttenlocher exact squared Euclidean distance transform.
inline void dt_1d(std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  std::vector<double> d(static_cast<size_t>(n));
  std::vector<int> v(static_cast<size_t>(n));
  std::vector<double> z(static_cast<size_t>(n) + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[static_cast<size_t>(k)];
      s = ((f[static_cast<size_t>(q)] + q * q) - (f[static_cast<size_t>(p)] + p * p)) /
          (2.0 * (q - p));
      if (s > z[static_cast<size_t>(k)]) break;
      --k;
    }
    ++k;
    v[static_cast<size_t>(k)] = q;
    z[static_cast<size_t>(k)] = s;
    z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<size_t>(k)];
    d[static_cast<size_t>(q)] = (q - p) * (q - p) + f[static_cast<size_t>(p)];
  }
  f = std::move(d);
}

inline std::vector<double> squared_edt(const std::vector<char>& mask, int width,
                                       int height) {
  constexpr double kInf = 1e18;
  std::vector<double> g(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? 0.0 : kInf;
  std::vector<double> column(static_cast<size_t>(height));
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r < height; ++r)
      column[static_cast<size_t>(r)] = g[static_cast<size_t>(r) * width + c];
    dt_1d(column);
    for (int r = 0; r < height; ++r)
      g[static_cast<size_t>(r) * width + c] = column[static_cast<size_t>(r)];
  }
  std::vector<double> row(static_cast<size_t>(width));
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c)
      row[static_cast<size_t>(c)] = g[static_cast<size_t>(r) * width + c];
    dt_1d(row);
    for (int c = 0; c < width; ++c)
      g[static_cast<size_t>(r) * width + c] = row[static_cast<size_t>(c)];
  }
  return g;
}

// One-sided extraction: a pixel is boundary when its right or down neighbor
// carries a different label, so a straight edge yields a single pixel-wide
// boundary line.
inline std::vector<char> boundary_map(const std::vector<int>& labels, int width,
                                      int height) {
  std::vector<char> b(labels.size(), 0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const size_t p = static_cast<size_t>(r) * width + c;
      if (c + 1 < width && labels[p] != labels[p + 1]) b[p] = 1;
      if (r + 1 < height && labels[p] != labels[p + static_cast<size_t>(width)])
        b[p] = 1;
    }
  }
  return b;
}

}  // namespace detail

/// Boundary displacement error in pixels: symmetric mean distance between the
/// two label maps' 4-connected boundary pixels. Empty boundary sets
/// contribute a vacuous zero mean.
inline double bde(const std::vector<int>& a, const std::vector<int>& b,
                  int width, int height) {
  if (a.size() != b.size() ||
      static_cast<int64_t>(a.size()) != static_cast<int64_t>(width) * height)
    throw std::invalid_argument("bde: label/size mismatch");
  const auto ba = detail::boundary_map(a, width, height);
  const auto bb = detail::boundary_map(b, width, height);
  const auto mean_dist = [&](const std::vector<char>& from,
                             const std::vector<char>& to) {
    std::int64_t count = 0, count_to = 0;
    for (char v : from) count += v;
    for (char v : to) count_to += v;
    if (count == 0) return 0.0;
    if (count_to == 0) return std::hypot(width, height);
    const auto d2 = detail::squared_edt(to, width, height);
    double sum = 0.0;
    for (size_t i = 0; i < from.size(); ++i)
      if (from[i]) sum += std::sqrt(d2[i]);
    return sum / static_cast<double>(count);
  };
  return 0.5 * (mean_dist(ba, bb) + mean_dist(bb, ba));
}

}  // namespace aaams
