#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "aaams/metrics.hpp"

using namespace aaams;

namespace {

std::vector<int> random_labels(std::mt19937_64& rng, int n, int k) {
  std::uniform_int_distribution<int> lbl(0, k - 1);
  std::vector<int> out(static_cast<size_t>(n));
  for (auto& v : out) v = lbl(rng);
  return out;
}

// O(n^2) pair enumeration
double pri_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  std::int64_t agree = 0, total = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      ++total;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// per-point local refinement error from explicit region sets
double gce_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const size_t n = a.size();
  const auto lre = [&](const std::vector<int>& p, const std::vector<int>& q) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      std::int64_t rp = 0, inter = 0;
      for (size_t j = 0; j < n; ++j) {
        if (p[j] == p[i]) {
          ++rp;
          if (q[j] == q[i]) ++inter;
        }
      }
      sum += static_cast<double>(rp - inter) / static_cast<double>(rp);
    }
    return sum;
  };
  return std::min(lre(a, b), lre(b, a)) / static_cast<double>(n);
}

// contingency-based VoI computed by a separate route: H(a|b) + H(b|a)
double voi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  for (size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double h_ab = 0.0, h_ba = 0.0;
  for (const auto& [key, p] : joint) {
    h_ab -= p * std::log(p / pb[key.second]);
    h_ba -= p * std::log(p / pa[key.first]);
  }
  return h_ab + h_ba;
}

// brute-force nearest boundary distances
double bde_oracle(const std::vector<int>& a, const std::vector<int>& b, int w,
                  int h) {
  const auto boundary = [&](const std::vector<int>& lbl) {
    std::vector<std::pair<int, int>> px;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int p = r * w + c;
        const bool edge =
            (c + 1 < w && lbl[static_cast<size_t>(p)] != lbl[static_cast<size_t>(p + 1)]) ||
            (r + 1 < h && lbl[static_cast<size_t>(p)] != lbl[static_cast<size_t>(p + w)]);
        if (edge) px.push_back({r, c});
      }
    return px;
  };
  const auto ba = boundary(a), bb = boundary(b);
  if (ba.empty() && bb.empty()) return 0.0;
  const auto dir = [&](const auto& from, const auto& to) {
    if (from.empty()) return 0.0;
    if (to.empty()) return std::hypot(w, h);
    double sum = 0.0;
    for (const auto& [r, c] : from) {
      double best = 1e300;
      for (const auto& [r2, c2] : to)
        best = std::min(best, std::hypot(r - r2, c - c2));
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (dir(ba, bb) + dir(bb, ba));
}

}  // namespace

TEST_CASE("self comparisons are perfect") {
  std::mt19937_64 rng(7);
  const auto a = random_labels(rng, 60, 5);
  CHECK(pri(a, a) == 1.0);
  CHECK(voi(a, a) == Catch::Approx(0.0).margin(1e-12));
  CHECK(gce(a, a) == 0.0);
  CHECK(ari(a, a) == Catch::Approx(1.0));
  const std::vector<int> img = {0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(bde(img, img, 4, 3) == 0.0);
}

TEST_CASE("pri corner cases") {
  const std::vector<int> singletons = {0, 1, 2};
  const std::vector<int> one = {0, 0, 0};
  CHECK(pri(singletons, one) == 0.0);
  CHECK_THROWS_AS(pri({0, 1}, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("pri matches pair enumeration on random labelings") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_labels(rng, 20, 2 + trial % 4);
    const auto b = random_labels(rng, 20, 2 + (trial + 1) % 4);
    CHECK(pri(a, b) == Catch::Approx(pri_oracle(a, b)).margin(1e-12));
  }
}

TEST_CASE("voi hand case and oracle") {
  const std::vector<int> a = {0, 0, 1, 1};
  const std::vector<int> b = {0, 1, 0, 1};
  CHECK(voi(a, b) == Catch::Approx(2.0 * std::log(2.0)).margin(1e-12));
  CHECK(voi(a, b) == voi(b, a));

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_labels(rng, 25, 3);
    const auto y = random_labels(rng, 25, 4);
    CHECK(voi(x, y) == Catch::Approx(voi_oracle(x, y)).margin(1e-12));
    CHECK(voi(x, y) == voi(y, x));
  }
}

TEST_CASE("gce refinement cases and oracle") {
  // b refines a exactly: splitting never counts against the refined direction
  const std::vector<int> a = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> b = {0, 0, 1, 1, 2, 2, 3, 3};
  CHECK(gce(a, b) == 0.0);

  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_labels(rng, 18, 3);
    const auto y = random_labels(rng, 18, 3);
    CHECK(gce(x, y) == Catch::Approx(gce_oracle(x, y)).margin(1e-12));
    CHECK(gce(x, y) >= 0.0);
    CHECK(gce(x, y) <= 1.0);
  }
}

TEST_CASE("bde on a one-pixel boundary offset") {
  const int w = 16, h = 16;
  std::vector<int> a(static_cast<size_t>(w) * h), b(a.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      a[static_cast<size_t>(r) * w + c] = c < 8 ? 0 : 1;
      b[static_cast<size_t>(r) * w + c] = c < 9 ? 0 : 1;
    }
  const double got = bde(a, b, w, h);
  CHECK(got == Catch::Approx(bde_oracle(a, b, w, h)).margin(1e-12));
  CHECK(got == Catch::Approx(1.0).margin(0.05));  // one-pixel offset
  CHECK(bde(a, b, w, h) == bde(b, a, w, h));
}

TEST_CASE("bde matches brute force on random label maps") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 11, h = 8;
    std::vector<int> a(static_cast<size_t>(w) * h), b(a.size());
    std::uniform_int_distribution<int> lbl(0, 2);
    for (auto& v : a) v = lbl(rng);
    for (auto& v : b) v = lbl(rng);
    CHECK(bde(a, b, w, h) ==
          Catch::Approx(bde_oracle(a, b, w, h)).margin(1e-9));
  }
}

TEST_CASE("pri and voi invariant under label permutation") {
  std::mt19937_64 rng(29);
  const auto a = random_labels(rng, 40, 4);
  const auto b = random_labels(rng, 40, 3);
  std::vector<int> a_perm(a.size());
  const int perm[4] = {2, 3, 1, 0};
  for (size_t i = 0; i < a.size(); ++i) a_perm[i] = perm[a[i]];
  CHECK(pri(a, b) == pri(a_perm, b));
  CHECK(voi(a, b) == Catch::Approx(voi(a_perm, b)).margin(1e-12));
}

TEST_CASE("ari rewards agreement above chance") {
  std::mt19937_64 rng(31);
  const auto a = random_labels(rng, 100, 3);
  auto noisy = a;
  for (int i = 0; i < 10; ++i) noisy[static_cast<size_t>(i * 7)] = (noisy[static_cast<size_t>(i * 7)] + 1) % 3;
  CHECK(ari(a, noisy) > 0.5);
  CHECK(ari(a, noisy) < 1.0);
  const auto random_b = random_labels(rng, 100, 3);
  CHECK(std::abs(ari(a, random_b)) < 0.2);
}
