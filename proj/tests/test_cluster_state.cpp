#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "aaams/bandwidth.hpp"
#include "aaams/cluster_state.hpp"

using namespace aaams;

namespace {

PointStore tiny_store(int n, int dim = 2) {
  Eigen::MatrixXd pts(dim, n);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) pts(d, i) = i + 0.1 * d;
  return PointStore(pts);
}

// direct Eq.-5-style summation over an explicit trajectory list
double ess_oracle(const std::vector<Eigen::VectorXd>& traj,
                  const SpdMatrix& est, const KernelProfile& profile) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(traj.front().size());
  for (const auto& v : traj) mean += v;
  mean /= static_cast<double>(traj.size());
  double sum = 0.0;
  for (const auto& v : traj)
    sum += profile.weight(mahalanobis_sq(mean, v, est));
  return sum / profile.weight(0.0);
}

}  // namespace

TEST_CASE("init_clusters trivial cases") {
  const PointStore one = tiny_store(1);
  const ClusterSet set1(one, Scales::uniform(0.5));
  CHECK(set1.size() == 1);
  CHECK(set1[0].id == 0);
  CHECK(set1.find(0) == 0);
  CHECK(set1.cluster_size(0) == 1);

  const PointStore five = tiny_store(5);
  const ClusterSet set5(five, Scales::uniform(0.5));
  CHECK(set5.alive_count() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(set5[i].ess == 0.0);
    CHECK(set5[i].status == ClusterStatus::kScalarPhase);
    CHECK(set5[i].moments.count == 0);
    CHECK((set5[i].location - five.point(i)).norm() == 0.0);
    CHECK(set5[i].shift_norm > 1e100);  // large sentinel
  }
}

TEST_CASE("joint initialization uses per-domain base blocks") {
  Eigen::MatrixXd pts(4, 3);
  pts.setRandom();
  const PointStore store(pts, DomainSplit{2, 2});
  const ClusterSet set(store, Scales{2.0, 3.0});
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(4, 4);
  expect.diagonal() << 4.0, 4.0, 9.0, 9.0;
  CHECK((set[0].bandwidth.full_matrix() - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("absorb merges members and moments") {
  const PointStore store = tiny_store(4);
  ClusterSet set(store, Scales::uniform(1.0));

  // two singletons with empty trajectories
  set.absorb(0, 1);
  CHECK(set.cluster_size(0) == 2);
  CHECK(set[0].moments.count == 0);
  CHECK(set.find(1) == 0);
  CHECK(set[1].absorbed());
  CHECK(set.alive_count() == 3);

  // moment additivity
  Eigen::VectorXd v(2);
  v << 1.0, 2.0;
  set.push_trajectory_point(2, v, 0.5);
  set.push_trajectory_point(2, 2 * v, 0.75);
  set.push_trajectory_point(2, -v, 0.75);
  set.push_trajectory_point(3, v, 0.25);
  set.push_trajectory_point(3, 3 * v, 0.75);
  const double w2 = set[2].moments.w, w3 = set[3].moments.w;
  set.absorb(2, 3);
  CHECK(set[2].moments.w == Catch::Approx(w2 + w3));
  CHECK(set[2].moments.count == 5);

  CHECK_THROWS_AS(set.absorb(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(set.absorb(0, 0), std::invalid_argument);
}

TEST_CASE("absorb is associative over a split trajectory set") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> urho(0.1, 1.0);
  const PointStore store = tiny_store(3, 3);

  ClusterSet whole(store, Scales::uniform(1.0));
  ClusterSet split(store, Scales::uniform(1.0));
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd v(3);
    for (int d = 0; d < 3; ++d) v[d] = normal(rng);
    const double rho = urho(rng);
    whole.push_trajectory_point(0, v, rho);
    split.push_trajectory_point(i % 2, v, rho);
  }
  split.absorb(0, 1);
  CHECK(split[0].moments.w == Catch::Approx(whole[0].moments.w).epsilon(1e-12));
  CHECK((split[0].moments.wx - whole[0].moments.wx).cwiseAbs().maxCoeff() <
        1e-12 * whole[0].moments.wx.cwiseAbs().maxCoeff() + 1e-12);
  CHECK((split[0].moments.wxx - whole[0].moments.wxx).cwiseAbs().maxCoeff() <
        1e-12 * whole[0].moments.wxx.cwiseAbs().maxCoeff() + 1e-12);
  CHECK(split[0].moments.count == whole[0].moments.count);
}

TEST_CASE("effective sample size basics") {
  const PointStore store = tiny_store(2);
  ClusterSet set(store, Scales::uniform(1.0));
  const ClusterBandwidth est =
      ClusterBandwidth::single(SpdMatrix::isotropic(2, 0.25));

  // empty trajectory
  CHECK(effective_sample_size(set[0], est) == 0.0);

  // |T_u| = 1
  Eigen::VectorXd v(2);
  v << 0.4, -0.2;
  set.push_trajectory_point(0, v, 1.0);
  CHECK(effective_sample_size(set[0], est) == Catch::Approx(1.0));

  // all coincident: ESS = m
  for (int i = 0; i < 7; ++i) set.push_trajectory_point(1, v, 0.5);
  CHECK(effective_sample_size(set[1], est) == Catch::Approx(7.0));
}

TEST_CASE("spread trajectory under a narrow bandwidth loses effective mass") {
  const PointStore store = tiny_store(1);
  ClusterSet set(store, Scales::uniform(1.0));
  std::vector<Eigen::VectorXd> traj;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd v(2);
    v << 0.5 * i, -0.25 * i;
    traj.push_back(v);
    set.push_trajectory_point(0, v, 1.0);
  }
  const SpdMatrix narrow = SpdMatrix::isotropic(2, 0.04);
  const ClusterBandwidth est = ClusterBandwidth::single(narrow);
  const KernelProfile profile;
  const double got = effective_sample_size(set[0], est, profile);
  CHECK(got == Catch::Approx(ess_oracle(traj, narrow, profile)));
  CHECK(got < 5.0);
  CHECK(got >= 0.0);
}

TEST_CASE("appending the trajectory mean adds exactly one to ESS") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  const PointStore store = tiny_store(1, 3);
  ClusterSet set(store, Scales::uniform(1.0));
  std::vector<Eigen::VectorXd> traj;
  for (int i = 0; i < 9; ++i) {
    Eigen::VectorXd v(3);
    for (int d = 0; d < 3; ++d) v[d] = normal(rng);
    traj.push_back(v);
    set.push_trajectory_point(0, v, 0.3 + 0.1 * (i % 3));
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (const auto& v : traj) mean += v;
  mean /= static_cast<double>(traj.size());

  const ClusterBandwidth est =
      ClusterBandwidth::single(SpdMatrix::isotropic(3, 0.5));
  const double before = effective_sample_size(set[0], est);
  set.push_trajectory_point(0, mean, 0.9);
  const double after = effective_sample_size(set[0], est);
  CHECK(after - before == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("membership partition invariant under random merges") {
  std::mt19937_64 rng(31);
  const PointStore store = tiny_store(40);
  ClusterSet set(store, Scales::uniform(1.0));
  std::uniform_int_distribution<int> pick(0, 39);
  for (int step = 0; step < 25; ++step) {
    const int a = set.find(pick(rng));
    const int b = set.find(pick(rng));
    if (a == b) continue;
    set.absorb(a, b);
    // exclusive membership: sizes of live clusters sum to n
    int64_t total = 0;
    for (int id : set.alive_ids()) total += set.cluster_size(id);
    CHECK(total == 40);
    for (int p = 0; p < 40; ++p) CHECK_FALSE(set[set.find(p)].absorbed());
  }
}
