#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "archrec/common.hpp"
#include "archrec/cluster.hpp"
#include "oracles.hpp"

using namespace archrec::cluster;
using oracle::reference_optics;

namespace {

Eigen::MatrixXd blob_points(const std::vector<Eigen::Vector2d>& centers, int per, double sd, std::uint64_t seed,
                            std::vector<int>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::MatrixXd pts(static_cast<int>(centers.size()) * per, 2);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < per; ++i) {
      const double dx = nd(rng), dy = nd(rng);
      pts.row(static_cast<int>(c) * per + i) = (centers[c] + Eigen::Vector2d(dx, dy)).transpose();
      if (truth) truth->push_back(static_cast<int>(c));
    }
  }
  return pts;
}

// Same construction as the frozen reference values below.
Eigen::MatrixXd frozen_points() {
  const double centers[4][2] = {{0, 0}, {6, 6}, {12, 0}, {6, -7}};
  std::vector<Eigen::Vector2d> pts;
  for (int c = 0; c < 4; ++c) {
    const double sc = 0.4 + 0.3 * c;
    for (int i = 0; i < 6 + c; ++i) {
      const double k = c * 31 + i;
      pts.emplace_back(centers[c][0] + sc * std::sin(7.0 * k + 1.0), centers[c][1] + sc * std::cos(11.0 * k + 2.0));
    }
  }
  for (int i = 0; i < 3; ++i) pts.emplace_back(20.0 + 3.0 * i, 15.0 - 4.0 * i);
  Eigen::MatrixXd m(static_cast<int>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<int>(i)) = pts[i].transpose();
  return m;
}

}  // namespace

TEST(OpticsOrder, CollinearCoreDistances) {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 0, 2, 0;
  OpticsConfig cfg;
  cfg.min_cluster_size = 2;
  const auto o = optics_order(pts, cfg);
  EXPECT_EQ(o.core_distance, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(o.order.front(), 0);
  EXPECT_TRUE(std::isinf(o.reachability[0]));
}

TEST(OpticsOrder, DuplicatesHaveZeroCoreDistance) {
  Eigen::MatrixXd pts(4, 2);
  pts << 1, 1, 1, 1, 5, 5, 9, 9;
  OpticsConfig cfg;
  cfg.min_cluster_size = 2;
  const auto o = optics_order(pts, cfg);
  EXPECT_EQ(o.core_distance[0], 0.0);
  EXPECT_EQ(o.core_distance[1], 0.0);
  EXPECT_GT(o.core_distance[2], 0.0);
}

TEST(OpticsOrder, MatchesQuadraticReference) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 98);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    Eigen::MatrixXd pts(n, 2);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
    OpticsConfig cfg;
    cfg.min_cluster_size = 2 + static_cast<int>(rng() % std::min(n - 1, 5));
    const auto got = optics_order(pts, cfg);
    const auto want = reference_optics(pts, cfg.min_cluster_size);
    ASSERT_EQ(got.order, want.order) << "trial " << trial << " n " << n;
    for (int i = 0; i < n; ++i) {
      EXPECT_GE(got.reachability[i], got.core_distance[got.predecessor[i] < 0 ? i : got.predecessor[i]] - 1e-12);
      if (std::isinf(want.reachability[i])) {
        EXPECT_TRUE(std::isinf(got.reachability[i]));
      } else {
        EXPECT_NEAR(got.reachability[i], want.reachability[i], 1e-12);
      }
      EXPECT_NEAR(got.core_distance[i], want.core_distance[i], 1e-12);
    }
  }
}

TEST(OpticsOrder, OrderIsPermutation) {
  std::vector<int> truth;
  const auto pts = blob_points({{0, 0}, {10, 10}}, 8, 1.0, 3, &truth);
  auto o = optics_order(pts, {});
  std::sort(o.order.begin(), o.order.end());
  for (int i = 0; i < 16; ++i) EXPECT_EQ(o.order[i], i);
}

TEST(XiExtraction, EquidistantPointsAreNoise) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(6, 6);
  d.diagonal().setZero();
  OpticsConfig cfg;
  const auto a = extract_xi_clusters(optics_order_from_distances(d, cfg), cfg);
  EXPECT_EQ(a.n_clusters, 0);
  for (int l : a.labels) EXPECT_EQ(l, -1);
}

TEST(XiExtraction, ThreeBlobsRecovered) {
  std::vector<int> truth;
  const auto pts = blob_points({{0, 0}, {30, 0}, {0, 30}}, 5, 0.5, 4, &truth);
  const auto a = optics_cluster(pts, {});
  EXPECT_EQ(a.n_clusters, 3);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a.labels, truth), 1.0);
}

TEST(XiExtraction, OutliersAreNoise) {
  std::vector<int> truth;
  auto pts = blob_points({{0, 0}, {30, 0}, {0, 30}}, 5, 0.5, 5, &truth);
  Eigen::MatrixXd all(19, 2);
  all.topRows(15) = pts;
  all.bottomRows(4) << 80, 80, -60, 50, 55, -70, -90, -90;
  const auto a = optics_cluster(all, {});
  for (int i = 15; i < 19; ++i) EXPECT_EQ(a.labels[i], -1);
  std::vector<int> head(a.labels.begin(), a.labels.begin() + 15);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(head, truth), 1.0);
}

// Labels and ordering produced by scikit-learn 1.x OPTICS(min_samples=3,
// xi=0.05, min_cluster_size=3) on frozen_points().
TEST(XiExtraction, MatchesFrozenScikitLearnResult) {
  const auto pts = frozen_points();
  OpticsConfig cfg;
  const auto o = optics_order(pts, cfg);
  const std::vector<int> want_order = {0,  2,  1,  3,  4,  5,  6,  7,  8,  9,  12, 11, 10, 17, 16, 20, 13,
                                       19, 15, 14, 18, 26, 25, 24, 23, 27, 28, 29, 21, 22, 31, 30, 32};
  EXPECT_EQ(o.order, want_order);
  const std::vector<int> want = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 2, 3, 3, 2,
                                 2, 3, 3, 2, 5, 5, 4, 4, 4, -1, 4, 4, 5, 6, 6, 6};
  const auto a = extract_xi_clusters(o, cfg);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a.labels, want), 1.0);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(a.labels[i] == -1, want[i] == -1);
}

TEST(XiExtraction, InvariantUnderRigidMotionAndScale) {
  std::vector<int> truth;
  const auto pts = blob_points({{0, 0}, {8, 1}, {3, 9}, {12, 12}}, 6, 1.0, 6, &truth);
  const auto base = optics_cluster(pts, {});
  const double th = 0.7;
  Eigen::Matrix2d rot;
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Eigen::MatrixXd moved = (pts * rot.transpose()).rowwise() + Eigen::RowVector2d(100, -40);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(optics_cluster(moved, {}).labels, base.labels), 1.0);
  EXPECT_EQ(optics_cluster(pts * 4.0, {}).labels, base.labels);
}

TEST(XiExtraction, ClustersMeetMinimumSize) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    Eigen::MatrixXd pts(40, 2);
    for (int i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
    OpticsConfig cfg;
    cfg.min_cluster_size = 2 + trial % 4;
    const auto a = optics_cluster(pts, cfg);
    std::vector<int> size(a.n_clusters, 0);
    for (int l : a.labels) {
      ASSERT_GE(l, -1);
      ASSERT_LT(l, a.n_clusters);
      if (l >= 0) ++size[l];
    }
    for (int s : size) EXPECT_GE(s, cfg.min_cluster_size);
  }
}

TEST(Ari, KnownValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {5, 5, 2, 2}), 1.0);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 2}), 0.5714285714285714, 1e-12);
  EXPECT_NEAR(adjusted_rand_index({0, 0, 0, 1, 1, 1, 2, 2}, {0, 0, 1, 1, 2, 2, 2, 2}), 0.18181818181818182, 1e-12);
}

TEST(OpticsConfig, Validation) {
  OpticsConfig cfg;
  cfg.min_cluster_size = 1;
  EXPECT_THROW(cfg.validate(), std::exception);
  cfg = OpticsConfig{};
  cfg.xi = 1.0;
  EXPECT_THROW(cfg.validate(), std::exception);
}
