#include "convlab/cluster.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <vector>

namespace convlab {
namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.at(0).size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), m.row(r));
  return m;
}

// 2-D Gaussian blobs around the given centers, `per` points each.
Matrix blobs(const std::vector<std::pair<double, double>>& centers,
             std::size_t per, double sigma, std::uint64_t seed,
             std::vector<std::size_t>* labels = nullptr) {
  Rng rng(seed);
  Matrix m(centers.size() * per, 2);
  std::size_t r = 0;
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < per; ++i, ++r) {
      m.at(r, 0) = centers[c].first + sigma * rng.normal();
      m.at(r, 1) = centers[c].second + sigma * rng.normal();
      if (labels) labels->push_back(c);
    }
  return m;
}

// True when the two assignments describe the same partition.
bool same_partition(const std::vector<std::size_t>& a,
                    const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto f = fwd.emplace(a[i], b[i]);
    if (!f.second && f.first->second != b[i]) return false;
    const auto g = bwd.emplace(b[i], a[i]);
    if (!g.second && g.first->second != a[i]) return false;
  }
  return true;
}

TEST(Kmeans, SeparatesTwoObviousBlobs) {
  const Matrix x = from_rows({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
  const ClusterAssignment res = kmeans(x, 2, 7);
  EXPECT_EQ(res.assignment[0], res.assignment[1]);
  EXPECT_EQ(res.assignment[2], res.assignment[3]);
  EXPECT_NE(res.assignment[0], res.assignment[2]);
  EXPECT_NEAR(res.inertia, 0.5 + 0.5, 1e-12);  // each pair 0.5 from its mean
}

TEST(Kmeans, KEqualsRowsGivesSingletons) {
  const Matrix x = from_rows({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}});
  const ClusterAssignment res = kmeans(x, 5, 3);
  EXPECT_EQ(res.inertia, 0.0);
  std::set<std::size_t> ids(res.assignment.begin(), res.assignment.end());
  EXPECT_EQ(ids.size(), 5u);
}

TEST(Kmeans, RecoversThreeGaussianBlobs) {
  std::vector<std::size_t> truth;
  const Matrix x = blobs({{0, 0}, {10, 0}, {0, 10}}, 100, 0.1, 11, &truth);
  const ClusterAssignment res = kmeans(x, 3, 19);
  EXPECT_TRUE(same_partition(truth, res.assignment));
}

TEST(Kmeans, InertiaNonIncreasingAcrossIterations) {
  const Matrix x = blobs({{0, 0}, {4, 0}, {0, 4}, {4, 4}}, 30, 1.0, 5);
  KmeansOptions opts;
  opts.n_init = 1;
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t iters = 1; iters <= 8; ++iters) {
    opts.max_iter = iters;
    const double inertia = kmeans(x, 4, 23, opts).inertia;
    EXPECT_LE(inertia, last + 1e-9) << "iteration cap " << iters;
    last = inertia;
  }
}

TEST(Kmeans, DeterministicForFixedArguments) {
  const Matrix x = blobs({{0, 0}, {3, 3}}, 40, 0.8, 2);
  const ClusterAssignment a = kmeans(x, 2, 31);
  const ClusterAssignment b = kmeans(x, 2, 31);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.inertia, b.inertia);
  EXPECT_TRUE(a.centroids == b.centroids);
}

TEST(Kmeans, PermutingRowsPermutesAssignments) {
  std::vector<std::size_t> truth;
  const Matrix x = blobs({{0, 0}, {8, 0}, {0, 8}}, 20, 0.2, 13, &truth);
  std::vector<std::size_t> perm(x.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(41);
  rng.shuffle(perm);
  Matrix shuffled(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy(x.row(perm[i]), x.row(perm[i]) + x.cols(), shuffled.row(i));

  const ClusterAssignment orig = kmeans(x, 3, 17);
  const ClusterAssignment shuf = kmeans(shuffled, 3, 17);
  std::vector<std::size_t> orig_permuted(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    orig_permuted[i] = orig.assignment[perm[i]];
  EXPECT_TRUE(same_partition(orig_permuted, shuf.assignment));
}

TEST(Kmeans, RepairsEmptyClustersToKeepK) {
  const Matrix x = from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}, {1, 1}});
  const ClusterAssignment res = kmeans(x, 3, 9);
  EXPECT_EQ(res.k, 3u);
  std::set<std::size_t> ids(res.assignment.begin(), res.assignment.end());
  EXPECT_EQ(ids.size(), 3u);
  for (std::size_t id : ids) EXPECT_LT(id, 3u);
  EXPECT_EQ(res.inertia, 0.0);
}

TEST(Kmeans, RejectsBadArguments) {
  const Matrix x = from_rows({{0, 0}, {1, 1}, {2, 2}});
  EXPECT_THROW(kmeans(x, 1, 1), ConfigError);
  EXPECT_THROW(kmeans(x, 4, 1), ConfigError);
  KmeansOptions zero;
  zero.n_init = 0;
  EXPECT_THROW(kmeans(x, 2, 1, zero), ConfigError);
  Matrix bad = x;
  bad.at(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(kmeans(bad, 2, 1), DataError);
}

TEST(Kmeans, AssignmentIdsAlwaysBelowK) {
  const Matrix x = blobs({{0, 0}, {2, 1}}, 25, 1.5, 6);
  const ClusterAssignment res = kmeans(x, 7, 29);
  ASSERT_EQ(res.assignment.size(), x.rows());
  for (std::size_t id : res.assignment) EXPECT_LT(id, 7u);
  EXPECT_GE(res.inertia, 0.0);
}

TEST(OverclusterK, CeilsTheProduct) {
  EXPECT_EQ(overcluster_k(100, 1.5), 150u);
  EXPECT_EQ(overcluster_k(23, 2.0), 46u);
  EXPECT_EQ(overcluster_k(22, 1.0), 22u);
  EXPECT_EQ(overcluster_k(10, 1.1), 11u);
  EXPECT_EQ(overcluster_k(7, 1.2), 9u);
  EXPECT_THROW(overcluster_k(5, 0.9), ConfigError);
}

}  // namespace
}  // namespace convlab
