#pragma once

// K-means over representation matrices: k-means++ seeding, Lloyd iterations
// to an assignment fixpoint, several seeded restarts with the lowest inertia
// kept. Deterministic for fixed (reps, k, seed, options).

#include <cstdint>
#include <vector>

#include "convlab/common.hpp"

namespace convlab {

struct ClusterAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // per row, in [0, k)
  Matrix centroids;                     // k x dim
  double inertia = 0.0;
};

struct KmeansOptions {
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
};

// Cluster count when over-estimating the number of intents on purpose. The
// small epsilon keeps exact products like 1.1 * 10 from ceiling up to 12.
inline std::size_t overcluster_k(std::size_t n_true_intents, double factor) {
  if (factor < 1.0) throw ConfigError("overcluster factor must be >= 1");
  return std::size_t(std::ceil(factor * double(n_true_intents) - 1e-9));
}

namespace detail {

inline std::size_t nearest_centroid(const double* x, const Matrix& centroids,
                                    std::size_t dim, double* best_d2) {
  std::size_t best = 0;
  double bd = squared_distance(x, centroids.row(0), dim);
  for (std::size_t c = 1; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c), dim);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  if (best_d2) *best_d2 = bd;
  return best;
}

inline Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows(), dim = x.cols();
  Matrix centroids(k, dim);
  const std::size_t first = std::size_t(rng.next_below(n));
  std::copy(x.row(first), x.row(first) + dim, centroids.row(0));

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = squared_distance(x.row(i), centroids.row(0), dim);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total <= 0.0) {
      pick = std::size_t(rng.next_below(n));
    } else {
      const double r = rng.next_double() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    }
    std::copy(x.row(pick), x.row(pick) + dim, centroids.row(c));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c), dim));
  }
  return centroids;
}

inline ClusterAssignment lloyd(const Matrix& x, std::size_t k, Rng rng,
                               std::size_t max_iter) {
  const std::size_t n = x.rows(), dim = x.cols();
  ClusterAssignment out;
  out.k = k;
  out.centroids = kmeanspp_seed(x, k, rng);
  out.assignment.assign(n, 0);

  std::vector<std::size_t> prev(n, k);  // k = "unassigned" sentinel
  std::vector<double> point_d2(n, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i)
      out.assignment[i] = nearest_centroid(x.row(i), out.centroids, dim, &point_d2[i]);

    // Per empty cluster, claim the point currently farthest from its own
    // centroid so k stays exactly as requested.
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t a : out.assignment) ++counts[a];
    std::vector<bool> claimed(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (claimed[i] || counts[out.assignment[i]] <= 1) continue;
        if (far == n || point_d2[i] > point_d2[far]) far = i;
      }
      if (far == n) continue;  // nothing left to donate
      --counts[out.assignment[far]];
      out.assignment[far] = c;
      counts[c] = 1;
      claimed[far] = true;
      point_d2[far] = 0.0;
    }

    if (out.assignment == prev) break;
    prev = out.assignment;

    Matrix sums(k, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = out.assignment[i];
      ++counts[c];
      double* s = sums.row(c);
      const double* xi = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) s[d] += xi[d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t d = 0; d < dim; ++d)
          out.centroids.at(c, d) = sums.at(c, d) / double(counts[c]);
  }

  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += squared_distance(x.row(i), out.centroids.row(out.assignment[i]), dim);
  return out;
}

}  // namespace detail

inline ClusterAssignment kmeans(const Matrix& reps, std::size_t k,
                                std::uint64_t seed, KmeansOptions opts = {}) {
  if (k < 2) throw ConfigError("kmeans needs k >= 2");
  if (k > reps.rows())
    throw ConfigError("kmeans needs at least k points, got " +
                      std::to_string(reps.rows()) + " for k=" + std::to_string(k));
  if (opts.n_init == 0 || opts.max_iter == 0)
    throw ConfigError("n_init and max_iter must be positive");
  if (!reps.all_finite()) throw DataError("non-finite representation matrix");

  ClusterAssignment best;
  bool have = false;
  for (std::size_t restart = 0; restart < opts.n_init; ++restart) {
    ClusterAssignment cur =
        detail::lloyd(reps, k, Rng(seed).stream(restart), opts.max_iter);
    if (!have || cur.inertia < best.inertia) {
      best = std::move(cur);
      have = true;
    }
  }
  return best;
}

}  // namespace convlab
