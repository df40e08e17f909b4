#pragma once

// Clustering evaluation: Hungarian-matched accuracy, NMI, ARI, majority-vote
// F1 (binary and macro), their AVG, a paired two-sided t-test across seeds
// and per-intent silhouette scores. All metrics are pure functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "convlab/common.hpp"

namespace convlab {

// Maps arbitrary labels to dense ids 0..k-1 in sorted label order.
template <typename T>
std::vector<int> dense_ids(const std::vector<T>& labels) {
  std::vector<T> uniq(labels.begin(), labels.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<int> out;
  out.reserve(labels.size());
  for (const T& l : labels)
    out.push_back(int(std::lower_bound(uniq.begin(), uniq.end(), l) - uniq.begin()));
  return out;
}

struct Contingency {
  std::vector<std::vector<long long>> counts;  // rows = truth, cols = clusters
  std::vector<long long> row_sums;
  std::vector<long long> col_sums;
  long long total = 0;

  std::size_t rows() const { return counts.size(); }
  std::size_t cols() const { return counts.empty() ? 0 : counts[0].size(); }
};

template <typename A, typename B>
Contingency build_contingency(const std::vector<A>& truth,
                              const std::vector<B>& clusters) {
  if (truth.size() != clusters.size())
    throw DataError("truth and cluster label counts differ");
  if (truth.empty()) throw DataError("empty evaluation scope");
  const std::vector<int> t = dense_ids(truth);
  const std::vector<int> c = dense_ids(clusters);
  const int nr = *std::max_element(t.begin(), t.end()) + 1;
  const int nc = *std::max_element(c.begin(), c.end()) + 1;
  Contingency ct;
  ct.counts.assign(nr, std::vector<long long>(nc, 0));
  ct.row_sums.assign(nr, 0);
  ct.col_sums.assign(nc, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    ++ct.counts[t[i]][c[i]];
    ++ct.row_sums[t[i]];
    ++ct.col_sums[c[i]];
    ++ct.total;
  }
  return ct;
}

// Minimum-cost perfect assignment on a square cost matrix, O(n^3).
// Returns row -> column.
inline std::vector<std::size_t> hungarian_min_assignment(
    const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

// Fraction of examples covered by the best one-to-one matching between truth
// classes and clusters; the contingency is zero-padded to square when the
// counts differ.
inline double clustering_accuracy_from(const Contingency& ct) {
  const std::size_t n = std::max(ct.rows(), ct.cols());
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  long long max_count = 0;
  for (std::size_t r = 0; r < ct.rows(); ++r)
    for (std::size_t c = 0; c < ct.cols(); ++c)
      max_count = std::max(max_count, ct.counts[r][c]);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const long long w =
          (r < ct.rows() && c < ct.cols()) ? ct.counts[r][c] : 0;
      cost[r][c] = double(max_count - w);
    }
  const std::vector<std::size_t> row_to_col = hungarian_min_assignment(cost);
  long long matched = 0;
  for (std::size_t r = 0; r < ct.rows(); ++r)
    if (row_to_col[r] < ct.cols()) matched += ct.counts[r][row_to_col[r]];
  return double(matched) / double(ct.total);
}

template <typename A, typename B>
double clustering_accuracy(const std::vector<A>& truth,
                           const std::vector<B>& clusters) {
  return clustering_accuracy_from(build_contingency(truth, clusters));
}

namespace detail {

inline double entropy_of(const std::vector<long long>& sums, long long total) {
  double h = 0.0;
  for (long long s : sums) {
    if (s == 0) continue;
    const double p = double(s) / double(total);
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace detail

// Mutual information normalized by the arithmetic mean of the two entropies.
// Both partitions single-block means they are trivially identical: 1.0. A
// single degenerate side carries no information: 0.0.
template <typename A, typename B>
double nmi(const std::vector<A>& truth, const std::vector<B>& clusters) {
  const Contingency ct = build_contingency(truth, clusters);
  const double ht = detail::entropy_of(ct.row_sums, ct.total);
  const double hc = detail::entropy_of(ct.col_sums, ct.total);
  if (ht == 0.0 && hc == 0.0) return 1.0;
  if (ht == 0.0 || hc == 0.0) return 0.0;
  double mi = 0.0;
  const double n = double(ct.total);
  for (std::size_t r = 0; r < ct.rows(); ++r)
    for (std::size_t c = 0; c < ct.cols(); ++c) {
      const long long w = ct.counts[r][c];
      if (w == 0) continue;
      const double p = double(w) / n;
      mi += p * std::log(double(w) * n /
                         (double(ct.row_sums[r]) * double(ct.col_sums[c])));
    }
  return mi / (0.5 * (ht + hc));
}

// Adjusted Rand index by pair counting; 1.0 when the adjustment denominator
// vanishes (both partitions degenerate in the same way).
template <typename A, typename B>
double ari(const std::vector<A>& truth, const std::vector<B>& clusters) {
  const Contingency ct = build_contingency(truth, clusters);
  auto choose2 = [](long long m) { return double(m) * double(m - 1) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& row : ct.counts)
    for (long long w : row) index += choose2(w);
  for (long long s : ct.row_sums) sum_rows += choose2(s);
  for (long long s : ct.col_sums) sum_cols += choose2(s);
  const double all_pairs = choose2(ct.total);
  const double expected = all_pairs > 0.0 ? sum_rows * sum_cols / all_pairs : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

enum class F1Mode { binary, macro };

// Labels every cluster with the majority ground-truth label of its members
// (ties to the lexicographically smallest label, reported via tie_log), then
// scores the induced prediction. Binary mode first collapses labels to
// known/novel and returns the mean F1 of those two classes; macro mode keeps
// full intent labels and averages per-intent F1 over novel intents only.
// Evaluated on the whole example set, known-truth examples included.
inline double majority_vote_f1(const std::vector<std::string>& truth,
                               const std::vector<std::size_t>& clusters,
                               F1Mode mode,
                               const std::set<std::string>& known_intents,
                               std::vector<std::string>* tie_log = nullptr) {
  if (truth.size() != clusters.size())
    throw DataError("truth and cluster label counts differ");
  if (truth.empty()) throw DataError("empty evaluation scope");

  std::vector<std::string> labels(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    labels[i] = mode == F1Mode::binary
                    ? (known_intents.count(truth[i]) ? "known" : "novel")
                    : truth[i];

  std::map<std::size_t, std::map<std::string, std::size_t>> votes;
  for (std::size_t i = 0; i < labels.size(); ++i) ++votes[clusters[i]][labels[i]];
  std::map<std::size_t, std::string> cluster_label;
  for (const auto& [cid, counts] : votes) {
    std::string best;
    std::size_t best_n = 0;
    bool tie = false;
    for (const auto& [label, n] : counts) {  // map order = lexicographic
      if (n > best_n) {
        best = label;
        best_n = n;
        tie = false;
      } else if (n == best_n) {
        tie = true;
      }
    }
    if (tie && tie_log)
      tie_log->push_back("cluster " + std::to_string(cid) +
                         ": majority tie, using " + best);
    cluster_label[cid] = best;
  }

  std::vector<std::string> pred(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    pred[i] = cluster_label[clusters[i]];

  std::set<std::string> classes;
  if (mode == F1Mode::binary) {
    for (const auto& l : labels) classes.insert(l);
    for (const auto& l : pred) classes.insert(l);
  } else {
    for (const auto& l : labels)
      if (!known_intents.count(l)) classes.insert(l);
    if (classes.empty()) throw DataError("no novel intents in evaluation scope");
  }

  double f1_sum = 0.0;
  for (const std::string& cls : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool is_true = labels[i] == cls;
      const bool is_pred = pred[i] == cls;
      if (is_true && is_pred) ++tp;
      else if (is_pred) ++fp;
      else if (is_true) ++fn;
    }
    const double denom = double(2 * tp + fp + fn);
    f1_sum += denom > 0.0 ? 2.0 * double(tp) / denom : 0.0;
  }
  return f1_sum / double(classes.size());
}

inline double avg_metric(const std::vector<double>& components) {
  if (components.size() != 5)
    throw ConfigError("AVG needs exactly 5 metric components, got " +
                      std::to_string(components.size()));
  double s = 0.0;
  for (double v : components) s += v;
  return s / 5.0;
}

// --- paired t-test ---------------------------------------------------------

namespace detail {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  auto contfrac = [](double a, double b, double x) {
    const double tiny = 1e-300;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
      d = 1.0 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
      d = 1.0 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h;
  };
  // The front factor is symmetric under (a, b, x) -> (b, a, 1 - x), so the
  // mirrored branch reuses it. Mirroring into the continued fraction directly
  // keeps this total: a self-recursive mirror loops forever at x = 0.5 with
  // a = b, which paired tests hit whenever |t| = 1.
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * contfrac(a, b, x) / a;
  return 1.0 - std::exp(ln_front) * contfrac(b, a, 1.0 - x) / b;
}

}  // namespace detail

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  bool significant = false;
  double mean_diff = 0.0;
  std::size_t n = 0;
};

// Two-sided paired t-test on per-seed differences a_i - b_i. Zero-variance
// differences use the convention p = 0 for a nonzero shift and p = 1
// otherwise.
inline TTestResult paired_t_test(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ConfigError("paired t-test needs equally many values per side");
  if (a.size() < 2) throw ConfigError("paired t-test needs at least 2 pairs");
  TTestResult res;
  res.n = a.size();
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= double(diff.size());
  res.mean_diff = mean;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / double(diff.size() - 1);
  if (var == 0.0) {
    res.p_value = mean == 0.0 ? 1.0 : 0.0;
    res.t = mean == 0.0 ? 0.0
                        : std::copysign(std::numeric_limits<double>::infinity(),
                                        mean);
  } else {
    const double se = std::sqrt(var / double(diff.size()));
    res.t = mean / se;
    const double df = double(diff.size() - 1);
    res.p_value = detail::incomplete_beta(df / 2.0, 0.5,
                                          df / (df + res.t * res.t));
  }
  res.significant = res.p_value < 0.05;
  return res;
}

// --- silhouette ------------------------------------------------------------

// Mean silhouette per intent, with ground-truth intents as cluster labels and
// cosine distance. Singleton intents score 0 by convention, as do points
// whose intra and nearest-other distances are both 0.
inline std::map<std::string, double> silhouette_per_intent(
    const Matrix& embeddings, const std::vector<std::string>& intents) {
  if (embeddings.rows() != intents.size())
    throw DataError("embedding rows and intent labels differ in count");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < intents.size(); ++i)
    members[intents[i]].push_back(i);
  if (members.size() < 2)
    throw DataError("silhouette needs at least 2 intents");

  const std::size_t n = embeddings.rows();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = 1.0 - cosine_similarity(embeddings.row(i),
                                               embeddings.row(j),
                                               embeddings.cols());
      dist[i][j] = d;
      dist[j][i] = d;
    }

  std::map<std::string, double> out;
  for (const auto& [intent, own] : members) {
    double intent_sum = 0.0;
    for (std::size_t i : own) {
      double s = 0.0;
      if (own.size() > 1) {
        double a = 0.0;
        for (std::size_t j : own)
          if (j != i) a += dist[i][j];
        a /= double(own.size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [other, theirs] : members) {
          if (other == intent) continue;
          double m = 0.0;
          for (std::size_t j : theirs) m += dist[i][j];
          b = std::min(b, m / double(theirs.size()));
        }
        const double denom = std::max(a, b);
        s = denom > 0.0 ? (b - a) / denom : 0.0;
      }
      intent_sum += s;
    }
    out[intent] = intent_sum / double(own.size());
  }
  return out;
}

// --- report ----------------------------------------------------------------

struct MetricReport {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double binary_f1 = 0.0;
  double macro_f1 = 0.0;
  double avg = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  std::string dataset;

  nlohmann::json to_json() const {
    return {{"acc", acc},           {"nmi", nmi},
            {"ari", ari},           {"binary_f1", binary_f1},
            {"macro_f1", macro_f1}, {"avg", avg},
            {"seed", seed},         {"scheme", scheme},
            {"dataset", dataset}};
  }

  static MetricReport from_json(const nlohmann::json& j) {
    MetricReport r;
    r.acc = j.at("acc").get<double>();
    r.nmi = j.at("nmi").get<double>();
    r.ari = j.at("ari").get<double>();
    r.binary_f1 = j.at("binary_f1").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.avg = j.at("avg").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.scheme = j.at("scheme").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    return r;
  }
};

// Full per-run evaluation. ACC/NMI/ARI are scoped to examples whose ground
// truth is a novel intent, keeping the cluster ids those examples got from
// clustering the whole set; the F1 pair sees every example.
inline MetricReport evaluate_clustering(const std::vector<std::string>& intents,
                                        const std::vector<std::size_t>& clusters,
                                        const std::set<std::string>& known_intents,
                                        std::uint64_t seed = 0,
                                        const std::string& scheme = "",
                                        const std::string& dataset = "") {
  if (intents.size() != clusters.size())
    throw DataError("intent and cluster label counts differ");
  std::vector<std::string> novel_truth;
  std::vector<std::size_t> novel_clusters;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    if (known_intents.count(intents[i])) continue;
    novel_truth.push_back(intents[i]);
    novel_clusters.push_back(clusters[i]);
  }
  if (novel_truth.empty())
    throw DataError("no novel-intent examples in evaluation scope");

  MetricReport r;
  r.acc = clustering_accuracy(novel_truth, novel_clusters);
  r.nmi = nmi(novel_truth, novel_clusters);
  r.ari = ari(novel_truth, novel_clusters);
  r.binary_f1 = majority_vote_f1(intents, clusters, F1Mode::binary, known_intents);
  r.macro_f1 = majority_vote_f1(intents, clusters, F1Mode::macro, known_intents);
  r.avg = avg_metric({r.acc, r.nmi, r.ari, r.binary_f1, r.macro_f1});
  r.seed = seed;
  r.scheme = scheme;
  r.dataset = dataset;
  return r;
}

}  // namespace convlab
