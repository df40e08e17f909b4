#pragma once

// Cluster post-processing: extractive summaries (a one-vs-rest logistic
// regression picks each message's most informative sentence, the summary
// keeps the five most central ones) and known-intent infilling by nearest
// centroid in representation space.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "convlab/data.hpp"

namespace convlab {

// --- known-intent infilling ------------------------------------------------

struct InfillPrediction {
  std::string intent;
  double confidence = 0.0;
};

// Nearest-centroid classification over the known intents (those appearing in
// `labels`). Labeled rows keep their own intent with confidence 1; unlabeled
// rows get the closest centroid by Euclidean distance, with confidence from a
// softmax over negative distances (temperature 1). Exact distance ties go to
// the lexicographically smaller intent.
inline std::vector<InfillPrediction> infill_known_intents(
    const Matrix& reps, const std::vector<std::optional<std::string>>& labels) {
  if (labels.size() != reps.rows())
    throw DataError("label count does not match representation rows");

  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    if (!labels[i]) continue;
    auto& [vec, count] = sums[*labels[i]];
    if (vec.empty()) vec.assign(reps.cols(), 0.0);
    for (std::size_t c = 0; c < reps.cols(); ++c) vec[c] += reps.at(i, c);
    ++count;
  }
  if (sums.empty()) throw ConfigError("infilling needs labeled examples");

  std::vector<std::string> intents;
  Matrix centroids(sums.size(), reps.cols());
  std::size_t k = 0;
  for (const auto& [intent, acc] : sums) {
    intents.push_back(intent);
    for (std::size_t c = 0; c < reps.cols(); ++c)
      centroids.at(k, c) = acc.first[c] / double(acc.second);
    ++k;
  }

  std::vector<InfillPrediction> out(reps.rows());
  std::vector<double> dist(intents.size()), p(intents.size());
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    if (labels[i]) {
      out[i] = {*labels[i], 1.0};
      continue;
    }
    for (std::size_t j = 0; j < intents.size(); ++j)
      dist[j] = std::sqrt(
          squared_distance(reps.row(i), centroids.row(j), reps.cols()));
    const double dmin = *std::min_element(dist.begin(), dist.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < intents.size(); ++j) {
      p[j] = std::exp(dmin - dist[j]);
      sum += p[j];
    }
    std::size_t best = 0;
    for (std::size_t j = 0; j < intents.size(); ++j) {
      p[j] /= sum;
      if (p[j] > p[best]) best = j;  // ties keep the lex-smaller intent
    }
    out[i] = {intents[best], p[best]};
  }
  return out;
}

// --- sentence splitting ----------------------------------------------------

// Splits on '.', '?' or '!' followed by whitespace; the punctuation stays
// with its sentence. A crude heuristic (it splits after abbreviations like
// "Mr."), but deterministic and easy to audit.
inline std::vector<std::string> split_sentences(const std::string& text) {
  const auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  std::vector<std::string> out;
  const auto push = [&](std::size_t from, std::size_t to) {
    while (from < to && is_space(text[from])) ++from;
    while (to > from && is_space(text[to - 1])) --to;
    if (to > from) out.push_back(text.substr(from, to - from));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '?' || c == '!') &&
        (i + 1 == text.size() || is_space(text[i + 1]))) {
      push(start, i + 1);
      start = i + 1;
    }
  }
  push(start, text.size());
  return out;
}

// --- cluster summaries -----------------------------------------------------

struct ClusterSummary {
  std::size_t cluster_id = 0;
  std::vector<std::string> sentences;  // up to 5, most central first
  std::vector<double> scores;          // informativeness, parallel to sentences
  double known_intent_share = 0.0;
  std::string flag = "likely-novel";   // or "likely-known(<intent>)"
  bool empty = false;                  // no sentences found in the cluster

  nlohmann::json to_json() const {
    nlohmann::json sj = nlohmann::json::array();
    for (std::size_t i = 0; i < sentences.size(); ++i)
      sj.push_back({{"text", sentences[i]}, {"score", scores[i]}});
    return {{"cluster_id", cluster_id},
            {"sentences", sj},
            {"known_intent_share", known_intent_share},
            {"flag", flag},
            {"empty", empty}};
  }
};

struct SummarizeOptions {
  std::size_t feature_dim = 512;       // hashed bag-of-words buckets
  double l2_strength = 1.0;
  double tol = 1e-6;                   // gradient sup-norm stop
  std::size_t max_iters = 10000;
  double known_share_threshold = 0.5;  // at or above -> likely-known
};

namespace detail {

// Hashed bag-of-words counts (no idf, no normalization).
inline std::vector<double> bow_row(const std::string& text, std::size_t dim) {
  std::vector<double> row(dim, 0.0);
  for (const auto& tok : tokenize(text)) row[token_bucket(tok, dim)] += 1.0;
  return row;
}

// Binary L2-regularized logistic regression fit by plain gradient descent
// with a 1/L step (L from the logistic smoothness bound), run until the
// gradient sup-norm drops below tol. Bias is unregularized.
struct LogisticFit {
  std::vector<double> w;
  double b = 0.0;
};

inline LogisticFit fit_logistic(const std::vector<std::vector<double>>& x,
                                const std::vector<int>& y,
                                const SummarizeOptions& opts) {
  const std::size_t n = x.size(), dim = x.front().size();
  double max_sq = 0.0;
  for (const auto& row : x) {
    double sq = 0.0;
    for (double v : row) sq += v * v;
    max_sq = std::max(max_sq, sq);
  }
  const double step = 1.0 / (0.25 * (max_sq + 1.0) + opts.l2_strength);

  LogisticFit fit;
  fit.w.assign(dim, 0.0);
  std::vector<double> gw(dim);
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = fit.b;
      for (std::size_t d = 0; d < dim; ++d) z += fit.w[d] * x[i][d];
      const double yz = double(y[i]) * z;
      // sigma(-yz), computed without overflow on either side.
      const double s = yz >= 0.0 ? std::exp(-yz) / (1.0 + std::exp(-yz))
                                 : 1.0 / (1.0 + std::exp(yz));
      const double coeff = -double(y[i]) * s / double(n);
      for (std::size_t d = 0; d < dim; ++d) gw[d] += coeff * x[i][d];
      gb += coeff;
    }
    double sup = std::abs(gb);
    for (std::size_t d = 0; d < dim; ++d) {
      gw[d] += opts.l2_strength * fit.w[d];
      sup = std::max(sup, std::abs(gw[d]));
    }
    if (sup < opts.tol) break;
    for (std::size_t d = 0; d < dim; ++d) fit.w[d] -= step * gw[d];
    fit.b -= step * gb;
  }
  return fit;
}

}  // namespace detail

// Extractive multi-document summaries, one per distinct cluster id:
//   1. fit one-vs-rest logistic regression on hashed bag-of-words question
//      features to predict cluster ids;
//   2. score every sentence by the sum of the owning cluster's coefficients
//      over the sentence's distinct feature buckets and keep each message's
//      top sentence (earlier sentence on ties);
//   3. embed the kept sentences with the text featurizer and return the five
//      nearest their centroid by cosine, most central first.
// When `infill` is given (aligned with the dataset), each summary also gets
// the largest single known-intent share among its members and the resulting
// likely-known / likely-novel flag.
inline std::vector<ClusterSummary> summarize_clusters(
    const Dataset& dataset, const std::vector<std::size_t>& assignment,
    const std::vector<InfillPrediction>* infill = nullptr,
    const SummarizeOptions& opts = {}) {
  if (assignment.size() != dataset.size())
    throw DataError("assignment size does not match dataset size");
  if (dataset.size() == 0) throw DataError("empty dataset");
  if (infill && infill->size() != dataset.size())
    throw DataError("infill predictions do not match dataset size");

  std::vector<std::size_t> ids = assignment;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2)
    throw ConfigError("summarization needs at least 2 clusters (one-vs-rest)");

  std::vector<std::vector<double>> x;
  x.reserve(dataset.size());
  for (const auto& e : dataset.examples())
    x.push_back(detail::bow_row(e.question, opts.feature_dim));

  std::vector<ClusterSummary> out;
  for (std::size_t cid : ids) {
    std::vector<int> y(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      y[i] = assignment[i] == cid ? 1 : -1;
    const detail::LogisticFit fit = detail::fit_logistic(x, y, opts);

    std::vector<std::string> kept;
    std::vector<double> kept_score;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (assignment[i] != cid) continue;
      const std::vector<std::string> sentences =
          split_sentences(dataset[i].question);
      double best = 0.0;
      std::size_t best_idx = sentences.size();
      for (std::size_t s = 0; s < sentences.size(); ++s) {
        std::unordered_set<std::size_t> buckets;
        for (const auto& tok : tokenize(sentences[s]))
          buckets.insert(token_bucket(tok, opts.feature_dim));
        double score = 0.0;
        for (std::size_t b : buckets) score += fit.w[b];
        if (best_idx == sentences.size() || score > best) {
          best = score;
          best_idx = s;
        }
      }
      if (best_idx < sentences.size()) {
        kept.push_back(sentences[best_idx]);
        kept_score.push_back(best);
      }
    }

    ClusterSummary summary;
    summary.cluster_id = cid;
    if (kept.empty()) {
      summary.empty = true;
    } else {
      const Matrix emb = featurize_texts(kept, opts.feature_dim);
      std::vector<double> centroid(emb.cols(), 0.0);
      for (std::size_t r = 0; r < emb.rows(); ++r)
        for (std::size_t c = 0; c < emb.cols(); ++c)
          centroid[c] += emb.at(r, c) / double(emb.rows());
      std::vector<std::size_t> order(kept.size());
      std::iota(order.begin(), order.end(), 0);
      std::vector<double> sim(kept.size());
      for (std::size_t r = 0; r < kept.size(); ++r)
        sim[r] = cosine_similarity(emb.row(r), centroid.data(), emb.cols());
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
      const std::size_t take = std::min<std::size_t>(5, order.size());
      for (std::size_t r = 0; r < take; ++r) {
        summary.sentences.push_back(kept[order[r]]);
        summary.scores.push_back(kept_score[order[r]]);
      }
    }

    if (infill) {
      std::map<std::string, std::size_t> votes;
      std::size_t members = 0;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (assignment[i] != cid) continue;
        ++members;
        ++votes[(*infill)[i].intent];
      }
      std::string top;
      std::size_t top_n = 0;
      for (const auto& [intent, nvotes] : votes)
        if (nvotes > top_n) {  // map order: ties keep the lex-smaller intent
          top = intent;
          top_n = nvotes;
        }
      summary.known_intent_share =
          members ? double(top_n) / double(members) : 0.0;
      if (summary.known_intent_share >= opts.known_share_threshold)
        summary.flag = "likely-known(" + top + ")";
    }
    out.push_back(std::move(summary));
  }
  return out;
}

}  // namespace convlab
