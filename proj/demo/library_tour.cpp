// Minimal library walkthrough, no files involved: build a synthetic
// conversation set in memory, train the pairwise scheme on question features
// while answers carry the complementary signal, then cluster and score.
//
// Build (from the repo root, after configuring the project):
//   cmake --build build --target library_tour && ./build/library_tour

#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "convlab/convlab.hpp"

using namespace convlab;

int main() {
  // Six intents in two feature dimensions: question vectors sit on a circle,
  // answer vectors on a relabeled circle so intents that look alike by
  // question are far apart by answer.
  const std::size_t k = 6, per = 30, n = k * per;
  Matrix q(n, 4), a(n, 4), qa(n, 4);
  std::vector<std::string> intent;
  Rng rng(12);
  for (std::size_t c = 0; c < k; ++c) {
    const double qang = 2.0 * M_PI * double(c) / double(k);
    const double aang = 2.0 * M_PI * double((5 * c) % k) / double(k);
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      q.at(r, 0) = std::cos(qang) + 0.5 * rng.normal();
      q.at(r, 1) = std::sin(qang) + 0.5 * rng.normal();
      a.at(r, 2) = std::cos(aang) + 0.5 * rng.normal();
      a.at(r, 3) = std::sin(aang) + 0.5 * rng.normal();
      qa.at(r, 0) = q.at(r, 0);
      qa.at(r, 1) = q.at(r, 1);
      qa.at(r, 2) = a.at(r, 2);
      qa.at(r, 3) = a.at(r, 3);
      intent.push_back("intent_" + std::to_string(c));
    }
  }
  FieldData feats;
  feats.q = &q;
  feats.a = &a;
  feats.qa = &qa;

  // Half the intents are known; half of their examples keep labels.
  const std::set<std::string> known = {"intent_0", "intent_2", "intent_4"};
  std::vector<std::optional<std::string>> labels(n);
  Rng lrng(7);
  for (std::size_t i = 0; i < n; ++i)
    if (known.count(intent[i]) && lrng.next_double() < 0.5)
      labels[i] = intent[i];

  ModelDims dims;
  dims.input_dim = 4;
  dims.hidden_dim = 32;
  dims.rep_dim = 4;
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 100;

  auto score = [&](const Matrix& reps, const char* name) {
    const ClusterAssignment clusters = kmeans(reps, k, 12);
    const MetricReport rep =
        evaluate_clustering(intent, clusters.assignment, known);
    std::printf("%-12s acc=%.3f nmi=%.3f ari=%.3f avg=%.3f\n", name, rep.acc,
                rep.nmi, rep.ari, rep.avg);
  };

  // Baseline: cluster the raw question features directly.
  RepSource qsrc;
  qsrc.fields = {Field::Q};
  score(static_representations(feats, qsrc), "static");

  // Question-only training.
  RepModel qmodel = init_model(dims, {1, 0, 0}, 12, qsrc);
  train_cdac(qmodel, feats, labels, cfg, 12);
  score(extract_representations(qmodel, feats), "cdac q");

  // All three heads with equal weights; the combined head feeds clustering.
  RepModel full = init_model(dims, {1, 1, 1}, 12);
  const TrainResult log = train_cdac(full, feats, labels, cfg, 12);
  score(extract_representations(full, feats), "cdac q+a+qa");

  std::printf("last epoch: phase=%s mean_loss=%.4f u=%.3f l=%.3f\n",
              log.log.back().phase.c_str(), log.log.back().mean_loss,
              log.log.back().u, log.log.back().l);
  return 0;
}
