#pragma once

// Simulated open-world setting: seeded masking of intents and labels over the
// train split, producing known/novel intent sets and the labeled subset.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "convlab/common.hpp"
#include "convlab/data.hpp"

namespace convlab {

struct MaskedView {
  std::set<std::string> known_intents;
  std::set<std::string> novel_intents;
  std::set<std::string> labeled_example_ids;
  std::set<std::string> unlabeled_example_ids;
  std::uint64_t seed = 0;

  bool is_labeled(const std::string& id) const {
    return labeled_example_ids.count(id) > 0;
  }
  bool is_novel(const std::string& intent) const {
    return novel_intents.count(intent) > 0;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["known_intents"] = known_intents;
    j["novel_intents"] = novel_intents;
    j["labeled_example_ids"] = labeled_example_ids;
    j["unlabeled_example_ids"] = unlabeled_example_ids;
    j["seed"] = seed;
    return j;
  }

  static MaskedView from_json(const nlohmann::json& j) {
    MaskedView v;
    v.known_intents = j.at("known_intents").get<std::set<std::string>>();
    v.novel_intents = j.at("novel_intents").get<std::set<std::string>>();
    v.labeled_example_ids = j.at("labeled_example_ids").get<std::set<std::string>>();
    v.unlabeled_example_ids = j.at("unlabeled_example_ids").get<std::set<std::string>>();
    v.seed = j.at("seed").get<std::uint64_t>();
    return v;
  }
};

// Masks the train split: floor(K * novel_intent_ratio) intents drawn
// uniformly become novel (all their examples unlabeled); of the remaining
// examples, floor(n * label_keep_ratio) stay labeled and the rest are
// unlabeled. Deterministic given (dataset, ratios, seed). Val/test splits are
// untouched and stay fully labeled for evaluation.
inline MaskedView mask(const Dataset& dataset, double novel_intent_ratio,
                       double label_keep_ratio, std::uint64_t seed) {
  if (!(novel_intent_ratio > 0.0 && novel_intent_ratio < 1.0))
    throw ConfigError("novel_intent_ratio must be in (0, 1)");
  if (!(label_keep_ratio > 0.0 && label_keep_ratio < 1.0))
    throw ConfigError("label_keep_ratio must be in (0, 1)");

  const auto train = dataset.split_indices(Split::train);
  if (train.empty()) throw DataError("train split is empty");
  std::set<std::string> intents;
  for (std::size_t i : train) {
    if (!dataset[i].intent)
      throw DataError("mask requires every train example labeled; \"" +
                      dataset[i].id + "\" has no intent");
    intents.insert(*dataset[i].intent);
  }

  Rng rng(seed);
  std::vector<std::string> ordered(intents.begin(), intents.end());
  Rng intent_rng = rng.stream(0);
  intent_rng.shuffle(ordered);
  const std::size_t n_novel =
      std::size_t(std::floor(double(ordered.size()) * novel_intent_ratio));

  MaskedView view;
  view.seed = seed;
  for (std::size_t i = 0; i < ordered.size(); ++i)
    (i < n_novel ? view.novel_intents : view.known_intents).insert(ordered[i]);

  std::vector<std::size_t> remaining;  // known-intent train examples
  for (std::size_t i : train) {
    if (view.is_novel(*dataset[i].intent))
      view.unlabeled_example_ids.insert(dataset[i].id);
    else
      remaining.push_back(i);
  }
  // Keep exactly floor(n * keep_ratio) labeled so the labeled-set size is the
  // floor of the stated fraction for any parity of n.
  const std::size_t n_keep =
      std::size_t(std::floor(double(remaining.size()) * label_keep_ratio));
  Rng label_rng = rng.stream(1);
  label_rng.shuffle(remaining);
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    const auto& id = dataset[remaining[i]].id;
    (i < n_keep ? view.labeled_example_ids : view.unlabeled_example_ids).insert(id);
  }
  if (view.labeled_example_ids.empty())
    throw ConfigError("masking would leave no labeled examples");
  return view;
}

// Derived seeds for multi-seed runs; each governs both masking and parameter
// initialization of one run. Successive SplitMix64 outputs are distinct.
inline std::vector<std::uint64_t> seed_plan(std::uint64_t base_seed,
                                            std::size_t n_seeds) {
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  Rng rng(base_seed);
  std::vector<std::uint64_t> seeds(n_seeds);
  for (auto& s : seeds) s = rng.next_u64();
  return seeds;
}

}  // namespace convlab
