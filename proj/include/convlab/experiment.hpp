// Experiment orchestration: JSON-backed configs, multi-seed runs chaining
// mask -> train -> cluster -> evaluate, aggregation, and report rendering.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "convlab/cluster.hpp"
#include "convlab/common.hpp"
#include "convlab/data.hpp"
#include "convlab/metrics.hpp"
#include "convlab/model.hpp"
#include "convlab/protocol.hpp"
#include "convlab/schemes.hpp"

namespace convlab {

// --- config ----------------------------------------------------------------

// Hyperparameter grids the config is restricted to. Keeping the domain small
// makes sweeps enumerable and catches unit mistakes (a batch size of 6 is far
// more likely a typo than a choice).
inline constexpr std::size_t kRepDimGrid[] = {16, 32, 64, 128, 256};
inline constexpr std::size_t kBatchGrid[] = {16, 32, 64, 128, 256, 512};
inline constexpr double kLrGrid[] = {1e-5, 5e-5, 1e-4};

struct ExperimentConfig {
  std::string dataset_path;
  std::size_t feature_dim = 2048;  // hashed featurizer width when no embeddings
  // Optional precomputed embeddings per field ("Q"/"A"/"QA") as EMB1 files,
  // row-aligned with the dataset. Fields without an entry are featurized.
  std::map<std::string, std::string> embeddings;

  std::string scheme = "cdac";
  HeadWeights lambda{1.0, 0.0, 0.0};
  std::string rep_source;  // "" = QA head if active, else first active head
  std::size_t hidden_dim = 0;  // 0 = input width
  std::size_t rep_dim = 64;
  std::size_t batch_size = 64;
  double learning_rate = 5e-5;
  std::size_t max_epochs = 100;
  double delta = 1.0;

  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 0;
  double novel_ratio = 0.5;
  double labeled_ratio = 0.5;

  std::string k_mode = "ground_truth";  // or "overcluster"
  double overcluster_factor = 1.0;
  std::string eval_split = "test";  // "val" during learning-rate sweeps

  std::string label;       // report row name; defaults to the scheme name
  std::string output_dir;  // "" = keep everything in memory

  void validate() const {
    if (dataset_path.empty()) throw ConfigError("config needs a dataset path");
    if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
    parse_scheme(scheme);
    if (lambda.q < 0 || lambda.a < 0 || lambda.qa < 0)
      throw ConfigError("lambda weights must be non-negative");
    if (lambda.sum() <= 0) throw ConfigError("lambda weights must not all be zero");
    if (!rep_source.empty()) rep_source_from_string(rep_source);
    const auto* rd = std::find(std::begin(kRepDimGrid), std::end(kRepDimGrid), rep_dim);
    if (rd == std::end(kRepDimGrid))
      throw ConfigError("rep_dim must be one of 16/32/64/128/256");
    const auto* bs = std::find(std::begin(kBatchGrid), std::end(kBatchGrid), batch_size);
    if (bs == std::end(kBatchGrid))
      throw ConfigError("batch_size must be one of 16/32/64/128/256/512");
    const auto* lr = std::find(std::begin(kLrGrid), std::end(kLrGrid), learning_rate);
    if (lr == std::end(kLrGrid))
      throw ConfigError("learning_rate must be one of 1e-5/5e-5/1e-4");
    if (delta <= 0) throw ConfigError("delta must be positive");
    if (n_seeds == 0) throw ConfigError("n_seeds must be >= 1");
    if (novel_ratio <= 0 || novel_ratio >= 1)
      throw ConfigError("novel_ratio must be in (0, 1)");
    if (labeled_ratio <= 0 || labeled_ratio >= 1)
      throw ConfigError("labeled_ratio must be in (0, 1)");
    if (k_mode != "ground_truth" && k_mode != "overcluster")
      throw ConfigError("k_mode must be ground_truth or overcluster");
    if (k_mode == "overcluster" && overcluster_factor < 1.0)
      throw ConfigError("overcluster_factor must be >= 1");
    if (eval_split != "test" && eval_split != "val")
      throw ConfigError("eval_split must be test or val");
    for (const auto& [field, path] : embeddings) {
      parse_field(field);
      if (path.empty()) throw ConfigError("empty embedding path for field " + field);
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json lam = {lambda.q, lambda.a, lambda.qa};
    return {{"dataset", dataset_path},
            {"feature_dim", feature_dim},
            {"embeddings", embeddings},
            {"scheme", scheme},
            {"lambda", lam},
            {"rep_source", rep_source},
            {"hidden_dim", hidden_dim},
            {"rep_dim", rep_dim},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"max_epochs", max_epochs},
            {"delta", delta},
            {"n_seeds", n_seeds},
            {"base_seed", base_seed},
            {"novel_ratio", novel_ratio},
            {"labeled_ratio", labeled_ratio},
            {"k_mode", k_mode},
            {"overcluster_factor", overcluster_factor},
            {"eval_split", eval_split},
            {"label", label},
            {"output_dir", output_dir}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "dataset",      "feature_dim",   "embeddings",  "scheme",
        "lambda",       "rep_source",    "hidden_dim",  "rep_dim",
        "batch_size",   "learning_rate", "max_epochs",  "delta",
        "n_seeds",      "base_seed",     "novel_ratio", "labeled_ratio",
        "k_mode",       "overcluster_factor",           "eval_split",
        "label",        "output_dir"};
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (!known.count(key)) throw ConfigError("unknown config key: " + key);
    }
    if (!j.count("dataset")) throw ConfigError("config needs a dataset path");
    ExperimentConfig c;
    c.dataset_path = j.at("dataset").get<std::string>();
    if (j.count("feature_dim")) c.feature_dim = j.at("feature_dim").get<std::size_t>();
    if (j.count("embeddings"))
      c.embeddings = j.at("embeddings").get<std::map<std::string, std::string>>();
    if (j.count("scheme")) c.scheme = j.at("scheme").get<std::string>();
    if (j.count("lambda")) {
      const auto& lam = j.at("lambda");
      if (!lam.is_array() || lam.size() != 3)
        throw ConfigError("lambda must be an array [q, a, qa]");
      c.lambda = {lam[0].get<double>(), lam[1].get<double>(), lam[2].get<double>()};
    }
    if (j.count("rep_source")) c.rep_source = j.at("rep_source").get<std::string>();
    if (j.count("hidden_dim")) c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (j.count("rep_dim")) c.rep_dim = j.at("rep_dim").get<std::size_t>();
    if (j.count("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.count("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.count("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.count("delta")) c.delta = j.at("delta").get<double>();
    if (j.count("n_seeds")) c.n_seeds = j.at("n_seeds").get<std::size_t>();
    if (j.count("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.count("novel_ratio")) c.novel_ratio = j.at("novel_ratio").get<double>();
    if (j.count("labeled_ratio")) c.labeled_ratio = j.at("labeled_ratio").get<double>();
    if (j.count("k_mode")) c.k_mode = j.at("k_mode").get<std::string>();
    if (j.count("overcluster_factor"))
      c.overcluster_factor = j.at("overcluster_factor").get<double>();
    if (j.count("eval_split")) c.eval_split = j.at("eval_split").get<std::string>();
    if (j.count("label")) c.label = j.at("label").get<std::string>();
    if (j.count("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    return c;
  }
};

// Hash of the canonical config JSON minus the output directory, so moving
// artifacts elsewhere does not change run identity.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = cfg.to_json();
  j.erase("output_dir");
  const std::string canon = j.dump();
  return fnv1a64(canon.data(), canon.size());
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- run records -----------------------------------------------------------

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string label;
  MetricReport report;
  std::string train_log_path;  // "" when nothing was persisted
  double wall_ms = 0.0;

  nlohmann::json to_json() const {
    return {{"config_hash", config_hash}, {"seed", seed},
            {"label", label},            {"report", report.to_json()},
            {"train_log_path", train_log_path},
            {"wall_ms", wall_ms}};
  }

  static RunRecord from_json(const nlohmann::json& j) {
    RunRecord r;
    r.config_hash = j.at("config_hash").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.label = j.at("label").get<std::string>();
    r.report = MetricReport::from_json(j.at("report"));
    r.train_log_path = j.at("train_log_path").get<std::string>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
  }
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct ExperimentResult {
  std::uint64_t config_hash = 0;
  std::vector<RunRecord> records;
  std::map<std::string, MetricStats> aggregate;
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"acc",       "nmi", "ari",
                                                 "binary_f1", "macro_f1", "avg"};
  return names;
}

inline double metric_value(const MetricReport& r, const std::string& name) {
  if (name == "acc") return r.acc;
  if (name == "nmi") return r.nmi;
  if (name == "ari") return r.ari;
  if (name == "binary_f1") return r.binary_f1;
  if (name == "macro_f1") return r.macro_f1;
  if (name == "avg") return r.avg;
  throw ConfigError("unknown metric: " + name);
}

// Mean and sample standard deviation (n - 1 denominator; 0 for a single run).
inline std::map<std::string, MetricStats> aggregate_records(
    const std::vector<RunRecord>& records) {
  if (records.empty()) throw ConfigError("cannot aggregate zero records");
  std::map<std::string, MetricStats> out;
  for (const auto& name : metric_names()) {
    double sum = 0.0;
    for (const auto& r : records) sum += metric_value(r.report, name);
    const double mean = sum / double(records.size());
    double ss = 0.0;
    for (const auto& r : records) {
      const double d = metric_value(r.report, name) - mean;
      ss += d * d;
    }
    const double sd =
        records.size() > 1 ? std::sqrt(ss / double(records.size() - 1)) : 0.0;
    out[name] = {mean, sd};
  }
  return out;
}

// --- running ---------------------------------------------------------------

namespace detail {

inline std::size_t thread_cap(std::size_t n_runs) {
  std::size_t cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  if (const char* env = std::getenv("CONV_LAB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0)
      throw ConfigError("CONV_LAB_THREADS must be a positive integer");
    cap = std::size_t(v);
  }
  return std::min(cap, std::max<std::size_t>(n_runs, 1));
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

// Owns the gathered per-field matrices so FieldData pointers stay valid.
struct FieldSet {
  std::map<Field, Matrix> mats;

  FieldData view() const {
    FieldData fd;
    for (const auto& [f, m] : mats) {
      if (f == Field::Q) fd.q = &m;
      if (f == Field::A) fd.a = &m;
      if (f == Field::QA) fd.qa = &m;
    }
    return fd;
  }
};

}  // namespace detail

// The head whose output gets clustered: an explicit config wins, otherwise
// the QA head when it is active, otherwise the first active head.
inline RepSource resolve_rep_source(const ExperimentConfig& cfg) {
  if (!cfg.rep_source.empty()) return rep_source_from_string(cfg.rep_source);
  RepSource rs;
  if (cfg.lambda.qa > 0)
    rs.fields = {Field::QA};
  else if (cfg.lambda.q > 0)
    rs.fields = {Field::Q};
  else
    rs.fields = {Field::A};
  return rs;
}

// Fields the run touches: every head with positive weight plus the rep source.
inline std::set<Field> required_fields(const ExperimentConfig& cfg) {
  std::set<Field> out;
  const Scheme s = parse_scheme(cfg.scheme);
  if (s != Scheme::static_repr) {
    if (cfg.lambda.q > 0) out.insert(Field::Q);
    if (cfg.lambda.a > 0) out.insert(Field::A);
    if (cfg.lambda.qa > 0) out.insert(Field::QA);
  }
  for (Field f : resolve_rep_source(cfg).fields) out.insert(f);
  return out;
}

// Featurize (or load) one matrix per required field, row-aligned with the
// dataset. Precomputed EMB1 files must match the dataset length and agree on
// width across fields.
inline std::map<Field, Matrix> build_field_matrices(const ExperimentConfig& cfg,
                                                    const Dataset& dataset) {
  std::map<Field, Matrix> out;
  std::size_t width = 0;
  for (Field f : required_fields(cfg)) {
    auto it = cfg.embeddings.find(field_name(f));
    Matrix m = it != cfg.embeddings.end() ? load_embeddings(it->second)
                                          : featurize(dataset, f, cfg.feature_dim);
    if (m.rows() != dataset.size())
      throw DataError(std::string("field ") + field_name(f) + " has " +
                      std::to_string(m.rows()) + " rows for " +
                      std::to_string(dataset.size()) + " examples");
    if (width == 0) width = m.cols();
    if (m.cols() != width)
      throw DataError("field matrices disagree on width");
    out.emplace(f, std::move(m));
  }
  return out;
}

// Everything one seed produces before clustering: the masked view it trained
// under and, for the learned schemes, the trained model. `has_model` is false
// for the static baseline, which clusters raw features.
struct SeedTraining {
  MaskedView view;
  RepModel model;
  TrainResult trained;
  bool has_model = false;
};

inline SeedTraining train_for_seed(const ExperimentConfig& cfg,
                                   const Dataset& dataset,
                                   const std::map<Field, Matrix>& field_mats,
                                   std::uint64_t seed) {
  const Scheme scheme = parse_scheme(cfg.scheme);
  SeedTraining out;
  out.view = mask(dataset, cfg.novel_ratio, cfg.labeled_ratio, seed);
  if (scheme == Scheme::static_repr) return out;

  std::vector<std::size_t> rows = dataset.split_indices(Split::train);
  if (scheme == Scheme::supervised) {
    // LMCL touches labeled examples only; the rest of the train split
    // cannot contribute without a class.
    std::vector<std::size_t> labeled;
    for (std::size_t i : rows)
      if (out.view.is_labeled(dataset[i].id)) labeled.push_back(i);
    rows = std::move(labeled);
  }
  std::vector<std::optional<std::string>> labels;
  labels.reserve(rows.size());
  for (std::size_t i : rows) {
    const Example& ex = dataset[i];
    if (out.view.is_labeled(ex.id) && ex.intent)
      labels.emplace_back(*ex.intent);
    else
      labels.emplace_back(std::nullopt);
  }

  detail::FieldSet train_fs;
  std::size_t width = 0;
  for (const auto& [f, m] : field_mats) {
    width = m.cols();
    train_fs.mats.emplace(f, detail::gather_rows(m, rows));
  }

  ModelDims dims;
  dims.input_dim = width;
  dims.hidden_dim = cfg.hidden_dim;
  dims.rep_dim = cfg.rep_dim;
  out.model = init_model(dims, cfg.lambda, seed, resolve_rep_source(cfg));

  TrainConfig tc;
  tc.scheme = scheme;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.max_epochs = cfg.max_epochs;
  tc.delta = cfg.delta;

  switch (scheme) {
    case Scheme::dac:
      out.trained = train_dac(out.model, train_fs.view(), tc, seed);
      break;
    case Scheme::cdac:
      out.trained = train_cdac(out.model, train_fs.view(), labels, tc, seed);
      break;
    case Scheme::supervised:
      out.trained = train_supervised(out.model, train_fs.view(), labels, tc, seed);
      break;
    default:
      throw ConfigError("unhandled scheme: " + cfg.scheme);
  }
  out.has_model = true;
  return out;
}

namespace detail {

inline RunRecord run_one_seed(const ExperimentConfig& cfg, std::uint64_t hash,
                              const Dataset& dataset,
                              const std::map<Field, Matrix>& field_mats,
                              std::uint64_t seed, const std::string& run_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const RepSource rs = resolve_rep_source(cfg);
  const std::string row_label = cfg.label.empty() ? cfg.scheme : cfg.label;

  SeedTraining st = train_for_seed(cfg, dataset, field_mats, seed);
  const MaskedView& view = st.view;

  const auto eval_idx = dataset.split_indices(
      cfg.eval_split == "val" ? Split::val : Split::test);
  if (eval_idx.empty())
    throw DataError("empty " + cfg.eval_split + " split");

  FieldSet eval_fs;
  for (const auto& [f, m] : field_mats)
    eval_fs.mats.emplace(f, gather_rows(m, eval_idx));

  const Matrix reps = st.has_model
                          ? extract_representations(st.model, eval_fs.view())
                          : static_representations(eval_fs.view(), rs);

  std::size_t k = dataset.intents().size();
  if (cfg.k_mode == "overcluster") k = overcluster_k(k, cfg.overcluster_factor);
  const std::uint64_t kmeans_seed = Rng(seed).stream(streams::kmeans).next_u64();
  const ClusterAssignment clusters = kmeans(reps, k, kmeans_seed);

  std::vector<std::string> truth;
  truth.reserve(eval_idx.size());
  for (std::size_t i : eval_idx) {
    if (!dataset[i].intent)
      throw DataError("example " + dataset[i].id + " has no intent label");
    truth.push_back(*dataset[i].intent);
  }

  RunRecord rec;
  rec.config_hash = hash;
  rec.seed = seed;
  rec.label = row_label;
  rec.report = evaluate_clustering(truth, clusters.assignment, view.known_intents,
                                   seed, row_label, cfg.dataset_path);

  if (!run_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);
    write_text(run_dir + "/metrics.json", rec.report.to_json().dump(2) + "\n");
    write_text(run_dir + "/masked.json", view.to_json().dump(2) + "\n");
    rec.train_log_path = run_dir + "/train_log.jsonl";
    save_training_log(st.trained, rec.train_log_path);
    if (st.has_model) save_model(st.model, run_dir + "/model.rmc1");
  }

  const auto t1 = std::chrono::steady_clock::now();
  rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  if (!run_dir.empty()) {
    nlohmann::json run = {{"seed", seed},
                          {"wall_ms", rec.wall_ms},
                          {"train_log_path", rec.train_log_path}};
    write_text(run_dir + "/run.json", run.dump(2) + "\n");
  }
  return rec;
}

}  // namespace detail

// One multi-seed experiment. Seeds come from seed_plan(base_seed, n_seeds)
// and may run concurrently (capped by CONV_LAB_THREADS); each run owns its
// model and RNG streams, so results do not depend on scheduling. On failure
// the finished runs stay persisted, a FAILED.json flag is written, and the
// first error (by seed order) is rethrown.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t hash = config_hash(cfg);
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const std::map<Field, Matrix> field_mats = build_field_matrices(cfg, dataset);
  const std::vector<std::uint64_t> seeds = seed_plan(cfg.base_seed, cfg.n_seeds);

  std::string exp_dir;
  if (!cfg.output_dir.empty()) {
    exp_dir = cfg.output_dir + "/" + hash_hex(hash);
    std::filesystem::create_directories(exp_dir);
    detail::write_text(exp_dir + "/config.json", cfg.to_json().dump(2) + "\n");
  }

  ExperimentResult result;
  result.config_hash = hash;
  result.records.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size() || failed.load()) return;
      const std::string run_dir =
          exp_dir.empty() ? "" : exp_dir + "/" + std::to_string(seeds[i]);
      try {
        result.records[i] =
            detail::run_one_seed(cfg, hash, dataset, field_mats, seeds[i], run_dir);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t n_threads = detail::thread_cap(seeds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    if (!exp_dir.empty()) {
      std::string what = "unknown error";
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      nlohmann::json flag = {{"seed", seeds[i]}, {"error", what}};
      detail::write_text(exp_dir + "/FAILED.json", flag.dump(2) + "\n");
    }
    std::rethrow_exception(errors[i]);
  }

  result.aggregate = aggregate_records(result.records);
  if (!exp_dir.empty()) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : result.records) recs.push_back(r.to_json());
    detail::write_text(exp_dir + "/records.json", recs.dump(2) + "\n");
    nlohmann::json agg;
    for (const auto& [name, st] : result.aggregate)
      agg[name] = {{"mean", st.mean}, {"stddev", st.stddev}};
    detail::write_text(exp_dir + "/aggregate.json", agg.dump(2) + "\n");
  }
  return result;
}

// --- presets ---------------------------------------------------------------

// Per-dataset representation and batch sizes found by grid search.
struct SizePreset {
  std::size_t rep_dim;
  std::size_t batch_size;
};

inline const std::map<std::string, SizePreset>& size_presets() {
  static const std::map<std::string, SizePreset> presets = {
      {"banking77", {256, 128}}, {"clinc150", {256, 128}}, {"purchase", {32, 16}},
      {"delivery", {32, 32}},    {"retail", {64, 16}}};
  return presets;
}

// Expands a preset name into concrete configs. Dataset presets tune sizes in
// place; "conversational" fans out into the five head-weight ablations, each
// clustering the head its row is named after.
inline std::vector<ExperimentConfig> expand_presets(const ExperimentConfig& base,
                                                    const std::string& preset) {
  if (preset.empty()) return {base};
  auto it = size_presets().find(preset);
  if (it != size_presets().end()) {
    ExperimentConfig c = base;
    c.rep_dim = it->second.rep_dim;
    c.batch_size = it->second.batch_size;
    return {c};
  }
  if (preset == "conversational") {
    struct Variant {
      const char* label;
      HeadWeights lambda;
      const char* rep_source;
    };
    const Variant variants[] = {
        {"q", {1.0, 0.0, 0.0}, "Q"},
        {"a", {0.0, 1.0, 0.0}, "A"},
        {"qa", {0.0, 0.0, 1.0}, "QA"},
        {"q+a", {0.5, 0.5, 0.0}, "Q"},
        {"q+a+qa", {1.0 / 3, 1.0 / 3, 1.0 / 3}, "QA"},
    };
    std::vector<ExperimentConfig> out;
    for (const auto& v : variants) {
      ExperimentConfig c = base;
      c.lambda = v.lambda;
      c.rep_source = v.rep_source;
      c.label = base.label.empty() ? v.label : base.label + "/" + v.label;
      out.push_back(std::move(c));
    }
    return out;
  }
  throw ConfigError("unknown preset: " + preset);
}

// --- learning-rate sweep ---------------------------------------------------

struct LrSweepOutcome {
  double best_lr = 0.0;
  std::map<double, double> val_avg;  // grid lr -> mean validation AVG
  ExperimentResult result;           // final run at best_lr, as configured
};

// Tries every grid learning rate on the validation split (nothing persisted),
// keeps the one with the best mean AVG (ties go to the smaller rate), then
// runs the experiment as configured at that rate.
inline LrSweepOutcome lr_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  LrSweepOutcome out;
  bool have = false;
  for (double lr : kLrGrid) {
    ExperimentConfig probe = cfg;
    probe.learning_rate = lr;
    probe.eval_split = "val";
    probe.output_dir.clear();
    const ExperimentResult res = run_experiment(probe);
    const double score = res.aggregate.at("avg").mean;
    out.val_avg[lr] = score;
    if (!have || score > out.val_avg[out.best_lr]) {
      out.best_lr = lr;
      have = true;
    }
  }
  ExperimentConfig final_cfg = cfg;
  final_cfg.learning_rate = out.best_lr;
  out.result = run_experiment(final_cfg);
  return out;
}

// --- reports ---------------------------------------------------------------

enum class ReportFormat { markdown, csv, json };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("unknown report format: " + s);
}

namespace detail {

struct ReportRow {
  std::string label;
  std::vector<const RunRecord*> runs;  // sorted by seed
  std::map<std::string, MetricStats> stats;
  std::optional<double> p_value;  // paired t on AVG against the baseline
  bool significant = false;
};

inline std::string fmt_cell(const MetricStats& st) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f±%.1f", st.mean * 100.0, st.stddev * 100.0);
  return buf;
}

inline std::vector<ReportRow> report_rows(const std::vector<RunRecord>& records,
                                          const std::string& baseline) {
  if (records.empty()) throw ConfigError("report needs at least one record");
  std::set<std::string> datasets;
  for (const auto& r : records) datasets.insert(r.report.dataset);
  if (datasets.size() > 1)
    throw DataError("records span multiple datasets; report them separately");

  std::vector<ReportRow> rows;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, fresh] = index.emplace(r.label, rows.size());
    if (fresh) rows.push_back({r.label, {}, {}, std::nullopt, false});
    rows[it->second].runs.push_back(&r);
  }
  for (auto& row : rows) {
    std::sort(row.runs.begin(), row.runs.end(),
              [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
    std::vector<RunRecord> copy;
    copy.reserve(row.runs.size());
    for (const auto* r : row.runs) copy.push_back(*r);
    row.stats = aggregate_records(copy);
  }

  if (!baseline.empty()) {
    const ReportRow* base = nullptr;
    for (const auto& row : rows)
      if (row.label == baseline) base = &row;
    if (!base) throw ConfigError("baseline row not found: " + baseline);
    std::vector<double> base_avg;
    for (const auto* r : base->runs) base_avg.push_back(r->report.avg);
    for (auto& row : rows) {
      if (row.label == baseline) continue;
      if (row.runs.size() != base->runs.size() || row.runs.size() < 2) continue;
      std::vector<double> avg;
      for (const auto* r : row.runs) avg.push_back(r->report.avg);
      const TTestResult t = paired_t_test(avg, base_avg);
      row.p_value = t.p_value;
      row.significant = t.significant;
    }
  }
  return rows;
}

}  // namespace detail

// Renders grouped records as a table. Markdown cells are percent with one
// decimal ("37.0±4.1"); a "*" on AVG marks p < 0.05 against the baseline row.
inline std::string render_report(const std::vector<RunRecord>& records,
                                 ReportFormat format,
                                 const std::string& baseline = "") {
  const std::vector<detail::ReportRow> rows = detail::report_rows(records, baseline);

  if (format == ReportFormat::markdown) {
    std::string out =
        "| scheme | ACC | NMI | ARI | BIN-F1 | MAC-F1 | AVG |\n"
        "|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
      out += "| " + row.label;
      for (const auto& name : metric_names()) {
        out += " | " + detail::fmt_cell(row.stats.at(name));
        if (name == "avg" && row.significant) out += "*";
      }
      out += " |\n";
    }
    if (!baseline.empty())
      out += "\n`*` p < 0.05, paired t-test on AVG against `" + baseline + "`.\n";
    return out;
  }

  if (format == ReportFormat::csv) {
    std::string out = "label,metric,mean,stddev\n";
    char buf[128];
    for (const auto& row : rows) {
      for (const auto& name : metric_names()) {
        const MetricStats& st = row.stats.at(name);
        std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g\n", row.label.c_str(),
                      name.c_str(), st.mean, st.stddev);
        out += buf;
      }
    }
    return out;
  }

  nlohmann::json doc;
  doc["dataset"] = records.front().report.dataset;
  doc["baseline"] = baseline;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json jr;
    jr["label"] = row.label;
    jr["n_seeds"] = row.runs.size();
    nlohmann::json metrics;
    for (const auto& name : metric_names()) {
      const MetricStats& st = row.stats.at(name);
      metrics[name] = {{"mean", st.mean}, {"stddev", st.stddev}};
    }
    jr["metrics"] = metrics;
    if (row.p_value) {
      jr["p_value_avg"] = *row.p_value;
      jr["significant"] = row.significant;
    }
    jrows.push_back(jr);
  }
  doc["rows"] = jrows;
  return doc.dump(2) + "\n";
}

}  // namespace convlab
