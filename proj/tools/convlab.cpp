// Command line front end. Every verb reads and writes the documented file
// formats only: JSONL datasets, EMB1 matrices, JSON configs/masks/reports,
// and CSV assignment tables.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 anything else.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "convlab/convlab.hpp"

namespace {

using namespace convlab;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  return ExperimentConfig::from_json(parse_json_file(path));
}

// Assignment tables pair an example id with a cluster id, one row per line.
struct AssignmentTable {
  std::vector<std::string> ids;
  std::vector<std::size_t> clusters;
};

void write_assignments(const std::string& path, const AssignmentTable& t) {
  std::string out = "id,cluster\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    out += t.ids[i] + "," + std::to_string(t.clusters[i]) + "\n";
  write_or_print(path, out);
}

AssignmentTable read_assignments(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open assignment file: " + path);
  AssignmentTable t;
  std::string line;
  if (!std::getline(in, line) || line != "id,cluster")
    throw DataError(path + ": expected header \"id,cluster\"");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t comma = line.rfind(',');
    if (comma == std::string::npos || comma + 1 >= line.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed row");
    t.ids.push_back(line.substr(0, comma));
    try {
      t.clusters.push_back(std::stoull(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad cluster id");
    }
  }
  if (t.ids.empty()) throw DataError(path + ": no assignment rows");
  return t;
}

std::unordered_map<std::string, std::size_t> index_by_id(const Dataset& dataset) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) out[dataset[i].id] = i;
  return out;
}

// --- verbs -----------------------------------------------------------------

struct FeaturizeArgs {
  std::string data, field = "Q", output;
  std::size_t dim = 2048;
};

void cmd_featurize(const FeaturizeArgs& a) {
  const Dataset dataset = load_dataset(a.data);
  const Matrix m = featurize(dataset, parse_field(a.field), a.dim);
  save_embeddings(m, a.output);
  std::cerr << "wrote " << m.rows() << "x" << m.cols() << " matrix to "
            << a.output << "\n";
}

struct MaskArgs {
  std::string data, output;
  double novel_ratio = 0.5, labeled_ratio = 0.5;
  std::uint64_t seed = 0;
};

void cmd_mask(const MaskArgs& a) {
  const Dataset dataset = load_dataset(a.data);
  const MaskedView view = mask(dataset, a.novel_ratio, a.labeled_ratio, a.seed);
  write_or_print(a.output, view.to_json().dump(2) + "\n");
  std::cerr << view.novel_intents.size() << " novel intents, "
            << view.labeled_example_ids.size() << " labeled examples\n";
}

struct TrainArgs {
  std::string config, model_out, log_out, mask_out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  cfg.validate();
  const std::uint64_t seed = a.seed_given ? a.seed : cfg.base_seed;
  const Dataset dataset = load_dataset(cfg.dataset_path);
  const auto field_mats = build_field_matrices(cfg, dataset);
  const SeedTraining st = train_for_seed(cfg, dataset, field_mats, seed);
  if (!st.has_model)
    throw ConfigError("scheme \"" + cfg.scheme + "\" trains no model");
  save_model(st.model, a.model_out);
  if (!a.log_out.empty()) save_training_log(st.trained, a.log_out);
  if (!a.mask_out.empty())
    write_or_print(a.mask_out, st.view.to_json().dump(2) + "\n");
  std::cerr << "trained " << cfg.scheme << " for " << st.trained.log.size()
            << " epochs; model saved to " << a.model_out << "\n";
}

struct ClusterArgs {
  std::string input, data, output, centroids_out;
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

void cmd_cluster(const ClusterArgs& a) {
  const Matrix reps = load_embeddings(a.input);
  const ClusterAssignment res = kmeans(reps, a.k, a.seed);
  AssignmentTable t;
  if (!a.data.empty()) {
    const Dataset dataset = load_dataset(a.data);
    if (dataset.size() != reps.rows())
      throw DataError("dataset has " + std::to_string(dataset.size()) +
                      " examples for " + std::to_string(reps.rows()) + " rows");
    for (std::size_t i = 0; i < dataset.size(); ++i) t.ids.push_back(dataset[i].id);
  } else {
    for (std::size_t i = 0; i < reps.rows(); ++i)
      t.ids.push_back("row-" + std::to_string(i));
  }
  t.clusters = res.assignment;
  write_assignments(a.output, t);
  if (!a.centroids_out.empty()) save_embeddings(res.centroids, a.centroids_out);
  std::cerr << "k=" << res.k << " inertia=" << res.inertia << "\n";
}

struct EvaluateArgs {
  std::string data, assignments, mask_path, split = "test", scheme_label, output;
  std::uint64_t seed = 0;
};

void cmd_evaluate(const EvaluateArgs& a) {
  if (a.split != "train" && a.split != "val" && a.split != "test")
    throw ConfigError("split must be train, val, or test");
  const Dataset dataset = load_dataset(a.data);
  const MaskedView view = MaskedView::from_json(parse_json_file(a.mask_path));
  const AssignmentTable t = read_assignments(a.assignments);
  const auto by_id = index_by_id(dataset);

  std::vector<std::string> truth;
  std::vector<std::size_t> clusters;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto it = by_id.find(t.ids[i]);
    if (it == by_id.end())
      throw DataError("assignment id not in dataset: " + t.ids[i]);
    const Example& ex = dataset[it->second];
    if (split_name(ex.split) != a.split) continue;
    if (!ex.intent) throw DataError("example " + ex.id + " has no intent label");
    truth.push_back(*ex.intent);
    clusters.push_back(t.clusters[i]);
  }
  if (truth.empty())
    throw DataError("no assignment rows fall in the " + a.split + " split");
  const MetricReport report = evaluate_clustering(
      truth, clusters, view.known_intents, a.seed, a.scheme_label, a.data);
  write_or_print(a.output, report.to_json().dump(2) + "\n");
}

struct ExperimentArgs {
  std::string config, preset, baseline, format = "markdown";
  std::string output_dir, report_out;
  bool do_lr_sweep = false;
};

void cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig base = load_config(a.config);
  if (!a.output_dir.empty()) base.output_dir = a.output_dir;
  std::vector<RunRecord> records;
  for (const ExperimentConfig& cfg : expand_presets(base, a.preset)) {
    if (a.do_lr_sweep) {
      const LrSweepOutcome sweep = lr_sweep(cfg);
      std::cerr << (cfg.label.empty() ? cfg.scheme : cfg.label)
                << ": picked lr=" << sweep.best_lr << "\n";
      records.insert(records.end(), sweep.result.records.begin(),
                     sweep.result.records.end());
    } else {
      const ExperimentResult res = run_experiment(cfg);
      records.insert(records.end(), res.records.begin(), res.records.end());
    }
  }
  const std::string report =
      render_report(records, parse_report_format(a.format), a.baseline);
  std::cout << report;
  if (!a.report_out.empty()) write_or_print(a.report_out, report);
}

struct SummarizeArgs {
  std::string data, assignments, reps, mask_path, output;
  std::size_t dim = 512;
  double share_threshold = 0.5;
};

void cmd_summarize(const SummarizeArgs& a) {
  const Dataset dataset = load_dataset(a.data);
  const AssignmentTable t = read_assignments(a.assignments);
  const auto by_id = index_by_id(dataset);
  std::vector<std::size_t> assignment(dataset.size(), 0);
  std::vector<bool> seen(dataset.size(), false);
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto it = by_id.find(t.ids[i]);
    if (it == by_id.end())
      throw DataError("assignment id not in dataset: " + t.ids[i]);
    assignment[it->second] = t.clusters[i];
    seen[it->second] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw DataError("example " + dataset[i].id + " has no cluster assignment");

  std::vector<InfillPrediction> infill;
  const std::vector<InfillPrediction>* infill_ptr = nullptr;
  if (!a.mask_path.empty()) {
    if (a.reps.empty())
      throw ConfigError("--mask needs --reps to infill known intents");
    const Matrix reps = load_embeddings(a.reps);
    if (reps.rows() != dataset.size())
      throw DataError("representation rows do not match the dataset");
    const MaskedView view = MaskedView::from_json(parse_json_file(a.mask_path));
    std::vector<std::optional<std::string>> labels;
    labels.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const Example& ex = dataset[i];
      if (view.is_labeled(ex.id) && ex.intent)
        labels.emplace_back(*ex.intent);
      else
        labels.emplace_back(std::nullopt);
    }
    infill = infill_known_intents(reps, labels);
    infill_ptr = &infill;
  }

  SummarizeOptions opts;
  opts.feature_dim = a.dim;
  opts.known_share_threshold = a.share_threshold;
  const auto summaries = summarize_clusters(dataset, assignment, infill_ptr, opts);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : summaries) out.push_back(s.to_json());
  write_or_print(a.output, out.dump(2) + "\n");
}

struct ReportArgs {
  std::vector<std::string> records;
  std::string baseline, format = "markdown", output;
};

void cmd_report(const ReportArgs& a) {
  std::vector<RunRecord> records;
  for (const std::string& path : a.records) {
    const nlohmann::json arr = parse_json_file(path);
    if (!arr.is_array()) throw DataError(path + ": expected a JSON array");
    for (const auto& j : arr) records.push_back(RunRecord::from_json(j));
  }
  write_or_print(a.output,
                 render_report(records, parse_report_format(a.format), a.baseline));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversational novel-intent discovery workbench"};
  app.require_subcommand(1);

  FeaturizeArgs fa;
  auto* featurize_cmd =
      app.add_subcommand("featurize", "hash a dataset field into TF-IDF rows");
  featurize_cmd->add_option("--data", fa.data, "dataset JSONL")->required();
  featurize_cmd->add_option("--field", fa.field, "Q, A, or QA");
  featurize_cmd->add_option("--dim", fa.dim, "hashed feature width");
  featurize_cmd->add_option("--output", fa.output, "EMB1 output path")->required();
  featurize_cmd->callback([&] { cmd_featurize(fa); });

  MaskArgs ma;
  auto* mask_cmd =
      app.add_subcommand("mask", "hide intents and labels for one seed");
  mask_cmd->add_option("--data", ma.data, "dataset JSONL")->required();
  mask_cmd->add_option("--novel-ratio", ma.novel_ratio, "share of intents hidden");
  mask_cmd->add_option("--labeled-ratio", ma.labeled_ratio,
                       "share of known-intent train examples kept labeled");
  mask_cmd->add_option("--seed", ma.seed, "masking seed");
  mask_cmd->add_option("--output", ma.output, "mask JSON path (default stdout)");
  mask_cmd->callback([&] { cmd_mask(ma); });

  TrainArgs ta;
  auto* train_cmd =
      app.add_subcommand("train", "train one model under an experiment config");
  train_cmd->add_option("--config", ta.config, "experiment config JSON")->required();
  train_cmd->add_option("--seed", ta.seed, "run seed (default: base_seed)")
      ->each([&](const std::string&) { ta.seed_given = true; });
  train_cmd->add_option("--model-out", ta.model_out, "RMC1 output path")->required();
  train_cmd->add_option("--log-out", ta.log_out, "training log JSONL path");
  train_cmd->add_option("--mask-out", ta.mask_out, "masked view JSON path");
  train_cmd->callback([&] { cmd_train(ta); });

  ClusterArgs ca;
  auto* cluster_cmd =
      app.add_subcommand("cluster", "k-means over an EMB1 matrix");
  cluster_cmd->add_option("--input", ca.input, "EMB1 matrix to cluster")->required();
  cluster_cmd->add_option("--k", ca.k, "number of clusters")->required();
  cluster_cmd->add_option("--seed", ca.seed, "restart seed");
  cluster_cmd->add_option("--data", ca.data,
                          "dataset JSONL; labels rows with example ids");
  cluster_cmd->add_option("--output", ca.output, "assignment CSV (default stdout)");
  cluster_cmd->add_option("--centroids-out", ca.centroids_out,
                          "EMB1 path for the centroids");
  cluster_cmd->callback([&] { cmd_cluster(ca); });

  EvaluateArgs ea;
  auto* eval_cmd =
      app.add_subcommand("evaluate", "score an assignment table against truth");
  eval_cmd->add_option("--data", ea.data, "dataset JSONL")->required();
  eval_cmd->add_option("--assignments", ea.assignments, "assignment CSV")->required();
  eval_cmd->add_option("--mask", ea.mask_path, "masked view JSON")->required();
  eval_cmd->add_option("--split", ea.split, "split to score (default test)");
  eval_cmd->add_option("--scheme", ea.scheme_label, "scheme label for the report");
  eval_cmd->add_option("--seed", ea.seed, "seed recorded in the report");
  eval_cmd->add_option("--output", ea.output, "metrics JSON path (default stdout)");
  eval_cmd->callback([&] { cmd_evaluate(ea); });

  ExperimentArgs xa;
  auto* exp_cmd =
      app.add_subcommand("experiment", "run a multi-seed experiment end to end");
  exp_cmd->add_option("--config", xa.config, "experiment config JSON")->required();
  exp_cmd->add_option("--preset", xa.preset,
                      "dataset preset or \"conversational\" head ablation");
  exp_cmd->add_option("--baseline", xa.baseline, "row for significance markers");
  exp_cmd->add_option("--format", xa.format, "markdown, csv, or json");
  exp_cmd->add_option("--output-dir", xa.output_dir, "artifact root override");
  exp_cmd->add_option("--report-out", xa.report_out, "also write the table here");
  exp_cmd->add_flag("--lr-sweep", xa.do_lr_sweep,
                    "pick the learning rate by validation AVG first");
  exp_cmd->callback([&] { cmd_experiment(xa); });

  SummarizeArgs sa;
  auto* sum_cmd =
      app.add_subcommand("summarize", "describe clusters with salient sentences");
  sum_cmd->add_option("--data", sa.data, "dataset JSONL")->required();
  sum_cmd->add_option("--assignments", sa.assignments, "assignment CSV")->required();
  sum_cmd->add_option("--reps", sa.reps, "EMB1 representations for infill");
  sum_cmd->add_option("--mask", sa.mask_path, "masked view JSON for infill");
  sum_cmd->add_option("--dim", sa.dim, "bag-of-words buckets");
  sum_cmd->add_option("--share-threshold", sa.share_threshold,
                      "known-intent share that flags a cluster as known");
  sum_cmd->add_option("--output", sa.output, "summary JSON path (default stdout)");
  sum_cmd->callback([&] { cmd_summarize(sa); });

  ReportArgs ra;
  auto* report_cmd =
      app.add_subcommand("report", "render stored run records as a table");
  report_cmd->add_option("--records", ra.records, "records.json files")
      ->required()
      ->expected(-1);
  report_cmd->add_option("--baseline", ra.baseline, "row for significance markers");
  report_cmd->add_option("--format", ra.format, "markdown, csv, or json");
  report_cmd->add_option("--output", ra.output, "write here instead of stdout");
  report_cmd->callback([&] { cmd_report(ra); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const convlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const convlab::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
