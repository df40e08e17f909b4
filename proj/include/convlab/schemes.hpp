#pragma once

// Training schemes over the representation model: Static (no training), DAC
// (pseudo-pairs from a threshold curriculum), CDAC (alternating supervised /
// semi-supervised epochs) and Supervised (large margin cosine loss over known
// intents). All trainers are deterministic given (seed, config, data).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "convlab/model.hpp"

namespace convlab {

// --- threshold curriculum --------------------------------------------------

// Upper/lower similarity cutoffs as a function of the curriculum variable
// lambda_t (distinct from the head weights). Training using the schedule ends
// once u <= l.
struct ThresholdSchedule {
  double lambda_t = 0.0;

  double u() const { return 0.95 - lambda_t; }
  double l() const { return 0.455 + 0.1 * lambda_t; }
  bool active() const { return u() > l(); }
};

constexpr double kScheduleIncrement = 0.0099;  // 1.1 * 0.009 per update

inline ThresholdSchedule schedule_step(const ThresholdSchedule& s) {
  ThresholdSchedule next = s;
  next.lambda_t += kScheduleIncrement;
  return next;
}

// --- pair labels and loss --------------------------------------------------

enum class PairLabel { positive, negative, none };

inline PairLabel pseudo_label(double similarity, const ThresholdSchedule& s) {
  if (similarity >= s.u()) return PairLabel::positive;
  if (similarity < s.l()) return PairLabel::negative;
  return PairLabel::none;
}

inline int exact_label(const std::string& intent_a, const std::string& intent_b) {
  return intent_a == intent_b ? 1 : 0;
}

// -R ln S - (1-R) ln(1-S) with S clamped into [eps, 1-eps] first, so
// similarities outside (0, 1) stay finite.
inline double pair_loss(double similarity, int r, double eps) {
  const double s = std::min(std::max(similarity, eps), 1.0 - eps);
  return r ? -std::log(s) : -std::log(1.0 - s);
}

// d(pair_loss)/dS; zero in the clamped regions.
inline double pair_loss_grad(double similarity, int r, double eps) {
  if (similarity < eps || similarity > 1.0 - eps) return 0.0;
  return r ? -1.0 / similarity : 1.0 / (1.0 - similarity);
}

// --- configuration ---------------------------------------------------------

enum class Scheme { static_repr, dac, cdac, supervised };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::static_repr: return "static";
    case Scheme::dac: return "dac";
    case Scheme::cdac: return "cdac";
    case Scheme::supervised: return "supervised";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "static") return Scheme::static_repr;
  if (s == "dac") return Scheme::dac;
  if (s == "cdac") return Scheme::cdac;
  if (s == "supervised") return Scheme::supervised;
  throw ConfigError("unknown scheme: " + s);
}

struct TrainConfig {
  Scheme scheme = Scheme::cdac;
  std::size_t batch_size = 64;
  double learning_rate = 5e-5;
  std::size_t max_epochs = 100;
  double delta = 1.0;        // CDAC supervised-epoch loss scaling
  double lmcl_scale = 30.0;  // s
  double lmcl_margin = 0.35; // m
  double eps = 1e-7;         // similarity clamp
  double backbone_lr = -1.0; // < 0: same as learning_rate

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (delta < 1.0) throw ConfigError("delta must be >= 1");
    if (eps <= 0.0 || eps >= 0.5) throw ConfigError("eps must lie in (0, 0.5)");
    if (lmcl_scale <= 0.0) throw ConfigError("lmcl_scale must be positive");
    if (lmcl_margin < 0.0) throw ConfigError("lmcl_margin must be nonnegative");
  }
};

// --- training log ----------------------------------------------------------

struct PairCounts {
  long long positives = 0;
  long long negatives = 0;
  long long nones = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string phase;  // "supervised" or "semi"
  double lambda_t = 0.0;
  double u = 0.0;
  double l = 0.0;
  double mean_loss = 0.0;
  long long positives = 0;
  long long negatives = 0;
  long long nones = 0;
  double train_accuracy = -1.0;  // supervised scheme only

  nlohmann::json to_json() const {
    nlohmann::json j = {{"epoch", epoch},     {"phase", phase},
                        {"lambda_t", lambda_t}, {"u", u},
                        {"l", l},             {"mean_loss", mean_loss},
                        {"positives", positives}, {"negatives", negatives},
                        {"nones", nones}};
    if (train_accuracy >= 0.0) j["train_accuracy"] = train_accuracy;
    return j;
  }
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::vector<std::string> notes;
};

inline void save_training_log(const TrainResult& res, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write training log: " + path);
  for (const EpochLog& e : res.log) out << e.to_json().dump() << "\n";
  for (const std::string& n : res.notes)
    out << nlohmann::json{{"note", n}}.dump() << "\n";
  if (!out) throw DataError("write failed: " + path);
}

// --- optimizer -------------------------------------------------------------

// Adam with beta1=0.9, beta2=0.999, eps=1e-8 and a per-tensor learning rate.
class Adam {
 public:
  Adam(std::vector<Matrix*> params, std::vector<double> lrs)
      : params_(std::move(params)), lrs_(std::move(lrs)) {
    if (params_.size() != lrs_.size())
      throw ConfigError("one learning rate per parameter tensor required");
    for (const Matrix* p : params_) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }

  void step(const std::vector<const Matrix*>& grads) {
    if (grads.size() != params_.size())
      throw ConfigError("gradient/parameter tensor count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(0.9, double(t_));
    const double bc2 = 1.0 - std::pow(0.999, double(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& theta = params_[p]->data();
      const auto& g = grads[p]->data();
      auto& m = m_[p].data();
      auto& v = v_[p].data();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        theta[i] -= lrs_[p] * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
      }
    }
  }

 private:
  std::vector<Matrix*> params_;
  std::vector<double> lrs_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

// --- helpers ---------------------------------------------------------------

namespace detail {

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(src.row(rows[r]), src.row(rows[r]) + src.cols(), out.row(r));
  return out;
}

inline std::vector<double> model_lrs(const RepModel& m, const TrainConfig& cfg,
                                     std::size_t n_tensors) {
  const double backbone = cfg.backbone_lr > 0.0 ? cfg.backbone_lr : cfg.learning_rate;
  std::vector<double> lrs(n_tensors, cfg.learning_rate);
  lrs[0] = backbone;  // backbone w
  lrs[1] = backbone;  // backbone b
  (void)m;
  return lrs;
}

// Mean pair loss over participating pairs (label_of returning none excludes
// a pair), scaled by `scale`, plus the parameter-independent `penalty`.
// Writes the matching dL/d(reps).
template <typename LabelFn>
double pair_head_loss(const Matrix& reps, double eps, double penalty,
                      double scale, LabelFn&& label_of, Matrix& d_rep,
                      PairCounts& counts) {
  const std::size_t b = reps.rows(), dim = reps.cols();
  std::vector<double> norm(b);
  for (std::size_t i = 0; i < b; ++i) norm[i] = l2_norm(reps.row(i), dim);

  struct Term {
    std::size_t i, j;
    double s;
    int r;
  };
  std::vector<Term> terms;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) {
      const double s = cosine_similarity(reps.row(i), reps.row(j), dim);
      const std::optional<int> r = label_of(i, j, s);
      if (!r) {
        ++counts.nones;
        continue;
      }
      (*r ? counts.positives : counts.negatives) += 1;
      terms.push_back({i, j, s, *r});
    }

  double loss = 0.0;
  if (!terms.empty()) {
    const double inv = 1.0 / double(terms.size());
    for (const Term& t : terms) {
      loss += pair_loss(t.s, t.r, eps) * inv;
      const double dls = pair_loss_grad(t.s, t.r, eps) * inv * scale;
      if (dls == 0.0 || norm[t.i] <= 0.0 || norm[t.j] <= 0.0) continue;
      const double ni = norm[t.i], nj = norm[t.j];
      const double* ri = reps.row(t.i);
      const double* rj = reps.row(t.j);
      double* di = d_rep.row(t.i);
      double* dj = d_rep.row(t.j);
      for (std::size_t k = 0; k < dim; ++k) {
        di[k] += dls * (rj[k] / (ni * nj) - t.s * ri[k] / (ni * ni));
        dj[k] += dls * (ri[k] / (ni * nj) - t.s * rj[k] / (nj * nj));
      }
    }
  }
  return scale * loss + penalty;
}

struct BatchStore {
  std::array<Matrix, 3> mats;
};

inline FieldData gather_batch(const RepModel& model, const FieldData& features,
                              const std::vector<std::size_t>& rows,
                              BatchStore& store) {
  FieldData batch;
  for (Field f : model.active_fields()) {
    store.mats[std::size_t(f)] = gather_rows(features.require(f), rows);
    switch (f) {
      case Field::Q: batch.q = &store.mats[0]; break;
      case Field::A: batch.a = &store.mats[1]; break;
      case Field::QA: batch.qa = &store.mats[2]; break;
    }
  }
  return batch;
}

inline std::size_t feature_rows(const RepModel& model, const FieldData& features) {
  const std::vector<Field> active = model.active_fields();
  if (active.empty()) throw ConfigError("model has no active heads");
  const std::size_t n = features.require(active.front()).rows();
  for (Field f : active)
    if (features.require(f).rows() != n)
      throw DataError("field matrices disagree on row count");
  return n;
}

inline std::vector<const Matrix*> tensor_ptrs(const ModelGrad& g) {
  std::vector<const Matrix*> out;
  for (const Matrix& t : g.tensors) out.push_back(&t);
  return out;
}

}  // namespace detail

// --- schemes ---------------------------------------------------------------

// Static scheme: representations are the raw field matrices, concatenated
// when the source names several fields. No training happens.
inline Matrix static_representations(const FieldData& features,
                                     const RepSource& source) {
  if (source.fields.empty()) throw ConfigError("empty rep_source");
  std::vector<const Matrix*> parts;
  for (Field f : source.fields) parts.push_back(&features.require(f));
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const Matrix* p : parts) {
    if (p->rows() != rows) throw DataError("field matrices disagree on row count");
    cols += p->cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t c0 = 0;
    for (const Matrix* p : parts) {
      std::copy(p->row(r), p->row(r) + p->cols(), out.row(r) + c0);
      c0 += p->cols();
    }
  }
  return out;
}

// DAC: every in-batch pair gets a pseudo-label from the current thresholds;
// the curriculum advances once per epoch and training stops when it closes.
inline TrainResult train_dac(RepModel& model, const FieldData& features,
                             const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = detail::feature_rows(model, features);
  TrainResult res;
  if (cfg.max_epochs == 0) return res;

  auto params = parameters(model);
  Adam opt(params, detail::model_lrs(model, cfg, params.size()));
  ThresholdSchedule schedule;
  const Rng root = Rng(seed).stream(streams::training);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs && schedule.active(); ++epoch) {
    Rng erng = root.stream(epoch);
    erng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    PairCounts counts;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::vector<std::size_t> rows(order.begin() + start, order.begin() + stop);
      if (rows.size() < 2) {
        res.notes.push_back("epoch " + std::to_string(epoch) +
                            ": skipped batch of size " + std::to_string(rows.size()));
        continue;
      }
      detail::BatchStore store;
      const FieldData batch = detail::gather_batch(model, features, rows, store);
      const double penalty = schedule.u() - schedule.l();
      const ConvLossResult r = conv_loss(
          model, batch,
          [&](Field, const Matrix& reps, Matrix& d_rep) {
            return detail::pair_head_loss(
                reps, cfg.eps, penalty, 1.0,
                [&](std::size_t, std::size_t, double s) -> std::optional<int> {
                  switch (pseudo_label(s, schedule)) {
                    case PairLabel::positive: return 1;
                    case PairLabel::negative: return 0;
                    case PairLabel::none: return std::nullopt;
                  }
                  return std::nullopt;
                },
                d_rep, counts);
          });
      opt.step(detail::tensor_ptrs(r.grad));
      loss_sum += r.loss;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.phase = "semi";
    log.lambda_t = schedule.lambda_t;
    log.u = schedule.u();
    log.l = schedule.l();
    log.mean_loss = batches ? loss_sum / double(batches) : 0.0;
    log.positives = counts.positives;
    log.negatives = counts.negatives;
    log.nones = counts.nones;
    res.log.push_back(log);
    schedule = schedule_step(schedule);
  }
  return res;
}

// CDAC: even epochs (starting with epoch 0) train on labeled examples only
// with exact pair labels, the loss scaled by delta and no threshold penalty.
// Odd epochs draw batches from the whole set, using exact labels for
// labeled-labeled pairs and pseudo-labels whenever an unlabeled example is
// involved; the curriculum advances only after odd epochs.
inline TrainResult train_cdac(RepModel& model, const FieldData& features,
                              const std::vector<std::optional<std::string>>& labels,
                              const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = detail::feature_rows(model, features);
  if (labels.size() != n)
    throw DataError("label count does not match feature rows");
  std::vector<std::size_t> labeled_rows;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i]) labeled_rows.push_back(i);
  if (labeled_rows.empty())
    throw ConfigError("cdac needs labeled examples; use the dac scheme instead");

  TrainResult res;
  if (cfg.max_epochs == 0) return res;

  auto params = parameters(model);
  Adam opt(params, detail::model_lrs(model, cfg, params.size()));
  ThresholdSchedule schedule;
  const Rng root = Rng(seed).stream(streams::training);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs && schedule.active(); ++epoch) {
    const bool supervised_epoch = epoch % 2 == 0;
    std::vector<std::size_t> order = supervised_epoch ? labeled_rows : all;
    Rng erng = root.stream(epoch);
    erng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    PairCounts counts;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::vector<std::size_t> rows(order.begin() + start, order.begin() + stop);
      if (rows.size() < 2) {
        res.notes.push_back("epoch " + std::to_string(epoch) +
                            ": skipped batch of size " + std::to_string(rows.size()));
        continue;
      }
      std::vector<const std::string*> lab(rows.size(), nullptr);
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (labels[rows[i]]) lab[i] = &*labels[rows[i]];

      detail::BatchStore store;
      const FieldData batch = detail::gather_batch(model, features, rows, store);
      const double penalty = supervised_epoch ? 0.0 : schedule.u() - schedule.l();
      const double scale = supervised_epoch ? cfg.delta : 1.0;
      const ConvLossResult r = conv_loss(
          model, batch,
          [&](Field, const Matrix& reps, Matrix& d_rep) {
            return detail::pair_head_loss(
                reps, cfg.eps, penalty, scale,
                [&](std::size_t i, std::size_t j, double s) -> std::optional<int> {
                  if (lab[i] && lab[j]) return exact_label(*lab[i], *lab[j]);
                  switch (pseudo_label(s, schedule)) {
                    case PairLabel::positive: return 1;
                    case PairLabel::negative: return 0;
                    case PairLabel::none: return std::nullopt;
                  }
                  return std::nullopt;
                },
                d_rep, counts);
          });
      opt.step(detail::tensor_ptrs(r.grad));
      loss_sum += r.loss;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.phase = supervised_epoch ? "supervised" : "semi";
    log.lambda_t = schedule.lambda_t;
    log.u = schedule.u();
    log.l = schedule.l();
    log.mean_loss = batches ? loss_sum / double(batches) : 0.0;
    log.positives = counts.positives;
    log.negatives = counts.negatives;
    log.nones = counts.nones;
    res.log.push_back(log);
    if (!supervised_epoch) schedule = schedule_step(schedule);
  }
  return res;
}

// Supervised: LMCL classification over the known intents on labeled examples
// only. Every active head keeps its own class-weight matrix; those weights
// are local to training and discarded afterwards.
namespace detail {

// Large-margin cosine loss for one head: scaled cosine logits with the margin
// subtracted from the true class, mean cross-entropy over the batch. Returns
// the unscaled loss and accumulates unscaled dL/d(rep) into d_rep. The class
// weight gradient goes into d_weight pre-scaled by weight_scale (the caller's
// head weight), since it bypasses the combined loss's backward scaling. Rows
// or weight columns with zero norm contribute loss but no gradient.
inline double lmcl_head_loss(const Matrix& reps, const Matrix& w,
                             const std::vector<std::size_t>& y, double s,
                             double m, double weight_scale, Matrix& d_rep,
                             Matrix& dw, std::size_t* correct = nullptr,
                             std::size_t* seen = nullptr) {
  const std::size_t dim = reps.cols(), k = w.rows();
  std::vector<double> wn(k);
  for (std::size_t j = 0; j < k; ++j) wn[j] = l2_norm(w.row(j), dim);
  const double inv = 1.0 / double(reps.rows());
  double loss = 0.0;
  std::vector<double> cosj(k), z(k), p(k);
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    const double* ri = reps.row(i);
    const double rn = l2_norm(ri, dim);
    for (std::size_t j = 0; j < k; ++j) {
      cosj[j] = cosine_similarity(ri, w.row(j), dim);
      z[j] = s * (cosj[j] - (j == y[i] ? m : 0.0));
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double zsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(z[j] - zmax);
      zsum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= zsum;
    loss += -std::log(std::max(p[y[i]], 1e-300)) * inv;
    const std::size_t pred =
        std::size_t(std::max_element(cosj.begin(), cosj.end()) - cosj.begin());
    if (correct && pred == y[i]) ++*correct;
    if (seen) ++*seen;
    if (rn <= 0.0) continue;
    for (std::size_t j = 0; j < k; ++j) {
      if (wn[j] <= 0.0) continue;
      const double dcos = s * (p[j] - (j == y[i] ? 1.0 : 0.0)) * inv;
      const double* wj = w.row(j);
      double* di = d_rep.row(i);
      double* dj = dw.row(j);
      for (std::size_t t = 0; t < dim; ++t) {
        di[t] += dcos * (wj[t] / (rn * wn[j]) - cosj[j] * ri[t] / (rn * rn));
        dj[t] += weight_scale * dcos *
                 (ri[t] / (rn * wn[j]) - cosj[j] * wj[t] / (wn[j] * wn[j]));
      }
    }
  }
  return loss;
}

}  // namespace detail

inline TrainResult train_supervised(RepModel& model, const FieldData& features,
                                    const std::vector<std::optional<std::string>>& labels,
                                    const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = detail::feature_rows(model, features);
  if (labels.size() != n)
    throw DataError("label count does not match feature rows");

  std::vector<std::size_t> labeled_rows;
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i]) {
      labeled_rows.push_back(i);
      classes.push_back(*labels[i]);
    }
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2)
    throw ConfigError("supervised scheme needs at least 2 labeled intents");
  std::map<std::string, std::size_t> class_id;
  for (std::size_t c = 0; c < classes.size(); ++c) class_id[classes[c]] = c;

  TrainResult res;
  if (cfg.max_epochs == 0) return res;

  // Per-head class weights, initialized like any other linear layer.
  std::array<Matrix, 3> cw, cw_grad;
  Rng wrng = Rng(seed).stream(streams::class_weights);
  std::vector<Matrix*> params = parameters(model);
  std::vector<double> lrs = detail::model_lrs(model, cfg, params.size());
  for (Field f : model.active_fields()) {
    Matrix& w = cw[std::size_t(f)];
    w = Matrix(classes.size(), model.rep_dim);
    detail::init_uniform(w, wrng);
    cw_grad[std::size_t(f)] = Matrix(classes.size(), model.rep_dim);
    params.push_back(&w);
    lrs.push_back(cfg.learning_rate);
  }
  Adam opt(params, lrs);

  const Rng root = Rng(seed).stream(streams::training);
  const double s = cfg.lmcl_scale, m = cfg.lmcl_margin;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order = labeled_rows;
    Rng erng = root.stream(epoch);
    erng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0, correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::vector<std::size_t> rows(order.begin() + start, order.begin() + stop);
      std::vector<std::size_t> y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        y[i] = class_id.at(*labels[rows[i]]);

      detail::BatchStore store;
      const FieldData batch = detail::gather_batch(model, features, rows, store);
      for (Field f : model.active_fields())
        cw_grad[std::size_t(f)] = Matrix(classes.size(), model.rep_dim);

      const ConvLossResult r = conv_loss(
          model, batch,
          [&](Field f, const Matrix& reps, Matrix& d_rep) {
            return detail::lmcl_head_loss(reps, cw[std::size_t(f)], y, s, m,
                                          model.lambda.get(f), d_rep,
                                          cw_grad[std::size_t(f)], &correct,
                                          &seen);
          });

      std::vector<const Matrix*> grads = detail::tensor_ptrs(r.grad);
      for (Field f : model.active_fields())
        grads.push_back(&cw_grad[std::size_t(f)]);
      opt.step(grads);
      loss_sum += r.loss;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.phase = "supervised";
    log.mean_loss = batches ? loss_sum / double(batches) : 0.0;
    log.train_accuracy = seen ? double(correct) / double(seen) : 0.0;
    res.log.push_back(log);
  }
  return res;
}

}  // namespace convlab
