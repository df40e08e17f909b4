// Acceptance gate for the library: eight numbered criteria, one line of
// output each, exit 0 only when every line passes. Unlike the unit suites
// this binary cross-checks against independent oracles (brute-force
// matching, finite differences, plain-loop metric reimplementations) and
// enforces the runtime budgets the criteria carry.

#include "convlab/convlab.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace convlab;

namespace {

struct Outcome {
  bool ok = false;
  std::string note;
};

template <typename... Args>
std::string strf(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.data().size() * sizeof(double)) == 0;
}

std::vector<const Matrix*> head_tensors(const Head& h) {
  return {&h.linear1.w, &h.linear1.b, &h.linear2.w, &h.linear2.b};
}

class TempTree {
 public:
  TempTree() {
    path_ = std::filesystem::temp_directory_path() /
            ("convlab_accept_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempTree() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string path() const { return path_.string(); }
  std::string file(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  std::filesystem::path path_;
  static inline int counter_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- 1: threshold curriculum ------------------------------------------------

// Walks the schedule next to an independently accumulated lambda_t and
// demands bitwise equality of both thresholds at every step, then lets a
// real DAC run confirm that training stops with the curriculum.
Outcome curriculum_schedule() {
  Outcome out;
  ThresholdSchedule sched;
  if (sched.u() != 0.95 || sched.l() != 0.455) {
    out.note = strf("start u=%.17g l=%.17g", sched.u(), sched.l());
    return out;
  }

  double lam = 0.0;
  std::size_t steps = 0;
  while (sched.active()) {
    if (lam >= 0.45) {
      out.note = strf("still active at lambda_t=%.17g", lam);
      return out;
    }
    sched = schedule_step(sched);
    lam += 0.0099;
    ++steps;
    if (sched.u() != 0.95 - lam || sched.l() != 0.455 + 0.1 * lam) {
      out.note = strf("thresholds drifted at step %zu", steps);
      return out;
    }
    if (steps > 200) {
      out.note = "schedule never closed";
      return out;
    }
  }
  if (steps != 46 || lam < 0.45) {
    out.note = strf("closed after %zu steps at lambda_t=%.17g", steps, lam);
    return out;
  }

  Rng rng(5);
  Matrix x(6, 3);
  for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
  ModelDims dims;
  dims.input_dim = 3;
  dims.hidden_dim = 3;
  dims.rep_dim = 2;
  RepSource qsrc;
  qsrc.fields = {Field::Q};
  RepModel model = init_model(dims, {1, 0, 0}, 7, qsrc);
  FieldData feats;
  feats.q = &x;
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-4;
  cfg.max_epochs = 1000;
  const TrainResult res = train_dac(model, feats, cfg, 7);
  if (res.log.size() != 46) {
    out.note = strf("dac ran %zu epochs, want 46", res.log.size());
    return out;
  }

  out.ok = true;
  out.note = strf("closes at step 46, lambda_t=%.4f", lam);
  return out;
}

// --- 2: loss gradients ------------------------------------------------------

// Central finite differences (step 1e-5) over every model parameter, plus any
// extra tensors a loss owns (LMCL class weights). The class-weight gradient
// slots accumulate on each evaluation, so they are zeroed before the one
// analytic pass whose values we keep.
double fd_family(RepModel& model, const FieldData& batch,
                 const PerHeadLoss& loss_fn,
                 const std::vector<Matrix*>& extra_params,
                 const std::vector<Matrix*>& extra_grad_slots) {
  for (Matrix* g : extra_grad_slots)
    std::fill(g->data().begin(), g->data().end(), 0.0);
  const ConvLossResult res = conv_loss(model, batch, loss_fn);
  std::vector<Matrix> extra_analytic;
  extra_analytic.reserve(extra_grad_slots.size());
  for (Matrix* g : extra_grad_slots) extra_analytic.push_back(*g);

  std::vector<Matrix*> params = parameters(model);
  std::vector<const Matrix*> analytic;
  for (const Matrix& t : res.grad.tensors) analytic.push_back(&t);
  for (std::size_t e = 0; e < extra_params.size(); ++e) {
    params.push_back(extra_params[e]);
    analytic.push_back(&extra_analytic[e]);
  }

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i = 0; i < params[t]->data().size(); ++i) {
      double& slot = params[t]->data()[i];
      const double saved = slot;
      slot = saved + h;
      const double up = conv_loss(model, batch, loss_fn).loss;
      slot = saved - h;
      const double down = conv_loss(model, batch, loss_fn).loss;
      slot = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t]->data()[i];
      max_rel = std::max(max_rel,
                         std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
    }
  return max_rel;
}

// Rows with tiny norms make the cosine curvature spike, and the fixed 1e-5
// difference step then misreads the slope; near-parallel pairs sit against
// the similarity clamp with the same effect. Such batches are redrawn.
bool reps_well_scaled(const RepModel& model, const FieldData& batch,
                      double floor) {
  for (Field f : model.active_fields()) {
    const Matrix reps = forward_batch(model, f, batch.require(f)).rep;
    for (std::size_t i = 0; i < reps.rows(); ++i)
      if (l2_norm(reps.row(i), reps.cols()) < floor) return false;
    for (std::size_t i = 0; i < reps.rows(); ++i)
      for (std::size_t j = i + 1; j < reps.rows(); ++j)
        if (std::abs(cosine_similarity(reps.row(i), reps.row(j),
                                       reps.cols())) > 1.0 - 1e-4)
          return false;
  }
  return true;
}

// Pseudo labels must not flip under the finite-difference nudges, so a batch
// with any pair similarity within 1e-3 of a threshold is redrawn. Pairs with
// two exact labels never consult the thresholds.
bool pseudo_labels_stable(const RepModel& model, const FieldData& batch,
                          const ThresholdSchedule& sched,
                          const std::vector<const char*>* lab) {
  for (Field f : model.active_fields()) {
    const Matrix reps = forward_batch(model, f, batch.require(f)).rep;
    for (std::size_t i = 0; i < reps.rows(); ++i)
      for (std::size_t j = i + 1; j < reps.rows(); ++j) {
        if (lab && (*lab)[i] && (*lab)[j]) continue;
        const double s =
            cosine_similarity(reps.row(i), reps.row(j), reps.cols());
        if (std::abs(s - sched.u()) <= 1e-3 || std::abs(s - sched.l()) <= 1e-3)
          return false;
      }
  }
  return true;
}

std::optional<int> pseudo_as_optional(double s, const ThresholdSchedule& sched) {
  switch (pseudo_label(s, sched)) {
    case PairLabel::positive: return 1;
    case PairLabel::negative: return 0;
    case PairLabel::none: return std::nullopt;
  }
  return std::nullopt;
}

Outcome gradient_checks() {
  Outcome out;
  double w_dac = 0.0, w_cdac = 0.0, w_lmcl = 0.0, w_comb = 0.0;
  std::size_t batches = 0;
  const double norm_floor = 0.05;

  ModelDims dims;
  dims.input_dim = 3;
  dims.hidden_dim = 3;
  dims.rep_dim = 2;
  RepSource qsrc;
  qsrc.fields = {Field::Q};
  auto fill = [](Matrix& m, Rng& rng) {
    for (auto& v : m.data()) v = rng.uniform(-1.5, 1.5);
  };

  // DAC: every pair pseudo-labeled, threshold gap as the penalty term.
  {
    ThresholdSchedule mid;
    mid.lambda_t = 0.2;
    std::size_t accepted = 0;
    for (std::uint64_t draw = 0; accepted < 20; ++draw) {
      if (draw > 400) {
        out.note = "dac: no stable batches after 400 draws";
        return out;
      }
      Rng rng = Rng(1000).stream(draw);
      Matrix x(5, 3);
      fill(x, rng);
      RepModel model = init_model(dims, {1, 0, 0}, 1000 + draw, qsrc);
      FieldData batch;
      batch.q = &x;
      if (!reps_well_scaled(model, batch, norm_floor)) continue;
      if (!pseudo_labels_stable(model, batch, mid, nullptr)) continue;
      PairCounts counts;
      const PerHeadLoss loss_fn = [&](Field, const Matrix& reps, Matrix& d_rep) {
        return detail::pair_head_loss(
            reps, 1e-7, mid.u() - mid.l(), 1.0,
            [&](std::size_t, std::size_t, double s) {
              return pseudo_as_optional(s, mid);
            },
            d_rep, counts);
      };
      w_dac = std::max(w_dac, fd_family(model, batch, loss_fn, {}, {}));
      ++accepted;
      ++batches;
    }
  }

  // CDAC mixed batch: exact labels where both sides have one, pseudo labels
  // elsewhere, supervised scale 2 standing in for delta.
  {
    ThresholdSchedule mid;
    mid.lambda_t = 0.15;
    const std::vector<const char*> lab = {"a", "a", nullptr, "b", nullptr, "b"};
    std::size_t accepted = 0;
    for (std::uint64_t draw = 0; accepted < 20; ++draw) {
      if (draw > 400) {
        out.note = "cdac: no stable batches after 400 draws";
        return out;
      }
      Rng rng = Rng(2000).stream(draw);
      Matrix x(6, 3);
      fill(x, rng);
      RepModel model = init_model(dims, {1, 0, 0}, 2000 + draw, qsrc);
      FieldData batch;
      batch.q = &x;
      if (!reps_well_scaled(model, batch, norm_floor)) continue;
      if (!pseudo_labels_stable(model, batch, mid, &lab)) continue;
      PairCounts counts;
      const PerHeadLoss loss_fn = [&](Field, const Matrix& reps, Matrix& d_rep) {
        return detail::pair_head_loss(
            reps, 1e-7, mid.u() - mid.l(), 2.0,
            [&](std::size_t i, std::size_t j, double s) -> std::optional<int> {
              if (lab[i] && lab[j]) return exact_label(lab[i], lab[j]);
              return pseudo_as_optional(s, mid);
            },
            d_rep, counts);
      };
      w_cdac = std::max(w_cdac, fd_family(model, batch, loss_fn, {}, {}));
      ++accepted;
      ++batches;
    }
  }

  // LMCL over three classes; the class-weight matrix joins the check as an
  // extra parameter tensor with its self-scaled gradient.
  {
    std::size_t accepted = 0;
    for (std::uint64_t draw = 0; accepted < 20; ++draw) {
      if (draw > 400) {
        out.note = "lmcl: no well-scaled batches after 400 draws";
        return out;
      }
      Rng rng = Rng(3000).stream(draw);
      Matrix x(6, 3);
      fill(x, rng);
      RepModel model = init_model(dims, {1, 0, 0}, 3000 + draw, qsrc);
      Matrix w(3, dims.rep_dim);
      for (auto& v : w.data()) v = rng.uniform(-1.0, 1.0);
      Matrix dw(3, dims.rep_dim);
      std::vector<std::size_t> y(x.rows());
      for (auto& v : y) v = std::size_t(rng.next_below(3));
      FieldData batch;
      batch.q = &x;
      if (!reps_well_scaled(model, batch, norm_floor)) continue;
      bool w_ok = true;
      for (std::size_t r = 0; r < w.rows(); ++r)
        w_ok = w_ok && l2_norm(w.row(r), w.cols()) >= norm_floor;
      if (!w_ok) continue;
      const PerHeadLoss loss_fn = [&](Field f, const Matrix& reps,
                                      Matrix& d_rep) {
        return detail::lmcl_head_loss(reps, w, y, 30.0, 0.35,
                                      model.lambda.get(f), d_rep, dw);
      };
      w_lmcl = std::max(w_lmcl, fd_family(model, batch, loss_fn, {&w}, {&dw}));
      ++accepted;
      ++batches;
    }
  }

  // Combined loss with lambda = (1/3, 1/3, 1/3): three heads over distinct
  // field matrices, each running the mixed-batch pair loss.
  {
    ThresholdSchedule mid;
    mid.lambda_t = 0.15;
    const std::vector<const char*> lab = {"a", nullptr, "b", "a", nullptr};
    std::size_t accepted = 0;
    for (std::uint64_t draw = 0; accepted < 20; ++draw) {
      if (draw > 400) {
        out.note = "combined: no stable batches after 400 draws";
        return out;
      }
      Rng rng = Rng(4000).stream(draw);
      Matrix xq(5, 3), xa(5, 3), xqa(5, 3);
      fill(xq, rng);
      fill(xa, rng);
      fill(xqa, rng);
      RepModel model = init_model(dims, {1, 1, 1}, 4000 + draw);
      FieldData batch;
      batch.q = &xq;
      batch.a = &xa;
      batch.qa = &xqa;
      if (!reps_well_scaled(model, batch, norm_floor)) continue;
      if (!pseudo_labels_stable(model, batch, mid, &lab)) continue;
      PairCounts counts;
      const PerHeadLoss loss_fn = [&](Field, const Matrix& reps, Matrix& d_rep) {
        return detail::pair_head_loss(
            reps, 1e-7, mid.u() - mid.l(), 2.0,
            [&](std::size_t i, std::size_t j, double s) -> std::optional<int> {
              if (lab[i] && lab[j]) return exact_label(lab[i], lab[j]);
              return pseudo_as_optional(s, mid);
            },
            d_rep, counts);
      };
      w_comb = std::max(w_comb, fd_family(model, batch, loss_fn, {}, {}));
      ++accepted;
      ++batches;
    }
  }

  const double worst = std::max({w_dac, w_cdac, w_lmcl, w_comb});
  out.ok = worst <= 1e-4;
  out.note = strf("max rel err %.2e over %zu batches"
                  " (dac %.1e, cdac %.1e, lmcl %.1e, combined %.1e)",
                  worst, batches, w_dac, w_cdac, w_lmcl, w_comb);
  return out;
}

// --- 3: metric oracles ------------------------------------------------------

// Best one-to-one matching by trying every permutation of the padded side.
double brute_force_accuracy(const std::vector<int>& truth,
                            const std::vector<int>& clusters) {
  std::map<int, std::size_t> tid, cid;
  for (int t : truth) tid.emplace(t, tid.size());
  for (int c : clusters) cid.emplace(c, cid.size());
  const std::size_t rows = tid.size(), cols = cid.size();
  std::vector<std::vector<long long>> count(rows,
                                            std::vector<long long>(cols, 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++count[tid.at(truth[i])][cid.at(clusters[i])];
  std::vector<std::size_t> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  long long best = 0;
  do {
    long long sum = 0;
    for (std::size_t r = 0; r < rows; ++r)
      if (perm[r] < cols) sum += count[r][perm[r]];
    best = std::max(best, sum);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return double(best) / double(truth.size());
}

double ref_entropy(const std::vector<long long>& counts, long long total) {
  double h = 0.0;
  for (long long v : counts) {
    if (v == 0) continue;
    const double p = double(v) / double(total);
    h -= p * std::log(p);
  }
  return h;
}

// NMI recomputed through joint entropy (MI = Ht + Hc - Htc) instead of the
// per-cell ratio logs, with the same degenerate conventions.
double ref_nmi(const std::vector<int>& truth, const std::vector<int>& clusters) {
  std::map<int, std::size_t> tid, cid;
  for (int t : truth) tid.emplace(t, tid.size());
  for (int c : clusters) cid.emplace(c, cid.size());
  std::vector<long long> rows(tid.size()), cols(cid.size()),
      joint(tid.size() * cid.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t r = tid.at(truth[i]), c = cid.at(clusters[i]);
    ++rows[r];
    ++cols[c];
    ++joint[r * cid.size() + c];
  }
  const long long n = (long long)truth.size();
  const double ht = ref_entropy(rows, n), hc = ref_entropy(cols, n);
  if (ht == 0.0 && hc == 0.0) return 1.0;
  if (ht == 0.0 || hc == 0.0) return 0.0;
  const double mi = ht + hc - ref_entropy(joint, n);
  return mi / (0.5 * (ht + hc));
}

double ref_cos_dist(const double* u, const double* v, std::size_t d) {
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu <= 0.0 || vv <= 0.0) return 1.0;
  return 1.0 - uv / (std::sqrt(uu) * std::sqrt(vv));
}

// Silhouette recomputed point by point with fresh distance loops.
std::map<std::string, double> ref_silhouette(
    const Matrix& emb, const std::vector<std::string>& intents) {
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < intents.size(); ++i)
    members[intents[i]].push_back(i);
  std::map<std::string, double> out;
  for (const auto& [intent, own] : members) {
    double sum = 0.0;
    for (std::size_t i : own) {
      if (own.size() == 1) continue;
      double a = 0.0;
      for (std::size_t j : own)
        if (j != i)
          a += ref_cos_dist(emb.row(i), emb.row(j), emb.cols());
      a /= double(own.size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (const auto& [other, theirs] : members) {
        if (other == intent) continue;
        double m = 0.0;
        for (std::size_t j : theirs)
          m += ref_cos_dist(emb.row(i), emb.row(j), emb.cols());
        b = std::min(b, m / double(theirs.size()));
      }
      const double denom = std::max(a, b);
      sum += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    out[intent] = sum / double(own.size());
  }
  return out;
}

Outcome metric_oracles() {
  Outcome out;

  Rng rng(33);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t kt = 1 + rng.next_below(6);
    const std::size_t kc = 1 + rng.next_below(6);
    const std::size_t n = 1 + rng.next_below(40);
    std::vector<int> truth(n), clusters(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = int(rng.next_below(kt));
      clusters[i] = int(rng.next_below(kc));
    }
    const double fast = clustering_accuracy(truth, clusters);
    const double slow = brute_force_accuracy(truth, clusters);
    if (fast != slow) {
      out.note = strf("acc mismatch at instance %d: %.17g vs %.17g", iter, fast,
                      slow);
      return out;
    }
  }

  const std::vector<int> at = {0, 0, 1, 1}, ac = {0, 1, 0, 1};
  const double cross_ari = ari(at, ac);
  if (std::abs(cross_ari + 0.5) > 1e-12) {
    out.note = strf("ari on the crossing partition: %.17g", cross_ari);
    return out;
  }

  double worst_nmi = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t kt = 1 + rng.next_below(6);
    const std::size_t kc = 1 + rng.next_below(6);
    const std::size_t n = 2 + rng.next_below(59);
    std::vector<int> truth(n), clusters(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = int(rng.next_below(kt));
      clusters[i] = int(rng.next_below(kc));
    }
    worst_nmi = std::max(
        worst_nmi, std::abs(nmi(truth, clusters) - ref_nmi(truth, clusters)));
  }
  if (worst_nmi > 1e-10) {
    out.note = strf("nmi drifted from the reference by %.2e", worst_nmi);
    return out;
  }

  double worst_sil = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 4 + rng.next_below(22);
    const std::size_t d = 2 + rng.next_below(4);
    const std::size_t k = 2 + rng.next_below(3);
    Matrix emb(n, d);
    for (auto& v : emb.data()) v = rng.uniform(-2.0, 2.0);
    std::vector<std::string> intents(n);
    for (std::size_t i = 0; i < n; ++i)
      intents[i] = "g" + std::to_string(i % k);
    rng.shuffle(intents);
    const auto lib = silhouette_per_intent(emb, intents);
    const auto ref = ref_silhouette(emb, intents);
    if (lib.size() != ref.size()) {
      out.note = "silhouette intent sets differ";
      return out;
    }
    for (const auto& [intent, value] : lib)
      worst_sil = std::max(worst_sil, std::abs(value - ref.at(intent)));
  }
  if (worst_sil > 1e-10) {
    out.note = strf("silhouette drifted from the reference by %.2e", worst_sil);
    return out;
  }

  out.ok = true;
  out.note = strf("200 exact matchings; nmi/sil within %.1e/%.1e", worst_nmi,
                  worst_sil);
  return out;
}

// --- 4: single-head reduction -----------------------------------------------

// A three-head model whose lambda is then collapsed to (1,0,0) must train
// exactly like the model built question-only from the start: same seed, same
// batches, and idle heads pinned at initialization because their gradients
// stay identically zero.
Outcome conv_reduction() {
  Outcome out;
  Rng rng(17);
  Matrix x(200, 4);
  for (auto& v : x.data()) v = rng.uniform(-1.5, 1.5);
  std::vector<std::optional<std::string>> labels(x.rows());
  Rng lrng(23);
  for (std::size_t i = 0; i < x.rows(); ++i)
    if (lrng.next_double() < 0.5) labels[i] = "c" + std::to_string(i % 4);
  FieldData feats;
  feats.q = &x;

  ModelDims dims;
  dims.input_dim = 4;
  dims.hidden_dim = 8;
  dims.rep_dim = 4;
  RepSource qsrc;
  qsrc.fields = {Field::Q};
  const std::uint64_t seed = 3;

  RepModel solo = init_model(dims, {1, 0, 0}, seed, qsrc);
  RepModel trio = init_model(dims, {1, 1, 1}, seed);
  std::vector<Matrix> frozen;
  for (Field f : {Field::A, Field::QA})
    for (const Matrix* t : head_tensors(trio.head(f))) frozen.push_back(*t);
  trio.lambda = {1.0, 0.0, 0.0};

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 6;
  const TrainResult ra = train_cdac(solo, feats, labels, cfg, seed);
  const TrainResult rb = train_cdac(trio, feats, labels, cfg, seed);

  if (ra.log.size() != rb.log.size()) {
    out.note = "epoch counts differ";
    return out;
  }
  for (std::size_t e = 0; e < ra.log.size(); ++e)
    if (ra.log[e].mean_loss != rb.log[e].mean_loss ||
        ra.log[e].positives != rb.log[e].positives ||
        ra.log[e].negatives != rb.log[e].negatives) {
      out.note = strf("training logs diverge at epoch %zu", e);
      return out;
    }

  if (!same_bits(solo.backbone.w, trio.backbone.w) ||
      !same_bits(solo.backbone.b, trio.backbone.b)) {
    out.note = "backbones diverged";
    return out;
  }
  const auto sq = head_tensors(solo.head(Field::Q));
  const auto tq = head_tensors(trio.head(Field::Q));
  for (std::size_t t = 0; t < sq.size(); ++t)
    if (!same_bits(*sq[t], *tq[t])) {
      out.note = strf("question head tensor %zu diverged", t);
      return out;
    }
  std::size_t fi = 0;
  for (Field f : {Field::A, Field::QA})
    for (const Matrix* t : head_tensors(trio.head(f)))
      if (!same_bits(*t, frozen[fi++])) {
        out.note = "an idle head moved during training";
        return out;
      }

  // Guard against a vacuous pass: training must have moved the live tensors.
  const RepModel fresh = init_model(dims, {1, 0, 0}, seed, qsrc);
  if (same_bits(solo.backbone.w, fresh.backbone.w)) {
    out.note = "training left the backbone untouched";
    return out;
  }

  out.ok = true;
  out.note = strf("%zu epochs bit-identical, idle heads pinned", ra.log.size());
  return out;
}

// --- 5: scheme ordering -----------------------------------------------------

// Synthetic conversations: 8 intents, question embeddings on a circle in dims
// 0-1, answer embeddings on a circle in dims 2-3 with a stride-3 relabeling
// so question-confusable neighbors sit far apart in answer space.
struct ConvData {
  Matrix q, a, qa;
  std::vector<std::string> intent;
};

ConvData make_conv_data(std::size_t per, double sigma, std::uint64_t seed) {
  const std::size_t k = 8, n = k * per;
  ConvData d;
  d.q = Matrix(n, 4);
  d.a = Matrix(n, 4);
  d.qa = Matrix(n, 4);
  Rng rng(seed);
  for (std::size_t c = 0; c < k; ++c) {
    const double qang = 2.0 * M_PI * double(c) / double(k);
    const double aang = 2.0 * M_PI * double((3 * c) % k) / double(k);
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t r = c * per + i;
      const double q1 = std::cos(qang) + sigma * rng.normal();
      const double q2 = std::sin(qang) + sigma * rng.normal();
      const double a1 = std::cos(aang) + sigma * rng.normal();
      const double a2 = std::sin(aang) + sigma * rng.normal();
      d.q.at(r, 0) = q1;
      d.q.at(r, 1) = q2;
      d.a.at(r, 2) = a1;
      d.a.at(r, 3) = a2;
      d.qa.at(r, 0) = q1;
      d.qa.at(r, 1) = q2;
      d.qa.at(r, 2) = a1;
      d.qa.at(r, 3) = a2;
      d.intent.push_back("intent_" + std::to_string(c));
    }
  }
  return d;
}

// Five seeds of static vs question-only CDAC vs the three-head combination;
// the answer circle carries the signal only the combination can reach, so the
// ordering static < cdac-q < combined should hold with significance.
Outcome scheme_ordering() {
  Outcome out;
  const std::set<std::string> known = {"intent_0", "intent_2", "intent_4",
                                      "intent_6"};
  std::vector<double> s_avg, c_avg, v_avg;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ConvData d = make_conv_data(40, 0.55, 100 + seed);
    std::vector<std::optional<std::string>> labels(d.q.rows());
    Rng lrng(seed);
    for (std::size_t i = 0; i < d.q.rows(); ++i)
      if (known.count(d.intent[i]) && lrng.next_double() < 0.5)
        labels[i] = d.intent[i];
    FieldData feats;
    feats.q = &d.q;
    feats.a = &d.a;
    feats.qa = &d.qa;

    RepSource qsrc;
    qsrc.fields = {Field::Q};
    const Matrix raw = static_representations(feats, qsrc);
    s_avg.push_back(
        evaluate_clustering(d.intent, kmeans(raw, 8, seed).assignment, known)
            .avg);

    ModelDims dims;
    dims.input_dim = 4;
    dims.hidden_dim = 32;
    dims.rep_dim = 4;
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 100;

    RepModel qm = init_model(dims, {1, 0, 0}, seed, qsrc);
    train_cdac(qm, feats, labels, cfg, seed);
    const Matrix qreps = extract_representations(qm, feats);
    c_avg.push_back(
        evaluate_clustering(d.intent, kmeans(qreps, 8, seed).assignment, known)
            .avg);

    RepModel cm = init_model(dims, {1, 1, 1}, seed);
    train_cdac(cm, feats, labels, cfg, seed);
    const Matrix creps = extract_representations(cm, feats);
    v_avg.push_back(
        evaluate_clustering(d.intent, kmeans(creps, 8, seed).assignment, known)
            .avg);
  }

  double ms = 0.0, mc = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < s_avg.size(); ++i) {
    ms += s_avg[i] / double(s_avg.size());
    mc += c_avg[i] / double(c_avg.size());
    mv += v_avg[i] / double(v_avg.size());
  }
  const TTestResult t1 = paired_t_test(c_avg, s_avg);
  const TTestResult t2 = paired_t_test(v_avg, c_avg);

  out.note = strf("static=%.3f cdac-q=%.3f combined=%.3f p1=%.4f p2=%.4f", ms,
                  mc, mv, t1.p_value, t2.p_value);
  if (ms < 0.4 || ms > 0.7) {
    out.note += "; static baseline out of range";
    return out;
  }
  if (!(t1.mean_diff > 0.0 && t1.p_value < 0.05)) {
    out.note += "; cdac-q does not beat static";
    return out;
  }
  if (!(t2.mean_diff > 0.0 && t2.p_value < 0.05)) {
    out.note += "; combined does not beat cdac-q";
    return out;
  }
  out.ok = true;
  return out;
}

// --- 6: even-epoch isolation ------------------------------------------------

// Epoch 0 is a labeled-only epoch, so scrambling every unlabeled row's
// features must leave a one-epoch run bit-identical; a two-epoch run then has
// to diverge, proving the scrambled rows do take part afterwards.
Outcome even_epoch_isolation() {
  Outcome out;
  Rng rng(41);
  Matrix clean(60, 3);
  for (auto& v : clean.data()) v = rng.uniform(-1.5, 1.5);
  std::vector<std::optional<std::string>> labels(clean.rows());
  for (std::size_t i = 0; i < clean.rows(); i += 2)
    labels[i] = "c" + std::to_string((i / 2) % 3);
  Matrix junk = clean;
  Rng jr(97);
  for (std::size_t i = 0; i < junk.rows(); ++i) {
    if (labels[i]) continue;
    for (std::size_t c = 0; c < junk.cols(); ++c)
      junk.at(i, c) = jr.uniform(-50.0, 50.0);
  }

  ModelDims dims;
  dims.input_dim = 3;
  dims.hidden_dim = 4;
  dims.rep_dim = 2;
  const std::uint64_t seed = 29;
  FieldData fclean;
  fclean.q = &clean;
  fclean.a = &clean;
  fclean.qa = &clean;
  FieldData fjunk;
  fjunk.q = &junk;
  fjunk.a = &junk;
  fjunk.qa = &junk;

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 1;
  RepModel ma = init_model(dims, {1, 1, 1}, seed);
  RepModel mb = init_model(dims, {1, 1, 1}, seed);
  train_cdac(ma, fclean, labels, cfg, seed);
  train_cdac(mb, fjunk, labels, cfg, seed);

  const auto pa = parameters(ma);
  const auto pb = parameters(mb);
  for (std::size_t t = 0; t < pa.size(); ++t)
    if (!same_bits(*pa[t], *pb[t])) {
      out.note = strf("tensor %zu differs after the labeled-only epoch", t);
      return out;
    }

  cfg.max_epochs = 2;
  RepModel ma2 = init_model(dims, {1, 1, 1}, seed);
  RepModel mb2 = init_model(dims, {1, 1, 1}, seed);
  train_cdac(ma2, fclean, labels, cfg, seed);
  train_cdac(mb2, fjunk, labels, cfg, seed);
  const auto pa2 = parameters(ma2);
  const auto pb2 = parameters(mb2);
  bool diverged = false;
  for (std::size_t t = 0; t < pa2.size(); ++t)
    diverged = diverged || !same_bits(*pa2[t], *pb2[t]);
  if (!diverged) {
    out.note = "scrambled rows never reached training at all";
    return out;
  }

  out.ok = true;
  out.note = "labeled-only epoch ignores unlabeled features";
  return out;
}

// --- 7: experiment determinism ----------------------------------------------

std::string write_demo_dataset(const TempTree& tree) {
  const std::vector<std::string> words = {"refund", "parcel",  "invoice",
                                          "login",  "voucher", "payment"};
  std::ostringstream body;
  for (std::size_t k = 0; k < words.size(); ++k) {
    const std::string w = words[k];
    for (std::size_t j = 0; j < 12; ++j) {
      const char* split = j < 8 ? "train" : (j < 10 ? "val" : "test");
      nlohmann::json line = {
          {"id", "i" + std::to_string(k) + "-" + std::to_string(j)},
          {"question", w + " " + w + " help " + std::to_string(j % 4)},
          {"answer", "about " + w + " sure"},
          {"intent", "intent-" + w},
          {"split", split}};
      body << line.dump() << "\n";
    }
  }
  const std::string path = tree.file("data.jsonl");
  std::ofstream fout(path, std::ios::binary);
  fout << body.str();
  return path;
}

// The same config run into two output roots must leave byte-identical metric
// JSON everywhere: per-seed metrics, the record list, and the aggregate.
Outcome experiment_determinism() {
  Outcome out;
  TempTree tmp;
  ExperimentConfig cfg;
  cfg.dataset_path = write_demo_dataset(tmp);
  cfg.feature_dim = 64;
  cfg.scheme = "cdac";
  cfg.lambda = {1, 0, 0};
  cfg.rep_dim = 16;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-4;
  cfg.max_epochs = 2;
  cfg.n_seeds = 2;
  cfg.base_seed = 9;

  cfg.output_dir = tmp.file("run_a");
  const ExperimentResult ra = run_experiment(cfg);
  cfg.output_dir = tmp.file("run_b");
  const ExperimentResult rb = run_experiment(cfg);
  if (ra.config_hash != rb.config_hash) {
    out.note = "config hash changed with the output root";
    return out;
  }

  const std::string hex = hash_hex(ra.config_hash);
  std::size_t compared = 0;
  namespace fs = std::filesystem;
  for (const auto& entry : fs::directory_iterator(tmp.file("run_a/" + hex))) {
    if (!entry.is_directory()) continue;
    const std::string seed_dir = entry.path().filename().string();
    const std::string a = slurp(entry.path().string() + "/metrics.json");
    const std::string b =
        slurp(tmp.file("run_b/" + hex + "/" + seed_dir + "/metrics.json"));
    if (a.empty() || a != b) {
      out.note = "metrics.json differs for seed " + seed_dir;
      return out;
    }
    ++compared;
  }
  if (compared != cfg.n_seeds) {
    out.note = strf("found %zu seed dirs, want %zu", compared, cfg.n_seeds);
    return out;
  }
  {
    const std::string a = slurp(tmp.file("run_a/" + hex + "/aggregate.json"));
    const std::string b = slurp(tmp.file("run_b/" + hex + "/aggregate.json"));
    if (a.empty() || a != b) {
      out.note = "aggregate.json differs between runs";
      return out;
    }
  }
  // records.json carries wall-clock timings and per-root log paths next to
  // the metrics, so only the report objects are held to byte equality.
  const nlohmann::json recs_a =
      nlohmann::json::parse(slurp(tmp.file("run_a/" + hex + "/records.json")));
  const nlohmann::json recs_b =
      nlohmann::json::parse(slurp(tmp.file("run_b/" + hex + "/records.json")));
  if (recs_a.size() != cfg.n_seeds || recs_b.size() != cfg.n_seeds) {
    out.note = "unexpected record counts";
    return out;
  }
  for (std::size_t i = 0; i < recs_a.size(); ++i)
    if (recs_a[i].at("report").dump() != recs_b[i].at("report").dump()) {
      out.note = strf("record %zu report differs between runs", i);
      return out;
    }

  out.ok = true;
  out.note = strf("%zu seed runs byte-identical", compared);
  return out;
}

// --- 8: balance entropy -----------------------------------------------------

Outcome balance_entropy() {
  Outcome out;
  const double skew = normalized_entropy({75, 225});
  if (std::abs(skew - 0.8113) > 1e-4) {
    out.note = strf("entropy(75,225) = %.6f", skew);
    return out;
  }
  for (std::size_t k = 2; k <= 8; ++k) {
    const std::vector<std::size_t> counts(k, 50);
    if (normalized_entropy(counts) != 1.0) {
      out.note = strf("uniform entropy not exactly 1 at k=%zu", k);
      return out;
    }
  }
  out.ok = true;
  out.note = strf("entropy(75,225)=%.5f; uniform == 1 exactly", skew);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 means no stated budget
    Outcome (*fn)();
  };
  const std::vector<Criterion> gate = {
      {1, "threshold curriculum", 1.0, curriculum_schedule},
      {2, "loss gradients", 30.0, gradient_checks},
      {3, "metric oracles", 60.0, metric_oracles},
      {4, "single-head reduction", 60.0, conv_reduction},
      {5, "scheme ordering", 600.0, scheme_ordering},
      {6, "even-epoch isolation", 0.0, even_epoch_isolation},
      {7, "experiment determinism", 0.0, experiment_determinism},
      {8, "balance entropy", 0.0, balance_entropy},
  };

  bool all_ok = true;
  for (const Criterion& c : gate) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.note = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (o.ok && c.budget_s > 0.0 && secs >= c.budget_s) {
      o.ok = false;
      o.note += strf("; over the %.0fs budget", c.budget_s);
    }
    std::printf("[%s] %d %-22s %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", c.id,
                c.name, secs, o.note.c_str());
    all_ok = all_ok && o.ok;
  }
  return all_ok ? 0 : 1;
}
