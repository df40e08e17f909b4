#pragma once

// Representation model: a shared affine+tanh backbone feeding up to three
// projection heads (two linear layers with tanh in between), combined by head
// weights lambda. All arithmetic is 64-bit; forward and backward are
// deterministic for fixed parameters and inputs.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "convlab/common.hpp"
#include "convlab/data.hpp"

namespace convlab {

// Substream tags, so operations sharing one run seed draw from disjoint
// deterministic streams.
namespace streams {
constexpr std::uint64_t intent_mask = 0;
constexpr std::uint64_t label_mask = 1;
constexpr std::uint64_t model_init = 2;
constexpr std::uint64_t training = 3;
constexpr std::uint64_t kmeans = 4;
constexpr std::uint64_t class_weights = 5;
}  // namespace streams

// y = W x + b, with b kept as a 1 x out matrix so every parameter tensor is a
// Matrix (uniform for Adam, serialization and gradient checks).
struct Affine {
  Matrix w;  // out x in
  Matrix b;  // 1 x out

  std::size_t in_dim() const { return w.cols(); }
  std::size_t out_dim() const { return w.rows(); }
};

struct Head {
  Affine linear1;
  Affine linear2;
};

struct HeadWeights {
  double q = 1.0;
  double a = 0.0;
  double qa = 0.0;

  double get(Field f) const {
    switch (f) {
      case Field::Q: return q;
      case Field::A: return a;
      case Field::QA: return qa;
    }
    return 0.0;
  }
  double sum() const { return q + a + qa; }
};

// Which head output(s) form the final representation; several fields mean
// column-wise concatenation.
struct RepSource {
  std::vector<Field> fields = {Field::QA};
};

struct ModelDims {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // 0 -> input_dim
  std::size_t rep_dim = 32;
};

constexpr std::array<Field, 3> kAllFields = {Field::Q, Field::A, Field::QA};

struct RepModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t rep_dim = 0;
  Affine backbone;  // input_dim -> input_dim, tanh
  std::array<std::optional<Head>, 3> heads;  // indexed by Field
  HeadWeights lambda;
  RepSource rep_source;
  std::uint64_t seed = 0;

  bool has_head(Field f) const { return heads[std::size_t(f)].has_value(); }
  Head& head(Field f) { return *heads[std::size_t(f)]; }
  const Head& head(Field f) const { return *heads[std::size_t(f)]; }

  std::vector<Field> active_fields() const {
    std::vector<Field> out;
    for (Field f : kAllFields)
      if (lambda.get(f) > 0.0) out.push_back(f);
    return out;
  }
};

// Parameter tensors in their canonical (serialization and optimizer) order:
// backbone w, backbone b, then per present head in Q, A, QA order:
// linear1 w, linear1 b, linear2 w, linear2 b.
inline std::vector<Matrix*> parameters(RepModel& m) {
  std::vector<Matrix*> out = {&m.backbone.w, &m.backbone.b};
  for (Field f : kAllFields) {
    if (!m.has_head(f)) continue;
    Head& h = m.head(f);
    out.push_back(&h.linear1.w);
    out.push_back(&h.linear1.b);
    out.push_back(&h.linear2.w);
    out.push_back(&h.linear2.b);
  }
  return out;
}

inline std::vector<const Matrix*> parameters(const RepModel& m) {
  auto mut = parameters(const_cast<RepModel&>(m));
  return std::vector<const Matrix*>(mut.begin(), mut.end());
}

// Gradients in the same layout as parameters().
struct ModelGrad {
  std::vector<Matrix> tensors;

  static ModelGrad zeros_like(const RepModel& m) {
    ModelGrad g;
    for (const Matrix* p : parameters(m))
      g.tensors.emplace_back(p->rows(), p->cols());
    return g;
  }
};

namespace detail {

inline void init_uniform(Matrix& w, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(w.cols()));
  for (auto& v : w.data()) v = rng.uniform(-bound, bound);
}

}  // namespace detail

// Parameters drawn from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with the
// run seed; biases zero; backbone starts as identity plus uniform noise of
// the given scale so the input geometry is preserved at step 0.
inline RepModel init_model(const ModelDims& dims, const HeadWeights& lambda,
                           std::uint64_t seed, const RepSource& rep_source = {},
                           double backbone_noise = 1e-2) {
  if (dims.input_dim == 0) throw ConfigError("input_dim must be positive");
  if (dims.rep_dim < 2) throw ConfigError("rep_dim must be >= 2");
  if (lambda.q < 0 || lambda.a < 0 || lambda.qa < 0 || lambda.sum() <= 0.0)
    throw ConfigError("head weights must be nonnegative with a positive sum");

  RepModel m;
  m.input_dim = dims.input_dim;
  m.hidden_dim = dims.hidden_dim ? dims.hidden_dim : dims.input_dim;
  m.rep_dim = dims.rep_dim;
  m.lambda = lambda;
  const double s = lambda.sum();
  m.lambda.q /= s;
  m.lambda.a /= s;
  m.lambda.qa /= s;
  m.rep_source = rep_source;
  m.seed = seed;

  Rng rng = Rng(seed).stream(streams::model_init);
  m.backbone.w = Matrix(m.input_dim, m.input_dim);
  for (std::size_t r = 0; r < m.input_dim; ++r)
    for (std::size_t c = 0; c < m.input_dim; ++c)
      m.backbone.w.at(r, c) = (r == c ? 1.0 : 0.0) +
                              (backbone_noise > 0.0
                                   ? rng.uniform(-backbone_noise, backbone_noise)
                                   : 0.0);
  m.backbone.b = Matrix(1, m.input_dim);

  for (Field f : kAllFields) {
    if (m.lambda.get(f) <= 0.0) continue;
    Head h;
    h.linear1.w = Matrix(m.hidden_dim, m.input_dim);
    h.linear1.b = Matrix(1, m.hidden_dim);
    h.linear2.w = Matrix(m.rep_dim, m.hidden_dim);
    h.linear2.b = Matrix(1, m.rep_dim);
    detail::init_uniform(h.linear1.w, rng);
    detail::init_uniform(h.linear2.w, rng);
    m.heads[std::size_t(f)] = std::move(h);
  }

  for (Field f : rep_source.fields)
    if (!m.has_head(f))
      throw ConfigError(std::string("rep_source references absent head ") +
                        field_name(f));
  return m;
}

// --- forward / backward ----------------------------------------------------

inline Matrix linear_forward(const Matrix& x, const Affine& a) {
  Matrix y(x.rows(), a.out_dim());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    for (std::size_t o = 0; o < a.out_dim(); ++o)
      yr[o] = dot(xr, a.w.row(o), a.in_dim()) + a.b.at(0, o);
  }
  return y;
}

inline Matrix tanh_forward(const Matrix& x) {
  Matrix y = x;
  for (auto& v : y.data()) v = std::tanh(v);
  return y;
}

// Cached intermediates of one head pass over a batch.
struct HeadForward {
  Matrix backbone_act;  // tanh(backbone(X)), n x input_dim
  Matrix hidden_act;    // tanh(linear1(...)), n x hidden_dim
  Matrix rep;           // linear2(...), n x rep_dim
};

inline HeadForward forward_batch(const RepModel& m, Field f, const Matrix& x) {
  if (!m.has_head(f))
    throw ConfigError(std::string("no head for field ") + field_name(f));
  if (x.cols() != m.input_dim)
    throw DataError("input has " + std::to_string(x.cols()) +
                    " columns, model expects " + std::to_string(m.input_dim));
  if (!x.all_finite()) throw DataError("non-finite input to forward pass");
  HeadForward fw;
  fw.backbone_act = tanh_forward(linear_forward(x, m.backbone));
  const Head& h = m.head(f);
  fw.hidden_act = tanh_forward(linear_forward(fw.backbone_act, h.linear1));
  fw.rep = linear_forward(fw.hidden_act, h.linear2);
  return fw;
}

inline std::vector<double> forward(const RepModel& m, Field f,
                                   const std::vector<double>& x) {
  Matrix xm(1, x.size());
  std::copy(x.begin(), x.end(), xm.row(0));
  const Matrix rep = forward_batch(m, f, xm).rep;
  return std::vector<double>(rep.row(0), rep.row(0) + rep.cols());
}

namespace detail {

// grad_w += scale * dY^T X ; grad_b += scale * colsum(dY); returns dX = dY W.
inline Matrix linear_backward(const Matrix& x, const Affine& a, const Matrix& dy,
                              double scale, Matrix& grad_w, Matrix& grad_b) {
  const std::size_t n = x.rows(), in = a.in_dim(), out = a.out_dim();
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy.row(r);
    const double* xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = scale * dyr[o];
      if (g == 0.0) continue;
      double* gw = grad_w.row(o);
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
      grad_b.at(0, o) += g;
    }
  }
  Matrix dx(n, in);
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy.row(r);
    double* dxr = dx.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      const double* wr = a.w.row(o);
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
    }
  }
  return dx;
}

inline void tanh_backward_inplace(Matrix& dy, const Matrix& act) {
  for (std::size_t i = 0; i < dy.data().size(); ++i)
    dy.data()[i] *= 1.0 - act.data()[i] * act.data()[i];
}

// Offsets of a head's tensors inside the parameters() layout.
inline std::size_t head_param_offset(const RepModel& m, Field f) {
  std::size_t off = 2;  // backbone w, b
  for (Field g : kAllFields) {
    if (g == f) break;
    if (m.has_head(g)) off += 4;
  }
  return off;
}

}  // namespace detail

// Backpropagates dL/d(rep) through head `f` and the shared backbone,
// accumulating `scale` times the gradient into `grad`.
inline void backward_batch(const RepModel& m, Field f, const Matrix& x,
                           const HeadForward& fw, const Matrix& d_rep,
                           double scale, ModelGrad& grad) {
  const Head& h = m.head(f);
  const std::size_t off = detail::head_param_offset(m, f);
  Matrix d_hidden = detail::linear_backward(fw.hidden_act, h.linear2, d_rep, scale,
                                            grad.tensors[off + 2], grad.tensors[off + 3]);
  detail::tanh_backward_inplace(d_hidden, fw.hidden_act);
  Matrix d_backbone = detail::linear_backward(fw.backbone_act, h.linear1, d_hidden,
                                              scale, grad.tensors[off], grad.tensors[off + 1]);
  detail::tanh_backward_inplace(d_backbone, fw.backbone_act);
  detail::linear_backward(x, m.backbone, d_backbone, scale, grad.tensors[0],
                          grad.tensors[1]);
}

// Field matrices for one batch or a whole split.
struct FieldData {
  const Matrix* q = nullptr;
  const Matrix* a = nullptr;
  const Matrix* qa = nullptr;

  const Matrix* get(Field f) const {
    switch (f) {
      case Field::Q: return q;
      case Field::A: return a;
      case Field::QA: return qa;
    }
    return nullptr;
  }
  const Matrix& require(Field f) const {
    const Matrix* m = get(f);
    if (!m) throw DataError(std::string("missing feature matrix for field ") +
                            field_name(f));
    return *m;
  }
};

// Per-head loss: given the head's representations, returns the loss and
// writes dL/d(rep) into `d_rep` (same shape as reps).
using PerHeadLoss = std::function<double(Field, const Matrix& reps, Matrix& d_rep)>;

struct ConvLossResult {
  double loss = 0.0;
  ModelGrad grad;
};

// Weighted combination over active heads: sum_f lambda_f * L_f, with the
// backbone receiving the lambda-weighted sum of per-head gradients.
inline ConvLossResult conv_loss(const RepModel& m, const FieldData& batch,
                                const PerHeadLoss& per_head_loss) {
  ConvLossResult out;
  out.grad = ModelGrad::zeros_like(m);
  for (Field f : kAllFields) {
    const double lf = m.lambda.get(f);
    if (lf <= 0.0) continue;
    if (!m.has_head(f))
      throw ConfigError(std::string("lambda > 0 for field ") + field_name(f) +
                        " but head is absent");
    const Matrix& x = batch.require(f);
    const HeadForward fw = forward_batch(m, f, x);
    Matrix d_rep(fw.rep.rows(), fw.rep.cols());
    out.loss += lf * per_head_loss(f, fw.rep, d_rep);
    backward_batch(m, f, x, fw, d_rep, lf, out.grad);
  }
  return out;
}

// One row per example from the configured representation source; several
// source fields concatenate column-wise.
inline Matrix extract_representations(const RepModel& m, const FieldData& data) {
  if (m.rep_source.fields.empty()) throw ConfigError("empty rep_source");
  std::vector<Matrix> parts;
  for (Field f : m.rep_source.fields) {
    if (!m.has_head(f))
      throw ConfigError(std::string("rep_source references absent head ") +
                        field_name(f));
    parts.push_back(forward_batch(m, f, data.require(f)).rep);
  }
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DataError("field matrices disagree on row count");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      std::copy(p.row(r), p.row(r) + p.cols(), out.row(r) + c0);
      c0 += p.cols();
    }
  }
  return out;
}

// --- checkpoints -----------------------------------------------------------
//
// "RMC1" magic, u32 LE header length, JSON header, then each parameter tensor
// in parameters() order as an EMB1 block.

inline std::string rep_source_to_string(const RepSource& s) {
  std::string out;
  for (Field f : s.fields) out += (out.empty() ? "" : "+") + std::string(field_name(f));
  return out;
}

inline RepSource rep_source_from_string(const std::string& s) {
  RepSource out;
  out.fields.clear();
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find('+', pos);
    const std::string part = s.substr(pos, next == std::string::npos ? next : next - pos);
    if (!part.empty()) out.fields.push_back(parse_field(part));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.fields.empty()) throw ConfigError("empty rep_source string");
  return out;
}

inline void save_model(const RepModel& m, const std::string& path) {
  nlohmann::json header;
  header["input_dim"] = m.input_dim;
  header["hidden_dim"] = m.hidden_dim;
  header["rep_dim"] = m.rep_dim;
  header["lambda"] = {m.lambda.q, m.lambda.a, m.lambda.qa};
  header["rep_source"] = rep_source_to_string(m.rep_source);
  header["seed"] = m.seed;
  std::vector<std::string> present;
  for (Field f : kAllFields)
    if (m.has_head(f)) present.push_back(field_name(f));
  header["heads"] = present;

  std::string bytes = "RMC1";
  const std::string hj = header.dump();
  detail::put_u32_le(bytes, std::uint32_t(hj.size()));
  bytes += hj;
  for (const Matrix* t : parameters(m)) bytes += encode_embeddings(*t);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file: " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

inline RepModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 8 || bytes.compare(0, 4, "RMC1") != 0)
    throw DataError("bad magic in model file: " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t hlen = detail::get_u32_le(p + 4);
  if (bytes.size() < 8 + std::size_t(hlen))
    throw DataError("truncated model header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad model header: " + std::string(e.what()));
  }

  RepModel m;
  m.input_dim = header.at("input_dim").get<std::size_t>();
  m.hidden_dim = header.at("hidden_dim").get<std::size_t>();
  m.rep_dim = header.at("rep_dim").get<std::size_t>();
  const auto lam = header.at("lambda");
  m.lambda = {lam.at(0).get<double>(), lam.at(1).get<double>(), lam.at(2).get<double>()};
  m.rep_source = rep_source_from_string(header.at("rep_source").get<std::string>());
  m.seed = header.at("seed").get<std::uint64_t>();
  for (const auto& name : header.at("heads"))
    m.heads[std::size_t(parse_field(name.get<std::string>()))] = Head{};

  std::size_t off = 8 + hlen;
  auto next_tensor = [&]() {
    if (off + 12 > bytes.size()) throw DataError("truncated model file: " + path);
    const std::uint32_t rows = detail::get_u32_le(p + off + 4);
    const std::uint32_t cols = detail::get_u32_le(p + off + 8);
    const std::size_t len = 12 + std::size_t(rows) * cols * 4;
    if (off + len > bytes.size()) throw DataError("truncated model file: " + path);
    Matrix t = decode_embeddings(bytes.substr(off, len), path);
    off += len;
    return t;
  };
  for (Matrix* t : parameters(m)) *t = next_tensor();
  if (off != bytes.size()) throw DataError("trailing bytes in model file: " + path);
  return m;
}

}  // namespace convlab
