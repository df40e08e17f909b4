#pragma once

// Dataset ingestion (JSONL), deterministic text featurization, embedding
// matrix I/O and corpus statistics.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "convlab/common.hpp"

namespace convlab {

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split value: " + s);
}

enum class Field { Q, A, QA };

inline const char* field_name(Field f) {
  switch (f) {
    case Field::Q: return "Q";
    case Field::A: return "A";
    case Field::QA: return "QA";
  }
  return "?";
}

inline Field parse_field(const std::string& s) {
  if (s == "Q" || s == "q") return Field::Q;
  if (s == "A" || s == "a") return Field::A;
  if (s == "QA" || s == "qa") return Field::QA;
  throw ConfigError("unknown field: " + s);
}

struct Example {
  std::string id;
  std::string question;
  std::optional<std::string> answer;
  std::optional<std::string> intent;
  Split split = Split::train;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Example> examples) : examples_(std::move(examples)) {}

  std::size_t size() const { return examples_.size(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const { return examples_; }
  std::vector<Example>& examples() { return examples_; }

  // All examples carry an answer.
  bool conversational() const {
    return std::all_of(examples_.begin(), examples_.end(),
                       [](const Example& e) { return e.answer.has_value(); });
  }

  std::vector<std::size_t> split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < examples_.size(); ++i)
      if (examples_[i].split == s) out.push_back(i);
    return out;
  }

  std::set<std::string> intents() const {
    std::set<std::string> out;
    for (const auto& e : examples_)
      if (e.intent) out.insert(*e.intent);
    return out;
  }

 private:
  std::vector<Example> examples_;
};

// --- Unicode helpers -------------------------------------------------------
//
// Locale-independent tokenization: decode UTF-8, classify alphanumerics over
// explicit code point ranges (Latin incl. extended, Greek, Cyrillic, common
// digits, CJK), and case-fold with a simple mapping covering those scripts.
// Anything the tables miss folds to itself; undecodable bytes separate tokens.

namespace unicode {

// Decodes one code point starting at `i`; advances `i`. Returns 0xFFFD on
// malformed input (consuming a single byte).
inline std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return std::uint32_t(std::uint8_t(s[k])); };
  const std::uint32_t b0 = byte(i);
  if (b0 < 0x80) {
    i += 1;
    return b0;
  }
  auto cont = [&](std::size_t k) {
    return k < s.size() && (std::uint8_t(s[k]) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    const std::uint32_t cp = ((b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp < 0x80 ? 0xFFFD : cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    const std::uint32_t cp =
        ((b0 & 0x0F) << 12) | ((byte(i + 1) & 0x3F) << 6) | (byte(i + 2) & 0x3F);
    i += 3;
    return cp < 0x800 ? 0xFFFD : cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    const std::uint32_t cp = ((b0 & 0x07) << 18) | ((byte(i + 1) & 0x3F) << 12) |
                             ((byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
    i += 4;
    return cp < 0x10000 || cp > 0x10FFFF ? 0xFFFD : cp;
  }
  i += 1;
  return 0xFFFD;
}

inline void encode_utf8(std::uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += char(cp);
  } else if (cp < 0x800) {
    out += char(0xC0 | (cp >> 6));
    out += char(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += char(0xE0 | (cp >> 12));
    out += char(0x80 | ((cp >> 6) & 0x3F));
    out += char(0x80 | (cp & 0x3F));
  } else {
    out += char(0xF0 | (cp >> 18));
    out += char(0x80 | ((cp >> 12) & 0x3F));
    out += char(0x80 | ((cp >> 6) & 0x3F));
    out += char(0x80 | (cp & 0x3F));
  }
}

inline bool is_alnum(std::uint32_t cp) {
  if (cp < 0x80)
    return (cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= 'a' && cp <= 'z');
  if (cp >= 0xC0 && cp <= 0x2AF) return cp != 0xD7 && cp != 0xF7;
  if (cp >= 0x370 && cp <= 0x3FF) return true;   // Greek
  if (cp >= 0x400 && cp <= 0x4FF) return true;   // Cyrillic
  if (cp >= 0x530 && cp <= 0x6FF) return true;   // Armenian, Hebrew, Arabic
  if (cp >= 0x3040 && cp <= 0x30FF) return true; // Kana
  if (cp >= 0x4E00 && cp <= 0x9FFF) return true; // CJK ideographs
  if (cp >= 0xAC00 && cp <= 0xD7AF) return true; // Hangul
  return false;
}

inline std::uint32_t fold(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x130) return 'i';    // dotted capital I
  if (cp == 0x178) return 0xFF;   // Y with diaeresis
  // Latin Extended-A/B upper/lower pairs.
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace unicode

// Maximal runs of alphanumeric code points, case-folded, re-encoded as UTF-8.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::uint32_t cp = unicode::decode_utf8(text, i);
    if (unicode::is_alnum(cp)) {
      unicode::encode_utf8(unicode::fold(cp), current);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Number of code points (one per non-continuation byte).
inline std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (char c : s)
    if ((std::uint8_t(c) & 0xC0) != 0x80) ++n;
  return n;
}

// --- Featurization ---------------------------------------------------------

inline std::size_t token_bucket(const std::string& token, std::size_t dim) {
  return std::size_t(fnv1a64(token) % std::uint64_t(dim));
}

inline std::string field_text(const Example& e, Field field) {
  switch (field) {
    case Field::Q: return e.question;
    case Field::A: return e.answer.value();
    case Field::QA: return e.question + " " + e.answer.value();
  }
  return {};
}

namespace detail {

inline void tfidf_row(const std::string& text, const std::vector<double>& idf,
                      std::size_t dim, double* out) {
  std::unordered_map<std::size_t, double> counts;
  for (const auto& tok : tokenize(text)) counts[token_bucket(tok, dim)] += 1.0;
  for (std::size_t b = 0; b < dim; ++b) out[b] = 0.0;
  for (const auto& [b, tf] : counts) out[b] = tf * idf[b];
  const double norm = l2_norm(out, dim);
  if (norm > 0.0)
    for (std::size_t b = 0; b < dim; ++b) out[b] /= norm;
}

// Smoothed idf over the given document-frequency corpus:
//   idf = ln((1 + N) / (1 + df)) + 1.
inline std::vector<double> idf_table(const std::vector<std::string>& df_docs,
                                     std::size_t corpus_size, std::size_t dim) {
  std::vector<std::size_t> df(dim, 0);
  for (const auto& doc : df_docs) {
    std::unordered_set<std::size_t> seen;
    for (const auto& tok : tokenize(doc)) seen.insert(token_bucket(tok, dim));
    for (std::size_t b : seen) ++df[b];
  }
  std::vector<double> idf(dim);
  for (std::size_t b = 0; b < dim; ++b)
    idf[b] = std::log((1.0 + double(corpus_size)) / (1.0 + double(df[b]))) + 1.0;
  return idf;
}

}  // namespace detail

// Hashed tf-idf over the dataset for one field. Document frequencies come
// from the train split only; N is the full dataset size. Rows are
// L2-normalized; text with no tokens yields an all-zero row.
inline Matrix featurize(const Dataset& dataset, Field field, std::size_t dim) {
  if (dim < 2) throw ConfigError("featurizer dim must be >= 2");
  if (field != Field::Q) {
    std::string missing;
    for (const auto& e : dataset.examples())
      if (!e.answer) missing += missing.empty() ? e.id : ", " + e.id;
    if (!missing.empty())
      throw DataError("field " + std::string(field_name(field)) +
                      " requires answers; missing for: " + missing);
  }
  std::vector<std::string> train_docs;
  for (const auto& e : dataset.examples())
    if (e.split == Split::train) train_docs.push_back(field_text(e, field));
  const auto idf = detail::idf_table(train_docs, dataset.size(), dim);

  Matrix m(dataset.size(), dim);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    detail::tfidf_row(field_text(dataset[i], field), idf, dim, m.row(i));
  return m;
}

// Standalone variant for arbitrary text collections (document frequencies
// over the collection itself). Used by cluster summarization.
inline Matrix featurize_texts(const std::vector<std::string>& texts, std::size_t dim) {
  if (dim < 2) throw ConfigError("featurizer dim must be >= 2");
  const auto idf = detail::idf_table(texts, texts.size(), dim);
  Matrix m(texts.size(), dim);
  for (std::size_t i = 0; i < texts.size(); ++i)
    detail::tfidf_row(texts[i], idf, dim, m.row(i));
  return m;
}

// --- JSONL loading ---------------------------------------------------------

struct LoadOptions {
  std::uint64_t seed = 0;          // governs assignment of missing splits
  double train_fraction = 0.8;     // stratified 80/10/10
  double val_fraction = 0.1;
};

// One JSON object per line: id, question, optional answer/intent/split.
// Examples without a split are assigned a stratified train/val/test split
// (per intent, floor(0.1 n) to val and test each, remainder to train) using
// the seed in `options`.
inline Dataset load_dataset(const std::string& path,
                            const LoadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::vector<Example> examples;
  std::vector<std::size_t> unsplit;  // indices with no explicit split
  std::unordered_map<std::string, std::size_t> seen_ids;  // id -> line no
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object())
      throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");
    Example e;
    try {
      e.id = j.at("id").get<std::string>();
      e.question = j.at("question").get<std::string>();
      if (j.contains("answer")) e.answer = j.at("answer").get<std::string>();
      if (j.contains("intent")) e.intent = j.at("intent").get<std::string>();
      if (j.contains("split")) {
        e.split = parse_split(j.at("split").get<std::string>());
      } else {
        unsplit.push_back(examples.size());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.question.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty question");
    auto [it, inserted] = seen_ids.emplace(e.id, line_no);
    if (!inserted)
      throw DataError("line " + std::to_string(line_no) + ": duplicate id \"" +
                      e.id + "\" (first seen on line " + std::to_string(it->second) + ")");
    examples.push_back(std::move(e));
  }
  if (examples.empty()) throw DataError("empty dataset file: " + path);

  if (!unsplit.empty()) {
    // Strata in sorted intent order (unlabeled stratum last) so assignment is
    // independent of input order within the file header.
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t idx : unsplit) {
      const auto& e = examples[idx];
      strata[e.intent ? "i:" + *e.intent : "~unlabeled"].push_back(idx);
    }
    Rng rng(options.seed);
    std::size_t stratum_index = 0;
    for (auto& [key, members] : strata) {
      Rng r = rng.stream(stratum_index++);
      r.shuffle(members);
      const std::size_t n = members.size();
      const std::size_t n_val = std::size_t(std::floor(options.val_fraction * double(n)));
      const std::size_t n_test =
          std::size_t(std::floor((1.0 - options.train_fraction - options.val_fraction) * double(n) + 1e-9));
      const std::size_t n_train = n - n_val - n_test;
      for (std::size_t i = 0; i < n; ++i) {
        Split s = i < n_train           ? Split::train
                  : i < n_train + n_val ? Split::val
                                        : Split::test;
        examples[members[i]].split = s;
      }
    }
  }
  return Dataset(std::move(examples));
}

// --- Embedding matrix binary format ----------------------------------------
//
// "EMB1" magic, u32 LE rows, u32 LE cols, then rows*cols IEEE-754 binary32
// little-endian values, row-major.

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out += char(v & 0xFF);
  out += char((v >> 8) & 0xFF);
  out += char((v >> 16) & 0xFF);
  out += char((v >> 24) & 0xFF);
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace detail

inline std::string encode_embeddings(const Matrix& m) {
  std::string out;
  out.reserve(12 + m.rows() * m.cols() * 4);
  out += "EMB1";
  detail::put_u32_le(out, std::uint32_t(m.rows()));
  detail::put_u32_le(out, std::uint32_t(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m.at(r, c);
      const float f = float(v);
      if (!std::isfinite(v) || !std::isfinite(f))
        throw DataError("non-finite value at row " + std::to_string(r) +
                        ", col " + std::to_string(c));
      std::uint32_t bits;
      static_assert(sizeof(bits) == sizeof(f));
      std::memcpy(&bits, &f, 4);
      detail::put_u32_le(out, bits);
    }
  }
  return out;
}

inline void save_embeddings(const Matrix& m, const std::string& path) {
  const std::string bytes = encode_embeddings(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

inline Matrix decode_embeddings(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "EMB1") != 0)
    throw DataError("bad magic in embedding file: " + origin);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t rows = detail::get_u32_le(p + 4);
  const std::uint32_t cols = detail::get_u32_le(p + 8);
  const std::size_t expected = 12 + std::size_t(rows) * cols * 4;
  if (bytes.size() != expected)
    throw DataError("truncated embedding file " + origin + ": header declares " +
                    std::to_string(rows) + "x" + std::to_string(cols) + " (" +
                    std::to_string(expected) + " bytes), got " +
                    std::to_string(bytes.size()));
  Matrix m(rows, cols);
  std::size_t off = 12;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, off += 4) {
      const std::uint32_t bits = detail::get_u32_le(p + off);
      float f;
      std::memcpy(&f, &bits, 4);
      if (!std::isfinite(f))
        throw DataError("non-finite value at row " + std::to_string(r) +
                        ", col " + std::to_string(c) + " in " + origin);
      m.at(r, c) = double(f);
    }
  }
  return m;
}

inline Matrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_embeddings(buf.str(), path);
}

// --- Dataset statistics ----------------------------------------------------

struct DatasetStats {
  std::size_t n_intents = 0;
  std::size_t n_examples = 0;
  std::map<std::string, std::size_t> per_intent;
  double mean_per_intent = 0.0;
  std::size_t min_per_intent = 0;
  std::size_t max_per_intent = 0;
  double normalized_entropy = 0.0;
  double mean_question_length = 0.0;  // code points
  double mean_answer_length = 0.0;    // over examples with an answer
};

// Normalized Shannon entropy of the given counts: -sum p ln p / ln K.
// A single class is defined as perfectly balanced, and any all-equal count
// vector returns 1.0 exactly rather than through the log formula, whose
// rounding can land a hair off 1 when K is not a power of two.
inline double normalized_entropy(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (counts.empty() || total == 0) throw DataError("entropy of empty distribution");
  if (counts.size() == 1) return 1.0;
  if (std::all_of(counts.begin(), counts.end(),
                  [&](std::size_t c) { return c == counts.front(); }))
    return 1.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = double(c) / double(total);
    h -= p * std::log(p);
  }
  return h / std::log(double(counts.size()));
}

inline DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats s;
  s.n_examples = dataset.size();
  double qlen = 0.0, alen = 0.0;
  std::size_t answered = 0;
  for (const auto& e : dataset.examples()) {
    if (!e.intent) throw DataError("dataset_stats requires every example labeled; \"" +
                                   e.id + "\" has no intent");
    ++s.per_intent[*e.intent];
    qlen += double(utf8_length(e.question));
    if (e.answer) {
      alen += double(utf8_length(*e.answer));
      ++answered;
    }
  }
  s.n_intents = s.per_intent.size();
  std::vector<std::size_t> counts;
  for (const auto& [intent, c] : s.per_intent) counts.push_back(c);
  s.min_per_intent = *std::min_element(counts.begin(), counts.end());
  s.max_per_intent = *std::max_element(counts.begin(), counts.end());
  s.mean_per_intent = double(s.n_examples) / double(s.n_intents);
  s.normalized_entropy = normalized_entropy(counts);
  s.mean_question_length = qlen / double(s.n_examples);
  s.mean_answer_length = answered ? alen / double(answered) : 0.0;
  return s;
}

}  // namespace convlab
