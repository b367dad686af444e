// Copyright 2026 The MMX Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmx/meta.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mmx/corpus.h"
#include "mmx/error.h"
#include "mmx/utf8.h"

namespace mmx::meta {

using nlohmann::json;
using nn::Var;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kConcat: return "concat";
    case Mode::kLinear: return "linear";
    case Mode::kAttention: return "attention";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "concat") return Mode::kConcat;
  if (name == "linear") return Mode::kLinear;
  if (name == "attention") return Mode::kAttention;
  throw Error("unknown combination mode '" + std::string(name) + "'");
}

Var combine_concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("combine_concat: no sources");
  if (xs.size() == 1) return xs[0];
  return nn::concat(xs, 1);
}

namespace {

std::vector<Var> project(const std::vector<Var>& xs, const std::vector<Var>& projections) {
  if (xs.empty()) throw ShapeError("no sources");
  if (xs.size() != projections.size())
    throw ShapeError("got " + std::to_string(xs.size()) + " sources but " +
                     std::to_string(projections.size()) + " projections");
  std::vector<Var> out;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (projections[j].cols() != projections[0].cols())
      throw ShapeError("projection " + std::to_string(j) + " maps to " +
                       std::to_string(projections[j].cols()) + " dims, expected " +
                       std::to_string(projections[0].cols()));
    out.push_back(nn::matmul(xs[j], projections[j]));
  }
  return out;
}

Var add_all(const std::vector<Var>& terms) {
  Var acc = terms[0];
  for (std::size_t j = 1; j < terms.size(); ++j) acc = nn::add(acc, terms[j]);
  return acc;
}

}  // namespace

Var combine_linear(const std::vector<Var>& xs, const std::vector<Var>& projections) {
  return add_all(project(xs, projections));
}

Var combine_attention(const std::vector<Var>& xs, const std::vector<Var>& projections,
                      AttentionTrace* trace, const Var* scalar_scorer) {
  std::vector<Var> projected = project(xs, projections);
  const std::size_t n = projected.size();
  std::vector<Var> alphas;
  if (scalar_scorer) {
    std::vector<Var> scores;
    for (const auto& x : projected) scores.push_back(nn::matmul(nn::tanh(x), *scalar_scorer));
    Var weights = nn::softmax(n == 1 ? scores[0] : nn::concat(scores, 1), 1);
    for (std::size_t j = 0; j < n; ++j) alphas.push_back(n == 1 ? weights : nn::slice(weights, 1, j, j + 1));
  } else {
    std::vector<Var> e;
    for (const auto& x : projected) e.push_back(nn::exp(nn::tanh(x)));
    Var z = add_all(e);
    for (const auto& ej : e) alphas.push_back(nn::div(ej, z));
  }
  std::vector<Var> weighted;
  for (std::size_t j = 0; j < n; ++j) weighted.push_back(nn::mul(projected[j], alphas[j]));
  if (trace) {
    trace->tokens = projected[0].rows();
    trace->dim = alphas[0].cols();
    trace->weights.clear();
    for (const auto& a : alphas) trace->weights.emplace_back(a.data().begin(), a.data().end());
  }
  return add_all(weighted);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
  return CounterRng(base).split(embeddings::fnv1a64(name)).next_u64();
}

namespace {

nn::Parameter& bind_or_create(nn::ParameterStore& store, const std::string& name, nn::Shape shape,
                              double bound, std::uint64_t base_seed) {
  if (nn::Parameter* p = store.find(name)) {
    if (!(p->shape == shape))
      throw ShapeError("parameter '" + name + "' has shape " + nn::to_string(p->shape) +
                       ", expected " + nn::to_string(shape));
    return *p;
  }
  nn::Parameter& p = store.add(name, shape);
  nn::init_uniform(p, bound, derive_seed(base_seed, name));
  return p;
}

Var table_constant(nn::Graph& g, const embeddings::EmbeddingTable& t,
                   const std::vector<std::string>& tokens) {
  const std::size_t d = t.dim();
  std::vector<double> data(tokens.size() * d);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    t.lookup(tokens[i], std::span<double>(data.data() + i * d, d));
  return g.constant({tokens.size(), d}, std::move(data));
}

}  // namespace

MetaEmbedder::MetaEmbedder(std::string name, std::vector<TablePtr> sources, Mode mode, int d_prime,
                           bool scalar_attention, nn::ParameterStore& store, std::uint64_t seed)
    : name_(std::move(name)), sources_(std::move(sources)), mode_(mode), d_prime_(d_prime) {
  if (sources_.empty()) throw Error(name_ + ": needs at least one source");
  if (mode_ == Mode::kConcat) {
    d_prime_ = 0;
    return;
  }
  if (d_prime_ <= 0) throw Error(name_ + ": projected dim must be positive");
  for (std::size_t j = 0; j < sources_.size(); ++j) {
    const int dj = sources_[j]->dim();
    projections_.push_back(&bind_or_create(store, name_ + ".proj." + std::to_string(j),
                                           {static_cast<std::size_t>(dj), static_cast<std::size_t>(d_prime_)},
                                           1.0 / std::sqrt(double(dj)), seed));
  }
  if (scalar_attention && mode_ == Mode::kAttention)
    scorer_ = &bind_or_create(store, name_ + ".scorer", {static_cast<std::size_t>(d_prime_), 1},
                              1.0 / std::sqrt(double(d_prime_)), seed);
}

int MetaEmbedder::output_dim() const {
  if (mode_ != Mode::kConcat) return d_prime_;
  int d = 0;
  for (const auto& s : sources_) d += s->dim();
  return d;
}

std::vector<Var> MetaEmbedder::lookup(nn::Graph& g, const std::vector<std::string>& tokens) const {
  std::vector<Var> xs;
  for (const auto& t : sources_) xs.push_back(table_constant(g, *t, tokens));
  return xs;
}

Var MetaEmbedder::combine(nn::Graph& g, const std::vector<Var>& xs, AttentionTrace* trace) const {
  if (mode_ == Mode::kConcat) return combine_concat(xs);
  std::vector<Var> ws;
  for (auto* p : projections_) ws.push_back(g.param(*p));
  if (mode_ == Mode::kLinear) return combine_linear(xs, ws);
  if (scorer_) {
    Var s = g.param(*scorer_);
    return combine_attention(xs, ws, trace, &s);
  }
  return combine_attention(xs, ws, trace);
}

Var MetaEmbedder::embed(nn::Graph& g, const std::vector<std::string>& tokens, AttentionTrace* trace) const {
  return combine(g, lookup(g, tokens), trace);
}

CharEncoder::CharEncoder(std::string name, std::vector<std::string> alphabet, int char_dim, int width,
                         int out_dim, nn::ParameterStore& store, std::uint64_t seed)
    : name_(std::move(name)), alphabet_(std::move(alphabet)), char_dim_(char_dim), width_(width),
      out_dim_(out_dim) {
  if (char_dim_ <= 0 || width_ <= 0 || out_dim_ <= 0) throw Error(name_ + ": dims must be positive");
  for (std::size_t i = 0; i < alphabet_.size(); ++i) index_.emplace(alphabet_[i], i + 1);
  const auto cd = static_cast<std::size_t>(char_dim_), od = static_cast<std::size_t>(out_dim_);
  emb_ = &bind_or_create(store, name_ + ".emb", {alphabet_.size() + 1, cd}, 1.0 / std::sqrt(double(cd)), seed);
  const std::size_t fan_in = static_cast<std::size_t>(width_) * cd;
  conv_w_ = &bind_or_create(store, name_ + ".conv.weight", {fan_in, od}, 1.0 / std::sqrt(double(fan_in)), seed);
  conv_b_ = store.find(name_ + ".conv.bias");
  if (!conv_b_) conv_b_ = &store.add(name_ + ".conv.bias", {1, od});
}

std::vector<std::size_t> CharEncoder::char_ids(std::string_view token) const {
  std::vector<std::size_t> ids;
  for (const auto& c : utf8::split_chars(token)) {
    auto it = index_.find(c);
    ids.push_back(it == index_.end() ? 0 : it->second);
  }
  return ids;
}

Var CharEncoder::encode(nn::Graph& g, const std::vector<std::size_t>& ids) const {
  if (ids.empty()) throw Error("encode_chars: empty token");
  Var chars = nn::embedding_gather(g.param(*emb_), ids);
  Var windows = nn::unfold_rows(chars, width_, (width_ - 1) / 2);
  Var conv = nn::add(nn::matmul(windows, g.param(*conv_w_)), g.param(*conv_b_));
  return nn::reduce_max(conv, 0);
}

namespace {

std::vector<std::string> normalize_all(const std::vector<std::string>& tokens, bool normalize) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.empty()) throw Error("empty token");
    out.push_back(normalize ? corpus::normalize_token(t) : t);
  }
  return out;
}

json table_names(const std::string& prefix, std::size_t n) {
  json names = json::array();
  for (std::size_t j = 0; j < n; ++j) names.push_back(prefix + "." + std::to_string(j));
  return names;
}

std::vector<TablePtr> resolve_tables(const json& names,
                                     const std::unordered_map<std::string, TablePtr>& tables) {
  std::vector<TablePtr> out;
  for (const auto& n : names) {
    auto it = tables.find(n.get<std::string>());
    if (it == tables.end()) throw Error("model file lacks table '" + n.get<std::string>() + "'");
    out.push_back(it->second);
  }
  return out;
}

int max_dim(const std::vector<TablePtr>& tables) {
  int d = 0;
  for (const auto& t : tables) d = std::max(d, t->dim());
  return d;
}

// word-single and the three word-level MME variants.
class MmeEmbedder final : public Embedder {
 public:
  MmeEmbedder(std::string kind, std::vector<TablePtr> tables, Mode mode, int d_prime, bool scalar,
              bool normalize, nn::ParameterStore& store, std::uint64_t seed)
      : kind_(std::move(kind)),
        normalize_(normalize),
        word_("embedder.word", std::move(tables), mode, d_prime, scalar, store, seed) {}

  std::string kind() const override { return kind_; }
  int output_dim() const override { return word_.output_dim(); }

  Prepared prepare(const std::vector<std::string>& tokens) const override {
    Prepared p;
    p.tokens = normalize_all(tokens, normalize_);
    return p;
  }

  Var forward(nn::Graph& g, const Prepared& p, AttentionTrace* trace) const override {
    nn::ScopeGuard scope(g, "embed");
    return word_.embed(g, p.tokens, trace);
  }

  std::vector<std::pair<std::string, TablePtr>> tables() const override {
    std::vector<std::pair<std::string, TablePtr>> out;
    for (std::size_t j = 0; j < word_.sources().size(); ++j)
      out.emplace_back("word." + std::to_string(j), word_.sources()[j]);
    return out;
  }

  json describe() const override {
    return {{"kind", kind_},
            {"normalize", normalize_},
            {"mode", mode_name(word_.mode())},
            {"d_prime", word_.d_prime()},
            {"scalar_attention", word_.scalar_attention()},
            {"tables", table_names("word", word_.sources().size())}};
  }

 private:
  std::string kind_;
  bool normalize_;
  MetaEmbedder word_;
};

class HmeEmbedder final : public Embedder {
 public:
  HmeEmbedder(std::vector<TablePtr> word_tables, Mode word_mode, int word_dp,
              std::vector<TablePtr> subword_tables, int subword_dp, bool scalar,
              std::shared_ptr<const embeddings::SubwordVocab> vocab, std::vector<std::string> alphabet,
              int char_dim, int char_width, int char_out, bool normalize, nn::ParameterStore& store,
              std::uint64_t seed)
      : normalize_(normalize),
        word_("embedder.word", std::move(word_tables), word_mode, word_dp, scalar, store, seed),
        subword_("embedder.subword", std::move(subword_tables), Mode::kAttention, subword_dp, scalar,
                 store, seed),
        vocab_(std::move(vocab)),
        chars_("embedder.char", std::move(alphabet), char_dim, char_width, char_out, store, seed) {
    if (!vocab_) throw Error("hme needs a subword vocabulary");
  }

  std::string kind() const override { return "hme"; }
  int output_dim() const override {
    return word_.output_dim() + subword_.output_dim() + chars_.out_dim();
  }

  Prepared prepare(const std::vector<std::string>& tokens) const override {
    Prepared p;
    p.tokens = normalize_all(tokens, normalize_);
    for (const auto& t : p.tokens) {
      p.subwords.push_back(vocab_->segment(t));
      p.chars.push_back(chars_.char_ids(t));
    }
    return p;
  }

  Var forward(nn::Graph& g, const Prepared& p, AttentionTrace* trace) const override {
    nn::ScopeGuard scope(g, "embed");
    Var word;
    {
      nn::ScopeGuard s(g, "word");
      word = word_.embed(g, p.tokens, trace);
    }
    Var sub;
    {
      nn::ScopeGuard s(g, "subword");
      std::vector<std::string> units;
      for (const auto& seg : p.subwords) units.insert(units.end(), seg.begin(), seg.end());
      Var unit_vecs = subword_.embed(g, units);
      std::vector<double> pool(p.words() * units.size(), 0.0);
      std::size_t col = 0;
      for (std::size_t i = 0; i < p.words(); ++i) {
        const double w = 1.0 / double(p.subwords[i].size());
        for (std::size_t k = 0; k < p.subwords[i].size(); ++k) pool[i * units.size() + col++] = w;
      }
      sub = nn::matmul(g.constant({p.words(), units.size()}, std::move(pool)), unit_vecs);
    }
    Var chars;
    {
      nn::ScopeGuard s(g, "char");
      std::vector<Var> rows;
      for (const auto& ids : p.chars) rows.push_back(chars_.encode(g, ids));
      chars = rows.size() == 1 ? rows[0] : nn::concat(rows, 0);
    }
    return nn::concat({word, sub, chars}, 1);
  }

  std::vector<std::pair<std::string, TablePtr>> tables() const override {
    std::vector<std::pair<std::string, TablePtr>> out;
    for (std::size_t j = 0; j < word_.sources().size(); ++j)
      out.emplace_back("word." + std::to_string(j), word_.sources()[j]);
    for (std::size_t j = 0; j < subword_.sources().size(); ++j)
      out.emplace_back("subword." + std::to_string(j), subword_.sources()[j]);
    return out;
  }

  json describe() const override {
    return {{"kind", "hme"},
            {"normalize", normalize_},
            {"word", {{"mode", mode_name(word_.mode())},
                      {"d_prime", word_.d_prime()},
                      {"tables", table_names("word", word_.sources().size())}}},
            {"subword", {{"d_prime", subword_.d_prime()},
                         {"tables", table_names("subword", subword_.sources().size())}}},
            {"scalar_attention", word_.scalar_attention()},
            {"subword_units", vocab_->sorted_units()},
            {"char", {{"alphabet", chars_.alphabet()},
                      {"dim", chars_.char_dim()},
                      {"width", chars_.width()},
                      {"out_dim", chars_.out_dim()}}}};
  }

 private:
  bool normalize_;
  MetaEmbedder word_;
  MetaEmbedder subword_;
  std::shared_ptr<const embeddings::SubwordVocab> vocab_;
  CharEncoder chars_;
};

// Randomly initialized, trainable subword-unit embeddings; the encoder runs
// over units and each word is read at its first unit.
class ScratchEmbedder final : public Embedder {
 public:
  ScratchEmbedder(std::vector<std::string> units, int dim, bool normalize, nn::ParameterStore& store,
                  std::uint64_t seed)
      : units_(std::move(units)), vocab_(units_), normalize_(normalize) {
    for (std::size_t i = 0; i < units_.size(); ++i) index_.emplace(units_[i], i + 1);
    if (dim <= 0) throw Error("scratch embedding dim must be positive");
    table_ = &bind_or_create(store, "embedder.units", {units_.size() + 1, static_cast<std::size_t>(dim)},
                             1.0 / std::sqrt(double(dim)), seed);
  }

  std::string kind() const override { return "scratch"; }
  int output_dim() const override { return static_cast<int>(table_->shape.cols); }
  bool subword_positions() const override { return true; }

  Prepared prepare(const std::vector<std::string>& tokens) const override {
    Prepared p;
    p.tokens = normalize_all(tokens, normalize_);
    for (const auto& t : p.tokens) {
      p.word_starts.push_back(p.units.size());
      for (const auto& u : vocab_.segment(t)) {
        auto it = index_.find(u);
        p.units.push_back(it == index_.end() ? 0 : it->second);
      }
    }
    return p;
  }

  Var forward(nn::Graph& g, const Prepared& p, AttentionTrace*) const override {
    nn::ScopeGuard scope(g, "embed");
    return nn::embedding_gather(g.param(*table_), p.units);
  }

  std::vector<std::pair<std::string, TablePtr>> tables() const override { return {}; }

  json describe() const override {
    return {{"kind", "scratch"}, {"normalize", normalize_}, {"dim", output_dim()}, {"units", units_}};
  }

 private:
  std::vector<std::string> units_;
  embeddings::SubwordVocab vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  bool normalize_;
  nn::Parameter* table_;
};

std::vector<std::string> char_alphabet(const std::vector<std::string>& tokens, bool normalize) {
  std::set<std::string> chars;
  for (const auto& t : tokens)
    for (auto& c : utf8::split_chars(normalize ? corpus::normalize_token(t) : t)) chars.insert(std::move(c));
  return {chars.begin(), chars.end()};
}

// Characters and character bigrams seen in training.
std::vector<std::string> scratch_units(const std::vector<std::string>& tokens) {
  std::set<std::string> units;
  for (const auto& t : tokens) {
    auto chars = utf8::split_chars(t);
    for (std::size_t i = 0; i < chars.size(); ++i) {
      units.insert(chars[i]);
      if (i + 1 < chars.size()) units.insert(chars[i] + chars[i + 1]);
    }
  }
  return {units.begin(), units.end()};
}

}  // namespace

bool is_known_mode(std::string_view mode) {
  return mode == "word-single" || mode == "mme-concat" || mode == "mme-linear" ||
         mode == "mme-attention" || mode == "hme" || mode == "scratch";
}

std::unique_ptr<Embedder> build_embedder(const EmbedderSpec& spec,
                                         const std::vector<std::string>& training_tokens, int hidden,
                                         nn::ParameterStore& store, std::uint64_t seed) {
  const std::string& m = spec.mode;
  if (!is_known_mode(m)) throw Error("unknown embedder mode '" + m + "'");
  if (m == "scratch") {
    std::vector<std::string> units =
        spec.subword_vocab ? spec.subword_vocab->sorted_units() : scratch_units(training_tokens);
    return std::make_unique<ScratchEmbedder>(std::move(units), spec.scratch_dim > 0 ? spec.scratch_dim : hidden,
                                             false, store, seed);
  }
  if (spec.word_tables.empty()) throw Error(m + " needs at least one word table");
  const int dp = spec.d_prime > 0 ? spec.d_prime : max_dim(spec.word_tables);
  if (m == "word-single") {
    if (spec.word_tables.size() != 1) throw Error("word-single takes exactly one table");
    return std::make_unique<MmeEmbedder>(m, spec.word_tables, Mode::kConcat, 0, false, spec.normalize,
                                         store, seed);
  }
  if (m == "hme") {
    if (spec.subword_tables.empty()) throw Error("hme needs at least one subword table");
    const int sdp = spec.subword_d_prime > 0 ? spec.subword_d_prime : max_dim(spec.subword_tables);
    return std::make_unique<HmeEmbedder>(
        spec.word_tables, parse_mode(spec.hme_word_mode), dp, spec.subword_tables, sdp, spec.scalar_attention,
        spec.subword_vocab, char_alphabet(training_tokens, spec.normalize), spec.char_dim, spec.char_width,
        spec.char_out_dim, spec.normalize, store, seed);
  }
  const Mode mode = parse_mode(m.substr(4));
  return std::make_unique<MmeEmbedder>(m, spec.word_tables, mode, dp, spec.scalar_attention, spec.normalize,
                                       store, seed);
}

std::unique_ptr<Embedder> restore_embedder(const json& d,
                                           const std::unordered_map<std::string, TablePtr>& tables,
                                           nn::ParameterStore& store) {
  const std::string kind = d.at("kind").get<std::string>();
  const bool normalize = d.at("normalize").get<bool>();
  // Parameters already exist in the store, so the seed is never used.
  constexpr std::uint64_t kUnused = 0;
  if (kind == "scratch")
    return std::make_unique<ScratchEmbedder>(d.at("units").get<std::vector<std::string>>(),
                                             d.at("dim").get<int>(), normalize, store, kUnused);
  if (kind == "hme") {
    const json& w = d.at("word");
    const json& s = d.at("subword");
    const json& c = d.at("char");
    auto vocab = std::make_shared<embeddings::SubwordVocab>(d.at("subword_units").get<std::vector<std::string>>());
    return std::make_unique<HmeEmbedder>(
        resolve_tables(w.at("tables"), tables), parse_mode(w.at("mode").get<std::string>()),
        w.at("d_prime").get<int>(), resolve_tables(s.at("tables"), tables), s.at("d_prime").get<int>(),
        d.at("scalar_attention").get<bool>(), std::move(vocab),
        c.at("alphabet").get<std::vector<std::string>>(), c.at("dim").get<int>(), c.at("width").get<int>(),
        c.at("out_dim").get<int>(), normalize, store, kUnused);
  }
  if (!is_known_mode(kind)) throw Error("model file has unknown embedder kind '" + kind + "'");
  return std::make_unique<MmeEmbedder>(kind, resolve_tables(d.at("tables"), tables),
                                       parse_mode(d.at("mode").get<std::string>()), d.at("d_prime").get<int>(),
                                       d.at("scalar_attention").get<bool>(), normalize, store, kUnused);
}

}  // namespace mmx::meta
