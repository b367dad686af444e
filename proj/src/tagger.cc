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

#include "mmx/tagger.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "mmx/binary_io.h"
#include "mmx/crf.h"
#include "mmx/error.h"
#include "mmx/log.h"

namespace mmx::tagger {

using nlohmann::json;
using nn::Var;

void TaggerConfig::validate() const {
  if (layers < 0) throw Error("layers must be >= 0");
  if (heads <= 0 || hidden <= 0 || ff_dim <= 0) throw Error("heads, hidden and ff_dim must be positive");
  if (hidden % heads != 0) throw Error("hidden must be divisible by heads");
  if (!(lr >= 0)) throw Error("lr must be >= 0");
  if (batch_size <= 0 || early_stop_patience <= 0 || max_epochs <= 0)
    throw Error("batch_size, early_stop_patience and max_epochs must be positive");
  if (max_length == 0) throw Error("max_length must be positive");
}

json TaggerConfig::to_json() const {
  return {{"layers", layers},         {"heads", heads},
          {"hidden", hidden},         {"ff_dim", ff_dim},
          {"lr", lr},                 {"batch_size", batch_size},
          {"early_stop_patience", early_stop_patience},
          {"max_epochs", max_epochs}, {"seed", seed},
          {"max_length", max_length}, {"clip_norm", clip_norm},
          {"ln_eps", ln_eps}};
}

TaggerConfig TaggerConfig::from_json(const json& j) {
  TaggerConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  c.max_length = j.value("max_length", c.max_length);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  return c;
}

std::vector<double> sinusoidal_positions(std::size_t n, std::size_t hidden) {
  std::vector<double> pe(n * hidden);
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t i = 0; i < hidden; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(hidden));
      const double angle = static_cast<double>(pos) * rate;
      pe[pos * hidden + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

// --- encoder -------------------------------------------------------------------

Encoder::Linear Encoder::linear(nn::ParameterStore& store, const std::string& name, int in, int out,
                                std::uint64_t seed) {
  const nn::Shape ws{static_cast<std::size_t>(in), static_cast<std::size_t>(out)};
  nn::Parameter* w = store.find(name + ".weight");
  if (!w) {
    w = &store.add(name + ".weight", ws);
    nn::init_uniform(*w, 1.0 / std::sqrt(double(in)), meta::derive_seed(seed, name + ".weight"));
  }
  nn::Parameter* b = store.find(name + ".bias");
  if (!b) b = &store.add(name + ".bias", {1, static_cast<std::size_t>(out)});
  if (!(w->shape == ws)) throw ShapeError(name + ": stored weight has shape " + nn::to_string(w->shape));
  return {w, b};
}

Encoder::Norm Encoder::norm(nn::ParameterStore& store, const std::string& name, int dim) {
  nn::Parameter* gain = store.find(name + ".gain");
  if (!gain) {
    gain = &store.add(name + ".gain", {1, static_cast<std::size_t>(dim)});
    std::fill(gain->value.begin(), gain->value.end(), 1.0);
  }
  nn::Parameter* bias = store.find(name + ".bias");
  if (!bias) bias = &store.add(name + ".bias", {1, static_cast<std::size_t>(dim)});
  return {gain, bias};
}

Encoder::Encoder(const TaggerConfig& config, int d_in, nn::ParameterStore& store, std::uint64_t seed)
    : config_(config), d_in_(d_in) {
  config_.validate();
  if (d_in <= 0) throw Error("encoder input dim must be positive");
  const int h = config_.hidden;
  input_ = linear(store, "encoder.input", d_in, h, seed);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    Block b;
    b.ln1 = norm(store, p + ".ln1", h);
    b.q = linear(store, p + ".attn.q", h, h, seed);
    b.k = linear(store, p + ".attn.k", h, h, seed);
    b.v = linear(store, p + ".attn.v", h, h, seed);
    b.out = linear(store, p + ".attn.out", h, h, seed);
    b.ln2 = norm(store, p + ".ln2", h);
    b.ff1 = linear(store, p + ".ff1", h, config_.ff_dim, seed);
    b.ff2 = linear(store, p + ".ff2", config_.ff_dim, h, seed);
    blocks_.push_back(b);
  }
  final_ = norm(store, "encoder.final", h);
}

Var Encoder::apply(nn::Graph& g, const Linear& l, const Var& x) const {
  return nn::add(nn::matmul(x, g.param(*l.weight)), g.param(*l.bias));
}

Var Encoder::apply(nn::Graph& g, const Norm& n, const Var& x) const {
  return nn::layer_norm(x, g.param(*n.gain), g.param(*n.bias), config_.ln_eps);
}

Var Encoder::forward(nn::Graph& g, const Var& x, const std::vector<bool>* valid) const {
  const std::size_t n = x.rows();
  if (n == 0) throw Error("encode: empty sequence");
  if (n > config_.max_length)
    throw Error("sequence length " + std::to_string(n) + " exceeds max length " +
                std::to_string(config_.max_length));
  if (x.cols() != static_cast<std::size_t>(d_in_))
    throw ShapeError("encoder expects " + std::to_string(d_in_) + " input dims, got " + nn::to_string(x.shape()));
  const auto hidden = static_cast<std::size_t>(config_.hidden);
  nn::ScopeGuard enc(g, "encoder");

  Var h;
  {
    nn::ScopeGuard s(g, "input");
    h = nn::add(apply(g, input_, x), g.constant({n, hidden}, sinusoidal_positions(n, hidden)));
  }

  Var mask;
  if (valid) {
    if (valid->size() != n) throw ShapeError("mask length differs from sequence length");
    std::vector<double> m(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        if (!(*valid)[c]) m[r * n + c] = -1e9;
    mask = g.constant({n, n}, std::move(m));
  }

  const std::size_t heads = static_cast<std::size_t>(config_.heads), dh = hidden / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    nn::ScopeGuard layer(g, "layer" + std::to_string(l));
    {
      nn::ScopeGuard s(g, "attn");
      Var a = apply(g, b.ln1, h);
      Var q = apply(g, b.q, a), k = apply(g, b.k, a), v = apply(g, b.v, a);
      std::vector<Var> ctx;
      for (std::size_t hd = 0; hd < heads; ++hd) {
        Var qs = nn::slice(q, 1, hd * dh, (hd + 1) * dh);
        Var ks = nn::slice(k, 1, hd * dh, (hd + 1) * dh);
        Var vs = nn::slice(v, 1, hd * dh, (hd + 1) * dh);
        ctx.push_back(nn::scaled_dot_attention(qs, ks, vs, valid ? &mask : nullptr, scale));
      }
      h = nn::add(h, apply(g, b.out, nn::concat(ctx, 1)));
    }
    {
      nn::ScopeGuard s(g, "ff");
      Var f = apply(g, b.ff2, nn::gelu(apply(g, b.ff1, apply(g, b.ln2, h))));
      h = nn::add(h, f);
    }
  }
  nn::ScopeGuard s(g, "final");
  return apply(g, final_, h);
}

// --- model ---------------------------------------------------------------------

TaggerModel::TaggerModel(const TaggerConfig& config, const meta::EmbedderSpec& spec,
                         std::vector<std::string> labels, corpus::Scheme scheme,
                         const std::vector<std::string>& training_tokens)
    : config_(config), labels_(std::move(labels)), scheme_(scheme) {
  config_.validate();
  if (labels_.empty()) throw Error("model needs at least one label");
  embedder_ = meta::build_embedder(spec, training_tokens, config_.hidden, store_, config_.seed);
  build_head();
}

void TaggerModel::build_head() {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (!label_index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw Error("duplicate label '" + labels_[i] + "'");
  encoder_ = std::make_unique<Encoder>(config_, embedder_->output_dim(), store_, config_.seed);
  const std::size_t L = labels_.size(), h = static_cast<std::size_t>(config_.hidden);
  emit_ = store_.find("crf.emission");
  if (!emit_) {
    emit_ = &store_.add("crf.emission", {h, L});
    nn::init_uniform(*emit_, 1.0 / std::sqrt(double(h)), meta::derive_seed(config_.seed, "crf.emission"));
  }
  trans_ = store_.find("crf.transitions");
  if (!trans_) {
    trans_ = &store_.add("crf.transitions", {L + 2, L + 2});
    trans_->value = crf::initial_transitions(L);
  }
  if (!(emit_->shape == nn::Shape{h, L}) || !(trans_->shape == nn::Shape{L + 2, L + 2}))
    throw ShapeError("crf parameters do not match the label set");
}

std::unique_ptr<TaggerModel> TaggerModel::restore(const TaggerConfig& config, const json& description,
                                                  std::vector<std::string> labels, corpus::Scheme scheme,
                                                  nn::ParameterStore params,
                                                  const std::unordered_map<std::string, meta::TablePtr>& tables) {
  std::unique_ptr<TaggerModel> m(new TaggerModel());
  m->config_ = config;
  m->config_.validate();
  m->labels_ = std::move(labels);
  m->scheme_ = scheme;
  m->store_ = std::move(params);
  const std::size_t before = m->store_.size();
  m->embedder_ = meta::restore_embedder(description, tables, m->store_);
  m->build_head();
  if (m->store_.size() != before) throw Error("model file is missing parameters");
  return m;
}

meta::Prepared TaggerModel::prepare(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw Error("empty sentence");
  return embedder_->prepare(tokens);
}

Var TaggerModel::emissions(nn::Graph& g, const meta::Prepared& p, const std::vector<bool>* valid,
                           meta::AttentionTrace* trace) const {
  Var x = embedder_->forward(g, p, trace);
  Var h = encoder_->forward(g, x, valid);
  nn::ScopeGuard s(g, "crf");
  if (embedder_->subword_positions()) h = nn::embedding_gather(h, p.word_starts);
  return nn::matmul(h, g.param(*emit_));
}

Var TaggerModel::loss(nn::Graph& g, const meta::Prepared& p, const std::vector<int>& gold) const {
  Var e = emissions(g, p);
  nn::ScopeGuard s(g, "crf");
  return crf::nll(e, g.param(*trans_), gold);
}

std::vector<int> TaggerModel::decode(const meta::Prepared& p) const {
  nn::Graph g(nn::GraphOptions{.record = false, .retain = false});
  Var e = emissions(g, p);
  return crf::viterbi(e.data(), trans_->value, labels_.size());
}

std::vector<std::string> TaggerModel::predict(const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  for (int id : decode(prepare(tokens))) out.push_back(labels_[id]);
  return out;
}

corpus::LabelSequences TaggerModel::predict(const corpus::LabelSequences& sentences) const {
  corpus::LabelSequences out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(predict(s));
  return out;
}

int TaggerModel::label_index(const std::string& label) const {
  auto it = label_index_.find(label);
  if (it == label_index_.end()) throw Error("label '" + label + "' is not in the model's label set");
  return it->second;
}

std::vector<double> TaggerModel::transitions() const { return trans_->value; }

ParamCounts TaggerModel::count_params() const {
  ParamCounts c;
  for (std::size_t i = 0; i < store_.size(); ++i) {
    const nn::Parameter& p = store_[i];
    std::string group = p.name;
    const auto first = group.find('.');
    const auto second = first == std::string::npos ? first : group.find('.', first + 1);
    if (second != std::string::npos) group.resize(second);
    c.groups[group] += p.size();
    (p.frozen ? c.frozen : c.trainable) += p.size();
  }
  for (const auto& [name, table] : embedder_->tables()) {
    c.groups["table." + name] += table->parameter_count();
    c.frozen += table->parameter_count();
  }
  c.total = c.trainable + c.frozen;
  c.bytes_32bit = 4 * c.total;
  return c;
}

// --- training ------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> tokens_of(const corpus::LabeledDataset& d) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : d.sentences()) out.push_back(s.tokens);
  return out;
}

}  // namespace

TrainHistory train(TaggerModel& model, const corpus::LabeledDataset& train_set,
                   const corpus::LabeledDataset& dev_set, const TrainOptions& options) {
  if (train_set.sentences().empty()) throw Error("empty training set");
  const TaggerConfig& cfg = model.config();

  std::vector<meta::Prepared> prepared;
  std::vector<std::vector<int>> gold;
  for (const auto& s : train_set.sentences()) {
    prepared.push_back(model.prepare(s.tokens));
    std::vector<int> ids;
    for (const auto& l : s.labels) ids.push_back(model.label_index(l));
    gold.push_back(std::move(ids));
  }
  const auto dev_tokens = tokens_of(dev_set);

  std::vector<nn::Parameter*> params = model.parameters().trainable();
  auto snapshot = [&] {
    std::vector<std::vector<double>> snap;
    for (auto* p : params) snap.push_back(p->value);
    return snap;
  };

  CounterRng rng = CounterRng(cfg.seed).split(0x7261696e);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  std::vector<std::vector<double>> best = snapshot();
  history.best_dev_metric = -1;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      model.parameters().zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        nn::Graph g;
        Var l = model.loss(g, prepared[order[b]], gold[order[b]]);
        loss_sum += l.item();
        g.backward(nn::scale(l, inv));
      }
      if (nn::clip_grad_norm(params, cfg.clip_norm) > cfg.clip_norm) ++rec.clipped_batches;
      nn::sgd_step(params, cfg.lr);
    }
    rec.mean_loss = loss_sum / static_cast<double>(order.size());
    rec.dev_metric = corpus::dev_metric(dev_set, model.predict(dev_tokens));
    history.epochs.push_back(rec);
    MMX_LOG(kInfo, "epoch " << epoch << " loss " << rec.mean_loss << " dev " << rec.dev_metric
                            << (rec.clipped_batches ? " (clipped " + std::to_string(rec.clipped_batches) + ")" : ""));

    // Ties keep the earlier epoch.
    if (rec.dev_metric > history.best_dev_metric) {
      history.best_dev_metric = rec.dev_metric;
      history.best_epoch = epoch;
      best = snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
    if (options.on_epoch && !options.on_epoch(rec)) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  model.parameters().zero_grad();
  model.set_history(history);
  return history;
}

std::uint64_t parameter_hash(const TaggerModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto& store = model.parameters();
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double v : store[i].value) {
      unsigned char bytes[8];
      std::memcpy(bytes, &v, 8);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  return h;
}

// --- serialization -----------------------------------------------------------------

namespace {

json history_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_loss", e.mean_loss},
                      {"dev_metric", e.dev_metric},
                      {"clipped_batches", e.clipped_batches}});
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"best_dev_metric", h.best_dev_metric}};
}

TrainHistory history_from(const json& j) {
  TrainHistory h;
  if (j.is_null()) return h;
  for (const auto& e : j.at("epochs"))
    h.epochs.push_back({e.at("epoch").get<int>(), e.at("mean_loss").get<double>(),
                        e.at("dev_metric").get<double>(), e.at("clipped_batches").get<int>()});
  h.best_epoch = j.at("best_epoch").get<int>();
  h.best_dev_metric = j.at("best_dev_metric").get<double>();
  return h;
}

}  // namespace

void save_model(const TaggerModel& model, std::ostream& out) {
  json manifest = json::array();
  const auto& store = model.parameters();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    manifest.push_back({{"name", p.name},
                        {"shape", {p.shape.rows, p.shape.cols}},
                        {"frozen", p.frozen},
                        {"seed", p.seed}});
  }
  json tables = json::array();
  const auto model_tables = model.embedder().tables();
  for (const auto& [name, t] : model_tables) {
    tables.push_back({{"name", name},
                      {"dim", t->dim()},
                      {"vocab", t->words()},
                      {"buckets", t->bucket_count()},
                      {"min_n", t->min_n()},
                      {"max_n", t->max_n()}});
    manifest.push_back({{"name", "table." + name + ".matrix"},
                        {"shape", {t->size(), static_cast<std::size_t>(t->dim())}},
                        {"frozen", true},
                        {"seed", 0}});
    if (t->has_buckets())
      manifest.push_back({{"name", "table." + name + ".buckets"},
                          {"shape", {t->bucket_count(), static_cast<std::size_t>(t->dim())}},
                          {"frozen", true},
                          {"seed", 0}});
  }
  json header = {{"format", "MMX1"},
                 {"version", 1},
                 {"config", model.config().to_json()},
                 {"labels", model.labels()},
                 {"scheme", corpus::scheme_name(model.scheme())},
                 {"embedder", model.embedder_description()},
                 {"tables", tables},
                 {"manifest", manifest},
                 {"history", history_json(model.history())}};
  const std::string text = header.dump();
  binio::write_magic(out, "MMX1");
  binio::write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double v : store[i].value) binio::write_f32(out, static_cast<float>(v));
  for (const auto& [name, t] : model_tables) {
    for (double v : t->matrix()) binio::write_f32(out, static_cast<float>(v));
    for (double v : t->buckets()) binio::write_f32(out, static_cast<float>(v));
  }
  if (!out) throw Error("failed writing model");
}

std::unique_ptr<TaggerModel> load_model(std::istream& in) {
  binio::expect_magic(in, "MMX1");
  const std::uint32_t len = binio::read_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw Error("truncated model header");
  const json header = json::parse(text);

  auto read_blob = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = binio::read_f32(in);
    return v;
  };

  nn::ParameterStore store;
  std::unordered_map<std::string, std::vector<double>> table_blobs;
  for (const auto& m : header.at("manifest")) {
    const std::string name = m.at("name").get<std::string>();
    const nn::Shape shape{m.at("shape")[0].get<std::size_t>(), m.at("shape")[1].get<std::size_t>()};
    if (name.rfind("table.", 0) == 0) {
      table_blobs[name] = read_blob(shape.size());
      continue;
    }
    nn::Parameter& p = store.add(name, shape, m.at("frozen").get<bool>(), m.at("seed").get<std::uint64_t>());
    p.value = read_blob(shape.size());
  }

  std::unordered_map<std::string, meta::TablePtr> tables;
  for (const auto& t : header.at("tables")) {
    const std::string name = t.at("name").get<std::string>();
    auto table = std::make_shared<embeddings::EmbeddingTable>(
        t.at("dim").get<int>(), t.at("vocab").get<std::vector<std::string>>(),
        std::move(table_blobs.at("table." + name + ".matrix")));
    if (t.at("buckets").get<std::size_t>() > 0)
      table->set_buckets(std::move(table_blobs.at("table." + name + ".buckets")), t.at("min_n").get<int>(),
                         t.at("max_n").get<int>());
    tables[name] = std::move(table);
  }

  const std::string scheme = header.at("scheme").get<std::string>();
  auto model = TaggerModel::restore(TaggerConfig::from_json(header.at("config")), header.at("embedder"),
                                    header.at("labels").get<std::vector<std::string>>(),
                                    scheme == "pos" ? corpus::Scheme::kPos : corpus::Scheme::kBioNer,
                                    std::move(store), tables);
  model->set_history(history_from(header.value("history", json())));
  return model;
}

void save_model(const TaggerModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_model(model, out);
}

std::unique_ptr<TaggerModel> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_model(in);
}

}  // namespace mmx::tagger
