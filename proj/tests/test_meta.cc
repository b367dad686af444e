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

#include <doctest.h>

#include <cmath>

#include "mmx/meta.h"
#include "mmx/rng.h"

using namespace mmx;
using namespace mmx::meta;
using mmx::nn::Graph;
using mmx::nn::Var;

namespace {

std::vector<double> vals(const Var& v) { return {v.data().begin(), v.data().end()}; }

std::vector<double> random_vec(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Plain row-vector times row-major matrix.
std::vector<double> vecmat(const std::vector<double>& x, const std::vector<double>& w, std::size_t cols) {
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) out[c] += x[i] * w[i * cols + c];
  return out;
}

TablePtr make_table(int dim, std::vector<std::string> words, std::uint64_t seed) {
  CounterRng rng(seed);
  auto m = random_vec(rng, words.size() * dim);
  return std::make_shared<embeddings::EmbeddingTable>(dim, std::move(words), std::move(m));
}

}  // namespace

TEST_CASE("concat combiner") {
  Graph g;
  const Var a = g.constant({1, 2}, {1, 2});
  const Var b = g.constant({1, 3}, {3, 4, 5});
  CHECK(vals(combine_concat({a, b})) == std::vector<double>{1, 2, 3, 4, 5});
  CHECK(vals(combine_concat({a})) == vals(a));

  CounterRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(4), rows = 1 + rng.below(3);
    std::vector<Var> xs;
    std::size_t total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = 1 + rng.below(6);
      xs.push_back(g.constant({rows, d}, random_vec(rng, rows * d)));
      total += d;
    }
    const Var out = combine_concat(xs);
    CHECK(out.cols() == total);
    std::size_t offset = 0;
    for (const auto& x : xs) {
      CHECK(vals(nn::slice(out, 1, offset, offset + x.cols())) == vals(x));
      offset += x.cols();
    }
  }
}

TEST_CASE("linear combiner") {
  Graph g;
  const Var eye = g.constant({2, 2}, {1, 0, 0, 1});
  CHECK(vals(combine_linear({g.constant({1, 2}, {1, 0}), g.constant({1, 2}, {0, 1})}, {eye, eye})) ==
        std::vector<double>{1, 1});
  CHECK(vals(combine_linear({g.constant({1, 1}, {1}), g.constant({1, 1}, {1})},
                            {g.constant({1, 1}, {2}), g.constant({1, 1}, {3})})) == std::vector<double>{5});

  CounterRng rng(4);
  std::vector<Var> xs, ws;
  std::vector<double> expect(2, 0.0);
  for (int j = 0; j < 3; ++j) {
    auto x = random_vec(rng, 4), w = random_vec(rng, 8);
    xs.push_back(g.constant({1, 4}, x));
    ws.push_back(g.constant({4, 2}, w));
    auto p = vecmat(x, w, 2);
    for (int c = 0; c < 2; ++c) expect[c] += p[c];
  }
  const auto got = vals(combine_linear(xs, ws));
  for (int c = 0; c < 2; ++c) CHECK(got[c] == doctest::Approx(expect[c]).epsilon(1e-12));

  CHECK_THROWS(combine_linear({g.constant({1, 1}, {1}), g.constant({1, 1}, {1})},
                              {g.constant({1, 2}, {1, 1}), g.constant({1, 3}, {1, 1, 1})}));
}

TEST_CASE("attention combiner") {
  Graph g;
  CounterRng rng(5);
  SUBCASE("single source reduces to the projection") {
    const Var x = g.constant({2, 3}, random_vec(rng, 6));
    const Var w = g.constant({3, 4}, random_vec(rng, 12));
    AttentionTrace trace;
    const auto u = vals(combine_attention({x}, {w}, &trace));
    for (double a : trace.weights[0]) CHECK(a == 1.0);
    const auto lin = vals(combine_linear({x}, {w}));
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == doctest::Approx(lin[i]).epsilon(1e-14));
  }
  SUBCASE("identical sources split evenly") {
    const Var x = g.constant({1, 3}, {0.3, -1, 2});
    const Var eye = g.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    AttentionTrace trace;
    const auto u = vals(combine_attention({x, x, x}, {eye, eye, eye}, &trace));
    for (const auto& w : trace.weights)
      for (double a : w) CHECK(a == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(u[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(u[1] == doctest::Approx(-1).epsilon(1e-14));
    CHECK(u[2] == doctest::Approx(2).epsilon(1e-14));
  }
  SUBCASE("two scalar sources") {
    const Var one = g.constant({1, 1}, {1});
    const auto u = combine_attention({g.constant({1, 1}, {0}), g.constant({1, 1}, {1})}, {one, one}).item();
    const double e1 = std::exp(std::tanh(0.0)), e2 = std::exp(std::tanh(1.0));
    CHECK(u == doctest::Approx(e2 / (e1 + e2) * 1.0).epsilon(1e-14));
  }
  SUBCASE("weights are a distribution per token and dimension") {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.below(4), rows = 1 + rng.below(3), dp = 1 + rng.below(5);
      std::vector<Var> xs, ws;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t d = 1 + rng.below(5);
        xs.push_back(g.constant({rows, d}, random_vec(rng, rows * d)));
        ws.push_back(g.constant({d, dp}, random_vec(rng, d * dp)));
      }
      for (bool scalar : {false, true}) {
        const Var scorer = g.constant({dp, 1}, random_vec(rng, dp));
        AttentionTrace trace;
        combine_attention(xs, ws, &trace, scalar ? &scorer : nullptr);
        CHECK(trace.dim == (scalar ? 1 : dp));
        for (std::size_t k = 0; k < rows * trace.dim; ++k) {
          double s = 0;
          for (const auto& w : trace.weights) {
            CHECK(w[k] >= 0);
            s += w[k];
          }
          CHECK(std::abs(s - 1) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("combiner gradients") {
  nn::ParameterStore store;
  std::vector<nn::Parameter*> ps;
  for (int j = 0; j < 3; ++j) {
    auto& w = store.add("w" + std::to_string(j), {static_cast<std::size_t>(2 + j), 3});
    nn::init_uniform(w, 1.0, 10 + j);
    ps.push_back(&w);
  }
  auto& scorer = store.add("s", {3, 1});
  nn::init_uniform(scorer, 1.0, 20);
  CounterRng rng(6);
  std::vector<std::vector<double>> inputs;
  for (int j = 0; j < 3; ++j) inputs.push_back(random_vec(rng, 2 * (2 + j)));
  auto build = [&](Graph& g, std::vector<Var>& xs, std::vector<Var>& ws) {
    for (int j = 0; j < 3; ++j) {
      xs.push_back(g.constant({2, static_cast<std::size_t>(2 + j)}, inputs[j]));
      ws.push_back(g.param(*ps[j]));
    }
  };
  const std::vector<double> weights = {0.3, -1.2, 0.7, 2.0, -0.4, 1.1};
  auto reduce = [&](Graph& g, const Var& v) { return nn::sum(nn::mul(v, g.constant({2, 3}, weights))); };
  auto linear = [&](Graph& g) {
    std::vector<Var> xs, ws;
    build(g, xs, ws);
    return reduce(g, combine_linear(xs, ws));
  };
  auto attention = [&](Graph& g) {
    std::vector<Var> xs, ws;
    build(g, xs, ws);
    return reduce(g, combine_attention(xs, ws));
  };
  auto scalar = [&](Graph& g) {
    std::vector<Var> xs, ws;
    build(g, xs, ws);
    const Var s = g.param(scorer);
    return reduce(g, combine_attention(xs, ws, nullptr, &s));
  };
  CHECK(nn::grad_check(linear, ps).max_relative_error < 1e-4);
  CHECK(nn::grad_check(attention, ps).max_relative_error < 1e-4);
  auto with_scorer = ps;
  with_scorer.push_back(&scorer);
  CHECK(nn::grad_check(scalar, with_scorer).max_relative_error < 1e-4);
}

TEST_CASE("character encoder") {
  nn::ParameterStore store;
  CharEncoder enc("enc", {"a", "b"}, 1, 1, 2, store, 1);
  SUBCASE("fallback and smoke") {
    Graph g;
    const auto one = vals(enc.encode(g, enc.char_ids("a")));
    CHECK(one.size() == 2);
    for (double v : one) CHECK(std::isfinite(v));
    CHECK(vals(enc.encode(g, enc.char_ids("a"))) == one);
    CHECK(enc.char_ids("aé") == enc.char_ids("aü"));
    CHECK(enc.char_ids("aé") == std::vector<std::size_t>{1, 0});
  }
  SUBCASE("max pooling picks a dominant position") {
    store.get("enc.emb").value = {0, 1, 10};
    store.get("enc.conv.weight").value = {1, 2};
    store.get("enc.conv.bias").value = {0.5, 0.5};
    Graph g;
    CHECK(vals(enc.encode(g, enc.char_ids("ba"))) == std::vector<double>{10.5, 20.5});
  }
}

TEST_CASE("derived seeds") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("hierarchical embedder") {
  EmbedderSpec spec;
  spec.mode = "hme";
  spec.normalize = false;
  spec.word_tables = {make_table(3, {"ab", "abc"}, 1), make_table(2, {"ab", "c"}, 2)};
  spec.subword_tables = {make_table(2, {"a", "b", "c", "ab"}, 3), make_table(4, {"ab", "c"}, 4)};
  spec.subword_vocab = std::make_shared<embeddings::SubwordVocab>(std::vector<std::string>{"a", "b", "c", "ab"});
  spec.char_dim = 3;
  spec.char_out_dim = 5;
  nn::ParameterStore store;
  auto emb = build_embedder(spec, {"ab", "abc"}, 8, store, 9);
  CHECK(emb->output_dim() == 3 + 4 + 5);

  const auto prep = emb->prepare({"ab", "abc", "c"});
  CHECK(prep.subwords[1] == std::vector<std::string>{"ab", "c"});
  Graph g;
  const Var out = emb->forward(g, prep);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 12);

  // Independent subword meta-embedder bound to the same parameters.
  MetaEmbedder sub("embedder.subword", spec.subword_tables, Mode::kAttention, 4, false, store, 9);
  const Var units = sub.embed(g, {"ab", "c"});
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(out.at(0, 3 + c) == doctest::Approx(units.at(0, c)).epsilon(1e-14));
    CHECK(out.at(2, 3 + c) == doctest::Approx(units.at(1, c)).epsilon(1e-14));
    CHECK(out.at(1, 3 + c) == doctest::Approx((units.at(0, c) + units.at(1, c)) / 2).epsilon(1e-14));
  }

  SUBCASE("tables stay frozen under training") {
    const auto before = spec.word_tables[0]->matrix();
    const auto sub_before = spec.subword_tables[1]->matrix();
    for (int step = 0; step < 3; ++step) {
      store.zero_grad();
      Graph tg;
      tg.backward(nn::sum(nn::tanh(emb->forward(tg, prep))));
      nn::sgd_step(store.trainable(), 0.5);
    }
    CHECK(spec.word_tables[0]->matrix() == before);
    CHECK(spec.subword_tables[1]->matrix() == sub_before);
  }

  SUBCASE("restore reproduces the forward pass") {
    std::unordered_map<std::string, TablePtr> tables;
    for (const auto& [name, t] : emb->tables()) tables[name] = t;
    nn::ParameterStore copy;
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& p = copy.add(store[i].name, store[i].shape, store[i].frozen);
      p.value = store[i].value;
    }
    auto restored = restore_embedder(emb->describe(), tables, copy);
    Graph rg;
    CHECK(vals(restored->forward(rg, restored->prepare({"ab", "abc", "c"}))) == vals(out));
  }
}

TEST_CASE("embedder output dims per mode") {
  auto t1 = make_table(3, {"x"}, 1), t2 = make_table(5, {"x"}, 2);
  auto check = [&](const std::string& mode, std::vector<TablePtr> tables, int expect) {
    EmbedderSpec spec;
    spec.mode = mode;
    spec.word_tables = std::move(tables);
    nn::ParameterStore store;
    auto emb = build_embedder(spec, {"x"}, 6, store, 1);
    CAPTURE(mode);
    CHECK(emb->output_dim() == expect);
    Graph g;
    CHECK(emb->forward(g, emb->prepare({"x", "y"})).cols() == static_cast<std::size_t>(expect));
  };
  check("word-single", {t1}, 3);
  check("mme-concat", {t1, t2}, 8);
  check("mme-linear", {t1, t2}, 5);
  check("mme-attention", {t1, t2}, 5);
  check("scratch", {}, 6);
  CHECK_FALSE(is_known_mode("bogus"));
}

TEST_CASE("scratch embedder reads words at their first unit") {
  EmbedderSpec spec;
  spec.mode = "scratch";
  spec.normalize = false;
  nn::ParameterStore store;
  auto emb = build_embedder(spec, {"abc", "de"}, 4, store, 1);
  CHECK(emb->subword_positions());
  const auto p = emb->prepare({"abc", "de"});
  CHECK(p.word_starts == std::vector<std::size_t>{0, 2});
  CHECK(p.length() == 3);
}
