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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "memory_oracle.h"
#include "mmx/bench.h"
#include "mmx/error.h"
#include "mmx/synth.h"

using namespace mmx;
using namespace mmx::bench;

namespace {

const synth::Resources& toy_resources() {
  static const synth::Resources r = [] {
    synth::CorpusOptions o;
    o.lexicon_size = 40;
    o.train_sentences = 30;
    o.dev_sentences = 5;
    return synth::make_resources(synth::make_corpus(o));
  }();
  return r;
}

void check_invariants(const Timing& t) {
  CHECK(t.min_ms <= t.median_ms);
  CHECK(t.median_ms <= t.max_ms);
  CHECK(t.mean_ms >= t.min_ms);
  CHECK(t.mean_ms <= t.max_ms);
  CHECK(t.std_ms >= 0);
}

}  // namespace

TEST_CASE("grid and dummy data") {
  CHECK(default_grid() == std::vector<std::size_t>{16, 32, 64, 128, 256, 512, 1024, 2048, 4096});
  const auto a = gen_dummy(16, 100, 7);
  CHECK(a.size() == 16);
  CHECK(a == gen_dummy(16, 100, 7));
  CHECK(a != gen_dummy(16, 100, 8));
  for (auto id : a) CHECK(id < 100);
  CHECK_THROWS_AS(gen_dummy(0, 100, 7), Error);
}

TEST_CASE("summary statistics") {
  const Timing one = summarize(8, {2.5});
  CHECK(one.mean_ms == 2.5);
  CHECK(one.median_ms == 2.5);
  CHECK(one.min_ms == 2.5);
  CHECK(one.max_ms == 2.5);
  CHECK(one.std_ms == 0);
  CHECK(one.throughput == doctest::Approx(400));

  const Timing t = summarize(8, {4, 1, 3, 2});
  CHECK(t.mean_ms == doctest::Approx(2.5));
  CHECK(t.median_ms == doctest::Approx(2.5));
  CHECK(t.std_ms == doctest::Approx(std::sqrt(1.25)));
  CHECK(t.min_ms == 1);
  CHECK(t.max_ms == 4);
  CHECK(t.throughput == doctest::Approx(400));
  check_invariants(summarize(1, {0.3, 0.1, 0.7, 0.2, 0.9}));
  CHECK(summarize(1, {0.3, 0.1, 0.7, 0.2, 0.9}).median_ms == 0.3);
}

TEST_CASE("speed measurement and reports") {
  const auto& res = toy_resources();
  auto word = synth::build_preset("mme-attention", synth::Scale::kToy, res);
  auto scratch = synth::build_preset("scratch", synth::Scale::kToy, res);
  CHECK(length_unit(*word) == "words");
  CHECK(length_unit(*scratch) == "subwords");
  CHECK(word->prepare(dummy_sentence(*word, 37, 7)).length() == 37);
  CHECK(scratch->prepare(dummy_sentence(*scratch, 37, 7)).length() == 37);

  SpeedOptions opts;
  opts.grid = {4, 8, 16};
  opts.runs = 3;
  opts.warmup = 1;
  const SpeedReport a = measure_speed(*word, "word", opts);
  const SpeedReport b = measure_speed(*scratch, "scratch, small", opts);
  CHECK(a.runs == 3);
  CHECK(a.unit == "words");
  REQUIRE(a.rows.size() == 3);
  for (const auto& r : {a, b})
    for (const auto& t : r.rows) {
      CHECK_FALSE(t.skipped);
      check_invariants(t);
      CHECK(t.throughput == doctest::Approx(1000.0 / t.mean_ms));
    }

  const std::string csv = speed_csv({a, b});
  const auto rows = parse_csv(csv);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == kCsvColumns);
  CHECK(rows[4][0] == "scratch, small");
  CHECK(rows[4][1] == "4");
  CHECK(rows[4][2] == "subwords");
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].size() == kCsvColumns.size());

  const std::string svg = speed_svg({a, b});
  std::size_t polylines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++polylines;
  CHECK(polylines == 2);

  const auto js = speed_json({a, b});
  CHECK(js.size() == 2);
  CHECK(js[0]["rows"].size() == 3);
  CHECK(js[1]["model"] == "scratch, small");

  CHECK_THROWS_AS(emit_report({a}, Format::kCsv, "/nonexistent-dir/x/speed.csv"), Error);
  const auto tmp = std::filesystem::temp_directory_path() / "mmx_bench_test.svg";
  emit_report({a}, Format::kSvg, tmp.string());
  CHECK(std::filesystem::file_size(tmp) > 0);
  std::filesystem::remove(tmp);
}

TEST_CASE("lengths beyond the model limit are skipped") {
  auto cfg = synth::preset_config("mme-linear", synth::Scale::kToy);
  cfg.max_length = 10;
  const auto& res = toy_resources();
  tagger::TaggerModel model(cfg, synth::preset_spec("mme-linear", res), res.labels, corpus::Scheme::kPos,
                            res.training_tokens);
  SpeedOptions opts;
  opts.grid = {8, 16};
  opts.runs = 1;
  opts.warmup = 0;
  const auto r = measure_speed(model, "m", opts);
  CHECK_FALSE(r.rows[0].skipped);
  CHECK(r.rows[1].skipped);
  const auto rows = parse_csv(speed_csv({r}));
  CHECK(rows[2][4].empty());
  CHECK(rows[2][9].empty());
  CHECK(speed_json({r})[0]["rows"][1]["skipped"] == true);
}

TEST_CASE("repeated timing is stable") {
  auto model = synth::build_preset("word-single", synth::Scale::kToy, toy_resources());
  SpeedOptions opts;
  opts.grid = {16};
  opts.warmup = 3;
  opts.runs = 30;
  const Timing first = measure_speed(*model, "m", opts).rows[0];
  opts.runs = 60;
  const Timing second = measure_speed(*model, "m", opts).rows[0];
  // Clock granularity floor keeps near-zero spreads from flaking.
  CHECK(std::abs(second.mean_ms - first.mean_ms) <= 3 * first.std_ms + 0.05);
}

TEST_CASE("csv parser") {
  const auto rows = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,,3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(rows[1] == std::vector<std::string>{"1", "", "3"});
}

TEST_CASE("memory accounting equals the shape algebra") {
  const auto& res = toy_resources();
  for (const auto& preset : synth::preset_names()) {
    CAPTURE(preset);
    auto model = synth::build_preset(preset, synth::Scale::kToy, res);
    std::size_t previous = 0;
    for (std::size_t length : {1, 2, 5, 16, 33}) {
      CAPTURE(length);
      const auto prep = model->prepare(dummy_sentence(*model, length, 7));
      const MemoryReport r = measure_memory(*model, preset, prep);
      CHECK(r.activation_elements == testing::closed_form_elements(*model, prep));
      CHECK(r.activation_bytes == 4 * r.activation_elements);
      CHECK(r.activation_bytes >= r.largest_buffer_bytes);
      CHECK(r.param_bytes == 4 * r.param_count);
      CHECK(r.length == length);
      std::size_t by_op = 0;
      for (const auto& [op, bytes] : r.bytes_by_op) by_op += bytes;
      CHECK(by_op == r.activation_bytes);
      CHECK(r.activation_bytes >= previous);
      previous = r.activation_bytes;
    }
  }
}

TEST_CASE("memory accounting across encoder shapes") {
  const auto& res = toy_resources();
  for (int layers : {0, 1, 3})
    for (int hidden : {8, 16}) {
      auto cfg = synth::preset_config("mme-concat", synth::Scale::kToy);
      cfg.layers = layers;
      cfg.hidden = hidden;
      cfg.ff_dim = 2 * hidden;
      tagger::TaggerModel model(cfg, synth::preset_spec("mme-concat", res), res.labels, corpus::Scheme::kPos,
                                res.training_tokens);
      const auto prep = model.prepare(dummy_sentence(model, 12, 3));
      CHECK(measure_memory(model, "m", prep).activation_elements == testing::closed_form_elements(model, prep));
    }
}
