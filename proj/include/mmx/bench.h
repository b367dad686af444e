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

#ifndef MMX_BENCH_H_
#define MMX_BENCH_H_

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmx/meta.h"
#include "mmx/tagger.h"

namespace mmx::bench {

// 16, 32, ..., 4096
std::vector<std::size_t> default_grid();

// `length` pseudorandom ids in [0, vocab_size); a pure function of the
// arguments.
std::vector<std::size_t> gen_dummy(std::size_t length, std::size_t vocab_size, std::uint64_t seed);

// "words" for embedding pipelines, "subwords" when the encoder runs over units.
std::string length_unit(const tagger::TaggerModel& model);

// Dummy sentence whose encoder length, in the model's unit, is `length`.
// Word pipelines draw words from the first pretrained table; unit pipelines
// use single-character units so that one token is one unit.
std::vector<std::string> dummy_sentence(const tagger::TaggerModel& model, std::size_t length, std::uint64_t seed);

struct Timing {
  std::size_t length = 0;
  bool skipped = false;
  std::string reason;
  double mean_ms = 0, median_ms = 0, std_ms = 0, min_ms = 0, max_ms = 0;
  double throughput = 0;  // sequences per second
};

struct SpeedReport {
  std::string model;
  std::string unit;
  int runs = 0;
  int warmup = 0;
  std::vector<Timing> rows;
};

// Population statistics over per-run milliseconds.
Timing summarize(std::size_t length, const std::vector<double>& samples_ms);

struct SpeedOptions {
  std::vector<std::size_t> grid = default_grid();
  int runs = 100;
  int warmup = 10;
  std::uint64_t seed = 7;
};

// Times one inference pass (embed, encode, emissions, Viterbi) per run.
// Input preparation happens before the clock starts. Lengths above the
// model's max_length are reported as skipped.
SpeedReport measure_speed(const tagger::TaggerModel& model, const std::string& name,
                          const SpeedOptions& options = {});

struct MemoryReport {
  std::string model;
  std::string unit;
  std::size_t length = 0;
  std::size_t param_count = 0;
  std::size_t param_bytes = 0;
  std::size_t activation_elements = 0;
  std::size_t activation_bytes = 0;
  std::size_t largest_buffer_bytes = 0;
  std::size_t buffers = 0;
  std::map<std::string, std::size_t> bytes_by_op;
  std::map<std::string, std::size_t> bytes_by_scope;
  std::optional<std::size_t> rss_bytes;
};

// One retained forward pass up to the emission scores; every materialized
// non-parameter buffer is counted at 4 bytes per element.
MemoryReport measure_memory(const tagger::TaggerModel& model, const std::string& name, std::size_t length,
                            std::uint64_t seed = 7);

// Same accounting for an already prepared input.
MemoryReport measure_memory(const tagger::TaggerModel& model, const std::string& name,
                            const meta::Prepared& input);

// Resident set size of this process, when the platform exposes it.
std::optional<std::size_t> resident_bytes();

inline const std::vector<std::string> kCsvColumns = {"model", "length", "unit", "runs", "mean_ms", "median_ms",
                                                     "std_ms", "min_ms", "max_ms", "throughput"};

// Skipped rows carry empty statistic cells.
std::string speed_csv(const std::vector<SpeedReport>& reports);
nlohmann::json speed_json(const std::vector<SpeedReport>& reports);
// Throughput against length (log2 x axis), one polyline per model.
std::string speed_svg(const std::vector<SpeedReport>& reports);
nlohmann::json memory_json(const MemoryReport& report);

enum class Format { kCsv, kJson, kSvg };
void emit_report(const std::vector<SpeedReport>& reports, Format format, const std::string& path);

// RFC 4180 style: commas, double-quoted fields with "" escapes, LF or CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace mmx::bench

#endif  // MMX_BENCH_H_
