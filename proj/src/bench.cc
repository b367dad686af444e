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

#include "mmx/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mmx/crf.h"
#include "mmx/error.h"
#include "mmx/rng.h"
#include "mmx/utf8.h"

namespace mmx::bench {

using nlohmann::json;

std::vector<std::size_t> default_grid() { return {16, 32, 64, 128, 256, 512, 1024, 2048, 4096}; }

std::vector<std::size_t> gen_dummy(std::size_t length, std::size_t vocab_size, std::uint64_t seed) {
  if (length == 0) throw Error("gen_dummy: length must be >= 1");
  if (vocab_size == 0) throw Error("gen_dummy: vocab_size must be >= 1");
  CounterRng rng(seed);
  std::vector<std::size_t> ids(length);
  for (auto& id : ids) id = static_cast<std::size_t>(rng.below(vocab_size));
  return ids;
}

std::string length_unit(const tagger::TaggerModel& model) {
  return model.embedder().subword_positions() ? "subwords" : "words";
}

std::vector<std::string> dummy_sentence(const tagger::TaggerModel& model, std::size_t length, std::uint64_t seed) {
  std::vector<std::string> pool;
  if (model.embedder().subword_positions()) {
    for (const auto& u : model.embedder().describe().at("units"))
      if (utf8::split_chars(u.get<std::string>()).size() == 1) pool.push_back(u.get<std::string>());
  } else {
    const auto tables = model.embedder().tables();
    if (!tables.empty()) pool = tables[0].second->words();
  }
  if (pool.empty()) pool = {"x"};
  std::vector<std::string> tokens;
  tokens.reserve(length);
  for (std::size_t id : gen_dummy(length, pool.size(), seed)) tokens.push_back(pool[id]);
  return tokens;
}

Timing summarize(std::size_t length, const std::vector<double>& samples) {
  if (samples.empty()) throw Error("summarize: no samples");
  Timing t;
  t.length = length;
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  t.min_ms = s.front();
  t.max_ms = s.back();
  t.median_ms = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  double sum = 0;
  for (double x : s) sum += x;
  t.mean_ms = std::clamp(sum / double(n), t.min_ms, t.max_ms);
  double var = 0;
  for (double x : s) var += (x - t.mean_ms) * (x - t.mean_ms);
  t.std_ms = std::sqrt(var / double(n));
  t.throughput = t.mean_ms > 0 ? 1000.0 / t.mean_ms : 0.0;
  return t;
}

namespace {

void run_inference(const tagger::TaggerModel& model, const meta::Prepared& p) {
  nn::Graph g(nn::GraphOptions{.record = false, .retain = false, .precision = nn::Precision::kFloat32});
  nn::Var e = model.emissions(g, p);
  const auto path = crf::viterbi(e.data(), model.transitions(), model.labels().size());
  if (path.size() != p.words()) throw Error("inference produced a path of the wrong length");
}

}  // namespace

SpeedReport measure_speed(const tagger::TaggerModel& model, const std::string& name, const SpeedOptions& o) {
  if (o.runs < 1) throw Error("runs must be >= 1");
  if (o.warmup < 0) throw Error("warmup must be >= 0");
  if (o.grid.empty()) throw Error("empty length grid");
  SpeedReport report{name, length_unit(model), o.runs, o.warmup, {}};
  using clock = std::chrono::steady_clock;
  for (std::size_t length : o.grid) {
    if (length > model.config().max_length) {
      Timing t;
      t.length = length;
      t.skipped = true;
      t.reason = "exceeds max_length " + std::to_string(model.config().max_length);
      report.rows.push_back(t);
      continue;
    }
    const meta::Prepared p = model.prepare(dummy_sentence(model, length, o.seed + length));
    for (int i = 0; i < o.warmup; ++i) run_inference(model, p);
    std::vector<double> samples;
    for (int i = 0; i < o.runs; ++i) {
      const auto t0 = clock::now();
      run_inference(model, p);
      samples.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
    report.rows.push_back(summarize(length, samples));
  }
  return report;
}

std::optional<std::size_t> resident_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("VmRSS:", 0) == 0) {
      std::istringstream fields(line.substr(6));
      std::size_t kb = 0;
      if (fields >> kb) return kb * 1024;
    }
  return std::nullopt;
}

MemoryReport measure_memory(const tagger::TaggerModel& model, const std::string& name, const meta::Prepared& p) {
  MemoryReport r;
  r.model = name;
  r.unit = length_unit(model);
  r.length = p.length();
  const auto counts = model.count_params();
  r.param_count = counts.total;
  r.param_bytes = counts.bytes_32bit;

  nn::Graph g(nn::GraphOptions{.record = false, .retain = true, .precision = nn::Precision::kFloat32});
  model.emissions(g, p);
  for (const auto& b : g.buffers()) {
    const std::size_t bytes = 4 * b.elements;
    r.activation_elements += b.elements;
    r.largest_buffer_bytes = std::max(r.largest_buffer_bytes, bytes);
    r.bytes_by_op[b.op] += bytes;
    r.bytes_by_scope[b.scope.empty() ? "(root)" : b.scope] += bytes;
  }
  r.buffers = g.buffers().size();
  r.activation_bytes = 4 * r.activation_elements;
  r.rss_bytes = resident_bytes();
  return r;
}

MemoryReport measure_memory(const tagger::TaggerModel& model, const std::string& name, std::size_t length,
                            std::uint64_t seed) {
  if (length == 0) throw Error("length must be >= 1");
  if (length > model.config().max_length)
    throw Error("length " + std::to_string(length) + " exceeds max_length " +
                std::to_string(model.config().max_length));
  return measure_memory(model, name, model.prepare(dummy_sentence(model, length, seed)));
}

namespace {

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << std::fixed << v;
  return s.str();
}

std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string speed_csv(const std::vector<SpeedReport>& reports) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << "\n";
  for (const auto& r : reports)
    for (const auto& t : r.rows) {
      out << csv_field(r.model) << "," << t.length << "," << r.unit << "," << (t.skipped ? 0 : r.runs);
      if (t.skipped)
        out << ",,,,,,";
      else
        out << "," << number(t.mean_ms) << "," << number(t.median_ms) << "," << number(t.std_ms) << ","
            << number(t.min_ms) << "," << number(t.max_ms) << "," << number(t.throughput);
      out << "\n";
    }
  return out.str();
}

json speed_json(const std::vector<SpeedReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json rows = json::array();
    for (const auto& t : r.rows) {
      if (t.skipped) {
        rows.push_back({{"length", t.length}, {"skipped", true}, {"reason", t.reason}});
        continue;
      }
      rows.push_back({{"length", t.length},
                      {"skipped", false},
                      {"mean_ms", t.mean_ms},
                      {"median_ms", t.median_ms},
                      {"std_ms", t.std_ms},
                      {"min_ms", t.min_ms},
                      {"max_ms", t.max_ms},
                      {"throughput", t.throughput}});
    }
    out.push_back({{"model", r.model}, {"unit", r.unit}, {"runs", r.runs}, {"warmup", r.warmup}, {"rows", rows}});
  }
  return out;
}

std::string speed_svg(const std::vector<SpeedReport>& reports) {
  constexpr double kW = 640, kH = 400, kPad = 50;
  double min_x = 1e300, max_x = -1e300, max_y = 0;
  for (const auto& r : reports)
    for (const auto& t : r.rows) {
      if (t.skipped) continue;
      min_x = std::min(min_x, std::log2(double(t.length)));
      max_x = std::max(max_x, std::log2(double(t.length)));
      max_y = std::max(max_y, t.throughput);
    }
  if (min_x > max_x) min_x = max_x = 0;
  if (max_x == min_x) max_x = min_x + 1;
  if (max_y <= 0) max_y = 1;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">sequence length (log2)</text>\n";
  out << "<text x=\"15\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 15 " << kH / 2
      << ")\" text-anchor=\"middle\">sequences / s</text>\n";
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const char* color = kColors[m % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    bool first = true;
    for (const auto& t : reports[m].rows) {
      if (t.skipped) continue;
      const double x = kPad + (std::log2(double(t.length)) - min_x) / (max_x - min_x) * (kW - 2 * kPad);
      const double y = kH - kPad - t.throughput / max_y * (kH - 2 * kPad);
      out << (first ? "" : " ") << number(x) << "," << number(y);
      first = false;
    }
    out << "\"/>\n";
    out << "<text x=\"" << kW - kPad << "\" y=\"" << kPad + 15 * m << "\" fill=\"" << color
        << "\" text-anchor=\"end\">" << reports[m].model << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

json memory_json(const MemoryReport& r) {
  json j = {{"model", r.model},
            {"unit", r.unit},
            {"length", r.length},
            {"param_count", r.param_count},
            {"param_bytes", r.param_bytes},
            {"activation_elements", r.activation_elements},
            {"activation_bytes", r.activation_bytes},
            {"largest_buffer_bytes", r.largest_buffer_bytes},
            {"buffers", r.buffers},
            {"bytes_by_op", r.bytes_by_op},
            {"bytes_by_scope", r.bytes_by_scope}};
  j["rss_bytes"] = r.rss_bytes ? json(*r.rss_bytes) : json(nullptr);
  return j;
}

void emit_report(const std::vector<SpeedReport>& reports, Format format, const std::string& path) {
  if (reports.empty()) throw Error("no reports to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  switch (format) {
    case Format::kCsv: out << speed_csv(reports); break;
    case Format::kJson: out << speed_json(reports).dump(2) << "\n"; break;
    case Format::kSvg: out << speed_svg(reports); break;
  }
  if (!out) throw Error("failed writing " + path);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_field();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    end_field();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mmx::bench
