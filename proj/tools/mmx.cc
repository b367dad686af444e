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

// Command-line entry point: mmx <subcommand> [options].

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mmx/align.h"
#include "mmx/bench.h"
#include "mmx/config.h"
#include "mmx/corpus.h"
#include "mmx/ensemble.h"
#include "mmx/error.h"
#include "mmx/log.h"
#include "mmx/tagger.h"

#ifndef MMX_VERSION_STRING
#define MMX_VERSION_STRING "0.0.0"
#endif
#ifndef MMX_BUILD_TYPE
#define MMX_BUILD_TYPE "unknown"
#endif

namespace {

using namespace mmx;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0, kFailure = 1, kUsage = 2, kConfig = 3;

std::string version_text() {
  std::ostringstream s;
  s << "mmx " << MMX_VERSION_STRING << " (" << MMX_BUILD_TYPE << ", " << __VERSION__ << ", C++" << __cplusplus
    << ", emoji table v" << corpus::kEmojiTableVersion << ")";
  return s.str();
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Scheme-appropriate metric JSON: span P/R/F1 for BIO-NER, accuracy for POS.
std::string metric_report(const corpus::LabeledDataset& gold, const corpus::LabelSequences& pred) {
  if (gold.scheme() == corpus::Scheme::kBioNer) return corpus::metrics_json(corpus::span_micro_f1(gold, pred));
  return "{\"accuracy\":" + fixed6(corpus::token_accuracy(gold, pred)) + "}";
}

corpus::LabelSequences tokens_of(const corpus::LabeledDataset& d) {
  corpus::LabelSequences out;
  for (const auto& s : d.sentences()) out.push_back(s.tokens);
  return out;
}

// Token-per-line input; only the first tab/space separated field is used, so
// labelled CoNLL files work as well.
std::vector<std::vector<std::string>> read_token_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::vector<std::string>> out(1);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto end = line.find_first_of("\t ");
    const std::string token = line.substr(0, end);
    if (token.empty()) {
      if (!out.back().empty()) out.emplace_back();
      continue;
    }
    out.back().push_back(token);
  }
  if (out.back().empty()) out.pop_back();
  if (out.empty()) throw Error(path + ": no sentences");
  return out;
}

void write_predictions(const std::string& path, const std::vector<std::vector<std::string>>& tokens,
                       const corpus::LabelSequences& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t s = 0; s < tokens.size(); ++s) {
    for (std::size_t i = 0; i < tokens[s].size(); ++i) out << tokens[s][i] << "\t" << labels[s][i] << "\n";
    out << "\n";
  }
  if (!out) throw Error("failed writing " + path);
}

struct TrainFlags {
  std::string config, train, dev;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> epochs, batch_size, layers, heads, hidden, ff_dim, patience;
  std::optional<double> lr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--train", train, "training CoNLL file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dev", dev, "development CoNLL file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override seed");
    cmd->add_option("--mode", mode, "override embedder mode");
    cmd->add_option("--epochs", epochs, "override max_epochs");
    cmd->add_option("--batch-size", batch_size, "override batch_size");
    cmd->add_option("--layers", layers, "override layers");
    cmd->add_option("--heads", heads, "override heads");
    cmd->add_option("--hidden", hidden, "override hidden");
    cmd->add_option("--ff-dim", ff_dim, "override ff_dim");
    cmd->add_option("--patience", patience, "override early_stop_patience");
    cmd->add_option("--lr", lr, "override learning rate");
  }

  config::RunConfig resolve() const {
    config::RunConfig c = config::load_config(config);
    json o = json::object();
    json t = json::object();
    if (seed) o["seed"] = *seed;
    if (mode) o["embedder"] = {{"mode", *mode}};
    if (epochs) t["max_epochs"] = *epochs;
    if (batch_size) t["batch_size"] = *batch_size;
    if (layers) t["layers"] = *layers;
    if (heads) t["heads"] = *heads;
    if (hidden) t["hidden"] = *hidden;
    if (ff_dim) t["ff_dim"] = *ff_dim;
    if (patience) t["early_stop_patience"] = *patience;
    if (lr) t["lr"] = *lr;
    if (!t.empty()) o["tagger"] = t;
    config::apply_overrides(c, o);
    return c;
  }
};

struct TrainingData {
  corpus::LabeledDataset train, dev;
  std::vector<std::string> labels;
  std::vector<std::string> tokens;
};

TrainingData load_training_data(const config::RunConfig& c, const TrainFlags& f) {
  TrainingData d{corpus::parse_conll_file(f.train, c.task), corpus::parse_conll_file(f.dev, c.task), {}, {}};
  d.labels = d.train.label_set();
  for (const auto& l : d.dev.label_set())
    if (std::find(d.labels.begin(), d.labels.end(), l) == d.labels.end()) d.labels.push_back(l);
  for (const auto& s : d.train.sentences()) d.tokens.insert(d.tokens.end(), s.tokens.begin(), s.tokens.end());
  return d;
}

json counts_json(const tagger::ParamCounts& c) {
  return {{"total", c.total}, {"trainable", c.trainable}, {"frozen", c.frozen}, {"bytes_32bit", c.bytes_32bit}};
}

int run_train(const TrainFlags& f, const std::string& out) {
  const config::RunConfig c = f.resolve();
  const TrainingData d = load_training_data(c, f);
  tagger::TaggerModel model(c.tagger, config::load_embedder_spec(c), d.labels, c.task, d.tokens);
  const auto h = tagger::train(model, d.train, d.dev);
  tagger::save_model(model, out);
  json summary = {{"model", out},
                  {"epochs", h.epochs.size()},
                  {"best_epoch", h.best_epoch},
                  {"best_dev_metric", h.best_dev_metric},
                  {"params", counts_json(model.count_params())}};
  std::cout << summary.dump() << "\n";
  return kOk;
}

int run_eval(const std::string& model_path, const std::string& data) {
  auto model = tagger::load_model(model_path);
  const auto gold = corpus::parse_conll_file(data, model->scheme());
  std::cout << metric_report(gold, model->predict(tokens_of(gold))) << "\n";
  return kOk;
}

int run_predict(const std::string& model_path, const std::string& input, const std::string& out) {
  auto model = tagger::load_model(model_path);
  const auto tokens = read_token_sentences(input);
  write_predictions(out, tokens, model->predict(tokens));
  return kOk;
}

struct AlignFlags {
  std::string src, tgt, seeds, out, mapped, dict;
  int iterations = 5, csls_k = 10;
  std::size_t dict_cap = 10000;
};

int run_align(const AlignFlags& f) {
  const auto src = embeddings::load_table_file(f.src);
  const auto tgt = embeddings::load_table_file(f.tgt);
  align::AlignmentJob job;
  job.src = &src;
  job.tgt = &tgt;
  job.iterations = f.iterations;
  job.csls_k = f.csls_k;
  job.dict_size_cap = f.dict_cap;
  if (f.seeds.empty()) {
    job.seed_pairs = align::identical_string_seeds(src, tgt);
  } else {
    std::ifstream in(f.seeds);
    if (!in) throw Error("cannot open " + f.seeds);
    job.seed_pairs = align::read_pairs(in);
  }
  const auto result = align::refine(job);
  {
    std::ofstream out(f.out, std::ios::binary);
    if (!out) throw Error("cannot write " + f.out);
    align::write_mapping(out, result.w);
  }
  if (!f.mapped.empty()) {
    std::ofstream out(f.mapped);
    if (!out) throw Error("cannot write " + f.mapped);
    embeddings::write_table(out, align::apply_mapping(src, result.w));
  }
  if (!f.dict.empty()) {
    std::ofstream out(f.dict);
    if (!out) throw Error("cannot write " + f.dict);
    for (const auto& [a, b] : result.induced_dict) out << a << "\t" << b << "\n";
  }
  json summary = {{"seed_pairs", job.seed_pairs.size()},
                  {"iterations_run", result.iterations_run},
                  {"stopped_early", result.stopped_early},
                  {"induced_pairs", result.induced_dict.size()},
                  {"objective_trace", result.objective_trace},
                  {"orthogonality_error", align::orthogonality_error(result.w)}};
  std::cout << summary.dump() << "\n";
  return kOk;
}

struct EnsembleFlags {
  TrainFlags train;
  int k = 5;
  int jobs = 1;
  bool identical = false;
  std::string out_dir = ".";
  std::string manifest;
};

int run_ensemble_train(const EnsembleFlags& f) {
  const config::RunConfig c = f.train.resolve();
  const TrainingData d = load_training_data(c, f.train);
  const meta::EmbedderSpec spec = config::load_embedder_spec(c);
  ensemble::EnsembleOptions options;
  options.k = f.k;
  options.base_seed = c.tagger.seed;
  options.jobs = f.jobs;
  options.identical_seeds = f.identical;
  auto factory = [&](std::uint64_t seed) {
    tagger::TaggerConfig tc = c.tagger;
    tc.seed = seed;
    return std::make_unique<tagger::TaggerModel>(tc, spec, d.labels, c.task, d.tokens);
  };
  const auto e = ensemble::train_ensemble(factory, d.train, d.dev, options);
  const std::string manifest = f.manifest.empty() ? (fs::path(f.out_dir) / "ensemble.json").string() : f.manifest;
  json m = ensemble::save_ensemble(e, f.out_dir, manifest);
  const auto pred = e.predict(tokens_of(d.dev));
  std::cout << json{{"manifest", manifest},
                    {"k", e.size()},
                    {"dev_metric", corpus::dev_metric(d.dev, pred)},
                    {"members", m.at("members")}}
                   .dump()
            << "\n";
  return kOk;
}

int run_ensemble_predict(const std::string& manifest, const std::string& input, const std::string& out,
                         bool evaluate) {
  const auto e = ensemble::load_ensemble(manifest);
  if (evaluate) {
    const auto gold = corpus::parse_conll_file(input, e.member(0).scheme());
    const auto pred = e.predict(tokens_of(gold));
    if (!out.empty()) write_predictions(out, tokens_of(gold), pred);
    std::cout << metric_report(gold, pred) << "\n";
    return kOk;
  }
  const auto tokens = read_token_sentences(input);
  write_predictions(out, tokens, e.predict(tokens));
  return kOk;
}

std::string model_name(const std::string& path) { return fs::path(path).stem().string(); }

struct SpeedFlags {
  std::vector<std::string> models;
  std::vector<std::size_t> lengths = bench::default_grid();
  int runs = 100, warmup = 10;
  std::uint64_t seed = 7;
  std::string out, json_out, svg_out;
};

int run_bench_speed(const SpeedFlags& f) {
  std::vector<bench::SpeedReport> reports;
  for (const auto& path : f.models) {
    auto model = tagger::load_model(path);
    bench::SpeedOptions o;
    o.grid = f.lengths;
    o.runs = f.runs;
    o.warmup = f.warmup;
    o.seed = f.seed;
    reports.push_back(bench::measure_speed(*model, model_name(path), o));
  }
  if (f.out.empty())
    std::cout << bench::speed_csv(reports);
  else
    bench::emit_report(reports, bench::Format::kCsv, f.out);
  if (!f.json_out.empty()) bench::emit_report(reports, bench::Format::kJson, f.json_out);
  if (!f.svg_out.empty()) bench::emit_report(reports, bench::Format::kSvg, f.svg_out);
  return kOk;
}

int run_bench_memory(const std::string& path, std::size_t length, const std::string& out) {
  auto model = tagger::load_model(path);
  const json report = bench::memory_json(bench::measure_memory(*model, model_name(path), length));
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream o(out);
    if (!o) throw Error("cannot write " + out);
    o << report.dump(2) << "\n";
  }
  return kOk;
}

int run_stats(const std::string& data) {
  const auto d = corpus::parse_conll_file(data);
  json labels = json::object();
  for (const auto& s : d.sentences())
    for (const auto& l : s.labels) labels[l] = labels.value(l, 0) + 1;
  json out = {{"sentences", d.sentences().size()},
              {"tokens", d.token_count()},
              {"scheme", corpus::scheme_name(d.scheme())},
              {"labels", labels}};
  bool has_lang = !d.sentences().empty();
  for (const auto& s : d.sentences()) has_lang = has_lang && s.has_lang_ids();
  if (has_lang) {
    json langs = json::object();
    for (const auto& s : d.sentences())
      for (const auto& l : s.lang_ids) langs[l] = langs.value(l, 0) + 1;
    out["languages"] = langs;
    if (langs.size() >= 2) {
      const auto st = corpus::dataset_stats(d);
      out["ml"] = st.ml;
      out["el"] = st.el;
      out["ml_el_tie"] = st.tie;
    }
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v == 0) throw CLI::ValidationError("--lengths", "bad length '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw CLI::ValidationError("--lengths", "no lengths given");
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Code-switching sequence labelling toolkit: meta-embeddings, transformer-CRF tagger, "
               "alignment, ensembles and benchmarks."};
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);
  std::string log_level;
  app.add_option("--log-level", log_level, "debug|info|warn|error|off (default: $MMX_LOG or warn)");

  TrainFlags train_flags;
  std::string train_out;
  auto* train = app.add_subcommand("train", "train a tagger");
  train_flags.add_to(train);
  train->add_option("--out", train_out, "model file to write")->required();

  std::string model_path, data_path, input_path, out_path;
  auto* eval = app.add_subcommand("eval", "score a model on a labelled CoNLL file");
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_path)->required()->check(CLI::ExistingFile);

  auto* predict = app.add_subcommand("predict", "label a token-per-line file");
  predict->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--input", input_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path)->required();

  AlignFlags align_flags;
  auto* align = app.add_subcommand("align", "map a source embedding space onto a target space");
  align->add_option("--src", align_flags.src, "source .vec table")->required()->check(CLI::ExistingFile);
  align->add_option("--tgt", align_flags.tgt, "target .vec table")->required()->check(CLI::ExistingFile);
  align->add_option("--seeds", align_flags.seeds, "seed dictionary (src<TAB>tgt); default identical strings")
      ->check(CLI::ExistingFile);
  align->add_option("--iterations", align_flags.iterations, "refinement iterations (0 = seeds only)")
      ->check(CLI::NonNegativeNumber);
  align->add_option("--csls-k", align_flags.csls_k, "CSLS neighbourhood size")->check(CLI::PositiveNumber);
  align->add_option("--dict-cap", align_flags.dict_cap, "maximum induced dictionary size")
      ->check(CLI::PositiveNumber);
  align->add_option("--out", align_flags.out, "mapping file (W.bin)")->required();
  align->add_option("--mapped", align_flags.mapped, "write the mapped source table");
  align->add_option("--dict", align_flags.dict, "write the final induced dictionary");

  EnsembleFlags ens_flags;
  auto* ens_train = app.add_subcommand("ensemble-train", "train K seeded taggers");
  ens_flags.train.add_to(ens_train);
  ens_train->add_option("--k", ens_flags.k, "ensemble size")->check(CLI::PositiveNumber);
  ens_train->get_option("--seed")->description("base seed (default: config seed); member k uses seed + k");
  ens_train->add_option("--jobs", ens_flags.jobs, "members trained concurrently")->check(CLI::PositiveNumber);
  ens_train->add_flag("--identical-seeds", ens_flags.identical, "give every member the base seed");
  ens_train->add_option("--out-dir", ens_flags.out_dir, "directory for m.<k>.mmx files");
  ens_train->add_option("--manifest", ens_flags.manifest, "manifest path (default <out-dir>/ensemble.json)");

  std::string manifest;
  bool evaluate = false;
  auto* ens_predict = app.add_subcommand("ensemble-predict", "majority-vote prediction");
  ens_predict->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  ens_predict->add_option("--input", input_path)->required()->check(CLI::ExistingFile);
  ens_predict->add_option("--out", out_path, "predictions (required unless --eval)");
  ens_predict->add_flag("--eval", evaluate, "input is labelled; print the metric JSON");

  auto* bench = app.add_subcommand("bench", "speed and memory measurements");
  bench->require_subcommand(1);
  SpeedFlags speed_flags;
  std::string lengths_text;
  auto* speed = bench->add_subcommand("speed", "inference latency over a length grid");
  speed->add_option("--model", speed_flags.models, "model file(s)")->required()->check(CLI::ExistingFile);
  speed->add_option("--lengths", lengths_text, "comma-separated lengths (default 16..4096)");
  speed->add_option("--runs", speed_flags.runs)->check(CLI::PositiveNumber);
  speed->add_option("--warmup", speed_flags.warmup)->check(CLI::NonNegativeNumber);
  speed->add_option("--seed", speed_flags.seed, "dummy input seed");
  speed->add_option("--out", speed_flags.out, "CSV output (default stdout)");
  speed->add_option("--json", speed_flags.json_out, "JSON output");
  speed->add_option("--svg", speed_flags.svg_out, "SVG chart output");
  std::size_t mem_length = 512;
  auto* memory = bench->add_subcommand("memory", "parameter and activation accounting");
  memory->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  memory->add_option("--length", mem_length)->check(CLI::PositiveNumber);
  memory->add_option("--out", out_path, "JSON output (default stdout)");

  auto* stats = app.add_subcommand("stats", "corpus counts as JSON");
  stats->add_option("--data", data_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
    if (!log_level.empty()) {
      log::Level level;
      if (!log::parse_level(log_level, &level))
        throw CLI::ValidationError("--log-level", "unknown level '" + log_level + "'");
      log::set_level(level);
    }
    if (!lengths_text.empty()) speed_flags.lengths = parse_lengths(lengths_text);
    if (*ens_predict && !evaluate && out_path.empty())
      throw CLI::RequiredError("--out (or --eval)");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return run_train(train_flags, train_out);
    if (*eval) return run_eval(model_path, data_path);
    if (*predict) return run_predict(model_path, input_path, out_path);
    if (*align) return run_align(align_flags);
    if (*ens_train) return run_ensemble_train(ens_flags);
    if (*ens_predict) return run_ensemble_predict(manifest, input_path, out_path, evaluate);
    if (*speed) return run_bench_speed(speed_flags);
    if (*memory) return run_bench_memory(model_path, mem_length, out_path);
    if (*stats) return run_stats(data_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: config " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
