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

#include "mmx/config.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "mmx/embeddings.h"
#include "mmx/error.h"
#include "mmx/log.h"

namespace mmx::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void allow_only(const json& obj, const std::string& ptr, const std::set<std::string>& keys) {
  if (!obj.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!keys.count(key)) throw ConfigError(ptr + "/" + key, "unknown field");
}

const json* field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

int get_int(const json& obj, const std::string& ptr, const char* key, int fallback, int min) {
  const json* v = field(obj, key);
  if (!v) return fallback;
  const std::string p = ptr + "/" + key;
  if (!v->is_number_integer()) throw ConfigError(p, "expected an integer");
  const auto x = v->get<long long>();
  if (x < min) throw ConfigError(p, "must be >= " + std::to_string(min));
  if (x > 1'000'000'000) throw ConfigError(p, "value too large");
  return static_cast<int>(x);
}

double get_double(const json& obj, const std::string& ptr, const char* key, double fallback) {
  const json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(ptr + "/" + key, "expected a number");
  const double x = v->get<double>();
  if (!(x >= 0)) throw ConfigError(ptr + "/" + key, "must be >= 0");
  return x;
}

bool get_bool(const json& obj, const std::string& ptr, const char* key, bool fallback) {
  const json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(ptr + "/" + key, "expected a boolean");
  return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& ptr, const char* key, const std::string& fallback) {
  const json* v = field(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(ptr + "/" + key, "expected a string");
  return v->get<std::string>();
}

std::string existing_file(const std::string& raw, const std::string& base, const std::string& ptr) {
  if (raw.empty()) throw ConfigError(ptr, "empty path");
  fs::path p(raw);
  if (p.is_relative()) p = fs::path(base) / p;
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw ConfigError(ptr, "file not found: " + p.string());
  return p.string();
}

std::vector<TableSource> parse_sources(const json& obj, const std::string& ptr, const char* key,
                                       const std::string& base) {
  std::vector<TableSource> out;
  const json* arr = field(obj, key);
  if (!arr) return out;
  const std::string p = ptr + "/" + key;
  if (!arr->is_array()) throw ConfigError(p, "expected an array");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const json& e = (*arr)[i];
    const std::string ep = p + "/" + std::to_string(i);
    TableSource s;
    if (e.is_string()) {
      s.path = existing_file(e.get<std::string>(), base, ep);
    } else {
      allow_only(e, ep, {"path", "buckets", "min_n", "max_n"});
      if (!field(e, "path")) throw ConfigError(ep + "/path", "required field missing");
      s.path = existing_file(get_string(e, ep, "path", ""), base, ep + "/path");
      if (field(e, "buckets")) s.buckets = existing_file(get_string(e, ep, "buckets", ""), base, ep + "/buckets");
      s.min_n = get_int(e, ep, "min_n", 3, 1);
      s.max_n = get_int(e, ep, "max_n", 6, 1);
      if (s.max_n < s.min_n) throw ConfigError(ep + "/max_n", "must be >= min_n");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void parse_tagger(const json& t, const std::string& ptr, tagger::TaggerConfig& c) {
  allow_only(t, ptr, {"layers", "heads", "hidden", "ff_dim", "lr", "batch_size", "early_stop_patience",
                      "max_epochs", "max_length", "clip_norm"});
  c.layers = get_int(t, ptr, "layers", c.layers, 0);
  c.heads = get_int(t, ptr, "heads", c.heads, 1);
  c.hidden = get_int(t, ptr, "hidden", c.hidden, 1);
  c.ff_dim = get_int(t, ptr, "ff_dim", c.ff_dim, 1);
  c.lr = get_double(t, ptr, "lr", c.lr);
  c.batch_size = get_int(t, ptr, "batch_size", c.batch_size, 1);
  c.early_stop_patience = get_int(t, ptr, "early_stop_patience", c.early_stop_patience, 1);
  c.max_epochs = get_int(t, ptr, "max_epochs", c.max_epochs, 1);
  c.max_length = static_cast<std::size_t>(get_int(t, ptr, "max_length", static_cast<int>(c.max_length), 1));
  c.clip_norm = get_double(t, ptr, "clip_norm", c.clip_norm);
  if (c.hidden % c.heads != 0) throw ConfigError(ptr + "/heads", "must divide hidden");
}

void check_mode_requirements(const RunConfig& c) {
  const std::string p = "/embedder";
  if (c.mode == "scratch") return;
  if (c.word_embeddings.empty()) throw ConfigError(p + "/word_embeddings", c.mode + " needs at least one word table");
  if (c.mode == "word-single" && c.word_embeddings.size() != 1)
    throw ConfigError(p + "/word_embeddings", "word-single takes exactly one table");
  if (c.mode == "hme") {
    if (c.subword_embeddings.empty()) throw ConfigError(p + "/subword_embeddings", "hme needs a subword table");
    if (c.subword_vocab.empty()) throw ConfigError(p + "/subword_vocab", "hme needs a subword vocabulary");
  }
}

void parse_embedder(const json& e, const std::string& p, const std::string& base, RunConfig& c) {
  allow_only(e, p, {"mode", "word_embeddings", "subword_embeddings", "subword_vocab", "d_prime",
                    "subword_d_prime", "hme_word_mode", "scalar_attention", "char", "scratch_dim", "normalize"});
  c.mode = get_string(e, p, "mode", c.mode);
  if (!meta::is_known_mode(c.mode)) throw ConfigError(p + "/mode", "unknown mode '" + c.mode + "'");
  c.word_embeddings = parse_sources(e, p, "word_embeddings", base);
  c.subword_embeddings = parse_sources(e, p, "subword_embeddings", base);
  if (field(e, "subword_vocab"))
    c.subword_vocab = existing_file(get_string(e, p, "subword_vocab", ""), base, p + "/subword_vocab");
  c.d_prime = get_int(e, p, "d_prime", 0, 0);
  c.subword_d_prime = get_int(e, p, "subword_d_prime", 0, 0);
  c.hme_word_mode = get_string(e, p, "hme_word_mode", c.hme_word_mode);
  if (c.hme_word_mode != "concat" && c.hme_word_mode != "linear" && c.hme_word_mode != "attention")
    throw ConfigError(p + "/hme_word_mode", "expected concat, linear or attention");
  c.scalar_attention = get_bool(e, p, "scalar_attention", false);
  if (const json* ch = field(e, "char")) {
    allow_only(*ch, p + "/char", {"dim", "width", "out_dim"});
    c.char_dim = get_int(*ch, p + "/char", "dim", c.char_dim, 1);
    c.char_width = get_int(*ch, p + "/char", "width", c.char_width, 1);
    c.char_out_dim = get_int(*ch, p + "/char", "out_dim", c.char_out_dim, 1);
  }
  c.scratch_dim = get_int(e, p, "scratch_dim", 0, 0);
  c.normalize = get_bool(e, p, "normalize", true);
}

}  // namespace

RunConfig parse_config(const json& j, const std::string& base_dir) {
  allow_only(j, "", {"task", "seed", "embedder", "tagger"});
  RunConfig c;
  const std::string task = get_string(j, "", "task", "");
  if (task.empty()) throw ConfigError("/task", "required field missing");
  if (task == "ner")
    c.task = corpus::Scheme::kBioNer;
  else if (task == "pos")
    c.task = corpus::Scheme::kPos;
  else
    throw ConfigError("/task", "expected \"ner\" or \"pos\"");
  if (const json* seed = field(j, "seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0))
      throw ConfigError("/seed", "expected a non-negative integer");
    c.tagger.seed = seed->get<std::uint64_t>();
  }
  const json* e = field(j, "embedder");
  if (!e) throw ConfigError("/embedder", "required field missing");
  parse_embedder(*e, "/embedder", base_dir, c);
  if (const json* t = field(j, "tagger")) parse_tagger(*t, "/tagger", c.tagger);
  check_mode_requirements(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path().string());
}

void apply_overrides(RunConfig& c, const json& o) {
  allow_only(o, "", {"seed", "embedder", "tagger"});
  if (const json* seed = field(o, "seed")) {
    if (!seed->is_number_integer() || seed->get<long long>() < 0)
      throw ConfigError("/seed", "expected a non-negative integer");
    c.tagger.seed = seed->get<std::uint64_t>();
  }
  if (const json* e = field(o, "embedder")) {
    allow_only(*e, "/embedder", {"mode"});
    c.mode = get_string(*e, "/embedder", "mode", c.mode);
    if (!meta::is_known_mode(c.mode)) throw ConfigError("/embedder/mode", "unknown mode '" + c.mode + "'");
  }
  if (const json* t = field(o, "tagger")) parse_tagger(*t, "/tagger", c.tagger);
  check_mode_requirements(c);
}

namespace {

meta::TablePtr load_source(const TableSource& s) {
  auto table = std::make_shared<embeddings::EmbeddingTable>(embeddings::load_table_file(s.path));
  if (table->duplicates() > 0)
    MMX_LOG(kWarn, s.path << ": " << table->duplicates() << " duplicate tokens, last occurrence kept");
  if (!s.buckets.empty()) {
    embeddings::BucketMatrix b = embeddings::read_buckets_file(s.buckets);
    if (b.dim != table->dim())
      throw Error(s.buckets + ": bucket dim " + std::to_string(b.dim) + " differs from table dim " +
                  std::to_string(table->dim()));
    table->set_buckets(std::move(b.values), s.min_n, s.max_n);
  }
  return table;
}

}  // namespace

meta::EmbedderSpec load_embedder_spec(const RunConfig& c) {
  meta::EmbedderSpec spec;
  spec.mode = c.mode;
  for (const auto& s : c.word_embeddings) spec.word_tables.push_back(load_source(s));
  for (const auto& s : c.subword_embeddings) spec.subword_tables.push_back(load_source(s));
  if (!c.subword_vocab.empty())
    spec.subword_vocab =
        std::make_shared<embeddings::SubwordVocab>(embeddings::load_subword_vocab_file(c.subword_vocab));
  spec.d_prime = c.d_prime;
  spec.subword_d_prime = c.subword_d_prime;
  spec.hme_word_mode = c.hme_word_mode;
  spec.scalar_attention = c.scalar_attention;
  spec.char_dim = c.char_dim;
  spec.char_width = c.char_width;
  spec.char_out_dim = c.char_out_dim;
  spec.scratch_dim = c.scratch_dim;
  spec.normalize = c.normalize;
  return spec;
}

}  // namespace mmx::config
