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

#ifndef MMX_CONFIG_H_
#define MMX_CONFIG_H_

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "mmx/corpus.h"
#include "mmx/meta.h"
#include "mmx/tagger.h"

// Run configuration for the command-line tool. Every violation is reported
// as a ConfigError carrying the JSON pointer of the offending field.
namespace mmx::config {

struct TableSource {
  std::string path;     // .vec text table
  std::string buckets;  // optional binary n-gram bucket sidecar
  int min_n = 3;
  int max_n = 6;
};

struct RunConfig {
  corpus::Scheme task = corpus::Scheme::kPos;
  std::string mode = "mme-attention";
  std::vector<TableSource> word_embeddings;
  std::vector<TableSource> subword_embeddings;
  std::string subword_vocab;
  int d_prime = 0;
  int subword_d_prime = 0;
  std::string hme_word_mode = "attention";
  bool scalar_attention = false;
  int char_dim = 50;
  int char_width = 3;
  int char_out_dim = 50;
  int scratch_dim = 0;
  bool normalize = true;
  tagger::TaggerConfig tagger;
};

// Relative paths resolve against `base_dir`; referenced files must exist.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

// Applies `{"tagger": {...}, "seed": n, "embedder": {"mode": ...}}`-shaped
// overrides on top of a parsed config; validated like the file itself.
void apply_overrides(RunConfig& config, const nlohmann::json& overrides);

// Loads the referenced tables and vocabulary.
meta::EmbedderSpec load_embedder_spec(const RunConfig& config);

}  // namespace mmx::config

#endif  // MMX_CONFIG_H_
