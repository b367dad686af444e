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

#ifndef MMX_SYNTH_H_
#define MMX_SYNTH_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmx/corpus.h"
#include "mmx/embeddings.h"
#include "mmx/meta.h"
#include "mmx/tagger.h"

// Deterministic stand-ins for the data a real run would load from disk: a
// code-switched toy corpus with its embedding tables, and fixed-size
// resources for benchmarking and parameter accounting.
namespace mmx::synth {

// Word classes; a NOUN right after an ADP is labelled OBJ.
inline const std::vector<std::string> kClasses = {"NOUN", "VERB", "ADJ", "ADP"};
inline const std::string kObjectLabel = "OBJ";

struct CorpusOptions {
  std::size_t lexicon_size = 200;  // per language
  std::size_t train_sentences = 300;
  std::size_t dev_sentences = 100;
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  double switch_probability = 0.3;
  std::uint64_t seed = 20200705;
};

struct SyntheticCorpus {
  corpus::LabeledDataset train;
  corpus::LabeledDataset dev;
  std::vector<std::string> ml_words;  // matrix-language lexicon
  std::vector<std::string> el_words;  // embedded-language lexicon
  std::map<std::string, int> word_class;
  std::vector<std::string> subword_units;
};

SyntheticCorpus make_corpus(const CorpusOptions& options = {});

struct Resources {
  std::vector<meta::TablePtr> word_tables;  // [0] is the matrix-language table
  std::vector<meta::TablePtr> subword_tables;
  std::shared_ptr<const embeddings::SubwordVocab> subword_vocab;
  std::vector<std::string> training_tokens;
  std::vector<std::string> labels;
};

struct ResourceOptions {
  int ml_dim = 32;
  int el_dim = 24;
  int subword_dim = 16;
  std::size_t buckets = 1009;
  double noise = 0.5;
  std::uint64_t seed = 7;
};

// Monolingual tables (class-clustered vectors plus random n-gram buckets) and
// a subword table over the corpus's syllable units.
Resources make_resources(const SyntheticCorpus& corpus, const ResourceOptions& options = {});

struct ReferenceOptions {
  std::size_t words = 1000;  // per word table
  int word_dim = 300;
  std::size_t buckets = 2000;
  std::vector<int> subword_dims = {100, 300};
  std::size_t labels = 9;
  std::uint64_t seed = 11;
};

// Paper-scale shapes with random contents. Words use only a-z and together
// cover all 26 letters; the subword vocabulary is the 26 letters plus the
// first 100 letter bigrams in lexicographic order (126 units).
Resources reference_resources(const ReferenceOptions& options = {});

// word-single, mme-concat, mme-linear, mme-attention, hme, scratch
const std::vector<std::string>& preset_names();

// Presets map onto embedder modes; scratch-768 and scratch-768-2l are the
// large scratch transformer presets and share the scratch embedder.
meta::EmbedderSpec preset_spec(const std::string& preset, const Resources& resources);

enum class Scale { kToy, kReference };
tagger::TaggerConfig preset_config(const std::string& preset, Scale scale, std::uint64_t seed = 1);

std::unique_ptr<tagger::TaggerModel> build_preset(const std::string& preset, Scale scale,
                                                  const Resources& resources, std::uint64_t seed = 1);

}  // namespace mmx::synth

#endif  // MMX_SYNTH_H_
