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

#ifndef MMX_META_H_
#define MMX_META_H_

#include <json.hpp>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmx/embeddings.h"
#include "mmx/tensor.h"

namespace mmx::meta {

using TablePtr = std::shared_ptr<const embeddings::EmbeddingTable>;

enum class Mode { kConcat, kLinear, kAttention };

const char* mode_name(Mode m);
Mode parse_mode(std::string_view name);

// Attention weights per source: weights[j] is tokens x dim row-major. For the
// scalar variant dim is 1.
struct AttentionTrace {
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> weights;
};

// x_1 | x_2 | ... along columns.
nn::Var combine_concat(const std::vector<nn::Var>& xs);

// sum_j x_j W_j, with W_j stored d_j x d'.
nn::Var combine_linear(const std::vector<nn::Var>& xs, const std::vector<nn::Var>& projections);

// Projects each source, weights them per dimension with a softmax over
// sources of tanh(x'_j), and sums. With `scalar_scorer` (d' x 1) the weight
// is one scalar per token and source instead.
nn::Var combine_attention(const std::vector<nn::Var>& xs, const std::vector<nn::Var>& projections,
                          AttentionTrace* trace = nullptr, const nn::Var* scalar_scorer = nullptr);

// Stable per-parameter seed derived from a model seed and a parameter name.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

// Word-level meta-embedding over frozen tables.
class MetaEmbedder {
 public:
  // Binds to parameters `<name>.proj.<j>` (and `<name>.scorer`) in `store`,
  // creating and initializing them when absent. d_prime is ignored for concat.
  MetaEmbedder(std::string name, std::vector<TablePtr> sources, Mode mode, int d_prime,
               bool scalar_attention, nn::ParameterStore& store, std::uint64_t seed);

  const std::string& name() const { return name_; }
  Mode mode() const { return mode_; }
  int d_prime() const { return d_prime_; }
  bool scalar_attention() const { return scorer_ != nullptr; }
  const std::vector<TablePtr>& sources() const { return sources_; }
  int output_dim() const;

  // One tokens x d_j constant per source.
  std::vector<nn::Var> lookup(nn::Graph& g, const std::vector<std::string>& tokens) const;
  nn::Var combine(nn::Graph& g, const std::vector<nn::Var>& xs, AttentionTrace* trace = nullptr) const;
  nn::Var embed(nn::Graph& g, const std::vector<std::string>& tokens,
                AttentionTrace* trace = nullptr) const;

 private:
  std::string name_;
  std::vector<TablePtr> sources_;
  Mode mode_;
  int d_prime_;
  std::vector<nn::Parameter*> projections_;
  nn::Parameter* scorer_ = nullptr;
};

// Trainable character embeddings, same-padded 1-D convolution, max over
// positions. Character id 0 is <unk>.
class CharEncoder {
 public:
  CharEncoder(std::string name, std::vector<std::string> alphabet, int char_dim, int width,
              int out_dim, nn::ParameterStore& store, std::uint64_t seed);

  const std::vector<std::string>& alphabet() const { return alphabet_; }
  int char_dim() const { return char_dim_; }
  int width() const { return width_; }
  int out_dim() const { return out_dim_; }

  std::vector<std::size_t> char_ids(std::string_view token) const;
  // 1 x out_dim
  nn::Var encode(nn::Graph& g, const std::vector<std::size_t>& ids) const;

 private:
  std::string name_;
  std::vector<std::string> alphabet_;
  std::unordered_map<std::string, std::size_t> index_;
  int char_dim_, width_, out_dim_;
  nn::Parameter* emb_;
  nn::Parameter* conv_w_;
  nn::Parameter* conv_b_;
};

// Preprocessing output; everything the forward pass needs that is not a
// model computation (normalization, segmentation, id mapping).
struct Prepared {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::string>> subwords;
  std::vector<std::vector<std::size_t>> chars;
  std::vector<std::size_t> units;
  // Encoder row of each token when the encoder runs over subword units.
  std::vector<std::size_t> word_starts;

  std::size_t words() const { return tokens.size(); }
  // Rows fed to the encoder.
  std::size_t length() const { return units.empty() ? tokens.size() : units.size(); }
};

// Everything needed to construct an embedder.
struct EmbedderSpec {
  // word-single | mme-concat | mme-linear | mme-attention | hme | scratch
  std::string mode = "mme-attention";
  std::vector<TablePtr> word_tables;
  std::vector<TablePtr> subword_tables;
  std::shared_ptr<const embeddings::SubwordVocab> subword_vocab;
  int d_prime = 0;          // 0: largest source dim
  int subword_d_prime = 0;  // 0: largest subword source dim
  std::string hme_word_mode = "attention";
  bool scalar_attention = false;
  int char_dim = 50;
  int char_width = 3;
  int char_out_dim = 50;
  int scratch_dim = 0;  // 0: tagger hidden size
  bool normalize = true;
};

bool is_known_mode(std::string_view mode);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string kind() const = 0;
  virtual int output_dim() const = 0;
  // True when encoder rows are subword units rather than words.
  virtual bool subword_positions() const { return false; }
  virtual Prepared prepare(const std::vector<std::string>& tokens) const = 0;
  virtual nn::Var forward(nn::Graph& g, const Prepared& p, AttentionTrace* trace = nullptr) const = 0;
  // Frozen pretrained tables with the names used in the model file.
  virtual std::vector<std::pair<std::string, TablePtr>> tables() const = 0;
  // Kind-specific settings and vocabularies (not table contents).
  virtual nlohmann::json describe() const = 0;
};

// `training_tokens` seeds the character alphabet (hme) and the unit
// inventory (scratch, when no subword vocabulary is given).
std::unique_ptr<Embedder> build_embedder(const EmbedderSpec& spec,
                                         const std::vector<std::string>& training_tokens,
                                         int hidden, nn::ParameterStore& store, std::uint64_t seed);

// Rebuilds from describe() output; `tables` maps the names from tables().
std::unique_ptr<Embedder> restore_embedder(const nlohmann::json& description,
                                           const std::unordered_map<std::string, TablePtr>& tables,
                                           nn::ParameterStore& store);

}  // namespace mmx::meta

#endif  // MMX_META_H_
