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

#ifndef MMX_TAGGER_H_
#define MMX_TAGGER_H_

#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmx/corpus.h"
#include "mmx/meta.h"
#include "mmx/tensor.h"

namespace mmx::tagger {

struct TaggerConfig {
  int layers = 4;
  int heads = 4;
  int hidden = 200;
  int ff_dim = 800;
  double lr = 0.1;
  int batch_size = 32;
  int early_stop_patience = 10;
  int max_epochs = 200;
  std::uint64_t seed = 1;
  std::size_t max_length = 4096;
  double clip_norm = 5.0;
  double ln_eps = 1e-5;

  void validate() const;
  nlohmann::json to_json() const;
  static TaggerConfig from_json(const nlohmann::json& j);
};

// Pre-norm transformer encoder with sinusoidal positions.
class Encoder {
 public:
  Encoder(const TaggerConfig& config, int d_in, nn::ParameterStore& store, std::uint64_t seed);

  // x: n x d_in. `valid`, when given, marks the non-padding rows; padding
  // rows are excluded as attention keys.
  nn::Var forward(nn::Graph& g, const nn::Var& x, const std::vector<bool>* valid = nullptr) const;

  int d_in() const { return d_in_; }

 private:
  struct Linear {
    nn::Parameter* weight;
    nn::Parameter* bias;
  };
  struct Norm {
    nn::Parameter* gain;
    nn::Parameter* bias;
  };
  struct Block {
    Norm ln1, ln2;
    Linear q, k, v, out, ff1, ff2;
  };

  Linear linear(nn::ParameterStore& store, const std::string& name, int in, int out, std::uint64_t seed);
  Norm norm(nn::ParameterStore& store, const std::string& name, int dim);
  nn::Var apply(nn::Graph& g, const Linear& l, const nn::Var& x) const;
  nn::Var apply(nn::Graph& g, const Norm& n, const nn::Var& x) const;

  TaggerConfig config_;
  int d_in_;
  Linear input_;
  std::vector<Block> blocks_;
  Norm final_;
};

// n x hidden sinusoidal table.
std::vector<double> sinusoidal_positions(std::size_t n, std::size_t hidden);

struct ParamCounts {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  std::size_t bytes_32bit = 0;
  // Group name -> element count; groups are parameter names up to the
  // second dot, and `table.<name>` for pretrained tables.
  std::map<std::string, std::size_t> groups;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double dev_metric = 0;
  int clipped_batches = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_dev_metric = 0;
};

class TaggerModel {
 public:
  TaggerModel(const TaggerConfig& config, const meta::EmbedderSpec& spec,
              std::vector<std::string> labels, corpus::Scheme scheme,
              const std::vector<std::string>& training_tokens);
  TaggerModel(const TaggerModel&) = delete;
  TaggerModel& operator=(const TaggerModel&) = delete;

  const TaggerConfig& config() const { return config_; }
  const std::vector<std::string>& labels() const { return labels_; }
  corpus::Scheme scheme() const { return scheme_; }
  const meta::Embedder& embedder() const { return *embedder_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const TrainHistory& history() const { return history_; }
  void set_history(TrainHistory h) { history_ = std::move(h); }

  meta::Prepared prepare(const std::vector<std::string>& tokens) const;

  // Embed + encode + emission projection: words x labels.
  nn::Var emissions(nn::Graph& g, const meta::Prepared& p, const std::vector<bool>* valid = nullptr,
                    meta::AttentionTrace* trace = nullptr) const;
  nn::Var loss(nn::Graph& g, const meta::Prepared& p, const std::vector<int>& gold) const;

  std::vector<int> decode(const meta::Prepared& p) const;
  std::vector<std::string> predict(const std::vector<std::string>& tokens) const;
  corpus::LabelSequences predict(const corpus::LabelSequences& sentences) const;

  int label_index(const std::string& label) const;
  std::vector<double> transitions() const;
  ParamCounts count_params() const;

  // Serialization support.
  nlohmann::json embedder_description() const { return embedder_->describe(); }
  static std::unique_ptr<TaggerModel> restore(const TaggerConfig& config,
                                              const nlohmann::json& embedder_description,
                                              std::vector<std::string> labels, corpus::Scheme scheme,
                                              nn::ParameterStore params,
                                              const std::unordered_map<std::string, meta::TablePtr>& tables);

 private:
  TaggerModel() = default;
  void build_head();

  TaggerConfig config_;
  std::vector<std::string> labels_;
  std::map<std::string, int> label_index_;
  corpus::Scheme scheme_ = corpus::Scheme::kPos;
  nn::ParameterStore store_;
  std::unique_ptr<meta::Embedder> embedder_;
  std::unique_ptr<Encoder> encoder_;
  nn::Parameter* emit_ = nullptr;
  nn::Parameter* trans_ = nullptr;
  TrainHistory history_;
};

struct TrainOptions {
  // Called after every epoch; return false to stop.
  std::function<bool(const EpochRecord&)> on_epoch;
};

// Minibatch SGD on the mean CRF loss with best-dev snapshotting and early
// stopping. Leaves the model at its best snapshot.
TrainHistory train(TaggerModel& model, const corpus::LabeledDataset& train_set,
                   const corpus::LabeledDataset& dev_set, const TrainOptions& options = {});

// Bit-exact fingerprint of all parameter values (FNV-1a over the doubles).
std::uint64_t parameter_hash(const TaggerModel& model);

// "MMX1", u32 header length, JSON header, float32 blobs in manifest order.
void save_model(const TaggerModel& model, const std::string& path);
std::unique_ptr<TaggerModel> load_model(const std::string& path);
void save_model(const TaggerModel& model, std::ostream& out);
std::unique_ptr<TaggerModel> load_model(std::istream& in);

}  // namespace mmx::tagger

#endif  // MMX_TAGGER_H_
