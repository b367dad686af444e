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

#ifndef MMX_ENSEMBLE_H_
#define MMX_ENSEMBLE_H_

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "mmx/corpus.h"
#include "mmx/tagger.h"

namespace mmx::ensemble {

// Per-token vote over member predictions for one sentence. Ties go to the
// tied label voted by the lowest-index member.
std::vector<std::string> majority_vote(const std::vector<std::vector<std::string>>& votes);

class Ensemble {
 public:
  explicit Ensemble(std::vector<std::unique_ptr<tagger::TaggerModel>> members,
                    std::vector<std::uint64_t> seeds = {});

  std::size_t size() const { return members_.size(); }
  const tagger::TaggerModel& member(std::size_t k) const { return *members_[k]; }
  std::uint64_t seed(std::size_t k) const { return seeds_[k]; }

  std::vector<std::string> predict(const std::vector<std::string>& tokens) const;
  corpus::LabelSequences predict(const corpus::LabelSequences& sentences) const;

 private:
  std::vector<std::unique_ptr<tagger::TaggerModel>> members_;
  std::vector<std::uint64_t> seeds_;
};

// Builds an untrained member whose initialization and shuffling follow `seed`.
using MemberFactory = std::function<std::unique_ptr<tagger::TaggerModel>(std::uint64_t seed)>;

struct EnsembleOptions {
  int k = 5;
  std::uint64_t base_seed = 1;
  // Upper bound on concurrently trained members.
  int jobs = 1;
  // Every member uses base_seed (degenerate ensemble).
  bool identical_seeds = false;
};

// Member k is trained with seed base_seed + k. The result does not depend on
// `jobs`. A failing member fails the whole call with its index in the message.
Ensemble train_ensemble(const MemberFactory& factory, const corpus::LabeledDataset& train_set,
                        const corpus::LabeledDataset& dev_set, const EnsembleOptions& options);

// Writes <dir>/m.<k>.mmx for every member plus the manifest at
// `manifest_path`; member paths in the manifest are relative to it.
nlohmann::json save_ensemble(const Ensemble& ensemble, const std::string& dir,
                             const std::string& manifest_path);
Ensemble load_ensemble(const std::string& manifest_path);

}  // namespace mmx::ensemble

#endif  // MMX_ENSEMBLE_H_
