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

#include "mmx/ensemble.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "mmx/error.h"
#include "mmx/log.h"

namespace mmx::ensemble {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> majority_vote(const std::vector<std::vector<std::string>>& votes) {
  if (votes.empty()) throw Error("majority_vote: no members");
  const std::size_t n = votes[0].size();
  for (std::size_t k = 1; k < votes.size(); ++k)
    if (votes[k].size() != n)
      throw Error("majority_vote: member " + std::to_string(k) + " has " + std::to_string(votes[k].size()) +
                  " labels, member 0 has " + std::to_string(n));
  std::vector<std::string> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string_view, std::size_t> count;
    for (const auto& v : votes) ++count[v[i]];
    std::size_t best = 0;
    for (const auto& [label, c] : count) best = std::max(best, c);
    // First member (by index) whose label reaches the top count.
    for (const auto& v : votes)
      if (count[v[i]] == best) {
        out[i] = v[i];
        break;
      }
  }
  return out;
}

Ensemble::Ensemble(std::vector<std::unique_ptr<tagger::TaggerModel>> members, std::vector<std::uint64_t> seeds)
    : members_(std::move(members)), seeds_(std::move(seeds)) {
  if (members_.empty()) throw Error("ensemble needs at least one member");
  if (seeds_.empty())
    for (const auto& m : members_) seeds_.push_back(m->config().seed);
  if (seeds_.size() != members_.size()) throw Error("ensemble seed list does not match member count");
  for (std::size_t k = 1; k < members_.size(); ++k)
    if (members_[k]->labels() != members_[0]->labels())
      throw Error("ensemble member " + std::to_string(k) + " has a different label set");
}

std::vector<std::string> Ensemble::predict(const std::vector<std::string>& tokens) const {
  std::vector<std::vector<std::string>> votes;
  votes.reserve(members_.size());
  for (const auto& m : members_) votes.push_back(m->predict(tokens));
  return majority_vote(votes);
}

corpus::LabelSequences Ensemble::predict(const corpus::LabelSequences& sentences) const {
  corpus::LabelSequences out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(predict(s));
  return out;
}

Ensemble train_ensemble(const MemberFactory& factory, const corpus::LabeledDataset& train_set,
                        const corpus::LabeledDataset& dev_set, const EnsembleOptions& options) {
  if (options.k < 1) throw Error("ensemble size must be >= 1");
  const std::size_t k = static_cast<std::size_t>(options.k);
  std::vector<std::uint64_t> seeds(k);
  for (std::size_t i = 0; i < k; ++i) seeds[i] = options.identical_seeds ? options.base_seed : options.base_seed + i;

  std::vector<std::unique_ptr<tagger::TaggerModel>> members(k);
  std::vector<std::exception_ptr> errors(k);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < k;) {
      try {
        auto m = factory(seeds[i]);
        tagger::train(*m, train_set, dev_set);
        MMX_LOG(kInfo, "member " << i << " (seed " << seeds[i] << ") best dev " << m->history().best_dev_metric);
        members[i] = std::move(m);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.jobs)), 1, k);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error("ensemble member " + std::to_string(i) + " failed: " + e.what());
    }
  }
  return Ensemble(std::move(members), std::move(seeds));
}

json save_ensemble(const Ensemble& ensemble, const std::string& dir, const std::string& manifest_path) {
  fs::create_directories(dir);
  const fs::path manifest_dir = fs::absolute(manifest_path).parent_path();
  fs::create_directories(manifest_dir);
  json members = json::array();
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const fs::path file = fs::path(dir) / ("m." + std::to_string(k) + ".mmx");
    tagger::save_model(ensemble.member(k), file.string());
    std::ostringstream hash;
    hash << std::hex << tagger::parameter_hash(ensemble.member(k));
    members.push_back({{"index", k},
                       {"seed", ensemble.seed(k)},
                       {"path", fs::relative(fs::absolute(file), manifest_dir).generic_string()},
                       {"best_epoch", ensemble.member(k).history().best_epoch},
                       {"best_dev_metric", ensemble.member(k).history().best_dev_metric},
                       {"parameter_hash", hash.str()}});
  }
  json manifest = {{"format", "mmx-ensemble"},
                   {"version", 1},
                   {"k", ensemble.size()},
                   {"vote", "majority"},
                   {"tie_rule", "lowest-member-index"},
                   {"labels", ensemble.member(0).labels()},
                   {"members", members}};
  std::ofstream out(manifest_path);
  if (!out) throw Error("cannot write " + manifest_path);
  out << manifest.dump(2) << "\n";
  if (!out) throw Error("failed writing " + manifest_path);
  return manifest;
}

Ensemble load_ensemble(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open " + manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(manifest_path + ": " + e.what());
  }
  const fs::path base = fs::absolute(manifest_path).parent_path();
  std::vector<std::unique_ptr<tagger::TaggerModel>> members;
  std::vector<std::uint64_t> seeds;
  for (const auto& m : manifest.at("members")) {
    members.push_back(tagger::load_model((base / m.at("path").get<std::string>()).string()));
    seeds.push_back(m.at("seed").get<std::uint64_t>());
  }
  return Ensemble(std::move(members), std::move(seeds));
}

}  // namespace mmx::ensemble
