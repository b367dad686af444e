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

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>

#include "mmx/ensemble.h"
#include "mmx/error.h"
#include "mmx/rng.h"
#include "separable.h"

using namespace mmx;
using namespace mmx::ensemble;

namespace {

// Counts votes, then walks members in index order and returns the first vote
// that reaches the top count.
std::string oracle_vote(const std::vector<std::string>& votes) {
  std::map<std::string, int> count;
  int top = 0;
  for (const auto& v : votes) top = std::max(top, ++count[v]);
  for (const auto& v : votes)
    if (count[v] == top) return v;
  return {};
}

tagger::TaggerConfig member_config() {
  tagger::TaggerConfig c;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 8;
  c.ff_dim = 12;
  c.batch_size = 4;
  c.max_epochs = 6;
  c.early_stop_patience = 6;
  return c;
}

MemberFactory factory_for(const testing::Separable& s) {
  return [&s](std::uint64_t seed) {
    auto c = member_config();
    c.seed = seed;
    return std::make_unique<tagger::TaggerModel>(c, testing::word_spec(s.table), std::vector<std::string>{"A", "B"},
                                                 corpus::Scheme::kPos, std::vector<std::string>{});
  };
}

corpus::LabelSequences tokens_of(const corpus::LabeledDataset& d) {
  corpus::LabelSequences out;
  for (const auto& s : d.sentences()) out.push_back(s.tokens);
  return out;
}

}  // namespace

TEST_CASE("majority vote examples") {
  CHECK(majority_vote({{"A"}, {"A"}, {"B"}}) == std::vector<std::string>{"A"});
  CHECK(majority_vote({{"X", "Y"}}) == std::vector<std::string>{"X", "Y"});
  CHECK(majority_vote({{"A"}, {"B"}}) == std::vector<std::string>{"A"});
  CHECK(majority_vote({{"B"}, {"A"}}) == std::vector<std::string>{"B"});
  CHECK(majority_vote({{"C"}, {"A"}, {"B"}, {"B"}, {"A"}}) == std::vector<std::string>{"A"});
  CHECK_THROWS_AS(majority_vote({{"A", "B"}, {"A"}}), Error);
}

TEST_CASE("majority vote against an oracle") {
  CounterRng rng(8);
  const std::vector<std::string> labels = {"O", "B-PER", "I-PER", "B-LOC"};
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 1 + rng.below(6), n = 1 + rng.below(5);
    std::vector<std::vector<std::string>> votes(k, std::vector<std::string>(n));
    for (auto& m : votes)
      for (auto& l : m) l = labels[rng.below(labels.size())];
    const auto out = majority_vote(votes);
    REQUIRE(out.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::string> column;
      for (const auto& m : votes) column.push_back(m[i]);
      CHECK(out[i] == oracle_vote(column));
      CHECK(std::find(column.begin(), column.end(), out[i]) != column.end());
    }
  }
}

TEST_CASE("odd ensembles without ties ignore member order") {
  CounterRng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::vector<std::string>> votes(5, std::vector<std::string>(1));
    for (auto& m : votes) m[0] = rng.below(2) ? "A" : "B";
    auto shuffled = votes;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[2]);
    CHECK(majority_vote(votes) == majority_vote(shuffled));
  }
}

TEST_CASE("ensemble training") {
  const auto s = testing::make_separable();
  const auto factory = factory_for(s);

  EnsembleOptions serial{.k = 3, .base_seed = 10, .jobs = 1};
  EnsembleOptions parallel = serial;
  parallel.jobs = 3;
  const Ensemble a = train_ensemble(factory, s.train, s.dev, serial);
  const Ensemble b = train_ensemble(factory, s.train, s.dev, parallel);
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.seed(k) == 10 + k);
    CHECK(tagger::parameter_hash(a.member(k)) == tagger::parameter_hash(b.member(k)));
  }

  SUBCASE("vote is at least as good as the median member") {
    std::vector<double> scores;
    for (std::size_t k = 0; k < a.size(); ++k)
      scores.push_back(corpus::dev_metric(s.dev, a.member(k).predict(tokens_of(s.dev))));
    std::sort(scores.begin(), scores.end());
    CHECK(corpus::dev_metric(s.dev, a.predict(tokens_of(s.dev))) >= scores[1]);
  }

  SUBCASE("identical seeds collapse to one model") {
    EnsembleOptions same = serial;
    same.identical_seeds = true;
    const Ensemble e = train_ensemble(factory, s.train, s.dev, same);
    auto single = factory(10);
    tagger::train(*single, s.train, s.dev);
    CHECK(e.predict(tokens_of(s.dev)) == single->predict(tokens_of(s.dev)));
    CHECK(tagger::parameter_hash(e.member(2)) == tagger::parameter_hash(*single));
  }

  SUBCASE("save and load") {
    const auto dir = std::filesystem::temp_directory_path() / "mmx_ensemble_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto manifest = save_ensemble(a, (dir / "members").string(), (dir / "ens.json").string());
    CHECK(manifest["k"] == 3);
    CHECK(manifest["tie_rule"] == "lowest-member-index");
    CHECK(std::filesystem::exists(dir / "members" / "m.2.mmx"));
    const Ensemble loaded = load_ensemble((dir / "ens.json").string());
    CHECK(loaded.size() == 3);
    CHECK(loaded.seed(1) == 11);
    CHECK(loaded.predict(tokens_of(s.dev)) == a.predict(tokens_of(s.dev)));
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("a failing member names its index") {
  const auto s = testing::make_separable();
  const auto good = factory_for(s);
  MemberFactory factory = [&](std::uint64_t seed) -> std::unique_ptr<tagger::TaggerModel> {
    if (seed == 3) throw Error("boom");
    return good(seed);
  };
  try {
    train_ensemble(factory, s.train, s.dev, EnsembleOptions{.k = 3, .base_seed = 1, .jobs = 2});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("member 2") != std::string::npos);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("members must share labels") {
  const auto s = testing::make_separable();
  std::vector<std::unique_ptr<tagger::TaggerModel>> members;
  members.push_back(factory_for(s)(1));
  members.push_back(std::make_unique<tagger::TaggerModel>(member_config(), testing::word_spec(s.table),
                                                          std::vector<std::string>{"B", "A"},
                                                          corpus::Scheme::kPos, std::vector<std::string>{}));
  CHECK_THROWS_AS(Ensemble(std::move(members)), Error);
}
