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

#ifndef MMX_TESTS_SEPARABLE_H_
#define MMX_TESTS_SEPARABLE_H_

#include <memory>
#include <string>
#include <vector>

#include "mmx/corpus.h"
#include "mmx/meta.h"
#include "mmx/rng.h"

namespace mmx::testing {

// Two lexicons whose vectors sit in opposite half-spaces; the label of every
// token is the lexicon it comes from.
struct Separable {
  meta::TablePtr table;
  std::vector<std::string> words_a, words_b;
  corpus::LabeledDataset train{{}, corpus::Scheme::kPos};
  corpus::LabeledDataset dev{{}, corpus::Scheme::kPos};
};

inline Separable make_separable() {
  Separable s;
  CounterRng rng(42);
  std::vector<std::string> words;
  std::vector<double> m;
  for (int i = 0; i < 10; ++i) {
    s.words_a.push_back("wa" + std::to_string(i));
    s.words_b.push_back("wb" + std::to_string(i));
  }
  for (int side = 0; side < 2; ++side)
    for (const auto& w : side == 0 ? s.words_a : s.words_b) {
      words.push_back(w);
      m.push_back(side == 0 ? 2.0 : -2.0);
      for (int k = 0; k < 3; ++k) m.push_back(0.3 * rng.normal());
    }
  s.table = std::make_shared<embeddings::EmbeddingTable>(4, words, m);
  auto make = [&](std::size_t count) {
    std::vector<corpus::Sentence> out;
    for (std::size_t i = 0; i < count; ++i) {
      corpus::Sentence sent;
      const std::size_t len = 3 + rng.below(4);
      for (std::size_t t = 0; t < len; ++t) {
        const bool a = rng.below(2) == 0;
        sent.tokens.push_back((a ? s.words_a : s.words_b)[rng.below(10)]);
        sent.labels.push_back(a ? "A" : "B");
      }
      out.push_back(std::move(sent));
    }
    return corpus::LabeledDataset(std::move(out), corpus::Scheme::kPos);
  };
  s.train = make(20);
  s.dev = make(10);
  return s;
}

inline meta::EmbedderSpec word_spec(const meta::TablePtr& table) {
  meta::EmbedderSpec spec;
  spec.mode = "word-single";
  spec.word_tables = {table};
  spec.normalize = false;
  return spec;
}

}  // namespace mmx::testing

#endif  // MMX_TESTS_SEPARABLE_H_
