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

#ifndef MMX_CORPUS_H_
#define MMX_CORPUS_H_

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mmx::corpus {

enum class Scheme { kBioNer, kPos };

const char* scheme_name(Scheme s);

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  // Empty when the source file had two columns.
  std::vector<std::string> lang_ids;

  std::size_t size() const { return tokens.size(); }
  bool has_lang_ids() const { return !lang_ids.empty(); }
  bool operator==(const Sentence&) const = default;
};

// Immutable after construction.
class LabeledDataset {
 public:
  // Validates the invariants; label_set is first-occurrence ordered.
  LabeledDataset(std::vector<Sentence> sentences, Scheme scheme);

  const std::vector<Sentence>& sentences() const { return sentences_; }
  Scheme scheme() const { return scheme_; }
  const std::vector<std::string>& label_set() const { return label_set_; }
  std::size_t token_count() const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  std::vector<Sentence> sentences_;
  Scheme scheme_;
  std::vector<std::string> label_set_;
};

bool is_bio_label(std::string_view label);

// Reads `token<TAB>label` or `token<TAB>lang<TAB>label` rows, blank line
// between sentences, LF or CRLF. Without a forced scheme, the dataset is
// BIO-NER iff every label is `O` or `B-T`/`I-T`.
LabeledDataset parse_conll(std::istream& in, std::optional<Scheme> scheme = std::nullopt);
LabeledDataset parse_conll_file(const std::string& path, std::optional<Scheme> scheme = std::nullopt);

void write_conll(std::ostream& out, const LabeledDataset& dataset);

// Same as write_conll but with labels replaced by `labels`.
void write_conll(std::ostream& out, const LabeledDataset& dataset,
                 const std::vector<std::vector<std::string>>& labels);

// Emoji block table; bump the version whenever the ranges change.
inline constexpr int kEmojiTableVersion = 1;
bool is_emoji_codepoint(char32_t cp);

// Maps mentions/hashtags to <USR>, URLs to <URL>, all-emoji tokens to <EMOJI>.
std::string normalize_token(std::string_view token);

struct LanguageTokenCounts {
  std::map<std::string, std::size_t> counts;
  std::string ml;  // matrix language: majority tag
  std::string el;  // embedded language: runner-up tag
  bool tie = false;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
};

LanguageTokenCounts dataset_stats(const LabeledDataset& dataset);

struct SpanScore {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct Span {
  std::string type;
  std::size_t begin;  // inclusive token index
  std::size_t end;    // inclusive token index
  auto operator<=>(const Span&) const = default;
};

// Maximal BIO spans; an I-T that does not continue a T span opens a new one.
std::vector<Span> extract_spans(const std::vector<std::string>& labels);

using LabelSequences = std::vector<std::vector<std::string>>;

SpanScore span_micro_f1(const LabeledDataset& gold, const LabelSequences& pred);
double token_accuracy(const LabeledDataset& gold, const LabelSequences& pred);

// Micro-F1 for BIO-NER, accuracy for POS.
double dev_metric(const LabeledDataset& gold, const LabelSequences& pred);

// {"precision":…,"recall":…,"f1":…} with 6 decimals.
std::string metrics_json(const SpanScore& score);

}  // namespace mmx::corpus

#endif  // MMX_CORPUS_H_
