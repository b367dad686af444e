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

#include "mmx/corpus.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "mmx/error.h"
#include "mmx/utf8.h"

namespace mmx::corpus {

const char* scheme_name(Scheme s) { return s == Scheme::kBioNer ? "bio-ner" : "pos"; }

bool is_bio_label(std::string_view label) {
  if (label == "O") return true;
  return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-';
}

LabeledDataset::LabeledDataset(std::vector<Sentence> sentences, Scheme scheme)
    : sentences_(std::move(sentences)), scheme_(scheme) {
  std::unordered_set<std::string> seen;
  for (std::size_t s = 0; s < sentences_.size(); ++s) {
    const Sentence& sent = sentences_[s];
    if (sent.tokens.empty()) throw Error("sentence " + std::to_string(s) + " is empty");
    if (sent.labels.size() != sent.tokens.size())
      throw Error("sentence " + std::to_string(s) + ": label count differs from token count");
    if (!sent.lang_ids.empty() && sent.lang_ids.size() != sent.tokens.size())
      throw Error("sentence " + std::to_string(s) + ": language id count differs from token count");
    for (const auto& label : sent.labels) {
      if (scheme_ == Scheme::kBioNer && !is_bio_label(label))
        throw Error("sentence " + std::to_string(s) + ": '" + label + "' is not a BIO label");
      if (seen.insert(label).second) label_set_.push_back(label);
    }
  }
}

std::size_t LabeledDataset::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences_) n += s.size();
  return n;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

LabeledDataset parse_conll(std::istream& in, std::optional<Scheme> scheme) {
  std::vector<Sentence> sentences;
  Sentence current;
  std::size_t current_cols = 0;
  std::string line;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = Sentence{};
    current_cols = 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      flush();
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() != 2 && cols.size() != 3)
      throw ParseError("expected 2 or 3 tab-separated columns, got " + std::to_string(cols.size()),
                       line_no);
    if (current_cols != 0 && cols.size() != current_cols)
      throw ParseError("column count changes inside a sentence", line_no);
    for (auto c : cols)
      if (c.empty()) throw ParseError("empty column", line_no);
    current_cols = cols.size();
    current.tokens.emplace_back(cols.front());
    current.labels.emplace_back(cols.back());
    if (cols.size() == 3) current.lang_ids.emplace_back(cols[1]);
  }
  flush();
  if (sentences.empty()) throw ParseError("no sentences");

  Scheme chosen = Scheme::kBioNer;
  if (scheme) {
    chosen = *scheme;
  } else {
    for (const auto& s : sentences)
      for (const auto& l : s.labels)
        if (!is_bio_label(l)) chosen = Scheme::kPos;
  }
  return LabeledDataset(std::move(sentences), chosen);
}

LabeledDataset parse_conll_file(const std::string& path, std::optional<Scheme> scheme) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_conll(in, scheme);
}

void write_conll(std::ostream& out, const LabeledDataset& dataset,
                 const std::vector<std::vector<std::string>>& labels) {
  const auto& sents = dataset.sentences();
  if (labels.size() != sents.size()) throw Error("label sequences do not match sentence count");
  for (std::size_t s = 0; s < sents.size(); ++s) {
    const auto& sent = sents[s];
    if (labels[s].size() != sent.size()) throw Error("label sequence length mismatch");
    for (std::size_t i = 0; i < sent.size(); ++i) {
      out << sent.tokens[i] << '\t';
      if (sent.has_lang_ids()) out << sent.lang_ids[i] << '\t';
      out << labels[s][i] << '\n';
    }
    out << '\n';
  }
}

void write_conll(std::ostream& out, const LabeledDataset& dataset) {
  std::vector<std::vector<std::string>> labels;
  for (const auto& s : dataset.sentences()) labels.push_back(s.labels);
  write_conll(out, dataset, labels);
}

// Unicode emoji blocks, table version kEmojiTableVersion.
bool is_emoji_codepoint(char32_t cp) {
  static constexpr std::pair<char32_t, char32_t> kRanges[] = {
      {0x200D, 0x200D},    // zero width joiner
      {0x2300, 0x23FF},    // miscellaneous technical
      {0x2600, 0x26FF},    // miscellaneous symbols
      {0x2700, 0x27BF},    // dingbats
      {0x2B00, 0x2BFF},    // arrows and stars
      {0xFE00, 0xFE0F},    // variation selectors
      {0x1F000, 0x1F02F},  // mahjong
      {0x1F0A0, 0x1F0FF},  // playing cards
      {0x1F1E6, 0x1F1FF},  // regional indicators
      {0x1F300, 0x1F5FF},  // symbols and pictographs
      {0x1F600, 0x1F64F},  // emoticons
      {0x1F680, 0x1F6FF},  // transport and map
      {0x1F900, 0x1F9FF},  // supplemental symbols and pictographs
      {0x1FA70, 0x1FAFF},  // symbols and pictographs extended-A
      {0xE0020, 0xE007F},  // tag characters
  };
  for (auto [lo, hi] : kRanges)
    if (cp >= lo && cp <= hi) return true;
  return false;
}

std::string normalize_token(std::string_view token) {
  if (token.empty()) return std::string();
  if (token[0] == '@' || token[0] == '#') return "<USR>";
  if (token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www."))
    return "<URL>";
  auto cps = utf8::decode(token);
  if (std::all_of(cps.begin(), cps.end(), is_emoji_codepoint)) return "<EMOJI>";
  return std::string(token);
}

LanguageTokenCounts dataset_stats(const LabeledDataset& dataset) {
  LanguageTokenCounts out;
  for (const auto& s : dataset.sentences()) {
    if (!s.has_lang_ids()) throw Error("dataset has no language ids");
    for (const auto& l : s.lang_ids) ++out.counts[l];
    out.tokens += s.size();
  }
  out.sentences = dataset.sentences().size();
  if (out.counts.size() < 2) throw Error("need at least two language tags");

  // std::map iterates lexicographically, so strict > keeps the smaller tag.
  std::vector<std::pair<std::string, std::size_t>> ranked(out.counts.begin(), out.counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  out.ml = ranked[0].first;
  out.el = ranked[1].first;
  out.tie = ranked[0].second == ranked[1].second;
  return out;
}

std::vector<Span> extract_spans(const std::vector<std::string>& labels) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& l = labels[i];
    if (l.size() < 3 || l[1] != '-' || (l[0] != 'B' && l[0] != 'I')) {
      open = false;
      continue;
    }
    std::string type = l.substr(2);
    if (l[0] == 'I' && open && spans.back().type == type) {
      spans.back().end = i;
    } else {
      spans.push_back(Span{std::move(type), i, i});
      open = true;
    }
  }
  return spans;
}

namespace {

void check_shapes(const LabeledDataset& gold, const LabelSequences& pred) {
  if (pred.size() != gold.sentences().size())
    throw Error("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                std::to_string(gold.sentences().size()));
  for (std::size_t s = 0; s < pred.size(); ++s)
    if (pred[s].size() != gold.sentences()[s].size())
      throw Error("length mismatch in sentence " + std::to_string(s));
}

}  // namespace

SpanScore span_micro_f1(const LabeledDataset& gold, const LabelSequences& pred) {
  check_shapes(gold, pred);
  SpanScore sc;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    auto g = extract_spans(gold.sentences()[s].labels);
    auto p = extract_spans(pred[s]);
    std::set<Span> gold_set(g.begin(), g.end());
    std::size_t tp = 0;
    for (const auto& span : p) tp += gold_set.count(span);
    sc.true_positives += tp;
    sc.false_positives += p.size() - tp;
    sc.false_negatives += g.size() - tp;
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? double(a) / double(b) : 0.0; };
  sc.precision = ratio(sc.true_positives, sc.true_positives + sc.false_positives);
  sc.recall = ratio(sc.true_positives, sc.true_positives + sc.false_negatives);
  sc.f1 = sc.true_positives == 0 ? 0.0
                                 : 2 * sc.precision * sc.recall / (sc.precision + sc.recall);
  return sc;
}

double token_accuracy(const LabeledDataset& gold, const LabelSequences& pred) {
  check_shapes(gold, pred);
  std::size_t total = 0, correct = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto& g = gold.sentences()[s].labels;
    for (std::size_t i = 0; i < g.size(); ++i) correct += g[i] == pred[s][i];
    total += g.size();
  }
  if (total == 0) throw Error("no tokens");
  return double(correct) / double(total);
}

double dev_metric(const LabeledDataset& gold, const LabelSequences& pred) {
  return gold.scheme() == Scheme::kBioNer ? span_micro_f1(gold, pred).f1
                                          : token_accuracy(gold, pred);
}

std::string metrics_json(const SpanScore& score) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "{\"precision\":%.6f,\"recall\":%.6f,\"f1\":%.6f}",
                score.precision, score.recall, score.f1);
  return buf;
}

}  // namespace mmx::corpus
