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

#include <set>
#include <sstream>
#include <tuple>

#include "mmx/corpus.h"
#include "mmx/error.h"
#include "mmx/rng.h"

using namespace mmx;
using namespace mmx::corpus;

namespace {

LabeledDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_conll(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// Spans read straight off the BIO definition, one token at a time.
std::set<std::tuple<std::string, std::size_t, std::size_t>> oracle_spans(const std::vector<std::string>& y) {
  std::set<std::tuple<std::string, std::size_t, std::size_t>> out;
  auto type = [&](std::size_t i) { return y[i] == "O" ? std::string() : y[i].substr(2); };
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == "O") continue;
    const bool starts = y[i][0] == 'B' || i == 0 || type(i - 1) != type(i);
    if (!starts) continue;
    std::size_t j = i;
    while (j + 1 < y.size() && y[j + 1][0] == 'I' && type(j + 1) == type(i)) ++j;
    out.emplace(type(i), i, j);
  }
  return out;
}

std::tuple<std::size_t, std::size_t, std::size_t> oracle_counts(const LabelSequences& gold,
                                                                const LabelSequences& pred) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto g = oracle_spans(gold[s]), p = oracle_spans(pred[s]);
    for (const auto& span : p) (g.count(span) ? tp : fp)++;
    for (const auto& span : g) fn += p.count(span) ? 0 : 1;
  }
  return {tp, fp, fn};
}

LabeledDataset ner_dataset(const LabelSequences& labels) {
  std::vector<Sentence> sents;
  for (const auto& l : labels) {
    Sentence s;
    for (std::size_t i = 0; i < l.size(); ++i) s.tokens.push_back("t" + std::to_string(i));
    s.labels = l;
    sents.push_back(s);
  }
  return LabeledDataset(sents, Scheme::kBioNer);
}

const std::vector<std::string> kBio = {"O", "B-A", "I-A", "B-B", "I-B", "B-C", "I-C"};

}  // namespace

TEST_CASE("parse_conll reads two-column sentences") {
  const auto d = parse("a\tO\nb\tB-PER\n\n");
  REQUIRE(d.sentences().size() == 1);
  CHECK(d.sentences()[0].tokens == std::vector<std::string>{"a", "b"});
  CHECK(d.sentences()[0].labels == std::vector<std::string>{"O", "B-PER"});
  CHECK(d.scheme() == Scheme::kBioNer);
  CHECK(d.label_set() == std::vector<std::string>{"O", "B-PER"});
}

TEST_CASE("parse_conll handles three columns, CRLF and trailing blank lines") {
  const auto d = parse("hola\tlang2\tX\r\nyou\tlang1\tPRON\r\n\r\n\r\nok\tlang1\tX\r\n\r\n\r\n");
  REQUIRE(d.sentences().size() == 2);
  CHECK(d.sentences()[0].lang_ids == std::vector<std::string>{"lang2", "lang1"});
  CHECK(d.sentences()[1].tokens == std::vector<std::string>{"ok"});
  CHECK(d.scheme() == Scheme::kPos);
  CHECK(d.label_set() == std::vector<std::string>{"X", "PRON"});
}

TEST_CASE("parse_conll errors") {
  CHECK(error_of("").find("no sentences") != std::string::npos);
  CHECK(error_of("\n\n").find("no sentences") != std::string::npos);
  CHECK(error_of("a\tO\tX\tY\n").find("line 1") != std::string::npos);
  CHECK(error_of("a\tO\nb\n").find("line 2") != std::string::npos);
}

TEST_CASE("conll round trip") {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> sents;
    const bool lang = trial % 2;
    for (std::size_t s = 0; s < 1 + rng.below(5); ++s) {
      Sentence sent;
      for (std::size_t i = 0; i < 1 + rng.below(6); ++i) {
        sent.tokens.push_back("w" + std::to_string(rng.below(100)));
        sent.labels.push_back(kBio[rng.below(kBio.size())]);
        if (lang) sent.lang_ids.push_back(rng.below(2) ? "lang1" : "lang2");
      }
      sents.push_back(sent);
    }
    const LabeledDataset d(sents, Scheme::kBioNer);
    std::ostringstream out;
    write_conll(out, d);
    std::istringstream in(out.str());
    CHECK(parse_conll(in, Scheme::kBioNer) == d);
  }
}

TEST_CASE("normalize_token") {
  CHECK(normalize_token("@john_doe") == "<USR>");
  CHECK(normalize_token("#tbt") == "<USR>");
  CHECK(normalize_token("https://t.co/x") == "<URL>");
  CHECK(normalize_token("http://a.b") == "<URL>");
  CHECK(normalize_token("www.example.com") == "<URL>");
  CHECK(normalize_token("casa") == "casa");
  CHECK(normalize_token("\xF0\x9F\x98\x82") == "<EMOJI>");                  // face with tears of joy
  CHECK(normalize_token("\xF0\x9F\x98\x82\xF0\x9F\x91\x8D") == "<EMOJI>");  // two emoji
  CHECK(normalize_token("ok\xF0\x9F\x98\x82") == "ok\xF0\x9F\x98\x82");      // mixed stays
  for (const std::string t : {"@x", "https://t.co/x", "casa", "<USR>", "<URL>", "<EMOJI>", "\xE2\x9D\xA4", "www."})
    CHECK(normalize_token(normalize_token(t)) == normalize_token(t));
}

TEST_CASE("dataset_stats") {
  Sentence s{{"a", "b", "c", "d"}, {"X", "X", "X", "X"}, {"L1", "L1", "L2", "L1"}};
  auto st = dataset_stats(LabeledDataset({s}, Scheme::kPos));
  CHECK(st.counts == std::map<std::string, std::size_t>{{"L1", 3}, {"L2", 1}});
  CHECK(st.ml == "L1");
  CHECK(st.el == "L2");
  CHECK_FALSE(st.tie);

  Sentence t{{"a", "b", "c", "d"}, {"X", "X", "X", "X"}, {"L2", "L1", "L2", "L1"}};
  st = dataset_stats(LabeledDataset({t}, Scheme::kPos));
  CHECK(st.ml == "L1");
  CHECK(st.tie);

  Sentence u{{"a"}, {"X"}, {}};
  CHECK_THROWS_AS(dataset_stats(LabeledDataset({u}, Scheme::kPos)), Error);
}

TEST_CASE("span_micro_f1 hand example") {
  const auto gold = ner_dataset({{"B-PER", "O", "B-LOC", "I-LOC"}});
  const auto s = span_micro_f1(gold, {{"B-PER", "O", "B-LOC", "O"}});
  CHECK(s.true_positives == 1);
  CHECK(s.false_positives == 1);
  CHECK(s.false_negatives == 1);
  CHECK(s.f1 == doctest::Approx(0.5));
  CHECK(std::get<0>(oracle_counts({{"B-PER", "O", "B-LOC", "I-LOC"}}, {{"B-PER", "O", "B-LOC", "O"}})) == 1);

  CHECK(span_micro_f1(gold, {{"B-PER", "O", "B-LOC", "I-LOC"}}).f1 == 1.0);
  const auto none = span_micro_f1(gold, {{"O", "O", "O", "O"}});
  CHECK(none.f1 == 0.0);
  CHECK(none.precision == 0.0);
  CHECK(metrics_json(s) == "{\"precision\":0.500000,\"recall\":0.500000,\"f1\":0.500000}");
  CHECK_THROWS_AS(span_micro_f1(gold, {{"O"}}), Error);
}

TEST_CASE("span repair opens spans at orphan I- tags") {
  const auto spans = extract_spans({"I-A", "I-A", "I-B", "O", "I-A", "B-A", "I-A"});
  const std::vector<Span> expect = {{"A", 0, 1}, {"B", 2, 2}, {"A", 4, 4}, {"A", 5, 6}};
  CHECK(spans == expect);
}

TEST_CASE("span_micro_f1 matches a brute-force matcher exhaustively up to 3 tokens") {
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<std::vector<std::string>> all;
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      std::vector<std::string> seq;
      for (auto i : idx) seq.push_back(kBio[i]);
      all.push_back(seq);
      std::size_t k = 0;
      while (k < n && ++idx[k] == kBio.size()) idx[k++] = 0;
      if (k == n) break;
    }
    for (const auto& g : all)
      for (const auto& p : all) {
        const auto s = span_micro_f1(ner_dataset({g}), {p});
        const auto [tp, fp, fn] = oracle_counts({g}, {p});
        REQUIRE(s.true_positives == tp);
        REQUIRE(s.false_positives == fp);
        REQUIRE(s.false_negatives == fn);
      }
  }
}

TEST_CASE("span_micro_f1 matches the brute-force matcher on random datasets and is order invariant") {
  CounterRng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    LabelSequences gold, pred;
    for (std::size_t s = 0; s < 1 + rng.below(4); ++s) {
      const std::size_t n = 1 + rng.below(6);
      std::vector<std::string> g, p;
      for (std::size_t i = 0; i < n; ++i) {
        g.push_back(kBio[rng.below(kBio.size())]);
        p.push_back(kBio[rng.below(kBio.size())]);
      }
      gold.push_back(g);
      pred.push_back(p);
    }
    const auto s = span_micro_f1(ner_dataset(gold), pred);
    const auto [tp, fp, fn] = oracle_counts(gold, pred);
    REQUIRE(s.true_positives == tp);
    REQUIRE(s.false_positives == fp);
    REQUIRE(s.false_negatives == fn);
    CHECK(s.f1 >= 0.0);
    CHECK(s.f1 <= 1.0);
    if (tp == 0) CHECK(s.f1 == 0.0);
    std::reverse(gold.begin(), gold.end());
    std::reverse(pred.begin(), pred.end());
    CHECK(span_micro_f1(ner_dataset(gold), pred).f1 == s.f1);
  }
}

TEST_CASE("token_accuracy") {
  Sentence s{{"a", "b", "c", "d"}, {"X", "Y", "X", "Y"}, {}};
  const LabeledDataset d({s}, Scheme::kPos);
  CHECK(token_accuracy(d, {{"X", "Y", "X", "Y"}}) == 1.0);
  CHECK(token_accuracy(d, {{"X", "Y", "X", "X"}}) == 0.75);
  CHECK(dev_metric(d, {{"X", "Y", "X", "X"}}) == 0.75);
  CHECK_THROWS_AS(token_accuracy(d, {{"X"}}), Error);
  try {
    token_accuracy(LabeledDataset({}, Scheme::kPos), {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no tokens") != std::string::npos);
  }
}
