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

#include "mmx/synth.h"

#include <algorithm>
#include <set>

#include "mmx/error.h"
#include "mmx/rng.h"

namespace mmx::synth {

namespace {

struct Phonology {
  std::string consonants;
  std::string vowels;
  std::vector<std::string> suffixes;  // one per class
  std::string lang;
};

const Phonology kMatrix{"bdgklmnprst", "aeiou", {"on", "ek", "ul", "i"}, "lang1"};
const Phonology kEmbedded{"cfhjqvwxyz", "aeiou", {"az", "ix", "ev", "o"}, "lang2"};

std::string syllable(const Phonology& p, CounterRng& rng) {
  return std::string(1, p.consonants[rng.below(p.consonants.size())]) + p.vowels[rng.below(p.vowels.size())];
}

// lexicon[c] holds size/4 (or so) words of class c.
std::vector<std::vector<std::string>> make_lexicon(const Phonology& p, std::size_t size, CounterRng& rng,
                                                   std::set<std::string>& units) {
  std::vector<std::vector<std::string>> lex(kClasses.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t c = i % kClasses.size();
    std::string word;
    do {
      const std::string a = syllable(p, rng), b = syllable(p, rng);
      word = a + b + p.suffixes[c];
      if (seen.insert(word).second) {
        units.insert(a);
        units.insert(b);
        break;
      }
    } while (true);
    lex[c].push_back(word);
  }
  for (const auto& s : p.suffixes) units.insert(s);
  return lex;
}

std::vector<corpus::Sentence> make_sentences(std::size_t count, const CorpusOptions& o,
                                             const std::vector<std::vector<std::string>>* lex[2],
                                             CounterRng& rng) {
  const Phonology* phon[2] = {&kMatrix, &kEmbedded};
  std::vector<corpus::Sentence> out;
  for (std::size_t s = 0; s < count; ++s) {
    corpus::Sentence sent;
    const std::size_t len = o.min_length + rng.below(o.max_length - o.min_length + 1);
    // Matrix language opens most sentences.
    int lang = rng.uniform() < 0.75 ? 0 : 1;
    int prev_class = -1;
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0 && rng.uniform() < o.switch_probability) lang = 1 - lang;
      const int c = static_cast<int>(rng.below(kClasses.size()));
      const auto& words = (*lex[lang])[c];
      sent.tokens.push_back(words[rng.below(words.size())]);
      sent.lang_ids.push_back(phon[lang]->lang);
      sent.labels.push_back(c == 0 && prev_class == 3 ? kObjectLabel : kClasses[c]);
      prev_class = c;
    }
    out.push_back(std::move(sent));
  }
  return out;
}

std::shared_ptr<embeddings::EmbeddingTable> random_table(const std::vector<std::string>& words, int dim,
                                                         CounterRng& rng,
                                                         const std::map<std::string, int>* word_class,
                                                         double noise) {
  const auto d = static_cast<std::size_t>(dim);
  std::vector<std::vector<double>> centroids(kClasses.size(), std::vector<double>(d));
  for (auto& c : centroids)
    for (auto& v : c) v = rng.normal();
  std::vector<double> m(words.size() * d);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::vector<double>* centre = nullptr;
    if (word_class) centre = &centroids[word_class->at(words[i])];
    for (std::size_t k = 0; k < d; ++k) m[i * d + k] = (centre ? (*centre)[k] : 0.0) + noise * rng.normal();
  }
  return std::make_shared<embeddings::EmbeddingTable>(dim, words, std::move(m));
}

void add_buckets(embeddings::EmbeddingTable& t, std::size_t count, CounterRng& rng) {
  std::vector<double> b(count * static_cast<std::size_t>(t.dim()));
  for (auto& v : b) v = rng.normal();
  t.set_buckets(std::move(b), 3, 6);
}

}  // namespace

SyntheticCorpus make_corpus(const CorpusOptions& o) {
  if (o.lexicon_size < kClasses.size()) throw Error("lexicon too small");
  if (o.min_length == 0 || o.max_length < o.min_length) throw Error("bad sentence length range");
  CounterRng rng = CounterRng(o.seed);
  CounterRng lex_rng = rng.split(1), sent_rng = rng.split(2);
  std::set<std::string> units;
  const auto ml = make_lexicon(kMatrix, o.lexicon_size, lex_rng, units);
  const auto el = make_lexicon(kEmbedded, o.lexicon_size, lex_rng, units);
  const std::vector<std::vector<std::string>>* lex[2] = {&ml, &el};

  auto train = make_sentences(o.train_sentences, o, lex, sent_rng);
  auto dev = make_sentences(o.dev_sentences, o, lex, sent_rng);
  SyntheticCorpus out{corpus::LabeledDataset(std::move(train), corpus::Scheme::kPos),
                      corpus::LabeledDataset(std::move(dev), corpus::Scheme::kPos),
                      {}, {}, {}, {units.begin(), units.end()}};
  for (std::size_t c = 0; c < kClasses.size(); ++c) {
    for (const auto& w : ml[c]) out.word_class[w] = static_cast<int>(c);
    for (const auto& w : el[c]) out.word_class[w] = static_cast<int>(c);
  }
  // Lexicon order interleaves classes the same way they were generated.
  for (std::size_t i = 0; i < o.lexicon_size; ++i) {
    out.ml_words.push_back(ml[i % kClasses.size()][i / kClasses.size()]);
    out.el_words.push_back(el[i % kClasses.size()][i / kClasses.size()]);
  }
  return out;
}

Resources make_resources(const SyntheticCorpus& corpus, const ResourceOptions& o) {
  CounterRng rng = CounterRng(o.seed);
  CounterRng ml_rng = rng.split(1), el_rng = rng.split(2), sub_rng = rng.split(3);
  auto ml = random_table(corpus.ml_words, o.ml_dim, ml_rng, &corpus.word_class, o.noise);
  add_buckets(*ml, o.buckets, ml_rng);
  auto el = random_table(corpus.el_words, o.el_dim, el_rng, &corpus.word_class, o.noise);
  add_buckets(*el, o.buckets, el_rng);

  auto vocab = std::make_shared<embeddings::SubwordVocab>(corpus.subword_units);
  auto sub = random_table(vocab->sorted_units(), o.subword_dim, sub_rng, nullptr, 1.0);

  Resources r;
  r.word_tables = {ml, el};
  r.subword_tables = {sub};
  r.subword_vocab = vocab;
  for (const auto& s : corpus.train.sentences()) r.training_tokens.insert(r.training_tokens.end(), s.tokens.begin(), s.tokens.end());
  r.labels = corpus.train.label_set();
  for (const auto& l : corpus.dev.label_set())
    if (std::find(r.labels.begin(), r.labels.end(), l) == r.labels.end()) r.labels.push_back(l);
  return r;
}

Resources reference_resources(const ReferenceOptions& o) {
  CounterRng rng = CounterRng(o.seed);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::vector<std::string> units;
  for (char c : letters) units.emplace_back(1, c);
  for (std::size_t i = 0; units.size() < 126; ++i) units.push_back(std::string{letters[i / 26], letters[i % 26]});
  auto vocab = std::make_shared<embeddings::SubwordVocab>(units);

  Resources r;
  for (std::size_t t = 0; t < 2; ++t) {
    CounterRng trng = rng.split(t + 1);
    std::set<std::string> seen;
    std::vector<std::string> words;
    if (t == 0) {
      words.push_back(letters);
      seen.insert(letters);
    }
    while (words.size() < o.words) {
      std::string w;
      const std::size_t len = 3 + trng.below(6);
      for (std::size_t k = 0; k < len; ++k) w += letters[trng.below(26)];
      if (seen.insert(w).second) words.push_back(w);
    }
    auto table = random_table(words, o.word_dim, trng, nullptr, 1.0);
    add_buckets(*table, o.buckets, trng);
    r.word_tables.push_back(table);
  }
  CounterRng srng = rng.split(9);
  for (int d : o.subword_dims) r.subword_tables.push_back(random_table(vocab->sorted_units(), d, srng, nullptr, 1.0));
  r.subword_vocab = vocab;
  r.training_tokens = r.word_tables[0]->words();
  for (std::size_t l = 0; l < o.labels; ++l) r.labels.push_back("T" + std::to_string(l));
  return r;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"word-single", "mme-concat", "mme-linear",
                                                 "mme-attention", "hme", "scratch"};
  return names;
}

meta::EmbedderSpec preset_spec(const std::string& preset, const Resources& r) {
  meta::EmbedderSpec spec;
  if (preset == "scratch" || preset == "scratch-768" || preset == "scratch-768-2l") {
    spec.mode = "scratch";
    spec.subword_vocab = r.subword_vocab;
    return spec;
  }
  if (!meta::is_known_mode(preset)) throw Error("unknown preset '" + preset + "'");
  spec.mode = preset;
  spec.word_tables = preset == "word-single" ? std::vector<meta::TablePtr>{r.word_tables.at(0)} : r.word_tables;
  if (preset == "hme") {
    spec.subword_tables = r.subword_tables;
    spec.subword_vocab = r.subword_vocab;
  }
  return spec;
}

tagger::TaggerConfig preset_config(const std::string& preset, Scale scale, std::uint64_t seed) {
  tagger::TaggerConfig c;
  c.seed = seed;
  const bool large_scratch = preset == "scratch-768" || preset == "scratch-768-2l";
  if (large_scratch) {
    c.hidden = 768;
    c.ff_dim = 3072;
    c.heads = 12;
    c.layers = preset == "scratch-768" ? 4 : 2;
    c.lr = 1e-4;
    return c;
  }
  if (scale == Scale::kToy) {
    c.hidden = 32;
    c.heads = 2;
    c.layers = 1;
    c.ff_dim = 64;
    c.batch_size = 8;
    c.max_epochs = 50;
  }
  return c;
}

std::unique_ptr<tagger::TaggerModel> build_preset(const std::string& preset, Scale scale, const Resources& r,
                                                  std::uint64_t seed) {
  meta::EmbedderSpec spec = preset_spec(preset, r);
  if (scale == Scale::kToy) {
    spec.char_dim = 8;
    spec.char_out_dim = 8;
  }
  return std::make_unique<tagger::TaggerModel>(preset_config(preset, scale, seed), spec, r.labels,
                                               corpus::Scheme::kPos, r.training_tokens);
}

}  // namespace mmx::synth
