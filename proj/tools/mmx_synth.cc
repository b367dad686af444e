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

// Writes the synthetic code-switched corpus, its embedding tables and a
// ready-to-use run configuration into a directory.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mmx/corpus.h"
#include "mmx/embeddings.h"
#include "mmx/error.h"
#include "mmx/synth.h"

namespace {

using namespace mmx;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_table_files(const fs::path& dir, const std::string& stem, const embeddings::EmbeddingTable& t) {
  auto vec = open_out(dir / (stem + ".vec"));
  embeddings::write_table(vec, t);
  if (t.has_buckets()) {
    auto bin = open_out(dir / (stem + ".bin"), true);
    embeddings::write_buckets(bin, {t.bucket_count(), t.dim(), t.buckets()});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic code-switched corpus and resources."};
  std::string out_dir;
  std::string mode = "mme-attention";
  synth::CorpusOptions co;
  synth::ResourceOptions ro;
  app.add_option("--out-dir", out_dir, "destination directory")->required();
  app.add_option("--mode", mode, "embedder mode written into config.json");
  app.add_option("--seed", co.seed, "corpus seed");
  app.add_option("--train", co.train_sentences, "training sentences");
  app.add_option("--dev", co.dev_sentences, "dev sentences");
  app.add_option("--lexicon", co.lexicon_size, "words per language");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!meta::is_known_mode(mode)) throw Error("unknown mode '" + mode + "'");
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const auto corpus = synth::make_corpus(co);
    const auto res = synth::make_resources(corpus, ro);
    {
      auto f = open_out(dir / "train.conll");
      corpus::write_conll(f, corpus.train);
    }
    {
      auto f = open_out(dir / "dev.conll");
      corpus::write_conll(f, corpus.dev);
    }
    write_table_files(dir, "ml", *res.word_tables[0]);
    write_table_files(dir, "el", *res.word_tables[1]);
    write_table_files(dir, "subword", *res.subword_tables[0]);
    {
      auto f = open_out(dir / "units.txt");
      for (const auto& u : corpus.subword_units) f << u << "\n";
    }
    const auto toy = synth::preset_config(mode, synth::Scale::kToy);
    nlohmann::json words = nlohmann::json::array();
    words.push_back({{"path", "ml.vec"}, {"buckets", "ml.bin"}});
    if (mode != "word-single") words.push_back({{"path", "el.vec"}, {"buckets", "el.bin"}});
    nlohmann::json cfg = {
        {"task", "pos"},
        {"seed", 1},
        {"embedder",
         {{"mode", mode},
          {"word_embeddings", words},
          {"subword_embeddings", {{{"path", "subword.vec"}}}},
          {"subword_vocab", "units.txt"},
          {"char", {{"dim", 8}, {"width", 3}, {"out_dim", 8}}}}},
        {"tagger",
         {{"layers", toy.layers},
          {"heads", toy.heads},
          {"hidden", toy.hidden},
          {"ff_dim", toy.ff_dim},
          {"lr", toy.lr},
          {"batch_size", toy.batch_size},
          {"max_epochs", toy.max_epochs}}}};
    auto f = open_out(dir / "config.json");
    f << cfg.dump(2) << "\n";
    std::cout << "wrote " << corpus.train.sentences().size() << " train / " << corpus.dev.sentences().size()
              << " dev sentences to " << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
