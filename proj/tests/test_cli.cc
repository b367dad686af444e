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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path& work() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "mmx_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& binary, const std::string& args) {
  const fs::path out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = "\"" + binary + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

Result mmx(const std::string& args) { return run(MMX_BIN, args); }

std::string at(const std::string& name) { return "\"" + (work() / name).string() + "\""; }

// Generates the toy data once for every test case.
const fs::path& data() {
  static const fs::path d = [] {
    const fs::path dir = work() / "data";
    const Result r = run(MMX_SYNTH_BIN, "--out-dir \"" + dir.string() + "\" --train 40 --dev 20 --lexicon 40");
    REQUIRE(r.code == 0);
    return dir;
  }();
  return d;
}

std::string in_data(const std::string& name) { return "\"" + (data() / name).string() + "\""; }

std::string train_args(const std::string& out) {
  return "train --config " + in_data("config.json") + " --train " + in_data("train.conll") + " --dev " +
         in_data("dev.conll") + " --epochs 3 --out " + out;
}

}  // namespace

TEST_CASE("version and usage errors") {
  const Result v = mmx("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find(MMX_VERSION_EXPECTED) != std::string::npos);
  CHECK(mmx("--help").code == 0);
  CHECK(mmx("stats --bogus").code == 2);
  CHECK(mmx("frobnicate").code == 2);
  CHECK(mmx("").code == 2);
  CHECK(mmx("stats --data /nonexistent.conll").code == 2);
}

TEST_CASE("stats") {
  const Result r = mmx("stats --data " + in_data("train.conll"));
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["sentences"] == 40);
  CHECK(j["ml"] == "lang1");
  CHECK(j["el"] == "lang2");
  CHECK(j["scheme"] == "pos");
}

TEST_CASE("config errors exit with 3 and a pointer") {
  std::ofstream(work() / "bad.json") << R"({"task": "pos", "embedder": {"mode": "word-single",
      "word_embeddings": ["does-not-exist.vec"]}})";
  const Result r = mmx("train --config " + at("bad.json") + " --train " + in_data("train.conll") + " --dev " +
                       in_data("dev.conll") + " --out " + at("never.mmx"));
  CHECK(r.code == 3);
  CHECK(r.err.find("/embedder/word_embeddings/0") != std::string::npos);
  CHECK_FALSE(fs::exists(work() / "never.mmx"));

  const Result heads = mmx(train_args(at("never.mmx")) + " --heads 3 --hidden 32");
  CHECK(heads.code == 3);
  CHECK(heads.err.find("/tagger/heads") != std::string::npos);
}

TEST_CASE("train, eval, predict, bench") {
  const Result t = mmx(train_args(at("m.mmx")));
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out).contains("best_epoch"));
  const Result again = mmx(train_args(at("m2.mmx")));
  REQUIRE(again.code == 0);
  CHECK(slurp(work() / "m.mmx") == slurp(work() / "m2.mmx"));

  const Result e = mmx("eval --model " + at("m.mmx") + " --data " + in_data("dev.conll"));
  REQUIRE(e.code == 0);
  const double acc = json::parse(e.out)["accuracy"];
  CHECK(acc >= 0);
  CHECK(acc <= 1);

  std::ofstream(work() / "tokens.txt") << "hello\nworld\n\nagain\n";
  const Result p = mmx("predict --model " + at("m.mmx") + " --input " + at("tokens.txt") + " --out " + at("pred.conll"));
  REQUIRE(p.code == 0);
  std::istringstream lines(slurp(work() / "pred.conll"));
  std::string line;
  int rows = 0, blanks = 0;
  while (std::getline(lines, line)) line.empty() ? ++blanks : ++rows;
  CHECK(rows == 3);
  CHECK(blanks >= 1);

  const Result s = mmx("bench speed --model " + at("m.mmx") + " --lengths 4,8 --runs 2 --warmup 0 --out " +
                       at("speed.csv") + " --json " + at("speed.json") + " --svg " + at("speed.svg"));
  REQUIRE(s.code == 0);
  CHECK(slurp(work() / "speed.csv").rfind("model,length,unit,runs,", 0) == 0);
  CHECK(json::parse(slurp(work() / "speed.json"))[0]["rows"].size() == 2);
  CHECK(slurp(work() / "speed.svg").find("<polyline") != std::string::npos);

  const Result m = mmx("bench memory --model " + at("m.mmx") + " --length 12 --out " + at("mem.json"));
  REQUIRE(m.code == 0);
  const json mem = json::parse(slurp(work() / "mem.json"));
  CHECK(mem["length"] == 12);
  CHECK(mem["activation_bytes"].get<long>() > 0);
}

TEST_CASE("ensemble commands") {
  const Result r = mmx("ensemble-train --config " + in_data("config.json") + " --train " + in_data("train.conll") +
                       " --dev " + in_data("dev.conll") + " --epochs 2 --k 2 --jobs 2 --out-dir " + at("ens"));
  REQUIRE(r.code == 0);
  CHECK(fs::exists(work() / "ens" / "m.0.mmx"));
  CHECK(fs::exists(work() / "ens" / "m.1.mmx"));
  const json manifest = json::parse(slurp(work() / "ens" / "ensemble.json"));
  CHECK(manifest["k"] == 2);
  const Result e = mmx("ensemble-predict --manifest " + at("ens/ensemble.json") + " --input " + in_data("dev.conll") +
                       " --eval");
  REQUIRE(e.code == 0);
  CHECK(json::parse(e.out).contains("accuracy"));
}

TEST_CASE("align") {
  const Result r = mmx("align --src " + in_data("ml.vec") + " --tgt " + in_data("ml.vec") +
                       " --iterations 2 --out " + at("W.bin") + " --dict " + at("dict.txt"));
  REQUIRE(r.code == 0);
  CHECK(slurp(work() / "W.bin").rfind("MMXW", 0) == 0);
  CHECK(fs::file_size(work() / "dict.txt") > 0);
}
