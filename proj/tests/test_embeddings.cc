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

#include <cmath>
#include <sstream>

#include "mmx/embeddings.h"
#include "mmx/error.h"
#include "mmx/rng.h"

using namespace mmx;
using namespace mmx::embeddings;

namespace {

EmbeddingTable table_from(const std::string& text) {
  std::istringstream in(text);
  return load_table(in);
}

std::string error_of(const std::string& text) {
  try {
    table_from(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

// FNV-1a 64 with the published offset basis and prime.
std::uint64_t oracle_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("load_table reads the header and rows") {
  const auto t = table_from("2 3\na 1 0 0\nb 0 1 0\n");
  CHECK(t.dim() == 3);
  CHECK(t.size() == 2);
  CHECK(t.lookup("a") == std::vector<double>{1, 0, 0});
  CHECK(t.lookup("b") == std::vector<double>{0, 1, 0});
  CHECK(t.parameter_count() == 6);
}

TEST_CASE("load_table errors carry line numbers") {
  CHECK(error_of("2 3\na 1 0 0\nb 0 1\n").find("line 3") != std::string::npos);
  CHECK(error_of("1 3\na 1 0 x\n").find("non-numeric") != std::string::npos);
  CHECK(error_of("1 3\na 1 0 0\nb 0 1 0\n").find("declares 1") != std::string::npos);
  CHECK(error_of("").find("header") != std::string::npos);
  CHECK(error_of("x y\n").find("line 1") != std::string::npos);
}

TEST_CASE("duplicate tokens: last occurrence wins") {
  const auto t = table_from("3 2\na 1 1\nb 2 2\na 3 3\n");
  CHECK(t.size() == 2);
  CHECK(t.duplicates() == 1);
  CHECK(t.lookup("a") == std::vector<double>{3, 3});
}

TEST_CASE("fnv1a64 matches the published constants") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  for (const std::string s : {"<ab", "ab>", "hello", "\xC3\xB1"}) CHECK(fnv1a64(s) == oracle_fnv(s));
}

TEST_CASE("char n-grams wrap the token in boundary markers") {
  CHECK(char_ngrams("ab", 3, 3) == std::vector<std::string>{"<ab", "ab>"});
  auto grams = char_ngrams("ab", 3, 6);
  std::sort(grams.begin(), grams.end());
  CHECK(grams == std::vector<std::string>{"<ab", "<ab>", "ab>"});
  // Code points, not bytes.
  CHECK(char_ngrams("\xC3\xB1", 3, 3) == std::vector<std::string>{"<\xC3\xB1>"});
}

TEST_CASE("OOV lookup averages hashed bucket rows") {
  auto t = table_from("1 2\na 1 2\n");
  const std::size_t nb = 97;
  std::vector<double> buckets(nb * 2);
  for (std::size_t i = 0; i < buckets.size(); ++i) buckets[i] = double(i) * 0.5 - 3;
  t.set_buckets(buckets, 3, 3);

  const std::size_t h1 = oracle_fnv("<ab") % nb, h2 = oracle_fnv("ab>") % nb;
  const std::vector<double> expect = {(buckets[h1 * 2] + buckets[h2 * 2]) / 2,
                                      (buckets[h1 * 2 + 1] + buckets[h2 * 2 + 1]) / 2};
  CHECK(t.lookup("ab") == expect);
  CHECK(t.lookup("a") == std::vector<double>{1, 2});  // in-vocab never touches buckets
  CHECK(t.lookup("ab") == t.lookup("ab"));

  const auto no_buckets = table_from("1 2\na 1 2\n");
  CHECK(no_buckets.lookup("zzz") == std::vector<double>{0, 0});
}

TEST_CASE("OOV back-off norm is bounded by the largest bucket row") {
  CounterRng rng(3);
  auto t = table_from("1 4\nx 0 0 0 0\n");
  std::vector<double> b(97 * 4);
  for (auto& v : b) v = rng.normal();
  double max_row = 0;
  for (std::size_t r = 0; r < 97; ++r) max_row = std::max(max_row, norm({b.begin() + r * 4, b.begin() + r * 4 + 4}));
  t.set_buckets(b, 3, 6);
  for (const std::string w : {"hello", "mundo", "q", "abcdefghij", "\xF0\x9F\x98\x82"})
    CHECK(norm(t.lookup(w)) <= max_row + 1e-12);
}

TEST_CASE("bucket sidecar round trip and magic check") {
  BucketMatrix b{3, 2, {1, 2, 3, 4, 5, 6.5}};
  std::stringstream io;
  write_buckets(io, b);
  const std::string bytes = io.str();
  CHECK(bytes.substr(0, 4) == "MMXB");
  CHECK(bytes.size() == 4 + 4 + 4 + 6 * 4);
  const auto r = read_buckets(io);
  CHECK(r.count == 3);
  CHECK(r.dim == 2);
  CHECK(r.values == b.values);
  std::istringstream bad("XXXX");
  CHECK_THROWS_AS(read_buckets(bad), Error);
}

TEST_CASE("table text round trip") {
  const auto t = table_from("2 3\na 1.5 0 -2\nb 0 1 0.25\n");
  std::stringstream io;
  write_table(io, t);
  const auto u = load_table(io);
  CHECK(u.words() == t.words());
  CHECK(u.matrix() == t.matrix());
}

TEST_CASE("segment: greedy longest match with <unk> fallback") {
  CHECK(SubwordVocab({"ab", "c", "a", "b"}).segment("abc") == std::vector<std::string>{"ab", "c"});
  CHECK(SubwordVocab({"a"}).segment("aa") == std::vector<std::string>{"a", "a"});
  CHECK(SubwordVocab({"a"}).segment("xz") == std::vector<std::string>{"<unk>", "<unk>"});
  // Single characters of every unit are fallback units.
  CHECK(SubwordVocab({"abc"}).segment("cab") == std::vector<std::string>{"c", "a", "b"});
}

TEST_CASE("segment output concatenates back to the token") {
  CounterRng rng(8);
  const SubwordVocab vocab({"an", "ban", "ana", "n", "na", "b", "a", "\xC3\xB1"});
  for (int trial = 0; trial < 500; ++trial) {
    std::string tok;
    const char* alphabet[] = {"a", "b", "n", "\xC3\xB1"};
    for (std::size_t i = 0; i < 1 + rng.below(8); ++i) tok += alphabet[rng.below(4)];
    const auto units = vocab.segment(tok);
    std::string joined;
    for (const auto& u : units) joined += u;
    CHECK(joined == tok);
    CHECK(units.size() <= tok.size());
  }
}

TEST_CASE("subword vocabulary file: one unit per line") {
  std::istringstream in("ab\r\nc\n\nd\n");
  const auto v = load_subword_vocab(in);
  CHECK(v.contains("ab"));
  CHECK(v.contains("a"));
  CHECK(v.contains("d"));
  CHECK(v.segment("abd") == std::vector<std::string>{"ab", "d"});
}
