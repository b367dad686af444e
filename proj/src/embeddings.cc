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

#include "mmx/embeddings.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mmx/binary_io.h"
#include "mmx/error.h"
#include "mmx/log.h"
#include "mmx/utf8.h"

namespace mmx::embeddings {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> char_ngrams(std::string_view token, int min_n, int max_n) {
  std::vector<std::string> chars = utf8::split_chars(token);
  chars.insert(chars.begin(), "<");
  chars.push_back(">");
  std::vector<std::string> out;
  const int len = static_cast<int>(chars.size());
  for (int start = 0; start < len; ++start) {
    std::string gram;
    for (int n = 1; n <= max_n && start + n <= len; ++n) {
      gram += chars[start + n - 1];
      if (n >= min_n) out.push_back(gram);
    }
  }
  return out;
}

EmbeddingTable::EmbeddingTable(int dim, std::vector<std::string> words, std::vector<double> matrix)
    : dim_(dim), words_(std::move(words)), matrix_(std::move(matrix)) {
  if (dim_ <= 0) throw Error("embedding dim must be positive");
  if (matrix_.size() != words_.size() * static_cast<std::size_t>(dim_))
    throw Error("embedding matrix size does not match vocab x dim");
  for (double v : matrix_)
    if (!std::isfinite(v)) throw Error("embedding matrix has a non-finite value");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (!vocab_.emplace(words_[i], i).second) throw Error("duplicate token '" + words_[i] + "'");
}

std::span<const double> EmbeddingTable::row(std::size_t index) const {
  return std::span<const double>(matrix_).subspan(index * dim_, dim_);
}

long EmbeddingTable::index_of(std::string_view token) const {
  auto it = vocab_.find(std::string(token));
  return it == vocab_.end() ? -1 : static_cast<long>(it->second);
}

void EmbeddingTable::set_buckets(std::vector<double> buckets, int min_n, int max_n) {
  if (buckets.empty() || buckets.size() % dim_ != 0)
    throw Error("bucket matrix size is not a positive multiple of dim");
  if (min_n < 1 || min_n > max_n) throw Error("invalid n-gram range");
  for (double v : buckets)
    if (!std::isfinite(v)) throw Error("bucket matrix has a non-finite value");
  buckets_ = std::move(buckets);
  bucket_count_ = buckets_.size() / dim_;
  min_n_ = min_n;
  max_n_ = max_n;
}

void EmbeddingTable::lookup(std::string_view token, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(dim_)) throw ShapeError("lookup output has wrong size");
  long idx = index_of(token);
  if (idx >= 0) {
    auto r = row(idx);
    std::copy(r.begin(), r.end(), out.begin());
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (!has_buckets()) return;
  auto grams = char_ngrams(token, min_n_, max_n_);
  if (grams.empty()) return;
  for (const auto& g : grams) {
    const double* b = buckets_.data() + (fnv1a64(g) % bucket_count_) * dim_;
    for (int c = 0; c < dim_; ++c) out[c] += b[c];
  }
  const double inv = static_cast<double>(grams.size());
  for (auto& v : out) v /= inv;
}

std::vector<double> EmbeddingTable::lookup(std::string_view token) const {
  std::vector<double> out(dim_);
  lookup(token, out);
  return out;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double* out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(*out);
}

}  // namespace

EmbeddingTable load_table(std::istream& in, bool expect_buckets) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_spaces(line);
  long long count = 0, dim = 0;
  if (header.size() != 2 ||
      std::from_chars(header[0].data(), header[0].data() + header[0].size(), count).ec != std::errc() ||
      std::from_chars(header[1].data(), header[1].data() + header[1].size(), dim).ec != std::errc() ||
      count < 0 || dim <= 0)
    throw ParseError("header must be 'count dim'", 1);

  std::vector<std::string> words;
  std::vector<double> matrix;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t rows = 0, duplicates = 0;
  std::vector<double> values(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_spaces(line);
    if (cols.size() != static_cast<std::size_t>(dim) + 1)
      throw ParseError("expected token and " + std::to_string(dim) + " values, got " +
                           std::to_string(cols.size() ? cols.size() - 1 : 0),
                       line_no);
    for (long long c = 0; c < dim; ++c)
      if (!parse_double(cols[c + 1], &values[c]))
        throw ParseError("non-numeric value '" + std::string(cols[c + 1]) + "'", line_no);
    ++rows;
    std::string token(cols[0]);
    auto [it, fresh] = index.emplace(token, words.size());
    if (fresh) {
      words.push_back(token);
      matrix.insert(matrix.end(), values.begin(), values.end());
    } else {
      ++duplicates;
      MMX_LOG(kWarn, "duplicate token '" << token << "' at line " << line_no
                                         << "; last occurrence wins");
      std::copy(values.begin(), values.end(), matrix.begin() + it->second * dim);
    }
  }
  if (rows != static_cast<std::size_t>(count))
    throw ParseError("header declares " + std::to_string(count) + " rows, found " +
                     std::to_string(rows));
  EmbeddingTable table(static_cast<int>(dim), std::move(words), std::move(matrix));
  table.duplicates_ = duplicates;
  if (expect_buckets) MMX_LOG(kDebug, "table loaded; buckets expected from sidecar");
  return table;
}

EmbeddingTable load_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_table(in);
}

void write_table(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (double v : table.row(i)) out << ' ' << v;
    out << '\n';
  }
}

BucketMatrix read_buckets(std::istream& in) {
  binio::expect_magic(in, "MMXB");
  BucketMatrix b;
  b.count = binio::read_u32(in);
  b.dim = static_cast<int>(binio::read_u32(in));
  if (b.count == 0 || b.dim == 0) throw Error("bucket sidecar has zero rows or dim");
  b.values.resize(b.count * b.dim);
  for (auto& v : b.values) v = binio::read_f32(in);
  return b;
}

BucketMatrix read_buckets_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_buckets(in);
}

void write_buckets(std::ostream& out, const BucketMatrix& b) {
  binio::write_magic(out, "MMXB");
  binio::write_u32(out, static_cast<std::uint32_t>(b.count));
  binio::write_u32(out, static_cast<std::uint32_t>(b.dim));
  for (double v : b.values) binio::write_f32(out, static_cast<float>(v));
}

SubwordVocab::SubwordVocab(const std::vector<std::string>& units) {
  for (const auto& u : units) {
    if (u.empty() || u == kUnknown) continue;
    units_.insert(u);
    auto chars = utf8::split_chars(u);
    max_unit_chars_ = std::max(max_unit_chars_, chars.size());
    for (auto& c : chars) units_.insert(std::move(c));
  }
  if (units_.empty()) throw Error("subword vocabulary is empty");
}

void SubwordVocab::add_characters(const std::vector<std::string>& texts) {
  for (const auto& t : texts)
    for (auto& c : utf8::split_chars(t)) units_.insert(std::move(c));
}

std::vector<std::string> SubwordVocab::sorted_units() const {
  std::vector<std::string> out(units_.begin(), units_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> SubwordVocab::segment(std::string_view token) const {
  auto chars = utf8::split_chars(token);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t longest = std::min(max_unit_chars_, chars.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      std::string cand;
      for (std::size_t k = 0; k < len; ++k) cand += chars[i + k];
      if (units_.count(cand)) {
        out.push_back(std::move(cand));
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.emplace_back(kUnknown);
      ++i;
    }
  }
  return out;
}

SubwordVocab load_subword_vocab(std::istream& in) {
  std::vector<std::string> units;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) units.push_back(line);
  }
  return SubwordVocab(units);
}

SubwordVocab load_subword_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_subword_vocab(in);
}

}  // namespace mmx::embeddings
