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

#ifndef MMX_EMBEDDINGS_H_
#define MMX_EMBEDDINGS_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mmx::embeddings {

std::uint64_t fnv1a64(std::string_view bytes);

// Character n-grams of `<token>` for n in [min_n, max_n], in order of
// start position then length. Characters are UTF-8 code points.
std::vector<std::string> char_ngrams(std::string_view token, int min_n, int max_n);

// Pretrained word (or subword) vectors with optional hashed n-gram buckets
// for out-of-vocabulary back-off. Immutable once built.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dim, std::vector<std::string> words, std::vector<double> matrix);

  int dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<double>& matrix() const { return matrix_; }
  std::span<const double> row(std::size_t index) const;
  // -1 when absent.
  long index_of(std::string_view token) const;
  bool contains(std::string_view token) const { return index_of(token) >= 0; }

  void set_buckets(std::vector<double> buckets, int min_n, int max_n);
  bool has_buckets() const { return bucket_count_ > 0; }
  std::size_t bucket_count() const { return bucket_count_; }
  const std::vector<double>& buckets() const { return buckets_; }
  int min_n() const { return min_n_; }
  int max_n() const { return max_n_; }

  std::size_t parameter_count() const { return matrix_.size() + buckets_.size(); }

  // Row for in-vocabulary tokens; mean of n-gram bucket rows otherwise; zeros
  // when there are no buckets. Writes dim() values into `out`.
  void lookup(std::string_view token, std::span<double> out) const;
  std::vector<double> lookup(std::string_view token) const;

  // Number of duplicate tokens dropped by load_table (last occurrence won).
  std::size_t duplicates() const { return duplicates_; }

 private:
  friend EmbeddingTable load_table(std::istream&, bool);

  int dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> vocab_;
  std::vector<double> matrix_;
  std::vector<double> buckets_;
  std::size_t bucket_count_ = 0;
  int min_n_ = 3;
  int max_n_ = 6;
  std::size_t duplicates_ = 0;
};

// `.vec` text: header `count dim`, then `token v1 ... v_dim` per row.
// `expect_buckets` only records intent; buckets come from read_buckets.
EmbeddingTable load_table(std::istream& in, bool expect_buckets = false);
EmbeddingTable load_table_file(const std::string& path);
void write_table(std::ostream& out, const EmbeddingTable& table);

// Bucket sidecar: "MMXB", u32 N_b, u32 dim, N_b*dim float32 row-major LE.
struct BucketMatrix {
  std::size_t count = 0;
  int dim = 0;
  std::vector<double> values;
};
BucketMatrix read_buckets(std::istream& in);
BucketMatrix read_buckets_file(const std::string& path);
void write_buckets(std::ostream& out, const BucketMatrix& buckets);

// Units for greedy longest-match segmentation. Every single character of
// every unit is also a unit, so segmentation always makes progress.
class SubwordVocab {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  SubwordVocab() = default;
  explicit SubwordVocab(const std::vector<std::string>& units);

  // Adds every character occurring in `texts` as a fallback unit.
  void add_characters(const std::vector<std::string>& texts);

  bool contains(std::string_view unit) const { return units_.count(std::string(unit)) > 0; }
  std::size_t size() const { return units_.size(); }
  std::vector<std::string> sorted_units() const;

  std::vector<std::string> segment(std::string_view token) const;

 private:
  std::unordered_set<std::string> units_;
  std::size_t max_unit_chars_ = 1;
};

SubwordVocab load_subword_vocab(std::istream& in);
SubwordVocab load_subword_vocab_file(const std::string& path);

}  // namespace mmx::embeddings

#endif  // MMX_EMBEDDINGS_H_
