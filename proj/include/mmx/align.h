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

#ifndef MMX_ALIGN_H_
#define MMX_ALIGN_H_

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmx/embeddings.h"

namespace mmx::align {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  Matrix transpose() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);

struct Svd {
  Matrix u;      // n x n, orthogonal
  std::vector<double> sigma;
  Matrix v;      // n x n, orthogonal; a = u diag(sigma) v^T
};

// One-sided Jacobi SVD of a square matrix. Singular vectors for zero singular
// values are completed to an orthonormal basis.
Svd jacobi_svd(const Matrix& a);

// Largest |(W^T W - I)_{ij}|.
double orthogonality_error(const Matrix& w);

// Orthogonal W minimizing ||X W^T - Y||_F, i.e. W = U V^T for U S V^T = SVD(Y^T X).
// Rows of X and Y are paired. Throws when rows < cols.
Matrix procrustes(const Matrix& x, const Matrix& y);

double cosine(std::span<const double> a, std::span<const double> b);

// 2 cos(x, y) - r_src - r_tgt. Throws on a zero vector.
double csls(std::span<const double> x_mapped, std::span<const double> y, double r_src,
            double r_tgt);

// Mean cosine of each row of `queries` to its k most similar rows of `pool`.
std::vector<double> mean_topk_similarity(const Matrix& queries, const Matrix& pool, std::size_t k);

struct AlignmentJob {
  const embeddings::EmbeddingTable* src = nullptr;
  const embeddings::EmbeddingTable* tgt = nullptr;
  std::vector<std::pair<std::string, std::string>> seed_pairs;
  int iterations = 5;
  int csls_k = 10;
  std::size_t dict_size_cap = 10000;
};

struct AlignmentResult {
  Matrix w;
  std::vector<std::pair<std::string, std::string>> induced_dict;
  std::vector<double> objective_trace;
  int iterations_run = 0;
  bool stopped_early = false;
};

// Identical strings present in both vocabularies, in source order.
std::vector<std::pair<std::string, std::string>> identical_string_seeds(
    const embeddings::EmbeddingTable& src, const embeddings::EmbeddingTable& tgt);

// Mutual CSLS nearest neighbours between mapped source rows and target rows,
// as (source index, target index).
std::vector<std::pair<std::size_t, std::size_t>> mutual_csls_pairs(const Matrix& mapped_src,
                                                                   const Matrix& tgt,
                                                                   std::size_t k);

AlignmentResult refine(const AlignmentJob& job);

// Returns a new table with every row (and bucket row) multiplied by W.
embeddings::EmbeddingTable apply_mapping(const embeddings::EmbeddingTable& table, const Matrix& w);

// "MMXW", u32 dim, dim*dim float64 row-major LE.
void write_mapping(std::ostream& out, const Matrix& w);
Matrix read_mapping(std::istream& in);

std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& in);

}  // namespace mmx::align

#endif  // MMX_ALIGN_H_
