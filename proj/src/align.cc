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

#include "mmx/align.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mmx/binary_io.h"
#include "mmx/error.h"
#include "mmx/log.h"

namespace mmx::align {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols, rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

namespace {

double column_dot(const Matrix& m, std::size_t p, std::size_t q) {
  double s = 0;
  for (std::size_t i = 0; i < m.rows; ++i) s += m(i, p) * m(i, q);
  return s;
}

void rotate_columns(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double mp = m(i, p), mq = m(i, q);
    m(i, p) = c * mp - s * mq;
    m(i, q) = s * mp + c * mq;
  }
}

// Fills columns flagged in `missing` with unit vectors orthogonal to all
// other columns (Gram-Schmidt over the standard basis).
void complete_basis(Matrix& u, const std::vector<bool>& missing) {
  const std::size_t n = u.rows;
  std::size_t next_basis = 0;
  for (std::size_t col = 0; col < u.cols; ++col) {
    if (!missing[col]) continue;
    while (true) {
      if (next_basis >= n) throw Error("cannot complete orthonormal basis");
      std::vector<double> v(n, 0.0);
      v[next_basis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t other = 0; other < u.cols; ++other) {
          if (other == col || (missing[other] && other > col)) continue;
          double d = 0;
          for (std::size_t i = 0; i < n; ++i) d += v[i] * u(i, other);
          for (std::size_t i = 0; i < n; ++i) v[i] -= d * u(i, other);
        }
      double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (norm < 1e-6) continue;
      for (std::size_t i = 0; i < n; ++i) u(i, col) = v[i] / norm;
      break;
    }
  }
}

}  // namespace

Svd jacobi_svd(const Matrix& a) {
  if (a.rows != a.cols) throw ShapeError("jacobi_svd expects a square matrix");
  const std::size_t n = a.rows;
  Matrix work = a;
  Matrix v = Matrix::identity(n);
  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = column_dot(work, p, p);
        const double beta = column_dot(work, q, q);
        const double gamma = column_dot(work, p, q);
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(work, p, q, c, s);
        rotate_columns(v, p, q, c, s);
      }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  double sigma_max = 0;
  for (std::size_t j = 0; j < n; ++j) {
    sigma[j] = std::sqrt(column_dot(work, j, j));
    sigma_max = std::max(sigma_max, sigma[j]);
  }

  // Descending order of singular values; stable so equal values keep order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Svd out{Matrix(n, n), std::vector<double>(n), Matrix(n, n)};
  std::vector<bool> missing(n, false);
  const double tiny = std::max(sigma_max * 1e-12, 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
    if (sigma[j] <= tiny) {
      missing[k] = true;
      out.sigma[k] = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) out.u(i, k) = work(i, j) / sigma[j];
  }
  complete_basis(out.u, missing);
  return out;
}

double orthogonality_error(const Matrix& w) {
  Matrix g = matmul(w.transpose(), w);
  double worst = 0;
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

Matrix procrustes(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows || x.cols != y.cols) throw ShapeError("procrustes: X and Y shapes differ");
  if (x.cols == 0) throw ShapeError("procrustes: zero dimension");
  if (x.rows < x.cols) throw Error("underdetermined: fewer pairs than dimensions");
  Matrix m = matmul(y.transpose(), x);
  Svd svd = jacobi_svd(m);
  return matmul(svd.u, svd.v.transpose());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw Error("cosine of a zero vector");
  return dot / std::sqrt(na * nb);
}

double csls(std::span<const double> x_mapped, std::span<const double> y, double r_src,
            double r_tgt) {
  return 2.0 * cosine(x_mapped, y) - r_src - r_tgt;
}

namespace {

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    double n = 0;
    for (std::size_t c = 0; c < m.cols; ++c) n += m(r, c) * m(r, c);
    n = std::sqrt(n);
    if (n == 0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) /= n;
  }
  return out;
}

void similarity_row(const Matrix& a, std::size_t r, const Matrix& b, std::vector<double>& out) {
  out.assign(b.rows, 0.0);
  const double* ar = a.data.data() + r * a.cols;
  for (std::size_t j = 0; j < b.rows; ++j) {
    const double* br = b.data.data() + j * b.cols;
    double s = 0;
    for (std::size_t c = 0; c < a.cols; ++c) s += ar[c] * br[c];
    out[j] = s;
  }
}

// Keeps the k largest values seen.
struct TopK {
  explicit TopK(std::size_t k) : k(k) {}
  void push(double v) {
    if (vals.size() < k) {
      vals.push_back(v);
      std::push_heap(vals.begin(), vals.end(), std::greater<>());
    } else if (v > vals.front()) {
      std::pop_heap(vals.begin(), vals.end(), std::greater<>());
      vals.back() = v;
      std::push_heap(vals.begin(), vals.end(), std::greater<>());
    }
  }
  double mean() const {
    if (vals.empty()) return 0.0;
    // Sorted sum keeps the result independent of insertion order.
    std::vector<double> s = vals;
    std::sort(s.begin(), s.end());
    return std::accumulate(s.begin(), s.end(), 0.0) / double(s.size());
  }
  std::size_t k;
  std::vector<double> vals;
};

Matrix gather_rows(const embeddings::EmbeddingTable& t, std::size_t limit) {
  const std::size_t n = std::min(limit, t.size());
  Matrix m(n, t.dim());
  std::copy(t.matrix().begin(), t.matrix().begin() + n * t.dim(), m.data.begin());
  return m;
}

Matrix map_rows(const Matrix& x, const Matrix& w) { return matmul(x, w.transpose()); }

double mean_pair_cosine(const Matrix& mapped, const Matrix& tgt,
                        const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (pairs.empty()) return 0.0;
  double s = 0;
  for (auto [i, j] : pairs) {
    auto a = mapped.row(i);
    auto b = tgt.row(j);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      dot += a[c] * b[c];
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    s += (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
  }
  return s / double(pairs.size());
}

}  // namespace

std::vector<double> mean_topk_similarity(const Matrix& queries, const Matrix& pool, std::size_t k) {
  Matrix qn = normalized_rows(queries), pn = normalized_rows(pool);
  k = std::min(k, pool.rows);
  std::vector<double> out(queries.rows), row;
  for (std::size_t i = 0; i < queries.rows; ++i) {
    similarity_row(qn, i, pn, row);
    TopK top(k);
    for (double v : row) top.push(v);
    out[i] = top.mean();
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> mutual_csls_pairs(const Matrix& mapped_src,
                                                                   const Matrix& tgt,
                                                                   std::size_t k) {
  if (mapped_src.cols != tgt.cols) throw ShapeError("csls: dimension mismatch");
  if (mapped_src.rows == 0 || tgt.rows == 0) return {};
  const std::vector<double> r_src = mean_topk_similarity(mapped_src, tgt, k);
  const std::vector<double> r_tgt = mean_topk_similarity(tgt, mapped_src, k);
  Matrix sn = normalized_rows(mapped_src), tn = normalized_rows(tgt);

  std::vector<std::size_t> best_t(sn.rows, 0);
  std::vector<std::size_t> best_s(tn.rows, 0);
  std::vector<double> best_t_score(sn.rows, -INFINITY), best_s_score(tn.rows, -INFINITY);
  std::vector<double> row;
  for (std::size_t i = 0; i < sn.rows; ++i) {
    similarity_row(sn, i, tn, row);
    for (std::size_t j = 0; j < tn.rows; ++j) {
      const double score = 2.0 * row[j] - r_src[i] - r_tgt[j];
      // Strict comparisons keep the lowest index on ties.
      if (score > best_t_score[i]) {
        best_t_score[i] = score;
        best_t[i] = j;
      }
      if (score > best_s_score[j]) {
        best_s_score[j] = score;
        best_s[j] = i;
      }
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < sn.rows; ++i)
    if (best_s[best_t[i]] == i) pairs.emplace_back(i, best_t[i]);
  return pairs;
}

std::vector<std::pair<std::string, std::string>> identical_string_seeds(
    const embeddings::EmbeddingTable& src, const embeddings::EmbeddingTable& tgt) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& w : src.words())
    if (tgt.contains(w)) out.emplace_back(w, w);
  return out;
}

AlignmentResult refine(const AlignmentJob& job) {
  if (!job.src || !job.tgt) throw Error("alignment job needs source and target tables");
  if (job.src->dim() != job.tgt->dim()) throw ShapeError("source and target dims differ");
  if (job.iterations < 1) throw Error("iterations must be >= 1");
  if (job.csls_k < 1) throw Error("csls_k must be >= 1");
  if (job.seed_pairs.empty()) throw Error("seed dictionary is empty");
  const std::size_t d = job.src->dim();

  std::vector<std::pair<std::size_t, std::size_t>> dict;
  for (const auto& [s, t] : job.seed_pairs) {
    long si = job.src->index_of(s), ti = job.tgt->index_of(t);
    if (si < 0) throw Error("seed token '" + s + "' not in source vocabulary");
    if (ti < 0) throw Error("seed token '" + t + "' not in target vocabulary");
    dict.emplace_back(si, ti);
  }

  const Matrix src_all = gather_rows(*job.src, job.src->size());
  const Matrix tgt_all = gather_rows(*job.tgt, job.tgt->size());
  const Matrix src_cap = gather_rows(*job.src, job.dict_size_cap);
  const Matrix tgt_cap = gather_rows(*job.tgt, job.dict_size_cap);

  auto solve = [&](const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Matrix x(pairs.size(), d), y(pairs.size(), d);
    for (std::size_t r = 0; r < pairs.size(); ++r) {
      std::copy_n(src_all.row(pairs[r].first).begin(), d, x.data.begin() + r * d);
      std::copy_n(tgt_all.row(pairs[r].second).begin(), d, y.data.begin() + r * d);
    }
    return procrustes(x, y);
  };

  AlignmentResult result;
  result.w = solve(dict);
  result.objective_trace.push_back(mean_pair_cosine(map_rows(src_all, result.w), tgt_all, dict));
  result.iterations_run = 1;

  for (int it = 1; it < job.iterations; ++it) {
    Matrix mapped = map_rows(src_cap, result.w);
    auto induced = mutual_csls_pairs(mapped, tgt_cap, job.csls_k);
    if (induced.size() < d) {
      MMX_LOG(kWarn, "iteration " << it << ": induced dictionary has " << induced.size()
                                  << " pairs (< dim " << d << "), stopping early");
      result.stopped_early = true;
      break;
    }
    dict = std::move(induced);
    result.w = solve(dict);
    result.objective_trace.push_back(mean_pair_cosine(map_rows(src_all, result.w), tgt_all, dict));
    result.iterations_run = it + 1;
  }
  for (auto [s, t] : dict) result.induced_dict.emplace_back(job.src->words()[s], job.tgt->words()[t]);
  return result;
}

embeddings::EmbeddingTable apply_mapping(const embeddings::EmbeddingTable& table, const Matrix& w) {
  const std::size_t d = table.dim();
  if (w.rows != d || w.cols != d) throw ShapeError("mapping dim does not match table dim");
  auto map_all = [&](const std::vector<double>& in) {
    std::vector<double> out(in.size(), 0.0);
    for (std::size_t r = 0; r < in.size() / d; ++r)
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += w(i, j) * in[r * d + j];
        out[r * d + i] = s;
      }
    return out;
  };
  embeddings::EmbeddingTable out(table.dim(), table.words(), map_all(table.matrix()));
  if (table.has_buckets()) out.set_buckets(map_all(table.buckets()), table.min_n(), table.max_n());
  return out;
}

void write_mapping(std::ostream& out, const Matrix& w) {
  if (w.rows != w.cols) throw ShapeError("mapping must be square");
  binio::write_magic(out, "MMXW");
  binio::write_u32(out, static_cast<std::uint32_t>(w.rows));
  for (double v : w.data) binio::write_f64(out, v);
}

Matrix read_mapping(std::istream& in) {
  binio::expect_magic(in, "MMXW");
  const std::size_t d = binio::read_u32(in);
  Matrix w(d, d);
  for (auto& v : w.data) v = binio::read_f64(in);
  return w;
}

std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string s, t, extra;
    if (!(ls >> s >> t) || (ls >> extra)) throw ParseError("expected 'source target'", line_no);
    out.emplace_back(s, t);
  }
  return out;
}

}  // namespace mmx::align
