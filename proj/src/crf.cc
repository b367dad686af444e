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

#include "mmx/crf.h"

#include <cmath>
#include <limits>

#include "mmx/error.h"

namespace mmx::crf {

std::vector<double> initial_transitions(std::size_t labels) {
  const std::size_t s = labels + 2;
  std::vector<double> t(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    t[i * s + bos(labels)] = kImpossible;
    t[eos(labels) * s + i] = kImpossible;
  }
  return t;
}

namespace {

void check(std::span<const double> emissions, std::span<const double> transitions, std::size_t labels) {
  if (labels == 0) throw ShapeError("crf: no labels");
  if (emissions.empty() || emissions.size() % labels != 0)
    throw ShapeError("crf: emissions are not n x " + std::to_string(labels));
  if (transitions.size() != (labels + 2) * (labels + 2))
    throw ShapeError("crf: transitions are not (L+2) x (L+2)");
}

}  // namespace

double path_score(std::span<const double> e, std::span<const double> t, std::size_t labels,
                  const std::vector<int>& path) {
  check(e, t, labels);
  const std::size_t n = e.size() / labels, s = labels + 2;
  if (path.size() != n) throw ShapeError("crf: path length differs from sequence length");
  std::size_t prev = bos(labels);
  double score = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(path[i]);
    if (y >= labels) throw Error("crf: label index out of range");
    score += t[prev * s + y] + e[i * labels + y];
    prev = y;
  }
  return score + t[prev * s + eos(labels)];
}

double log_partition(std::span<const double> e, std::span<const double> t, std::size_t labels) {
  check(e, t, labels);
  const std::size_t n = e.size() / labels, s = labels + 2, L = labels;
  std::vector<double> alpha(L), next(L);
  for (std::size_t j = 0; j < L; ++j) alpha[j] = t[bos(L) * s + j] + e[j];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < L; ++k) m = std::max(m, alpha[k] + t[k * s + j]);
      double z = 0;
      for (std::size_t k = 0; k < L; ++k) z += std::exp(alpha[k] + t[k * s + j] - m);
      next[j] = m + std::log(z) + e[i * L + j];
    }
    alpha.swap(next);
  }
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < L; ++k) m = std::max(m, alpha[k] + t[k * s + eos(L)]);
  double z = 0;
  for (std::size_t k = 0; k < L; ++k) z += std::exp(alpha[k] + t[k * s + eos(L)] - m);
  return m + std::log(z);
}

std::vector<int> viterbi(std::span<const double> e, std::span<const double> t, std::size_t labels,
                         double* best_score) {
  check(e, t, labels);
  const std::size_t n = e.size() / labels, s = labels + 2, L = labels;
  std::vector<double> delta(L), next(L);
  std::vector<int> back(n * L, 0);
  for (std::size_t j = 0; j < L; ++j) delta[j] = t[bos(L) * s + j] + e[j];
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t arg = 0;
      double best = delta[0] + t[j];
      for (std::size_t k = 1; k < L; ++k) {
        const double v = delta[k] + t[k * s + j];
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      next[j] = best + e[i * L + j];
      back[i * L + j] = static_cast<int>(arg);
    }
    delta.swap(next);
  }
  std::size_t last = 0;
  double best = delta[0] + t[eos(L)];
  for (std::size_t k = 1; k < L; ++k) {
    const double v = delta[k] + t[k * s + eos(L)];
    if (v > best) {
      best = v;
      last = k;
    }
  }
  std::vector<int> path(n);
  path[n - 1] = static_cast<int>(last);
  for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i * L + path[i]];
  if (best_score) *best_score = best;
  return path;
}

nn::Var nll(const nn::Var& emissions, const nn::Var& transitions, const std::vector<int>& gold) {
  const std::size_t n = emissions.rows(), L = emissions.cols(), s = L + 2;
  if (transitions.rows() != s || transitions.cols() != s)
    throw ShapeError("crf: transitions " + nn::to_string(transitions.shape()) + " do not fit " +
                     std::to_string(L) + " labels");
  if (gold.size() != n) throw ShapeError("crf: gold length differs from emissions");
  nn::Graph& g = emissions.graph();

  nn::Var inner = nn::slice(nn::slice(transitions, 0, 0, L), 1, 0, L);
  nn::Var start = nn::slice(nn::slice(transitions, 0, bos(L), bos(L) + 1), 1, 0, L);
  nn::Var stop = nn::transpose(nn::slice(nn::slice(transitions, 0, 0, L), 1, eos(L), eos(L) + 1));

  nn::Var alpha = nn::add(start, nn::slice(emissions, 0, 0, 1));
  for (std::size_t i = 1; i < n; ++i) {
    nn::Var scores = nn::add(inner, nn::transpose(alpha));
    alpha = nn::add(nn::logsumexp(scores, 0), nn::slice(emissions, 0, i, i + 1));
  }
  nn::Var log_z = nn::logsumexp(nn::add(alpha, stop), 1);

  std::vector<double> pick_e(n * L, 0.0), pick_t(s * s, 0.0);
  std::size_t prev = bos(L);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(gold[i]);
    if (y >= L) throw Error("crf: gold label out of range");
    pick_e[i * L + y] += 1.0;
    pick_t[prev * s + y] += 1.0;
    prev = y;
  }
  pick_t[prev * s + eos(L)] += 1.0;
  nn::Var gold_score = nn::add(nn::sum(nn::mul(emissions, g.constant({n, L}, std::move(pick_e)))),
                               nn::sum(nn::mul(transitions, g.constant({s, s}, std::move(pick_t)))));
  return nn::clamp_min(nn::sub(log_z, gold_score), 0.0);
}

}  // namespace mmx::crf
