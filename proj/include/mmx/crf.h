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

#ifndef MMX_CRF_H_
#define MMX_CRF_H_

#include <span>
#include <vector>

#include "mmx/tensor.h"

// Linear-chain CRF with explicit start/stop states. Transition matrices are
// (L+2) x (L+2): rows are the previous state, columns the next, state L is
// BOS and L+1 is EOS.
namespace mmx::crf {

// Score of impossible moves (into BOS, out of EOS).
inline constexpr double kImpossible = -1e4;

inline std::size_t bos(std::size_t labels) { return labels; }
inline std::size_t eos(std::size_t labels) { return labels + 1; }

// (L+2)^2 zeros with the BOS column and EOS row set to kImpossible.
std::vector<double> initial_transitions(std::size_t labels);

// emissions: n x L row-major.
double path_score(std::span<const double> emissions, std::span<const double> transitions,
                  std::size_t labels, const std::vector<int>& path);

// Forward algorithm in log space.
double log_partition(std::span<const double> emissions, std::span<const double> transitions,
                     std::size_t labels);

// Best path; ties go to the lowest label index at every backtrack step.
std::vector<int> viterbi(std::span<const double> emissions, std::span<const double> transitions,
                         std::size_t labels, double* best_score = nullptr);

// log Z - score(gold), recorded on the graph, clamped at 0 from below.
nn::Var nll(const nn::Var& emissions, const nn::Var& transitions, const std::vector<int>& gold);

}  // namespace mmx::crf

#endif  // MMX_CRF_H_
