// Copyright 2026 The bigran Authors
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

#pragma once

#include <span>
#include <vector>

#include "bigran/quantizer.hpp"
#include "bigran/vectors.hpp"

namespace bigran {

/// Softmax cross-entropy over raw scores with the positive at index 0.
/// Logits are scores / tau, stabilized by max subtraction. Returns the loss
/// and writes dloss/dscore (already including the 1/tau factor).
double info_nce_from_scores(std::span<const double> scores, double tau,
                            std::span<double> dscores);

struct InfoNceResult {
    double loss{0.0};
    std::vector<float> grad_query;
    std::vector<float> grad_pos;
    std::vector<std::vector<float>> grad_negs;
};

/// Contrastive loss over one positive and >= 1 negatives:
///   -log( exp(<q,a+>/tau) / sum_{a in {a+} u negs} exp(<q,a>/tau) )
/// with exact analytic gradients for all inputs.
InfoNceResult info_nce(std::span<const float> query, std::span<const float> positive,
                       const std::vector<std::vector<float>>& negatives, double tau);

/// Straight-through backward rule for the codeword-selection quantizer:
/// the input gradient is the upstream gradient unchanged, and each upstream
/// segment accumulates onto its selected codeword only. `grad_codewords` is
/// a flat num_books*book_size*subdim accumulator.
void grad_through_quantizer(std::span<const float> upstream, const SparseCode& code,
                            const CodebookSet& books, std::span<float> grad_input,
                            std::span<double> grad_codewords);

} // namespace bigran
