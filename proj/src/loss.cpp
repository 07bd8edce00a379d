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

#include "bigran/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bigran {

double info_nce_from_scores(std::span<const double> scores, double tau,
                            std::span<double> dscores) {
    require(scores.size() >= 2, "info_nce: need the positive plus at least one negative");
    require(tau > 0.0, "info_nce: temperature must be positive");
    require(dscores.size() == scores.size(), "info_nce: gradient buffer size mismatch");

    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double logit = scores[i] / tau;
        if (!std::isfinite(logit)) {
            throw NumericalError("info_nce: non-finite logit for candidate " +
                                 std::to_string(i));
        }
        max_logit = std::max(max_logit, logit);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        denom += std::exp(scores[i] / tau - max_logit);
    }
    const double log_denom = std::log(denom) + max_logit;
    const double loss = log_denom - scores[0] / tau;

    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = std::exp(scores[i] / tau - log_denom);
        dscores[i] = (p - (i == 0 ? 1.0 : 0.0)) / tau;
    }
    return loss;
}

InfoNceResult info_nce(std::span<const float> query, std::span<const float> positive,
                       const std::vector<std::vector<float>>& negatives, double tau) {
    require(!negatives.empty(), "info_nce: negative set is empty");
    const std::size_t d = query.size();
    require(positive.size() == d, "info_nce: positive dimension mismatch");
    for (const auto& n : negatives) {
        require(n.size() == d, "info_nce: negative dimension mismatch");
    }

    const std::size_t n_cand = 1 + negatives.size();
    std::vector<double> scores(n_cand);
    scores[0] = dot(query.data(), positive.data(), d);
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        scores[i + 1] = dot(query.data(), negatives[i].data(), d);
    }

    std::vector<double> dscores(n_cand);
    InfoNceResult result;
    result.loss = info_nce_from_scores(scores, tau, dscores);

    result.grad_query.assign(d, 0.0f);
    std::vector<double> gq(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) gq[k] = dscores[0] * positive[k];
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        const double g = dscores[i + 1];
        const auto& n = negatives[i];
        for (std::size_t k = 0; k < d; ++k) gq[k] += g * n[k];
    }
    for (std::size_t k = 0; k < d; ++k) result.grad_query[k] = static_cast<float>(gq[k]);

    result.grad_pos.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        result.grad_pos[k] = static_cast<float>(dscores[0] * query[k]);
    }
    result.grad_negs.resize(negatives.size());
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        result.grad_negs[i].resize(d);
        for (std::size_t k = 0; k < d; ++k) {
            result.grad_negs[i][k] = static_cast<float>(dscores[i + 1] * query[k]);
        }
    }
    return result;
}

void grad_through_quantizer(std::span<const float> upstream, const SparseCode& code,
                            const CodebookSet& books, std::span<float> grad_input,
                            std::span<double> grad_codewords) {
    require(upstream.size() == books.dim(), "grad_through_quantizer: upstream dimension mismatch");
    require(code.indices.size() == books.num_books,
            "grad_through_quantizer: code length mismatch");
    require(grad_input.size() == books.dim(),
            "grad_through_quantizer: input-gradient size mismatch");
    require(grad_codewords.size() ==
                static_cast<std::size_t>(books.num_books) * books.book_size * books.subdim,
            "grad_through_quantizer: codeword-gradient size mismatch");

    std::copy(upstream.begin(), upstream.end(), grad_input.begin());
    for (std::uint32_t b = 0; b < books.num_books; ++b) {
        const std::uint16_t sel = code.indices[b];
        require(sel < books.book_size, "grad_through_quantizer: index out of range");
        double* dst = grad_codewords.data() +
                      (static_cast<std::size_t>(b) * books.book_size + sel) * books.subdim;
        const float* src = upstream.data() + static_cast<std::size_t>(b) * books.subdim;
        for (std::uint32_t k = 0; k < books.subdim; ++k) dst[k] += src[k];
    }
}

} // namespace bigran
