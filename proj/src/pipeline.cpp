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

#include "bigran/pipeline.hpp"

#include <algorithm>
#include <unordered_set>

namespace bigran {

SearchResult post_verify(std::span<const float> query_dense,
                         std::span<const std::uint32_t> candidates,
                         const DenseStore& store, std::uint32_t k) {
    require(k <= candidates.size(), "post_verify: K must be <= candidate count");
    const auto dense = store.fetch(candidates);
    require(dense.dim() == query_dense.size(),
            "post_verify: query dimension does not match the store");

    struct Entry {
        double score;
        std::uint32_t id;
    };
    std::vector<Entry> scored(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scored[i] = {dot(query_dense.data(), dense.row(i).data(), dense.dim()),
                     candidates[i]};
    }
    std::sort(scored.begin(), scored.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    // duplicate candidate ids contribute once
    SearchResult result;
    result.ids.reserve(k);
    result.scores.reserve(k);
    std::unordered_set<std::uint32_t> seen;
    for (const auto& e : scored) {
        if (result.ids.size() == k) break;
        if (!seen.insert(e.id).second) continue;
        result.ids.push_back(e.id);
        result.scores.push_back(static_cast<float>(e.score));
    }
    return result;
}

SearchResult search_pipeline(const HnswIndex& index, const DenseStore& store,
                             std::span<const float> query_features,
                             const QueryEncoders& encoders, std::uint32_t n,
                             std::uint32_t k, std::uint32_t ef_search) {
    require(n >= k, "search: N must be >= K");
    std::vector<float> candidate_emb;
    std::vector<float> verify_emb;
    if (encoders.mode == QueryMode::kUnified) {
        candidate_emb = encoders.unified.forward(query_features);
        verify_emb = candidate_emb;
    } else {
        candidate_emb = encoders.sparse_side.forward(query_features);
        verify_emb = encoders.dense_side.forward(query_features);
    }
    const auto hits = index.search_candidates(candidate_emb, n, ef_search);
    const std::uint32_t effective_k = std::min<std::uint32_t>(k, hits.ids.size());
    return post_verify(verify_emb, hits.ids, store, effective_k);
}

} // namespace bigran
