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

#include <optional>
#include <span>

#include "bigran/dense_store.hpp"
#include "bigran/encoder.hpp"
#include "bigran/hnsw.hpp"

namespace bigran {

struct SearchResult {
    std::vector<std::uint32_t> ids; // distinct, ranked
    std::vector<float> scores;      // non-increasing
};

/// Re-ranks candidate ids by dense inner product against the disk store and
/// keeps the top K (ties broken by the lower id).
SearchResult post_verify(std::span<const float> query_dense,
                         std::span<const std::uint32_t> candidates,
                         const DenseStore& store, std::uint32_t k);

enum class QueryMode : std::uint8_t {
    kUnified, // one encoder feeds both phases
    kDual,    // separate candidate-phase and verification-phase encoders
};

struct QueryEncoders {
    QueryMode mode{QueryMode::kUnified};
    TowerEncoder unified;     // used in unified mode
    TowerEncoder sparse_side; // dual mode, phase 1
    TowerEncoder dense_side;  // dual mode, phase 2
};

/// Full two-phase retrieval: encode, candidate search over the in-memory
/// index, dense post-verification from disk.
SearchResult search_pipeline(const HnswIndex& index, const DenseStore& store,
                             std::span<const float> query_features,
                             const QueryEncoders& encoders, std::uint32_t n,
                             std::uint32_t k, std::uint32_t ef_search);

} // namespace bigran
