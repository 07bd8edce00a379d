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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bigran/quantizer.hpp"
#include "bigran/vectors.hpp"

namespace bigran {

/// Query-answer proximity graph: forward edges connect each query to its
/// ranked top-N candidates (positives retained), backward edges point from
/// every candidate answer to the queries listing it.
struct BipartiteGraph {
    std::uint32_t n_queries{0};
    std::uint32_t n_answers{0};
    std::uint32_t top_n{0};
    std::vector<std::vector<std::uint32_t>> forward;  // ranked candidate ids
    std::vector<std::vector<std::uint32_t>> backward; // ascending query ids
    std::vector<std::vector<std::uint32_t>> positives; // sorted
    std::size_t degenerate_queries{0}; // forward list contains only positives

    /// Structural invariants: backward is the exact transpose of forward,
    /// list lengths are bounded by top_n, no duplicates.
    void validate() const;
};

/// Builds the graph by exhaustive ADC scoring of every query embedding
/// against the quantized corpus (ranked by score descending, ties by
/// ascending id). N is clamped to the corpus size with a warning.
BipartiteGraph build_bipartite_graph(const VectorSet& query_embeddings,
                                     const CodeSet& answer_codes,
                                     const CodebookSet& books,
                                     const std::vector<std::vector<std::uint32_t>>& positives,
                                     std::uint32_t top_n);

/// BGG1 graph file:
///   magic "BGG1" | query count u64 | answer count u64 | n u32 |
///   forward offsets (q+1) u64, forward ids u32 |
///   positive offsets (q+1) u64, positive ids u32 | crc32
void save_graph(const BipartiteGraph& graph, const std::filesystem::path& path);
BipartiteGraph load_graph(const std::filesystem::path& path);

} // namespace bigran
