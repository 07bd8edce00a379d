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
#include <span>
#include <string>
#include <vector>

#include "bigran/quantizer.hpp"

namespace bigran {

struct HnswParams {
    std::uint32_t max_degree{32};      // per-layer cap; layer 0 allows 2x
    std::uint32_t ef_construction{200};
    double level_mult{0.0};            // 0 selects 1 / ln(max_degree)
    std::uint64_t seed{42};

    double resolved_level_mult() const;
};

struct IndexStats {
    std::size_t node_count{0};
    std::size_t level_count{0};
    std::size_t adjacency_bytes{0};
    std::size_t code_bytes{0};
    std::size_t codebook_bytes{0};
    std::size_t resident_bytes{0};
    std::size_t edge_count{0};
};

std::uint64_t codebook_content_hash(const CodebookSet& books);

/// In-memory navigable small-world graph over sparse codes. Queries are
/// scored asymmetrically (per-subspace lookup tables); pairs of stored items
/// are scored through their reconstructions. Priority queues orient on
/// similarity, so "closest" always means highest score.
class HnswIndex {
public:
    HnswIndex() = default;

    static HnswIndex build(CodeSet codes, CodebookSet books, const HnswParams& params);

    struct Hits {
        std::vector<std::uint32_t> ids;
        std::vector<float> scores; // non-increasing
    };

    /// Beam search: greedy descent through the upper layers, beam of
    /// ef_search at layer 0, top-N of the beam returned. Requires
    /// ef_search >= n.
    Hits search_candidates(std::span<const float> query_embedding, std::uint32_t n,
                           std::uint32_t ef_search) const;

    std::size_t size() const { return codes_.size(); }
    const CodeSet& codes() const { return codes_; }
    const CodebookSet& books() const { return books_; }
    const HnswParams& params() const { return params_; }
    std::uint32_t entry_point() const { return entry_; }
    std::uint32_t max_level() const { return max_level_; }
    std::uint64_t books_hash() const { return books_hash_; }

    std::span<const std::uint32_t> neighbors(std::uint32_t level, std::uint32_t node) const;
    std::uint32_t node_level(std::uint32_t node) const { return levels_[node]; }

    /// Number of nodes reachable from the entry point over layer-0 edges.
    std::size_t reachable_at_base() const;

    IndexStats stats() const;

    /// BGH1 index file:
    ///   magic "BGH1" | max_degree u32 | ef_construction u32 | level_mult f64 |
    ///   seed u64 | count u64 | entry u32 | max_level u32 | levels u32*count |
    ///   per level: offsets u64*(count+1), edges u32 | embedded BGC1 block |
    ///   codebook hash u64 | crc32
    void save(const std::filesystem::path& path) const;
    static HnswIndex load(const std::filesystem::path& path, const CodebookSet& books);

private:
    struct BuildState;

    double pair_score(const std::vector<float>& recons, std::uint32_t a,
                      std::uint32_t b) const;

    HnswParams params_;
    CodebookSet books_;
    CodeSet codes_;
    std::vector<std::uint32_t> levels_;
    std::uint32_t entry_{0};
    std::uint32_t max_level_{0};
    std::uint64_t books_hash_{0};
    // CSR adjacency per level
    std::vector<std::vector<std::uint64_t>> offsets_;
    std::vector<std::vector<std::uint32_t>> edges_;
};

} // namespace bigran
