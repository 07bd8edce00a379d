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

#include "bigran/vectors.hpp"

namespace bigran {

struct SyntheticSpec {
    std::uint32_t dim{32};
    std::uint32_t n_answers{1000};
    std::uint32_t n_queries{100};
    std::uint32_t n_clusters{16};
    float noise_sigma{0.25f};

    void validate() const;
};

/// Planted-positive clustered dataset: answers are cluster centers plus
/// Gaussian noise, each query is a noisy copy of one answer (its positive).
/// Cluster centers are drawn with an anisotropic, cross-dimension-correlated
/// covariance so that rotation-aware quantizers have something to exploit.
struct SyntheticDataset {
    VectorSet answers;
    VectorSet queries;
    std::vector<std::vector<std::uint32_t>> positives; // per query, sorted
    std::vector<std::uint32_t> cluster_labels;         // per answer
};

SyntheticDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Tab-separated `query_id \t answer_id` rows, one per positive pair.
void save_positives_tsv(const std::vector<std::vector<std::uint32_t>>& positives,
                        const std::filesystem::path& path);
std::vector<std::vector<std::uint32_t>> load_positives_tsv(
    const std::filesystem::path& path, std::size_t n_queries, std::size_t n_answers);

} // namespace bigran
