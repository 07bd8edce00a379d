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

#include "bigran/sampler.hpp"

#include <algorithm>

namespace bigran {

SampleStrategy parse_strategy(const std::string& name) {
    if (name == "randomwalk" || name == "random_walk" || name == "rw") {
        return SampleStrategy::kRandomWalk;
    }
    if (name == "snowball" || name == "sn") return SampleStrategy::kSnowball;
    throw ValidationError("unknown sampling strategy: " + name);
}

std::string strategy_name(SampleStrategy s) {
    return s == SampleStrategy::kRandomWalk ? "randomwalk" : "snowball";
}

LcsSampler::LcsSampler(const BipartiteGraph& graph, SampleStrategy strategy,
                       std::uint64_t seed)
    : graph_(graph), strategy_(strategy), rng_(seed) {
    start_epoch();
}

void LcsSampler::start_epoch() {
    const std::uint32_t n = graph_.n_queries;
    visited_.assign(n, 0);
    unvisited_ids_.resize(n);
    position_.resize(n);
    for (std::uint32_t q = 0; q < n; ++q) {
        unvisited_ids_[q] = q;
        position_[q] = q;
    }
    queue_.clear();
    skipped_ = 0;
}

void LcsSampler::mark_visited(std::uint32_t q) {
    if (visited_[q]) return;
    visited_[q] = 1;
    const std::uint32_t idx = position_[q];
    const std::uint32_t last = unvisited_ids_.back();
    unvisited_ids_[idx] = last;
    position_[last] = idx;
    unvisited_ids_.pop_back();
}

void LcsSampler::push_queue(std::span<const std::uint32_t> ids) {
    queue_.insert(queue_.end(), ids.begin(), ids.end());
    if (queue_cap_ > 0) {
        while (queue_.size() > queue_cap_) queue_.pop_front(); // drop oldest
    }
}

std::optional<std::uint32_t> LcsSampler::next_query() {
    while (!queue_.empty()) {
        std::uint32_t q;
        if (strategy_ == SampleStrategy::kRandomWalk) {
            q = queue_.back();
            queue_.pop_back();
        } else {
            q = queue_.front();
            queue_.pop_front();
        }
        if (!visited_[q]) return q;
    }
    if (unvisited_ids_.empty()) return std::nullopt;
    const auto idx = rng_.uniform_below(unvisited_ids_.size());
    return unvisited_ids_[idx];
}

std::vector<TrainingTriple> LcsSampler::sample_batch(std::size_t batch_size) {
    require(batch_size >= 1, "sample_batch: batch size must be >= 1");
    queue_cap_ = 64 * batch_size;
    std::vector<TrainingTriple> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
        const auto maybe_q = next_query();
        if (!maybe_q.has_value()) break;
        const std::uint32_t q = *maybe_q;
        const auto& pos = graph_.positives[q];
        const auto& fwd = graph_.forward[q];

        std::vector<std::uint32_t> eligible;
        eligible.reserve(fwd.size());
        for (const auto a : fwd) {
            if (!std::binary_search(pos.begin(), pos.end(), a)) eligible.push_back(a);
        }
        if (pos.empty() || eligible.empty()) {
            ++skipped_;
            mark_visited(q);
            continue;
        }
        const auto positive = pos[rng_.uniform_below(pos.size())];
        const auto negative = eligible[rng_.uniform_below(eligible.size())];
        batch.push_back({q, positive, negative});
        push_queue(graph_.backward[negative]);
        mark_visited(q);
    }
    return batch;
}

double batch_negative_similarity(std::span<const TrainingTriple> batch,
                                 const CodeSet& codes, const CodebookSet& books) {
    if (batch.size() < 2) return 0.0;
    const std::uint32_t d = books.dim();
    std::vector<float> recons(batch.size() * d);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto code = codes.get(batch[i].negative);
        reconstruct_into(code.indices, books, {recons.data() + i * d, d});
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = i + 1; j < batch.size(); ++j) {
            total += dot(recons.data() + i * d, recons.data() + j * d, d);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

} // namespace bigran
