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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bigran/graph.hpp"
#include "bigran/rng.hpp"

namespace bigran {

enum class SampleStrategy : std::uint8_t {
    kRandomWalk, // queue read from the back (most recent fan-out first)
    kSnowball,   // queue read from the front (earliest fan-out first)
};

SampleStrategy parse_strategy(const std::string& name);
std::string strategy_name(SampleStrategy s);

struct TrainingTriple {
    std::uint32_t query;
    std::uint32_t positive;
    std::uint32_t negative;

    bool operator==(const TrainingTriple&) const = default;
};

/// Locality-centric batch sampler over the bipartite proximity graph. One
/// epoch visits every query exactly once; the traversal order follows the
/// answer fan-out queue (LIFO for random walk, FIFO for snowball), falling
/// back to a uniform pick from the unvisited set when the queue runs dry.
class LcsSampler {
public:
    LcsSampler(const BipartiteGraph& graph, SampleStrategy strategy, std::uint64_t seed);

    /// Next query to visit. Visited entries found in the queue are dropped.
    /// Returns nullopt at the end of an epoch.
    std::optional<std::uint32_t> next_query();

    /// Emits up to batch_size triples; short batches signal epoch end.
    /// Every negative comes from the query's candidate list minus its
    /// positives; queries with no eligible negative are skipped and counted.
    std::vector<TrainingTriple> sample_batch(std::size_t batch_size);

    bool epoch_done() const { return unvisited_ids_.empty(); }
    void start_epoch();

    std::size_t skipped_queries() const { return skipped_; }
    std::size_t queue_size() const { return queue_.size(); }

    /// Appends ids to the fan-out queue (also used by tests to stage a
    /// specific queue state).
    void push_queue(std::span<const std::uint32_t> ids);

private:
    void mark_visited(std::uint32_t q);

    const BipartiteGraph& graph_;
    SampleStrategy strategy_;
    CounterRng rng_;
    std::deque<std::uint32_t> queue_;
    std::vector<std::uint32_t> unvisited_ids_; // swap-remove order
    std::vector<std::uint32_t> position_;      // id -> index in unvisited_ids_
    std::vector<std::uint8_t> visited_;
    std::size_t skipped_{0};
    std::size_t queue_cap_{0}; // set per sample_batch: 64 * batch_size
};

/// Mean pairwise reconstruction similarity among the negative answers of a
/// batch; the locality statistic compared across sampling strategies.
double batch_negative_similarity(std::span<const TrainingTriple> batch,
                                 const CodeSet& codes, const CodebookSet& books);

} // namespace bigran
