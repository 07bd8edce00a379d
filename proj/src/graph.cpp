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

#include "bigran/graph.hpp"

#include <algorithm>
#include <unordered_set>

#include "bigran/io.hpp"
#include "bigran/log.hpp"

namespace bigran {

void BipartiteGraph::validate() const {
    require(forward.size() == n_queries && positives.size() == n_queries,
            "BipartiteGraph: query list size mismatch");
    require(backward.size() == n_answers, "BipartiteGraph: answer list size mismatch");
    std::vector<std::vector<std::uint32_t>> transpose(n_answers);
    for (std::uint32_t q = 0; q < n_queries; ++q) {
        require(forward[q].size() <= top_n, "BipartiteGraph: forward list exceeds N");
        std::unordered_set<std::uint32_t> seen;
        for (const auto a : forward[q]) {
            require(a < n_answers, "BipartiteGraph: forward id out of range");
            require(seen.insert(a).second, "BipartiteGraph: duplicate forward id");
            transpose[a].push_back(q);
        }
    }
    for (std::uint32_t a = 0; a < n_answers; ++a) {
        require(transpose[a] == backward[a],
                "BipartiteGraph: backward is not the transpose of forward");
    }
}

BipartiteGraph build_bipartite_graph(const VectorSet& query_embeddings,
                                     const CodeSet& answer_codes,
                                     const CodebookSet& books,
                                     const std::vector<std::vector<std::uint32_t>>& positives,
                                     std::uint32_t top_n) {
    require(top_n >= 1, "build_bipartite_graph: N must be >= 1");
    require(positives.size() == query_embeddings.size(),
            "build_bipartite_graph: positives size mismatch");
    require(answer_codes.size() > 0, "build_bipartite_graph: empty corpus");
    const std::size_t n_answers = answer_codes.size();
    if (top_n > n_answers) {
        warn("graph N=" + std::to_string(top_n) + " exceeds corpus size " +
             std::to_string(n_answers) + "; clamping");
        top_n = static_cast<std::uint32_t>(n_answers);
    }

    BipartiteGraph g;
    g.n_queries = static_cast<std::uint32_t>(query_embeddings.size());
    g.n_answers = static_cast<std::uint32_t>(n_answers);
    g.top_n = top_n;
    g.forward.resize(g.n_queries);
    g.positives = positives;
    for (auto& p : g.positives) std::sort(p.begin(), p.end());

    parallel_for(g.n_queries, [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<float, std::uint32_t>> scored(n_answers);
        for (std::size_t q = begin; q < end; ++q) {
            const auto table = build_adc_table(query_embeddings.row(q), books);
            for (std::size_t a = 0; a < n_answers; ++a) {
                scored[a] = {static_cast<float>(adc_score(table, answer_codes, a)),
                             static_cast<std::uint32_t>(a)};
            }
            std::partial_sort(scored.begin(), scored.begin() + top_n, scored.end(),
                              [](const auto& lhs, const auto& rhs) {
                                  if (lhs.first != rhs.first) return lhs.first > rhs.first;
                                  return lhs.second < rhs.second;
                              });
            auto& fwd = g.forward[q];
            fwd.resize(top_n);
            for (std::uint32_t r = 0; r < top_n; ++r) fwd[r] = scored[r].second;
        }
    });

    g.backward.assign(n_answers, {});
    for (std::uint32_t q = 0; q < g.n_queries; ++q) {
        for (const auto a : g.forward[q]) g.backward[a].push_back(q);
    }

    for (std::uint32_t q = 0; q < g.n_queries; ++q) {
        const auto& pos = g.positives[q];
        bool has_negative = false;
        for (const auto a : g.forward[q]) {
            if (!std::binary_search(pos.begin(), pos.end(), a)) {
                has_negative = true;
                break;
            }
        }
        if (!has_negative) ++g.degenerate_queries;
    }
    if (g.degenerate_queries * 100 > g.n_queries) {
        warn("graph: " + std::to_string(g.degenerate_queries) + " of " +
             std::to_string(g.n_queries) +
             " queries have candidate lists with no usable negatives (>1%)");
    }
    return g;
}

namespace {
constexpr char kGraphMagic[4] = {'B', 'G', 'G', '1'};

void write_adjacency(BinaryWriter& w, const std::vector<std::vector<std::uint32_t>>& lists) {
    std::uint64_t offset = 0;
    w.write<std::uint64_t>(offset);
    for (const auto& l : lists) {
        offset += l.size();
        w.write<std::uint64_t>(offset);
    }
    for (const auto& l : lists) {
        if (!l.empty()) w.write_bytes(l.data(), l.size() * sizeof(std::uint32_t));
    }
}

std::vector<std::vector<std::uint32_t>> read_adjacency(BinaryReader& r, std::size_t count) {
    std::vector<std::uint64_t> offsets(count + 1);
    r.read_bytes(offsets.data(), offsets.size() * sizeof(std::uint64_t));
    std::vector<std::vector<std::uint32_t>> lists(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (offsets[i + 1] < offsets[i]) r.fail("adjacency offsets are not monotone");
        const std::size_t len = offsets[i + 1] - offsets[i];
        lists[i].resize(len);
        if (len > 0) r.read_bytes(lists[i].data(), len * sizeof(std::uint32_t));
    }
    return lists;
}
} // namespace

void save_graph(const BipartiteGraph& graph, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.write_magic(kGraphMagic);
    w.begin_crc();
    w.write<std::uint64_t>(graph.n_queries);
    w.write<std::uint64_t>(graph.n_answers);
    w.write<std::uint32_t>(graph.top_n);
    write_adjacency(w, graph.forward);
    write_adjacency(w, graph.positives);
    const auto crc = w.end_crc();
    w.write<std::uint32_t>(crc);
    w.close();
}

BipartiteGraph load_graph(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kGraphMagic);
    const std::size_t content_start = r.pos();
    BipartiteGraph g;
    const auto nq = r.read<std::uint64_t>();
    const auto na = r.read<std::uint64_t>();
    g.n_queries = static_cast<std::uint32_t>(nq);
    g.n_answers = static_cast<std::uint32_t>(na);
    g.top_n = r.read<std::uint32_t>();
    g.forward = read_adjacency(r, g.n_queries);
    g.positives = read_adjacency(r, g.n_queries);
    const std::size_t content_len = r.pos() - content_start;
    const auto stored_crc = r.read<std::uint32_t>();
    if (r.remaining() != 0) r.fail("trailing bytes after checksum");
    const auto actual = crc32(r.view(content_start, content_len).data(), content_len);
    if (stored_crc != actual) r.fail("checksum mismatch");

    g.backward.assign(g.n_answers, {});
    for (std::uint32_t q = 0; q < g.n_queries; ++q) {
        for (const auto a : g.forward[q]) {
            if (a >= g.n_answers) r.fail("forward id out of range");
            g.backward[a].push_back(q);
        }
    }
    g.validate();
    return g;
}

} // namespace bigran
