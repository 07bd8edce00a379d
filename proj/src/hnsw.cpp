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

#include "bigran/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>

#include "bigran/io.hpp"
#include "bigran/log.hpp"
#include "bigran/rng.hpp"

namespace bigran {

double HnswParams::resolved_level_mult() const {
    if (level_mult > 0.0) return level_mult;
    return 1.0 / std::log(static_cast<double>(std::max(2u, max_degree)));
}

std::uint64_t codebook_content_hash(const CodebookSet& books) {
    std::uint64_t h = fnv1a64(&books.num_books, sizeof(books.num_books));
    h = fnv1a64(&books.book_size, sizeof(books.book_size), h);
    h = fnv1a64(&books.subdim, sizeof(books.subdim), h);
    h = fnv1a64(books.codewords.data(), books.codewords.size() * sizeof(float), h);
    if (books.has_rotation()) {
        h = fnv1a64(books.rotation.data(), books.rotation.size() * sizeof(float), h);
    }
    return h;
}

namespace {

struct Scored {
    double score;
    std::uint32_t id;
};

struct BetterScore {
    bool operator()(const Scored& a, const Scored& b) const {
        if (a.score != b.score) return a.score < b.score; // max-heap on score
        return a.id > b.id;
    }
};

struct WorseScore {
    bool operator()(const Scored& a, const Scored& b) const {
        if (a.score != b.score) return a.score > b.score; // min-heap on score
        return a.id < b.id;
    }
};

using MaxHeap = std::priority_queue<Scored, std::vector<Scored>, BetterScore>;
using MinHeap = std::priority_queue<Scored, std::vector<Scored>, WorseScore>;

void sort_hits(std::vector<Scored>& hits) {
    std::sort(hits.begin(), hits.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

} // namespace

struct HnswIndex::BuildState {
    std::vector<float> recons;                             // n * dim cache
    std::vector<std::vector<std::vector<std::uint32_t>>> adj; // [level][node]
};

double HnswIndex::pair_score(const std::vector<float>& recons, std::uint32_t a,
                             std::uint32_t b) const {
    const std::uint32_t d = books_.dim();
    return dot(recons.data() + static_cast<std::size_t>(a) * d,
               recons.data() + static_cast<std::size_t>(b) * d, d);
}

namespace {

// Neighbor selection heuristic: walk candidates best-first, keep an element
// only if it is closer to the base than to every already-kept neighbor;
// pruned elements backfill any remaining capacity.
template <typename PairScore>
std::vector<std::uint32_t> select_neighbors(std::vector<Scored> candidates,
                                            std::size_t cap, PairScore&& pair) {
    sort_hits(candidates);
    std::vector<std::uint32_t> selected;
    std::vector<std::uint32_t> pruned;
    selected.reserve(cap);
    for (const auto& c : candidates) {
        if (selected.size() >= cap) break;
        bool keep = true;
        for (const auto s : selected) {
            if (pair(c.id, s) > c.score) {
                keep = false;
                break;
            }
        }
        if (keep) {
            selected.push_back(c.id);
        } else {
            pruned.push_back(c.id);
        }
    }
    for (const auto p : pruned) {
        if (selected.size() >= cap) break;
        selected.push_back(p);
    }
    return selected;
}

} // namespace

HnswIndex HnswIndex::build(CodeSet codes, CodebookSet books, const HnswParams& params) {
    require(codes.size() > 0, "hnsw build: empty corpus");
    require(codes.num_books() == books.num_books && codes.book_size() == books.book_size,
            "hnsw build: codes do not match the codebooks");
    books.validate();

    HnswIndex index;
    index.params_ = params;
    index.books_ = std::move(books);
    index.codes_ = std::move(codes);
    index.books_hash_ = codebook_content_hash(index.books_);

    const std::size_t n = index.codes_.size();
    const std::uint32_t d = index.books_.dim();
    const double ml = params.resolved_level_mult();
    CounterRng level_rng(params.seed);

    BuildState state;
    state.recons.resize(n * d);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint16_t> idx(index.books_.num_books);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::uint32_t b = 0; b < index.books_.num_books; ++b) {
                idx[b] = index.codes_.at(i, b);
            }
            reconstruct_into(idx, index.books_,
                             {state.recons.data() + i * d, d});
        }
    });

    index.levels_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = level_rng.next_double_open();
        index.levels_[i] = static_cast<std::uint32_t>(-std::log(u) * ml);
    }

    index.max_level_ = index.levels_[0];
    index.entry_ = 0;
    state.adj.resize(index.levels_[0] + 1);
    for (auto& level : state.adj) level.resize(n);

    const std::uint32_t m = params.max_degree;
    const auto cap_for = [m](std::uint32_t level) -> std::size_t {
        return level == 0 ? 2 * static_cast<std::size_t>(m) : m;
    };

    auto score_to = [&](const AdcTable& table, std::uint32_t node) {
        return adc_score(table, index.codes_, node);
    };
    auto pair = [&](std::uint32_t a, std::uint32_t b) {
        return index.pair_score(state.recons, a, b);
    };

    // Beam search over one build-time layer.
    auto search_layer = [&](const AdcTable& table, std::vector<Scored> entries,
                            std::size_t ef, std::uint32_t level) {
        std::vector<std::uint8_t> visited(n, 0);
        MaxHeap candidates;
        MinHeap results;
        for (const auto& e : entries) {
            if (visited[e.id]) continue;
            visited[e.id] = 1;
            candidates.push(e);
            results.push(e);
        }
        while (results.size() > ef) results.pop();
        while (!candidates.empty()) {
            const Scored c = candidates.top();
            candidates.pop();
            if (results.size() >= ef && c.score < results.top().score) break;
            for (const auto nb : state.adj[level][c.id]) {
                if (visited[nb]) continue;
                visited[nb] = 1;
                const double s = score_to(table, nb);
                if (results.size() < ef || s > results.top().score) {
                    candidates.push({s, nb});
                    results.push({s, nb});
                    if (results.size() > ef) results.pop();
                }
            }
        }
        std::vector<Scored> out;
        out.reserve(results.size());
        while (!results.empty()) {
            out.push_back(results.top());
            results.pop();
        }
        return out;
    };

    for (std::uint32_t i = 1; i < n; ++i) {
        const std::uint32_t level = index.levels_[i];
        if (level > index.max_level_) {
            state.adj.resize(level + 1);
            for (std::size_t l = index.max_level_ + 1; l <= level; ++l) {
                state.adj[l].resize(n);
            }
        }
        const float* recon = state.recons.data() + static_cast<std::size_t>(i) * d;
        const auto table = build_adc_table({recon, d}, index.books_);

        std::uint32_t ep = index.entry_;
        double ep_score = score_to(table, ep);
        for (std::uint32_t lc = index.max_level_; lc > level && lc > 0; --lc) {
            bool improved = true;
            while (improved) {
                improved = false;
                for (const auto nb : state.adj[lc][ep]) {
                    const double s = score_to(table, nb);
                    if (s > ep_score) {
                        ep = nb;
                        ep_score = s;
                        improved = true;
                    }
                }
            }
        }

        std::vector<Scored> entries{{ep_score, ep}};
        const std::uint32_t top = std::min(level, index.max_level_);
        for (std::int64_t lc = top; lc >= 0; --lc) {
            const auto lvl = static_cast<std::uint32_t>(lc);
            auto found = search_layer(table, entries, params.ef_construction, lvl);
            auto selected =
                select_neighbors(found, std::min<std::size_t>(m, cap_for(lvl)), pair);
            for (const auto s : selected) {
                state.adj[lvl][i].push_back(s);
                auto& back = state.adj[lvl][s];
                back.push_back(i);
                if (back.size() > cap_for(lvl)) {
                    std::vector<Scored> cand;
                    cand.reserve(back.size());
                    for (const auto nb : back) cand.push_back({pair(s, nb), nb});
                    back = select_neighbors(std::move(cand), cap_for(lvl), pair);
                }
            }
            entries = std::move(found);
        }

        if (level > index.max_level_) {
            index.max_level_ = level;
            index.entry_ = i;
        }
    }

    // Freeze adjacency to CSR.
    const std::size_t level_count = index.max_level_ + 1;
    index.offsets_.resize(level_count);
    index.edges_.resize(level_count);
    for (std::size_t l = 0; l < level_count; ++l) {
        auto& offsets = index.offsets_[l];
        auto& edges = index.edges_[l];
        offsets.resize(n + 1);
        offsets[0] = 0;
        for (std::size_t node = 0; node < n; ++node) {
            offsets[node + 1] = offsets[node] + state.adj[l][node].size();
        }
        edges.resize(offsets[n]);
        for (std::size_t node = 0; node < n; ++node) {
            std::copy(state.adj[l][node].begin(), state.adj[l][node].end(),
                      edges.begin() + static_cast<std::ptrdiff_t>(offsets[node]));
        }
    }
    return index;
}

std::span<const std::uint32_t> HnswIndex::neighbors(std::uint32_t level,
                                                    std::uint32_t node) const {
    const auto& offsets = offsets_[level];
    const auto& edges = edges_[level];
    return {edges.data() + offsets[node], edges.data() + offsets[node + 1]};
}

HnswIndex::Hits HnswIndex::search_candidates(std::span<const float> query_embedding,
                                             std::uint32_t n, std::uint32_t ef_search) const {
    require(size() > 0, "hnsw search: index is empty");
    require(n >= 1, "hnsw search: n must be >= 1");
    require(ef_search >= n, "hnsw search: ef_search must be >= n");
    if (n > size()) {
        warn("hnsw search: n=" + std::to_string(n) + " exceeds corpus size " +
             std::to_string(size()) + "; clamping");
        n = static_cast<std::uint32_t>(size());
    }
    const auto table = build_adc_table(query_embedding, books_);
    auto score_to = [&](std::uint32_t node) { return adc_score(table, codes_, node); };

    std::uint32_t ep = entry_;
    double ep_score = score_to(ep);
    for (std::uint32_t lc = max_level_; lc > 0; --lc) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (const auto nb : neighbors(lc, ep)) {
                const double s = score_to(nb);
                if (s > ep_score) {
                    ep = nb;
                    ep_score = s;
                    improved = true;
                }
            }
        }
    }

    std::vector<std::uint8_t> visited(size(), 0);
    MaxHeap candidates;
    MinHeap results;
    visited[ep] = 1;
    candidates.push({ep_score, ep});
    results.push({ep_score, ep});
    while (!candidates.empty()) {
        const Scored c = candidates.top();
        candidates.pop();
        if (results.size() >= ef_search && c.score < results.top().score) break;
        for (const auto nb : neighbors(0, c.id)) {
            if (visited[nb]) continue;
            visited[nb] = 1;
            const double s = score_to(nb);
            if (results.size() < ef_search || s > results.top().score) {
                candidates.push({s, nb});
                results.push({s, nb});
                if (results.size() > ef_search) results.pop();
            }
        }
    }

    std::vector<Scored> hits;
    hits.reserve(results.size());
    while (!results.empty()) {
        hits.push_back(results.top());
        results.pop();
    }
    sort_hits(hits);
    if (hits.size() > n) hits.resize(n);

    Hits out;
    out.ids.reserve(hits.size());
    out.scores.reserve(hits.size());
    for (const auto& h : hits) {
        out.ids.push_back(h.id);
        out.scores.push_back(static_cast<float>(h.score));
    }
    return out;
}

std::size_t HnswIndex::reachable_at_base() const {
    std::vector<std::uint8_t> seen(size(), 0);
    std::vector<std::uint32_t> stack{entry_};
    seen[entry_] = 1;
    std::size_t count = 0;
    while (!stack.empty()) {
        const auto node = stack.back();
        stack.pop_back();
        ++count;
        for (const auto nb : neighbors(0, node)) {
            if (!seen[nb]) {
                seen[nb] = 1;
                stack.push_back(nb);
            }
        }
    }
    return count;
}

IndexStats HnswIndex::stats() const {
    IndexStats s;
    s.node_count = size();
    s.level_count = offsets_.size();
    for (std::size_t l = 0; l < offsets_.size(); ++l) {
        s.adjacency_bytes += offsets_[l].size() * sizeof(std::uint64_t);
        s.adjacency_bytes += edges_[l].size() * sizeof(std::uint32_t);
        s.edge_count += edges_[l].size();
    }
    s.adjacency_bytes += levels_.size() * sizeof(std::uint32_t);
    s.code_bytes = codes_.raw_bytes();
    s.codebook_bytes = books_.codewords.size() * sizeof(float) +
                       books_.rotation.size() * sizeof(float);
    s.resident_bytes = s.adjacency_bytes + s.code_bytes + s.codebook_bytes;
    return s;
}

namespace {
constexpr char kIndexMagic[4] = {'B', 'G', 'H', '1'};
}

void HnswIndex::save(const std::filesystem::path& path) const {
    BinaryWriter w(path);
    w.write_magic(kIndexMagic);
    w.begin_crc();
    w.write<std::uint32_t>(params_.max_degree);
    w.write<std::uint32_t>(params_.ef_construction);
    w.write<double>(params_.level_mult);
    w.write<std::uint64_t>(params_.seed);
    w.write<std::uint64_t>(size());
    w.write<std::uint32_t>(entry_);
    w.write<std::uint32_t>(max_level_);
    w.write_bytes(levels_.data(), levels_.size() * sizeof(std::uint32_t));
    for (std::size_t l = 0; l <= max_level_; ++l) {
        w.write_bytes(offsets_[l].data(), offsets_[l].size() * sizeof(std::uint64_t));
        w.write<std::uint64_t>(edges_[l].size());
        if (!edges_[l].empty()) {
            w.write_bytes(edges_[l].data(), edges_[l].size() * sizeof(std::uint32_t));
        }
    }
    const auto code_bytes = codes_to_bytes(codes_);
    w.write<std::uint64_t>(code_bytes.size());
    w.write_bytes(code_bytes.data(), code_bytes.size());
    w.write<std::uint64_t>(books_hash_);
    const auto crc = w.end_crc();
    w.write<std::uint32_t>(crc);
    w.close();
}

HnswIndex HnswIndex::load(const std::filesystem::path& path, const CodebookSet& books) {
    BinaryReader r(path);
    r.expect_magic(kIndexMagic);
    const std::size_t content_start = r.pos();

    HnswIndex index;
    index.params_.max_degree = r.read<std::uint32_t>();
    index.params_.ef_construction = r.read<std::uint32_t>();
    index.params_.level_mult = r.read<double>();
    index.params_.seed = r.read<std::uint64_t>();
    const auto n = r.read<std::uint64_t>();
    index.entry_ = r.read<std::uint32_t>();
    index.max_level_ = r.read<std::uint32_t>();
    index.levels_.resize(static_cast<std::size_t>(n));
    r.read_bytes(index.levels_.data(), index.levels_.size() * sizeof(std::uint32_t));
    index.offsets_.resize(index.max_level_ + 1);
    index.edges_.resize(index.max_level_ + 1);
    for (std::size_t l = 0; l <= index.max_level_; ++l) {
        index.offsets_[l].resize(static_cast<std::size_t>(n) + 1);
        r.read_bytes(index.offsets_[l].data(),
                     index.offsets_[l].size() * sizeof(std::uint64_t));
        const auto edge_count = r.read<std::uint64_t>();
        index.edges_[l].resize(static_cast<std::size_t>(edge_count));
        if (edge_count > 0) {
            r.read_bytes(index.edges_[l].data(), index.edges_[l].size() * sizeof(std::uint32_t));
        }
        if (index.offsets_[l].back() != edge_count) r.fail("CSR offsets mismatch");
    }
    const auto code_block = r.read<std::uint64_t>();
    index.codes_ = codes_from_bytes(r.view(r.pos(), static_cast<std::size_t>(code_block)));
    r.skip(static_cast<std::size_t>(code_block));
    index.books_hash_ = r.read<std::uint64_t>();
    const std::size_t content_len = r.pos() - content_start;
    const auto stored_crc = r.read<std::uint32_t>();
    if (r.remaining() != 0) r.fail("trailing bytes after checksum");
    const auto actual = crc32(r.view(content_start, content_len).data(), content_len);
    if (stored_crc != actual) r.fail("checksum mismatch");

    if (index.codes_.size() != n) r.fail("code block count mismatch");
    if (codebook_content_hash(books) != index.books_hash_) {
        throw ValidationError(path.string() +
                              ": codebook hash does not match the index; refusing to load");
    }
    index.books_ = books;
    return index;
}

} // namespace bigran
