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

#include "bigran/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <numeric>

#include "bigran/io.hpp"
#include "bigran/log.hpp"
#include "bigran/rng.hpp"

namespace bigran {

void CodebookSet::validate() const {
    require(num_books > 0 && book_size > 0 && subdim > 0,
            "CodebookSet: shape fields must be positive");
    require(codewords.size() ==
                static_cast<std::size_t>(num_books) * book_size * subdim,
            "CodebookSet: codeword storage size mismatch");
    for (const float v : codewords) {
        if (!std::isfinite(v)) throw ValidationError("CodebookSet: non-finite codeword");
    }
    if (!rotation.empty()) {
        const std::size_t d = dim();
        require(rotation.size() == d * d, "CodebookSet: rotation shape mismatch");
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    acc += static_cast<double>(rotation[k * d + i]) * rotation[k * d + j];
                }
                const double expect = (i == j) ? 1.0 : 0.0;
                if (std::abs(acc - expect) > 1e-4) {
                    throw ValidationError("CodebookSet: rotation is not orthogonal");
                }
            }
        }
    }
}

CodeSet::CodeSet(std::uint32_t num_books, std::uint32_t book_size, std::size_t count)
    : num_books_(num_books), book_size_(book_size), wide_(book_size > 256) {
    require(num_books > 0 && book_size > 0, "CodeSet: shape fields must be positive");
    storage_.resize(count * bytes_per_code());
}

std::size_t CodeSet::size() const {
    const auto b = bytes_per_code();
    return b == 0 ? 0 : storage_.size() / b;
}

std::uint16_t CodeSet::at(std::size_t row, std::uint32_t book) const {
    if (wide_) {
        std::uint16_t v;
        std::memcpy(&v, storage_.data() + (row * num_books_ + book) * 2, 2);
        return v;
    }
    return storage_[row * num_books_ + book];
}

void CodeSet::set(std::size_t row, std::uint32_t book, std::uint16_t value) {
    require(value < book_size_, "CodeSet: index out of range for book size");
    if (wide_) {
        std::memcpy(storage_.data() + (row * num_books_ + book) * 2, &value, 2);
    } else {
        storage_[row * num_books_ + book] = static_cast<std::uint8_t>(value);
    }
}

SparseCode CodeSet::get(std::size_t row) const {
    SparseCode code;
    code.indices.resize(num_books_);
    for (std::uint32_t b = 0; b < num_books_; ++b) code.indices[b] = at(row, b);
    return code;
}

void CodeSet::append(const SparseCode& code) {
    require(code.indices.size() == num_books_, "CodeSet: code length mismatch");
    const std::size_t row = size();
    storage_.resize(storage_.size() + bytes_per_code());
    for (std::uint32_t b = 0; b < num_books_; ++b) set(row, b, code.indices[b]);
}

void CodeSet::resize(std::size_t count) { storage_.resize(count * bytes_per_code()); }

void apply_rotation(const CodebookSet& books, std::span<const float> in,
                    std::span<float> out) {
    const std::size_t d = books.dim();
    require(in.size() == d && out.size() == d, "apply_rotation: dimension mismatch");
    if (!books.has_rotation()) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const float* r = books.rotation.data();
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = static_cast<float>(dot(r + i * d, in.data(), d));
    }
}

void apply_rotation_transposed(const CodebookSet& books, std::span<const float> in,
                               std::span<float> out) {
    const std::size_t d = books.dim();
    require(in.size() == d && out.size() == d,
            "apply_rotation_transposed: dimension mismatch");
    if (!books.has_rotation()) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const float* r = books.rotation.data();
    std::vector<double> acc(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double yi = in[i];
        const float* row = r + i * d;
        for (std::size_t k = 0; k < d; ++k) acc[k] += yi * row[k];
    }
    for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<float>(acc[k]);
}

namespace {

void encode_segments(const float* rotated, const CodebookSet& books, std::uint16_t* out) {
    for (std::uint32_t b = 0; b < books.num_books; ++b) {
        const float* seg = rotated + static_cast<std::size_t>(b) * books.subdim;
        double best = -std::numeric_limits<double>::infinity();
        std::uint32_t best_idx = 0;
        for (std::uint32_t j = 0; j < books.book_size; ++j) {
            const double score = dot(seg, books.codeword(b, j).data(), books.subdim);
            if (score > best) {
                best = score;
                best_idx = j;
            }
        }
        out[b] = static_cast<std::uint16_t>(best_idx);
    }
}

} // namespace

SparseCode encode(std::span<const float> z, const CodebookSet& books) {
    require(z.size() == books.dim(), "encode: dimension mismatch");
    std::vector<float> rotated(books.dim());
    apply_rotation(books, z, rotated);
    SparseCode code;
    code.indices.resize(books.num_books);
    encode_segments(rotated.data(), books, code.indices.data());
    return code;
}

CodeSet encode_rows(const VectorSet& vectors, const CodebookSet& books) {
    require(vectors.dim() == books.dim(), "encode_rows: dimension mismatch");
    CodeSet codes(books.num_books, books.book_size, vectors.size());
    parallel_for(vectors.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<float> rotated(books.dim());
        std::vector<std::uint16_t> idx(books.num_books);
        for (std::size_t i = begin; i < end; ++i) {
            apply_rotation(books, vectors.row(i), rotated);
            encode_segments(rotated.data(), books, idx.data());
            for (std::uint32_t b = 0; b < books.num_books; ++b) codes.set(i, b, idx[b]);
        }
    });
    return codes;
}

void reconstruct_into(std::span<const std::uint16_t> indices, const CodebookSet& books,
                      std::span<float> out) {
    require(indices.size() == books.num_books, "reconstruct: code length mismatch");
    require(out.size() == books.dim(), "reconstruct: output dimension mismatch");
    std::vector<float> concat(books.dim());
    for (std::uint32_t b = 0; b < books.num_books; ++b) {
        require(indices[b] < books.book_size, "reconstruct: codeword index out of range");
        const auto cw = books.codeword(b, indices[b]);
        std::copy(cw.begin(), cw.end(),
                  concat.begin() + static_cast<std::size_t>(b) * books.subdim);
    }
    apply_rotation_transposed(books, concat, out);
}

std::vector<float> reconstruct(const SparseCode& code, const CodebookSet& books) {
    std::vector<float> out(books.dim());
    reconstruct_into(code.indices, books, out);
    return out;
}

AdcTable build_adc_table(std::span<const float> query, const CodebookSet& books) {
    require(query.size() == books.dim(), "build_adc_table: dimension mismatch");
    std::vector<float> rotated(books.dim());
    apply_rotation(books, query, rotated);
    AdcTable table;
    table.num_books = books.num_books;
    table.book_size = books.book_size;
    table.entries.resize(static_cast<std::size_t>(books.num_books) * books.book_size);
    for (std::uint32_t b = 0; b < books.num_books; ++b) {
        const float* seg = rotated.data() + static_cast<std::size_t>(b) * books.subdim;
        float* row = table.entries.data() + static_cast<std::size_t>(b) * books.book_size;
        for (std::uint32_t j = 0; j < books.book_size; ++j) {
            row[j] = static_cast<float>(dot(seg, books.codeword(b, j).data(), books.subdim));
        }
    }
    return table;
}

double adc_score(const AdcTable& table, const SparseCode& code) {
    require(code.indices.size() == table.num_books, "adc_score: code length mismatch");
    double acc = 0.0;
    for (std::uint32_t b = 0; b < table.num_books; ++b) {
        require(code.indices[b] < table.book_size, "adc_score: index out of range");
        acc += table.entry(b, code.indices[b]);
    }
    return acc;
}

double adc_score(const AdcTable& table, const CodeSet& codes, std::size_t row) {
    double acc = 0.0;
    if (!codes.wide()) {
        const std::uint8_t* idx = codes.raw() + row * codes.num_books();
        for (std::uint32_t b = 0; b < table.num_books; ++b) {
            acc += table.entries[static_cast<std::size_t>(b) * table.book_size + idx[b]];
        }
    } else {
        for (std::uint32_t b = 0; b < table.num_books; ++b) {
            acc += table.entry(b, codes.at(row, b));
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

namespace {

struct Slice {
    std::size_t count{0};
    std::uint32_t width{0};
    std::vector<float> data; // count * width

    const float* row(std::size_t i) const { return data.data() + i * width; }
};

Slice extract_slice(const VectorSet& vectors, std::uint32_t num_books, std::uint32_t book) {
    Slice s;
    s.count = vectors.size();
    s.width = vectors.dim() / num_books;
    s.data.resize(s.count * s.width);
    const std::size_t offset = static_cast<std::size_t>(book) * s.width;
    for (std::size_t i = 0; i < s.count; ++i) {
        const auto row = vectors.row(i);
        std::copy(row.begin() + offset, row.begin() + offset + s.width,
                  s.data.begin() + i * s.width);
    }
    return s;
}

double sq_dist(const float* a, const float* b, std::uint32_t n) {
    double acc = 0.0;
    for (std::uint32_t k = 0; k < n; ++k) {
        const double diff = static_cast<double>(a[k]) - b[k];
        acc += diff * diff;
    }
    return acc;
}

// Assigns every point to its nearest centroid (ties to the lowest index);
// fills per-point squared distances. Deterministic for any thread count.
void assign_points(const Slice& s, const std::vector<float>& centroids, std::uint32_t p,
                   std::vector<std::uint32_t>& assign, std::vector<double>& dists) {
    parallel_for(s.count, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const float* x = s.row(i);
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_idx = 0;
            for (std::uint32_t j = 0; j < p; ++j) {
                const double d = sq_dist(x, centroids.data() + j * s.width, s.width);
                if (d < best) {
                    best = d;
                    best_idx = j;
                }
            }
            assign[i] = best_idx;
            dists[i] = best;
        }
    });
}

std::vector<float> kmeans_pp_seed(const Slice& s, std::uint32_t p, CounterRng& rng) {
    std::vector<float> centroids(static_cast<std::size_t>(p) * s.width);
    std::vector<double> min_dist(s.count, std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> chosen(s.count, 0);

    auto place = [&](std::uint32_t slot, std::size_t point) {
        std::copy(s.row(point), s.row(point) + s.width,
                  centroids.begin() + static_cast<std::size_t>(slot) * s.width);
        chosen[point] = 1;
        parallel_for(s.count, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double d = sq_dist(s.row(i), s.row(point), s.width);
                if (d < min_dist[i]) min_dist[i] = d;
            }
        });
    };

    place(0, static_cast<std::size_t>(rng.uniform_below(s.count)));
    for (std::uint32_t c = 1; c < p; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < s.count; ++i) total += min_dist[i];
        std::size_t pick = s.count;
        if (total > 0.0) {
            const double u = rng.next_double() * total;
            double acc = 0.0;
            std::size_t last_positive = s.count;
            for (std::size_t i = 0; i < s.count; ++i) {
                if (min_dist[i] <= 0.0) continue;
                last_positive = i;
                acc += min_dist[i];
                if (acc > u) {
                    pick = i;
                    break;
                }
            }
            if (pick == s.count) pick = last_positive;
        }
        if (pick == s.count) {
            // All residual mass is zero: duplicate data. Take the first
            // unchosen point to keep the seeding total.
            for (std::size_t i = 0; i < s.count; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
            if (pick == s.count) pick = 0;
        }
        place(c, pick);
    }
    return centroids;
}

// Lloyd iterations with SSE tracking; empty clusters are reseeded to the
// point farthest from its assigned centroid.
void lloyd(const Slice& s, std::uint32_t p, std::uint32_t iters,
           std::vector<float>& centroids, std::vector<double>& sse_trace) {
    std::vector<std::uint32_t> assign(s.count);
    std::vector<double> dists(s.count);
    std::vector<double> sums(static_cast<std::size_t>(p) * s.width);
    std::vector<std::size_t> counts(p);

    for (std::uint32_t it = 0; it < iters; ++it) {
        assign_points(s, centroids, p, assign, dists);
        double sse = 0.0;
        for (std::size_t i = 0; i < s.count; ++i) sse += dists[i];
        sse_trace.push_back(sse);

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < s.count; ++i) {
            const std::uint32_t c = assign[i];
            const float* x = s.row(i);
            double* dst = sums.data() + static_cast<std::size_t>(c) * s.width;
            for (std::uint32_t k = 0; k < s.width; ++k) dst[k] += x[k];
            ++counts[c];
        }
        for (std::uint32_t c = 0; c < p; ++c) {
            if (counts[c] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[c]);
            float* dst = centroids.data() + static_cast<std::size_t>(c) * s.width;
            const double* src = sums.data() + static_cast<std::size_t>(c) * s.width;
            for (std::uint32_t k = 0; k < s.width; ++k) {
                dst[k] = static_cast<float>(src[k] * inv);
            }
        }
        for (std::uint32_t c = 0; c < p; ++c) {
            if (counts[c] != 0) continue;
            std::size_t farthest = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < s.count; ++i) {
                if (dists[i] > far_d) {
                    far_d = dists[i];
                    farthest = i;
                }
            }
            std::copy(s.row(farthest), s.row(farthest) + s.width,
                      centroids.begin() + static_cast<std::size_t>(c) * s.width);
            counts[c] = 1;
            dists[farthest] = 0.0;
        }
    }
    // Trailing assignment so the last trace entry reflects the final
    // centroids.
    assign_points(s, centroids, p, assign, dists);
    double sse = 0.0;
    for (std::size_t i = 0; i < s.count; ++i) sse += dists[i];
    sse_trace.push_back(sse);
}

KmeansResult kmeans_on_slice(const Slice& s, std::uint32_t p, std::uint32_t iters,
                             CounterRng rng) {
    KmeansResult result;
    if (p >= s.count) {
        result.centroids.resize(static_cast<std::size_t>(p) * s.width);
        for (std::uint32_t c = 0; c < p; ++c) {
            const std::size_t src = c % s.count;
            std::copy(s.row(src), s.row(src) + s.width,
                      result.centroids.begin() + static_cast<std::size_t>(c) * s.width);
        }
        result.duplicated_centroids = p > s.count;
        if (result.duplicated_centroids) {
            warn("k-means: requested " + std::to_string(p) + " centroids from " +
                 std::to_string(s.count) + " points; duplicating");
        }
        result.sse_trace.assign(1, 0.0);
        return result;
    }
    result.centroids = kmeans_pp_seed(s, p, rng);
    lloyd(s, p, iters, result.centroids, result.sse_trace);
    return result;
}

} // namespace

KmeansResult kmeans_subspace(const VectorSet& vectors, std::uint32_t num_books,
                             std::uint32_t book, std::uint32_t p, std::uint32_t iters,
                             std::uint64_t seed) {
    require(!vectors.empty(), "kmeans_subspace: empty input");
    require(num_books > 0 && vectors.dim() % num_books == 0,
            "kmeans_subspace: dimension not divisible by the number of books");
    require(book < num_books, "kmeans_subspace: book index out of range");
    require(p > 0, "kmeans_subspace: need at least one centroid");
    const Slice s = extract_slice(vectors, num_books, book);
    return kmeans_on_slice(s, p, iters, CounterRng(seed, book));
}

// ---------------------------------------------------------------------------
// OPQ
// ---------------------------------------------------------------------------

namespace {

VectorSet rotate_rows(const VectorSet& vectors, const std::vector<float>& rotation) {
    const std::uint32_t d = vectors.dim();
    VectorSet out(d, vectors.size());
    parallel_for(vectors.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto src = vectors.row(i);
            auto dst = out.row(i);
            for (std::uint32_t r = 0; r < d; ++r) {
                dst[r] = static_cast<float>(dot(rotation.data() + static_cast<std::size_t>(r) * d,
                                                src.data(), d));
            }
        }
    });
    return out;
}

// Euclidean-nearest reconstruction of every row, in the (already rotated)
// codebook space. Returns total SSE as a byproduct.
double euclid_reconstruct_rows(const VectorSet& rotated, const CodebookSet& books,
                               VectorSet& recon) {
    const std::uint32_t m = books.num_books;
    const std::uint32_t w = books.subdim;
    std::vector<double> partial(rotated.size());
    parallel_for(rotated.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto row = rotated.row(i);
            auto dst = recon.row(i);
            double sse = 0.0;
            for (std::uint32_t b = 0; b < m; ++b) {
                const float* seg = row.data() + static_cast<std::size_t>(b) * w;
                double best = std::numeric_limits<double>::infinity();
                std::uint32_t best_idx = 0;
                for (std::uint32_t j = 0; j < books.book_size; ++j) {
                    const double d = sq_dist(seg, books.codeword(b, j).data(), w);
                    if (d < best) {
                        best = d;
                        best_idx = j;
                    }
                }
                const auto cw = books.codeword(b, best_idx);
                std::copy(cw.begin(), cw.end(), dst.begin() + static_cast<std::size_t>(b) * w);
                sse += best;
            }
            partial[i] = sse;
        }
    });
    double total = 0.0;
    for (const double v : partial) total += v;
    return total;
}

std::vector<float> train_books_on(const VectorSet& data, std::uint32_t m, std::uint32_t p,
                                  std::uint32_t iters, std::uint64_t seed,
                                  bool* duplicated) {
    const std::uint32_t w = data.dim() / m;
    std::vector<float> codewords(static_cast<std::size_t>(m) * p * w);
    for (std::uint32_t b = 0; b < m; ++b) {
        auto r = kmeans_subspace(data, m, b, p, iters, seed);
        if (duplicated && r.duplicated_centroids) *duplicated = true;
        std::copy(r.centroids.begin(), r.centroids.end(),
                  codewords.begin() + static_cast<std::size_t>(b) * p * w);
    }
    return codewords;
}

// Warm-started Lloyd refinement of existing codebooks on new data.
void refine_books(const VectorSet& data, CodebookSet& books, std::uint32_t iters) {
    for (std::uint32_t b = 0; b < books.num_books; ++b) {
        const Slice s = extract_slice(data, books.num_books, b);
        std::vector<float> centroids(
            books.codewords.begin() +
                static_cast<std::size_t>(b) * books.book_size * books.subdim,
            books.codewords.begin() +
                static_cast<std::size_t>(b + 1) * books.book_size * books.subdim);
        std::vector<double> trace;
        lloyd(s, books.book_size, iters, centroids, trace);
        std::copy(centroids.begin(), centroids.end(),
                  books.codewords.begin() +
                      static_cast<std::size_t>(b) * books.book_size * books.subdim);
    }
}

} // namespace

void jacobi_svd(std::vector<double>& a, std::size_t n, std::vector<double>& u,
                std::vector<double>& s, std::vector<double>& v) {
    // One-sided Jacobi on columns of B = A V until all column pairs are
    // orthogonal; then A = U diag(s) V^T with U = normalized columns of B.
    std::vector<double> b = a; // row-major, columns indexed by second coordinate
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    auto col_dot = [&](std::size_t p, std::size_t q) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += b[r * n + p] * b[r * n + q];
        return acc;
    };

    const int max_sweeps = 64;
    const double tol = 1e-13;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double app = col_dot(p, p);
                const double aqq = col_dot(q, q);
                const double apq = col_dot(p, q);
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (std::size_t r = 0; r < n; ++r) {
                    const double bp = b[r * n + p], bq = b[r * n + q];
                    b[r * n + p] = c * bp - sn * bq;
                    b[r * n + q] = sn * bp + c * bq;
                    const double vp = v[r * n + p], vq = v[r * n + q];
                    v[r * n + p] = c * vp - sn * vq;
                    v[r * n + q] = sn * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    s.assign(n, 0.0);
    u.assign(n * n, 0.0);
    std::vector<std::size_t> degenerate;
    for (std::size_t p = 0; p < n; ++p) {
        double norm2 = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm2 += b[r * n + p] * b[r * n + p];
        const double norm = std::sqrt(norm2);
        s[p] = norm;
        if (norm > 1e-12) {
            for (std::size_t r = 0; r < n; ++r) u[r * n + p] = b[r * n + p] / norm;
        } else {
            degenerate.push_back(p);
        }
    }
    // Complete rank-deficient U to a full orthogonal basis via Gram-Schmidt
    // against the canonical vectors. Unfilled degenerate columns are all
    // zero, so projecting against every column is safe.
    for (const std::size_t p : degenerate) {
        for (std::size_t cand = 0; cand < n; ++cand) {
            std::vector<double> e(n, 0.0);
            e[cand] = 1.0;
            for (std::size_t q = 0; q < n; ++q) {
                double proj = 0.0;
                for (std::size_t r = 0; r < n; ++r) proj += u[r * n + q] * e[r];
                for (std::size_t r = 0; r < n; ++r) e[r] -= proj * u[r * n + q];
            }
            double norm2 = 0.0;
            for (const double x : e) norm2 += x * x;
            if (norm2 > 1e-8) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (std::size_t r = 0; r < n; ++r) u[r * n + p] = e[r] * inv;
                break;
            }
        }
    }
}

OpqResult train_opq_traced(const VectorSet& vectors, std::uint32_t m, std::uint32_t p,
                           std::uint32_t alternations, std::uint64_t seed,
                           std::uint32_t kmeans_iters) {
    require(!vectors.empty(), "train_opq: empty input");
    require(m > 0 && vectors.dim() % m == 0,
            "train_opq: dimension not divisible by the number of books");
    const std::uint32_t d = vectors.dim();
    const std::uint32_t w = d / m;

    OpqResult result;
    CodebookSet& books = result.books;
    books.num_books = m;
    books.book_size = p;
    books.subdim = w;
    books.codewords = train_books_on(vectors, m, p, kmeans_iters, seed, nullptr);

    VectorSet recon(d, vectors.size());
    {
        double sse = euclid_reconstruct_rows(vectors, books, recon);
        result.sse_trace.push_back(sse);
    }
    if (alternations == 0) return result;

    std::vector<float> rotation(static_cast<std::size_t>(d) * d, 0.0f);
    for (std::uint32_t i = 0; i < d; ++i) rotation[static_cast<std::size_t>(i) * d + i] = 1.0f;
    VectorSet rotated = vectors;

    const std::uint32_t refine_iters = std::max<std::uint32_t>(2, kmeans_iters / 2);
    for (std::uint32_t t = 0; t < alternations; ++t) {
        // Cross-covariance A[i][j] = sum_n x_n[i] * y_n[j], with y the
        // current reconstructions in rotated space.
        std::vector<double> a(static_cast<std::size_t>(d) * d, 0.0);
        for (std::size_t nrow = 0; nrow < vectors.size(); ++nrow) {
            const auto x = vectors.row(nrow);
            const auto y = recon.row(nrow);
            for (std::uint32_t i = 0; i < d; ++i) {
                const double xi = x[i];
                double* arow = a.data() + static_cast<std::size_t>(i) * d;
                for (std::uint32_t j = 0; j < d; ++j) arow[j] += xi * y[j];
            }
        }
        std::vector<double> usvd, ssvd, vsvd;
        jacobi_svd(a, d, usvd, ssvd, vsvd);
        // argmax_R tr(R A) with A = U S V^T gives R = V U^T.
        for (std::uint32_t i = 0; i < d; ++i) {
            for (std::uint32_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::uint32_t k = 0; k < d; ++k) {
                    acc += vsvd[static_cast<std::size_t>(i) * d + k] *
                           usvd[static_cast<std::size_t>(j) * d + k];
                }
                rotation[static_cast<std::size_t>(i) * d + j] = static_cast<float>(acc);
            }
        }
        rotated = rotate_rows(vectors, rotation);
        refine_books(rotated, books, refine_iters);
        const double sse = euclid_reconstruct_rows(rotated, books, recon);
        result.sse_trace.push_back(sse);
    }
    books.rotation = std::move(rotation);
    return result;
}

CodebookSet train_opq(const VectorSet& vectors, std::uint32_t m, std::uint32_t p,
                      std::uint32_t alternations, std::uint64_t seed,
                      std::uint32_t kmeans_iters) {
    return train_opq_traced(vectors, m, p, alternations, seed, kmeans_iters).books;
}

double reconstruction_sse(const VectorSet& vectors, const CodebookSet& books) {
    require(vectors.dim() == books.dim(), "reconstruction_sse: dimension mismatch");
    VectorSet rotated = books.has_rotation() ? rotate_rows(vectors, books.rotation) : vectors;
    VectorSet recon(vectors.dim(), vectors.size());
    return euclid_reconstruct_rows(rotated, books, recon);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {
constexpr char kBooksMagic[4] = {'B', 'G', 'B', '1'};
constexpr char kCodesMagic[4] = {'B', 'G', 'C', '1'};
} // namespace

void save_codebooks(const CodebookSet& books, const std::filesystem::path& path) {
    BinaryWriter wtr(path);
    wtr.write_magic(kBooksMagic);
    wtr.begin_crc();
    wtr.write<std::uint32_t>(books.num_books);
    wtr.write<std::uint32_t>(books.book_size);
    wtr.write<std::uint32_t>(books.subdim);
    wtr.write<std::uint8_t>(books.has_rotation() ? 1 : 0);
    wtr.write_bytes(books.codewords.data(), books.codewords.size() * sizeof(float));
    if (books.has_rotation()) {
        wtr.write_bytes(books.rotation.data(), books.rotation.size() * sizeof(float));
    }
    const auto crc = wtr.end_crc();
    wtr.write<std::uint32_t>(crc);
    wtr.close();
}

CodebookSet load_codebooks(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kBooksMagic);
    const std::size_t content_start = r.pos();
    CodebookSet books;
    books.num_books = r.read<std::uint32_t>();
    books.book_size = r.read<std::uint32_t>();
    books.subdim = r.read<std::uint32_t>();
    const auto has_rot = r.read<std::uint8_t>();
    if (books.num_books == 0 || books.book_size == 0 || books.subdim == 0) {
        r.fail("invalid codebook shape");
    }
    books.codewords.resize(static_cast<std::size_t>(books.num_books) * books.book_size *
                           books.subdim);
    r.read_bytes(books.codewords.data(), books.codewords.size() * sizeof(float));
    if (has_rot) {
        const std::size_t d = books.dim();
        books.rotation.resize(d * d);
        r.read_bytes(books.rotation.data(), books.rotation.size() * sizeof(float));
    }
    const std::size_t content_len = r.pos() - content_start;
    const auto stored_crc = r.read<std::uint32_t>();
    if (r.remaining() != 0) r.fail("trailing bytes after checksum");
    const auto actual = crc32(r.view(content_start, content_len).data(), content_len);
    if (stored_crc != actual) r.fail("checksum mismatch");
    books.validate();
    return books;
}

std::vector<std::uint8_t> codes_to_bytes(const CodeSet& codes) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 + 4 + 8 + codes.raw_bytes() + 4);
    auto push = [&out](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    };
    push(kCodesMagic, 4);
    const std::uint32_t m = codes.num_books();
    const std::uint32_t p = codes.book_size();
    const std::uint64_t count = codes.size();
    push(&m, 4);
    push(&p, 4);
    push(&count, 8);
    push(codes.raw(), codes.raw_bytes());
    const std::uint32_t crc = crc32(out.data() + 4, out.size() - 4);
    push(&crc, 4);
    return out;
}

CodeSet codes_from_bytes(std::span<const std::uint8_t> bytes) {
    auto fail = [](const std::string& msg) -> void { throw FormatError("code block: " + msg); };
    if (bytes.size() < 24) fail("too short");
    if (std::memcmp(bytes.data(), kCodesMagic, 4) != 0) fail("bad magic");
    std::uint32_t m, p;
    std::uint64_t count;
    std::memcpy(&m, bytes.data() + 4, 4);
    std::memcpy(&p, bytes.data() + 8, 4);
    std::memcpy(&count, bytes.data() + 12, 8);
    if (m == 0 || p == 0) fail("invalid shape");
    CodeSet codes(m, p, static_cast<std::size_t>(count));
    const std::size_t payload = codes.raw_bytes();
    if (bytes.size() != 20 + payload + 4) fail("size mismatch");
    std::memcpy(codes.raw(), bytes.data() + 20, payload);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + 20 + payload, 4);
    const auto actual = crc32(bytes.data() + 4, 16 + payload);
    if (stored_crc != actual) fail("checksum mismatch");
    for (std::size_t i = 0; i < codes.size(); ++i) {
        for (std::uint32_t b = 0; b < m; ++b) {
            if (codes.at(i, b) >= p) fail("index out of range at row " + std::to_string(i));
        }
    }
    return codes;
}

void save_codes(const CodeSet& codes, const std::filesystem::path& path) {
    const auto bytes = codes_to_bytes(codes);
    BinaryWriter wtr(path);
    wtr.write_bytes(bytes.data(), bytes.size());
    wtr.close();
}

CodeSet load_codes(const std::filesystem::path& path) {
    BinaryReader r(path);
    try {
        return codes_from_bytes(r.view(0, r.size()));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace bigran
