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
#include <optional>
#include <span>
#include <vector>

#include "bigran/vectors.hpp"

namespace bigran {

/// Product-quantization codebooks: num_books subspaces of subdim dims, each
/// with book_size codewords, plus an optional orthogonal input rotation.
struct CodebookSet {
    std::uint32_t num_books{0}; // M
    std::uint32_t book_size{0}; // P
    std::uint32_t subdim{0};    // D / M
    std::vector<float> codewords; // num_books * book_size * subdim
    std::vector<float> rotation;  // empty, or dim*dim row-major; y = R x

    std::uint32_t dim() const { return num_books * subdim; }
    bool has_rotation() const { return !rotation.empty(); }

    std::span<const float> codeword(std::uint32_t book, std::uint32_t idx) const {
        return {codewords.data() +
                    (static_cast<std::size_t>(book) * book_size + idx) * subdim,
                subdim};
    }
    std::span<float> codeword_mut(std::uint32_t book, std::uint32_t idx) {
        return {codewords.data() +
                    (static_cast<std::size_t>(book) * book_size + idx) * subdim,
                subdim};
    }

    /// Checks shape consistency, finiteness, and rotation orthogonality
    /// (per-entry tolerance 1e-4).
    void validate() const;
};

/// Codeword-index form of one quantized vector.
struct SparseCode {
    std::vector<std::uint16_t> indices; // length num_books, each < book_size
};

/// Bulk storage for quantized corpora: count x num_books indices, packed as
/// one byte per index when book_size <= 256, two bytes otherwise.
class CodeSet {
public:
    CodeSet() = default;
    CodeSet(std::uint32_t num_books, std::uint32_t book_size, std::size_t count = 0);

    std::uint32_t num_books() const { return num_books_; }
    std::uint32_t book_size() const { return book_size_; }
    std::size_t size() const;
    bool wide() const { return wide_; }
    std::size_t bytes_per_code() const { return static_cast<std::size_t>(num_books_) * (wide_ ? 2 : 1); }

    std::uint16_t at(std::size_t row, std::uint32_t book) const;
    void set(std::size_t row, std::uint32_t book, std::uint16_t value);
    SparseCode get(std::size_t row) const;
    void append(const SparseCode& code);
    void resize(std::size_t count);

    const std::uint8_t* raw() const { return storage_.data(); }
    std::uint8_t* raw() { return storage_.data(); }
    std::size_t raw_bytes() const { return storage_.size(); }

private:
    std::uint32_t num_books_{0};
    std::uint32_t book_size_{0};
    bool wide_{false};
    std::vector<std::uint8_t> storage_;
};

/// y = R x (row-major rotation); no-op copy when no rotation is present.
void apply_rotation(const CodebookSet& books, std::span<const float> in,
                    std::span<float> out);
/// x = R^T y; inverts apply_rotation for orthogonal R.
void apply_rotation_transposed(const CodebookSet& books, std::span<const float> in,
                               std::span<float> out);

/// Codeword selection: per subspace, the index maximizing the inner product
/// with the (rotated) input segment; ties resolve to the lowest index.
SparseCode encode(std::span<const float> z, const CodebookSet& books);
/// Parallel bulk encode; row i of `out` is encode(vectors.row(i)).
CodeSet encode_rows(const VectorSet& vectors, const CodebookSet& books);

/// Concatenates the selected codewords and rotates back to input space when
/// a rotation is configured.
std::vector<float> reconstruct(const SparseCode& code, const CodebookSet& books);
void reconstruct_into(std::span<const std::uint16_t> indices, const CodebookSet& books,
                      std::span<float> out);

/// Per-subspace lookup table of query-vs-codeword inner products; rebuilds
/// from the same inputs are bit-identical.
struct AdcTable {
    std::uint32_t num_books{0};
    std::uint32_t book_size{0};
    std::vector<float> entries; // num_books * book_size

    float entry(std::uint32_t book, std::uint32_t idx) const {
        return entries[static_cast<std::size_t>(book) * book_size + idx];
    }
};

AdcTable build_adc_table(std::span<const float> query, const CodebookSet& books);
double adc_score(const AdcTable& table, const SparseCode& code);
double adc_score(const AdcTable& table, const CodeSet& codes, std::size_t row);

struct KmeansResult {
    std::vector<float> centroids;  // p * subdim
    std::vector<double> sse_trace; // assignment SSE per Lloyd iteration
    bool duplicated_centroids{false};
};

/// Euclidean k-means over one subspace slice (k-means++ seeding, empty
/// clusters reseeded to the farthest point).
KmeansResult kmeans_subspace(const VectorSet& vectors, std::uint32_t num_books,
                             std::uint32_t book, std::uint32_t p, std::uint32_t iters,
                             std::uint64_t seed);

struct OpqResult {
    CodebookSet books;
    std::vector<double> sse_trace; // total reconstruction SSE per alternation
};

/// PQ training with an optional learned orthogonal rotation. alternations=0
/// yields plain PQ (no rotation stored). Each alternation solves the
/// orthogonal Procrustes problem against the current reconstructions and
/// then refines the codebooks by warm-started Lloyd iterations.
OpqResult train_opq_traced(const VectorSet& vectors, std::uint32_t m, std::uint32_t p,
                           std::uint32_t alternations, std::uint64_t seed,
                           std::uint32_t kmeans_iters = 25);
CodebookSet train_opq(const VectorSet& vectors, std::uint32_t m, std::uint32_t p,
                      std::uint32_t alternations, std::uint64_t seed,
                      std::uint32_t kmeans_iters = 25);

/// Total squared reconstruction error under Euclidean nearest-codeword
/// assignment (the quantity the PQ/OPQ trainers minimize).
double reconstruction_sse(const VectorSet& vectors, const CodebookSet& books);

/// Thin SVD of a square matrix (row-major n x n, double) by one-sided
/// Jacobi: a = u * diag(s) * v^T with u, v orthogonal.
void jacobi_svd(std::vector<double>& a, std::size_t n, std::vector<double>& u,
                std::vector<double>& s, std::vector<double>& v);

/// BGB1 codebook file:
///   magic "BGB1" | m u32 | p u32 | subdim u32 | has_rotation u8 |
///   codewords m*p*subdim f32 | rotation d*d f32 if flagged | crc32
void save_codebooks(const CodebookSet& books, const std::filesystem::path& path);
CodebookSet load_codebooks(const std::filesystem::path& path);

/// BGC1 code file:
///   magic "BGC1" | m u32 | p u32 | count u64 |
///   indices count*m u8 (p <= 256) or u16 | crc32
void save_codes(const CodeSet& codes, const std::filesystem::path& path);
CodeSet load_codes(const std::filesystem::path& path);

/// In-memory (de)serialization used by the index format, byte-identical to
/// the BGC1 file body.
std::vector<std::uint8_t> codes_to_bytes(const CodeSet& codes);
CodeSet codes_from_bytes(std::span<const std::uint8_t> bytes);

} // namespace bigran
