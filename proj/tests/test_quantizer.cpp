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

#include <doctest.h>

#include <cstring>
#include <fstream>

#include "bigran/quantizer.hpp"
#include "bigran/synthetic.hpp"
#include "test_util.hpp"

using namespace bigran;
using bigran::test::rel_close;
using bigran::test::TempDir;

namespace {

CodebookSet random_books(std::uint32_t m, std::uint32_t p, std::uint32_t subdim,
                         std::uint64_t seed, bool with_rotation = false) {
    CodebookSet books;
    books.num_books = m;
    books.book_size = p;
    books.subdim = subdim;
    CounterRng rng(seed);
    books.codewords.resize(static_cast<std::size_t>(m) * p * subdim);
    for (auto& v : books.codewords) v = rng.gaussian();
    if (with_rotation) {
        // random rotation from a Householder reflector pair
        const std::uint32_t d = m * subdim;
        std::vector<float> v1(d), v2(d);
        for (auto& v : v1) v = rng.gaussian();
        for (auto& v : v2) v = rng.gaussian();
        normalize(v1);
        normalize(v2);
        books.rotation.assign(static_cast<std::size_t>(d) * d, 0.0f);
        for (std::uint32_t i = 0; i < d; ++i) books.rotation[static_cast<std::size_t>(i) * d + i] = 1.0f;
        auto reflect = [&](const std::vector<float>& v) {
            std::vector<float> r(books.rotation);
            for (std::uint32_t i = 0; i < d; ++i) {
                for (std::uint32_t j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (std::uint32_t k = 0; k < d; ++k) {
                        const double h = (j == k ? 1.0 : 0.0) - 2.0 * v[j] * v[k];
                        acc += r[static_cast<std::size_t>(i) * d + k] * h;
                    }
                    books.rotation[static_cast<std::size_t>(i) * d + j] =
                        static_cast<float>(acc);
                }
            }
        };
        reflect(v1);
        reflect(v2);
    }
    return books;
}

} // namespace

TEST_CASE("kmeans with one centroid returns the subspace mean") {
    auto data = bigran::test::random_vectors(4, 64, 3);
    const auto r = kmeans_subspace(data, 2, 1, 1, 5, 9);
    REQUIRE(r.centroids.size() == 2);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        m0 += data.row(i)[2];
        m1 += data.row(i)[3];
    }
    m0 /= static_cast<double>(data.size());
    m1 /= static_cast<double>(data.size());
    CHECK(rel_close(r.centroids[0], m0, 1e-5));
    CHECK(rel_close(r.centroids[1], m1, 1e-5));
}

TEST_CASE("kmeans saturates with P == count on distinct rows") {
    auto data = bigran::test::random_vectors(3, 12, 21);
    const auto r = kmeans_subspace(data, 1, 0, 12, 3, 17);
    CHECK(r.sse_trace.back() == doctest::Approx(0.0).epsilon(1e-12));
    // centroids are a permutation of the rows
    std::vector<bool> matched(12, false);
    for (std::uint32_t c = 0; c < 12; ++c) {
        bool found = false;
        for (std::size_t i = 0; i < 12 && !found; ++i) {
            if (matched[i]) continue;
            if (std::memcmp(r.centroids.data() + c * 3, data.row(i).data(),
                            3 * sizeof(float)) == 0) {
                matched[i] = true;
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("kmeans recovers planted clusters at +-(5,5)") {
    CounterRng rng(31);
    VectorSet data(2, 400);
    // planted oracle: exact means of the two generated clumps
    double mean_pos[2] = {0, 0}, mean_neg[2] = {0, 0};
    for (std::size_t i = 0; i < 400; ++i) {
        const float sign = (i % 2 == 0) ? 1.0f : -1.0f;
        auto row = data.row(i);
        row[0] = sign * 5.0f + 0.1f * rng.gaussian();
        row[1] = sign * 5.0f + 0.1f * rng.gaussian();
        double* mean = (sign > 0) ? mean_pos : mean_neg;
        mean[0] += row[0] / 200.0;
        mean[1] += row[1] / 200.0;
    }
    const auto r = kmeans_subspace(data, 1, 0, 2, 25, 5);
    // match each centroid to the nearer planted mean
    for (int c = 0; c < 2; ++c) {
        const float cx = r.centroids[2 * c], cy = r.centroids[2 * c + 1];
        const double dp = std::hypot(cx - mean_pos[0], cy - mean_pos[1]);
        const double dn = std::hypot(cx - mean_neg[0], cy - mean_neg[1]);
        CHECK(std::min(dp, dn) < 0.2);
    }
}

TEST_CASE("kmeans SSE is non-increasing and inputs are validated") {
    auto data = bigran::test::random_vectors(8, 300, 77);
    const auto r = kmeans_subspace(data, 2, 0, 16, 15, 4);
    for (std::size_t i = 1; i < r.sse_trace.size(); ++i) {
        CHECK(r.sse_trace[i] <= r.sse_trace[i - 1] + 1e-9);
    }

    VectorSet empty(4, 0);
    CHECK_THROWS_AS(kmeans_subspace(empty, 2, 0, 4, 5, 1), ValidationError);

    auto tiny = bigran::test::random_vectors(4, 3, 5);
    const auto dup = kmeans_subspace(tiny, 2, 0, 5, 5, 1);
    CHECK(dup.duplicated_centroids);
    CHECK(dup.centroids.size() == 5 * 2);
}

TEST_CASE("OPQ with zero alternations is plain PQ") {
    auto data = bigran::test::random_vectors(8, 256, 11);
    const auto opq = train_opq_traced(data, 4, 8, 0, 42);
    CHECK_FALSE(opq.books.has_rotation());

    CodebookSet plain;
    plain.num_books = 4;
    plain.book_size = 8;
    plain.subdim = 2;
    plain.codewords.resize(4 * 8 * 2);
    for (std::uint32_t b = 0; b < 4; ++b) {
        const auto r = kmeans_subspace(data, 4, b, 8, 25, 42);
        std::copy(r.centroids.begin(), r.centroids.end(),
                  plain.codewords.begin() + b * 8 * 2);
    }
    CHECK(std::memcmp(opq.books.codewords.data(), plain.codewords.data(),
                      plain.codewords.size() * sizeof(float)) == 0);
}

TEST_CASE("OPQ keeps the rotation orthogonal and the SSE non-increasing") {
    SyntheticSpec spec;
    spec.dim = 16;
    spec.n_answers = 600;
    spec.n_queries = 1;
    spec.n_clusters = 12;
    spec.noise_sigma = 0.4f;
    const auto ds = gen_synthetic(spec, 3);

    const auto traced = train_opq_traced(ds.answers, 4, 16, 6, 19);
    REQUIRE(traced.books.has_rotation());
    traced.books.validate(); // orthogonality within 1e-4 checked here
    for (std::size_t i = 1; i < traced.sse_trace.size(); ++i) {
        CHECK(traced.sse_trace[i] <= traced.sse_trace[i - 1] + 1e-6);
    }

    SUBCASE("OPQ reconstruction beats plain PQ on correlated data") {
        const auto pq = train_opq(ds.answers, 4, 16, 0, 19);
        const double pq_sse = reconstruction_sse(ds.answers, pq);
        const double opq_sse = reconstruction_sse(ds.answers, traced.books);
        CHECK(opq_sse <= pq_sse);
    }
    SUBCASE("indivisible dimension is a configuration error") {
        CHECK_THROWS_AS(train_opq(ds.answers, 3, 16, 1, 19), ValidationError);
    }
}

TEST_CASE("encode follows the inner-product argmax with low-index ties") {
    SUBCASE("vector equal to a codeword concatenation selects it") {
        // orthogonal codewords with the target one strictly longest
        CodebookSet books;
        books.num_books = 2;
        books.book_size = 4;
        books.subdim = 4;
        books.codewords.assign(2 * 4 * 4, 0.0f);
        for (std::uint32_t b = 0; b < 2; ++b) {
            for (std::uint32_t j = 0; j < 4; ++j) {
                books.codeword_mut(b, j)[j] = (j == 3) ? 2.0f : 1.0f;
            }
        }
        std::vector<float> z(8, 0.0f);
        z[3] = 2.0f;
        z[7] = 2.0f; // = concat(codeword(0,3), codeword(1,3))
        const auto code = encode(z, books);
        CHECK(code.indices == std::vector<std::uint16_t>{3, 3});
        const auto recon = reconstruct(code, books);
        CHECK(std::memcmp(recon.data(), z.data(), z.size() * sizeof(float)) == 0);
    }
    SUBCASE("two-book worked example") {
        CodebookSet books;
        books.num_books = 2;
        books.book_size = 2;
        books.subdim = 2;
        books.codewords = {0.0f, 1.0f, 2.0f, 0.0f,   // book 0: [0,1], [2,0]
                           1.0f, 0.0f, 0.0f, 1.0f};  // book 1: [1,0], [0,1]
        const std::vector<float> z{1.0f, 0.0f, 0.0f, 2.0f};
        const auto code = encode(z, books);
        CHECK(code.indices[0] == 1); // <z0,[2,0]> = 2 > <z0,[0,1]> = 0
        CHECK(code.indices[1] == 1);
    }
    SUBCASE("zero vector ties to index 0 everywhere") {
        const auto books = random_books(3, 5, 2, 8);
        const std::vector<float> z(6, 0.0f);
        const auto code = encode(z, books);
        CHECK(code.indices == std::vector<std::uint16_t>{0, 0, 0});
    }
    SUBCASE("dimension mismatch") {
        const auto books = random_books(2, 4, 3, 8);
        const std::vector<float> z(5, 1.0f);
        CHECK_THROWS_AS(encode(z, books), ValidationError);
    }
}

TEST_CASE("selection maximality holds exhaustively") {
    const auto books = random_books(4, 256, 4, 123);
    CounterRng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> z(16);
        for (auto& v : z) v = rng.gaussian();
        const auto code = encode(z, books);
        for (std::uint32_t b = 0; b < 4; ++b) {
            const float* seg = z.data() + b * 4;
            const double chosen = dot(seg, books.codeword(b, code.indices[b]).data(), 4);
            for (std::uint32_t j = 0; j < 256; ++j) {
                CHECK(chosen >= dot(seg, books.codeword(b, j).data(), 4));
            }
        }
    }
}

TEST_CASE("reconstruct concatenates the named codewords") {
    const auto books = random_books(2, 4, 3, 99);
    SparseCode code;
    code.indices = {1, 0};
    const auto recon = reconstruct(code, books);
    CHECK(std::memcmp(recon.data(), books.codeword(0, 1).data(), 3 * sizeof(float)) == 0);
    CHECK(std::memcmp(recon.data() + 3, books.codeword(1, 0).data(), 3 * sizeof(float)) == 0);

    SparseCode bad;
    bad.indices = {4, 0};
    CHECK_THROWS_AS(reconstruct(bad, books), ValidationError);
}

TEST_CASE("adc table worked examples") {
    SUBCASE("zero query gives a zero table") {
        const auto books = random_books(2, 3, 2, 5);
        const std::vector<float> q(4, 0.0f);
        const auto table = build_adc_table(q, books);
        for (const float e : table.entries) CHECK(e == 0.0f);
        SparseCode code;
        code.indices = {2, 1};
        CHECK(adc_score(table, code) == 0.0);
    }
    SUBCASE("M=1 table equals direct inner products") {
        const auto books = random_books(1, 7, 6, 15);
        CounterRng rng(2);
        std::vector<float> q(6);
        for (auto& v : q) v = rng.gaussian();
        const auto table = build_adc_table(q, books);
        for (std::uint32_t j = 0; j < 7; ++j) {
            CHECK(rel_close(table.entry(0, j), dot(q.data(), books.codeword(0, j).data(), 6),
                            1e-6));
        }
    }
    SUBCASE("hand-summed score") {
        AdcTable table;
        table.num_books = 2;
        table.book_size = 2;
        table.entries = {1.0f, 2.0f, 3.0f, 4.0f};
        SparseCode code;
        code.indices = {1, 0};
        CHECK(adc_score(table, code) == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("rebuilds are bit-identical") {
        const auto books = random_books(3, 9, 5, 71, /*with_rotation=*/true);
        CounterRng rng(3);
        std::vector<float> q(15);
        for (auto& v : q) v = rng.gaussian();
        const auto t1 = build_adc_table(q, books);
        const auto t2 = build_adc_table(q, books);
        CHECK(std::memcmp(t1.entries.data(), t2.entries.data(),
                          t1.entries.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("ADC equals the reconstruction route") {
    for (const bool rotated : {false, true}) {
        const auto books = random_books(4, 16, 4, rotated ? 81 : 80, rotated);
        CounterRng rng(rotated ? 91 : 90);
        for (int trial = 0; trial < 2000; ++trial) {
            std::vector<float> q(16), z(16);
            for (auto& v : q) v = rng.gaussian();
            for (auto& v : z) v = rng.gaussian();
            const auto code = encode(z, books);
            const double via_adc = adc_score(build_adc_table(q, books), code);
            const double via_recon = inner_product(q, reconstruct(code, books));
            CHECK(rel_close(via_adc, via_recon, 1e-5));
        }
    }
}

TEST_CASE("code files serialize to M bytes per item at P=256") {
    for (const std::uint32_t m : {8u, 128u}) {
        CodeSet codes(m, 256, 3);
        CHECK(codes.bytes_per_code() == m); // 8 books -> 64 bits, 128 -> 1024 bits
    }
    CodeSet wide(4, 512, 2);
    CHECK(wide.bytes_per_code() == 8);
}

TEST_CASE("codebook and code files round-trip") {
    TempDir tmp("books");
    for (const bool rotated : {false, true}) {
        const auto books = random_books(2, 6, 3, 33, rotated);
        const auto path = tmp.file("b.bgb1");
        save_codebooks(books, path);
        const auto loaded = load_codebooks(path);
        CHECK(loaded.num_books == books.num_books);
        CHECK(loaded.book_size == books.book_size);
        CHECK(loaded.subdim == books.subdim);
        CHECK(loaded.has_rotation() == rotated);
        CHECK(std::memcmp(loaded.codewords.data(), books.codewords.data(),
                          books.codewords.size() * sizeof(float)) == 0);
        if (rotated) {
            CHECK(std::memcmp(loaded.rotation.data(), books.rotation.data(),
                              books.rotation.size() * sizeof(float)) == 0);
        }
    }

    const auto books = random_books(3, 300, 2, 44); // wide indices
    auto data = bigran::test::random_vectors(6, 40, 2);
    const auto codes = encode_rows(data, books);
    const auto cpath = tmp.file("c.bgc1");
    save_codes(codes, cpath);
    const auto loaded = load_codes(cpath);
    REQUIRE(loaded.size() == codes.size());
    CHECK(loaded.wide());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        for (std::uint32_t b = 0; b < 3; ++b) CHECK(loaded.at(i, b) == codes.at(i, b));
    }

    // corrupt one byte: checksum must catch it
    std::fstream f(cpath, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(22);
    const char x = 1;
    f.write(&x, 1);
    f.close();
    CHECK_THROWS_AS(load_codes(cpath), FormatError);
}

TEST_CASE("jacobi svd factors random matrices") {
    CounterRng rng(17);
    for (const std::size_t n : {3ul, 8ul, 17ul}) {
        std::vector<double> a(n * n);
        for (auto& v : a) v = rng.gaussian();
        std::vector<double> u, s, v;
        auto a_copy = a;
        jacobi_svd(a_copy, n, u, s, v);
        // reconstruct A = U S V^T
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += u[i * n + k] * s[k] * v[j * n + k];
                }
                CHECK(rel_close(acc, a[i * n + j], 1e-8));
            }
        }
        // orthogonality of U and V
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double uu = 0.0, vv = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    uu += u[k * n + i] * u[k * n + j];
                    vv += v[k * n + i] * v[k * n + j];
                }
                const double expect = i == j ? 1.0 : 0.0;
                CHECK(std::abs(uu - expect) < 1e-8);
                CHECK(std::abs(vv - expect) < 1e-8);
            }
        }
    }
}
