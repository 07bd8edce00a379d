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

#include "bigran/synthetic.hpp"
#include "bigran/vectors.hpp"
#include "test_util.hpp"

using namespace bigran;
using bigran::test::rel_close;
using bigran::test::TempDir;

TEST_CASE("inner product basics") {
    const std::vector<float> x{1.0f, 2.0f};
    const std::vector<float> y{3.0f, 4.0f};
    CHECK(inner_product(x, y) == doctest::Approx(11.0).epsilon(1e-12));

    const std::vector<float> zero{0.0f, 0.0f};
    CHECK(inner_product(zero, y) == 0.0);

    std::vector<float> e1{1.0f, 0.0f, 0.0f};
    CHECK(inner_product(e1, e1) == 1.0);

    const std::vector<float> bad{1.0f, 2.0f, 3.0f};
    CHECK_THROWS_AS(inner_product(x, bad), ValidationError);
}

TEST_CASE("inner product is symmetric and bilinear") {
    CounterRng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t d = 2 + static_cast<std::uint32_t>(rng.uniform_below(30));
        std::vector<float> x(d), y(d), z(d);
        for (auto& v : x) v = rng.gaussian();
        for (auto& v : y) v = rng.gaussian();
        for (auto& v : z) v = rng.gaussian();
        const double alpha = 2.0 * rng.next_double() - 1.0;

        CHECK(rel_close(inner_product(x, y), inner_product(y, x), 1e-12));

        std::vector<float> combo(d);
        for (std::uint32_t k = 0; k < d; ++k) {
            combo[k] = static_cast<float>(alpha * y[k] + z[k]);
        }
        const double lhs = inner_product(x, combo);
        const double rhs = alpha * inner_product(x, y) + inner_product(x, z);
        // float rounding of the combined vector dominates the error budget
        CHECK(rel_close(lhs, rhs, 1e-5));
    }
}

TEST_CASE("BGV1 empty payload and sizes follow the format") {
    TempDir tmp("bgv1");
    VectorSet empty(5, 0);
    save_vectors(empty, tmp.file("empty.bgv1"));
    // magic(4) + dim(4) + count(8) + payload(0) + crc(4)
    CHECK(std::filesystem::file_size(tmp.file("empty.bgv1")) == 20);

    auto loaded = load_vectors(tmp.file("empty.bgv1"));
    CHECK(loaded.dim() == 5);
    CHECK(loaded.size() == 0);

    VectorSet one(2, 1);
    one.row(0)[0] = 1.5f;
    one.row(0)[1] = -2.5f;
    save_vectors(one, tmp.file("one.bgv1"));
    CHECK(std::filesystem::file_size(tmp.file("one.bgv1")) == 20 + 8);
}

TEST_CASE("BGV1 save/load round-trips bit-exactly") {
    TempDir tmp("bgv1_rt");
    CounterRng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng.uniform_below(8));
        const std::size_t n = rng.uniform_below(6);
        VectorSet set(d, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : set.row(i)) v = rng.gaussian();
        }
        const auto path = tmp.file("rt.bgv1");
        save_vectors(set, path);
        const auto loaded = load_vectors(path);
        REQUIRE(loaded.dim() == set.dim());
        REQUIRE(loaded.size() == set.size());
        CHECK(std::memcmp(loaded.data(), set.data(), n * d * sizeof(float)) == 0);
    }
}

TEST_CASE("BGV1 rejects malformed files") {
    TempDir tmp("bgv1_bad");
    VectorSet set(3, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (auto& v : set.row(i)) v = 0.5f;
    }
    const auto path = tmp.file("v.bgv1");
    save_vectors(set, path);

    SUBCASE("truncated payload names the problem") {
        auto bytes_size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, bytes_size - 4);
        CHECK_THROWS_AS(load_vectors(path), FormatError);
    }
    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_vectors(path), FormatError);
    }
    SUBCASE("corrupted payload fails the checksum") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(16);
        const float v = 0.75f;
        f.write(reinterpret_cast<const char*>(&v), 4);
        f.close();
        CHECK_THROWS_AS(load_vectors(path), FormatError);
    }
    SUBCASE("non-finite entry names the offset") {
        VectorSet nan_set(2, 1);
        nan_set.row(0)[0] = std::numeric_limits<float>::quiet_NaN();
        nan_set.row(0)[1] = 1.0f;
        const auto nan_path = tmp.file("nan.bgv1");
        save_vectors(nan_set, nan_path);
        try {
            load_vectors(nan_path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("offset 16") != std::string::npos);
        }
    }
}

TEST_CASE("gen_synthetic is deterministic and honors the zero-noise contract") {
    SyntheticSpec spec;
    spec.dim = 8;
    spec.n_answers = 50;
    spec.n_queries = 20;
    spec.n_clusters = 5;
    spec.noise_sigma = 0.3f;

    const auto a = gen_synthetic(spec, 123);
    const auto b = gen_synthetic(spec, 123);
    CHECK(std::memcmp(a.answers.data(), b.answers.data(),
                      a.answers.size() * spec.dim * sizeof(float)) == 0);
    CHECK(std::memcmp(a.queries.data(), b.queries.data(),
                      a.queries.size() * spec.dim * sizeof(float)) == 0);
    CHECK(a.positives == b.positives);
    CHECK(a.cluster_labels == b.cluster_labels);

    const auto c = gen_synthetic(spec, 124);
    CHECK(std::memcmp(a.answers.data(), c.answers.data(),
                      a.answers.size() * spec.dim * sizeof(float)) != 0);

    SUBCASE("noise_sigma = 0 makes each query equal its positive") {
        spec.noise_sigma = 0.0f;
        const auto ds = gen_synthetic(spec, 9);
        for (std::size_t q = 0; q < ds.queries.size(); ++q) {
            REQUIRE(ds.positives[q].size() == 1);
            const auto pos = ds.positives[q][0];
            CHECK(std::memcmp(ds.queries.row(q).data(), ds.answers.row(pos).data(),
                              spec.dim * sizeof(float)) == 0);
        }
    }
    SUBCASE("single cluster labels everything 0") {
        spec.n_clusters = 1;
        const auto ds = gen_synthetic(spec, 5);
        for (const auto label : ds.cluster_labels) CHECK(label == 0);
    }
    SUBCASE("invalid specs are rejected") {
        SyntheticSpec bad = spec;
        bad.dim = 1;
        CHECK_THROWS_AS(gen_synthetic(bad, 1), ValidationError);
        bad = spec;
        bad.n_clusters = spec.n_answers + 1;
        CHECK_THROWS_AS(gen_synthetic(bad, 1), ValidationError);
        bad = spec;
        bad.noise_sigma = -1.0f;
        CHECK_THROWS_AS(gen_synthetic(bad, 1), ValidationError);
    }
}

TEST_CASE("zero-noise brute force on normalized vectors has perfect recall@1") {
    SyntheticSpec spec;
    spec.dim = 16;
    spec.n_answers = 200;
    spec.n_queries = 100;
    spec.n_clusters = 200; // distinct answers so top-1 is unambiguous
    spec.noise_sigma = 0.0f;
    const auto ds = gen_synthetic(spec, 77);

    const auto answers = ds.answers.normalized_copy();
    const auto queries = ds.queries.normalized_copy();
    for (std::size_t q = 0; q < queries.size(); ++q) {
        double best = -1e300;
        std::size_t best_id = 0;
        for (std::size_t a = 0; a < answers.size(); ++a) {
            const double s = inner_product(queries.row(q), answers.row(a));
            if (s > best) {
                best = s;
                best_id = a;
            }
        }
        CHECK(best_id == ds.positives[q][0]);
    }
}

TEST_CASE("positives TSV round trip") {
    TempDir tmp("pos");
    std::vector<std::vector<std::uint32_t>> positives{{3}, {1, 2}, {0}};
    save_positives_tsv(positives, tmp.file("p.tsv"));
    const auto loaded = load_positives_tsv(tmp.file("p.tsv"), 3, 4);
    CHECK(loaded == positives);
    CHECK_THROWS_AS(load_positives_tsv(tmp.file("p.tsv"), 4, 4), FormatError);
}

TEST_CASE("counter rng basics") {
    CounterRng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CounterRng c(6);
    CHECK(CounterRng(5).next_u64() != c.next_u64());

    CounterRng r(11);
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.uniform_below(17);
        CHECK(v < 17);
    }
    CHECK(r.uniform_below(0) == 0);
    CHECK(r.uniform_below(1) == 0);

    // loose two-sided sanity on the gaussian
    CounterRng g(13);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = g.gaussian();
        sum += v;
        sum2 += v * v;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}
