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

#include <cmath>
#include <cstring>

#include "bigran/encoder.hpp"
#include "bigran/loss.hpp"
#include "test_util.hpp"

using namespace bigran;
using bigran::test::rel_close;

namespace {

// Central finite difference of f over a mutable float slot.
template <typename F>
double central_diff(float& slot, F&& f, double eps = 1e-3) {
    const float orig = slot;
    slot = static_cast<float>(orig + eps);
    const double hi_x = slot;
    const double hi = f();
    slot = static_cast<float>(orig - eps);
    const double lo_x = slot;
    const double lo = f();
    slot = orig;
    return (hi - lo) / (hi_x - lo_x);
}

} // namespace

TEST_CASE("encoder forward basics") {
    auto id = TowerEncoder::identity(4);
    const std::vector<float> x{1.0f, -2.0f, 0.5f, 3.0f};
    const auto y = id.forward(x);
    CHECK(std::memcmp(y.data(), x.data(), 4 * sizeof(float)) == 0);

    auto zero = TowerEncoder::zeros(4, 3);
    const auto z = zero.forward(x);
    for (const float v : z) CHECK(v == 0.0f);

    CounterRng rng(5);
    auto two = TowerEncoder::random(4, 6, 3, rng);
    CHECK(two.num_layers() == 2);
    CHECK_THROWS_AS(two.forward(std::vector<float>{1.0f, 2.0f}), ValidationError);
}

TEST_CASE("encoder parameter gradients match finite differences") {
    CounterRng rng(21);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint32_t in = 3 + static_cast<std::uint32_t>(rng.uniform_below(4));
        const std::uint32_t hidden = (trial % 2 == 0)
                                         ? 0
                                         : 3 + static_cast<std::uint32_t>(rng.uniform_below(4));
        const std::uint32_t out = 2 + static_cast<std::uint32_t>(rng.uniform_below(4));
        auto enc = TowerEncoder::random(in, hidden, out, rng);
        std::vector<float> x(in), w(out);
        for (auto& v : x) v = rng.gaussian();
        for (auto& v : w) v = rng.gaussian();

        // analytic gradient of <w, forward(x)> w.r.t. parameters and input
        TowerEncoder::Trace trace;
        enc.forward_trace(x, trace);
        std::vector<double> grad(enc.param_count(), 0.0);
        std::vector<float> dx(in);
        enc.backward(trace, w, grad, dx);

        auto loss = [&] { return dot(w.data(), enc.forward(x).data(), out); };
        auto params = enc.params_mut();
        for (std::size_t p = 0; p < params.size(); p += 1 + params.size() / 13) {
            const double fd = central_diff(params[p], loss);
            CHECK(rel_close(grad[p], fd, 1e-4));
            ++checked;
        }
        for (std::uint32_t k = 0; k < in; ++k) {
            const double fd = central_diff(x[k], loss);
            CHECK(rel_close(dx[k], fd, 1e-4));
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("info_nce closed forms") {
    SUBCASE("uniform logits give ln(n)") {
        const std::vector<float> e{0.3f, -0.7f, 1.1f};
        for (std::size_t n_negs : {1ul, 3ul, 9ul}) {
            std::vector<std::vector<float>> negs(n_negs, e);
            const auto r = info_nce(e, e, negs, 1.0);
            CHECK(std::abs(r.loss - std::log(static_cast<double>(n_negs + 1))) < 1e-6);
        }
    }
    SUBCASE("one negative with scores 1 and 0") {
        // loss = ln(1 + e^{-1})
        const std::vector<float> q{1.0f, 0.0f};
        const std::vector<float> pos{1.0f, 0.0f};
        const std::vector<std::vector<float>> negs{{0.0f, 1.0f}};
        const auto r = info_nce(q, pos, negs, 1.0);
        CHECK(std::abs(r.loss - std::log(1.0 + std::exp(-1.0))) < 1e-6);
    }
    SUBCASE("validation") {
        const std::vector<float> q{1.0f};
        CHECK_THROWS_AS(info_nce(q, q, {}, 1.0), ValidationError);
        CHECK_THROWS_AS(info_nce(q, q, {{0.5f}}, 0.0), ValidationError);
        const std::vector<float> inf_vec{std::numeric_limits<float>::infinity()};
        CHECK_THROWS_AS(info_nce(q, q, {inf_vec}, 1.0), NumericalError);
    }
    SUBCASE("loss is non-negative") {
        CounterRng rng(3);
        for (int t = 0; t < 200; ++t) {
            std::vector<float> q(4), pos(4);
            for (auto& v : q) v = rng.gaussian();
            for (auto& v : pos) v = rng.gaussian();
            std::vector<std::vector<float>> negs(1 + rng.uniform_below(5),
                                                 std::vector<float>(4));
            for (auto& n : negs) {
                for (auto& v : n) v = rng.gaussian();
            }
            const auto r = info_nce(q, pos, negs, 0.5 + rng.next_double());
            CHECK(r.loss >= 0.0);
        }
    }
}

TEST_CASE("info_nce gradients match finite differences") {
    CounterRng rng(77);
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 3 + rng.uniform_below(4);
        const std::size_t n_negs = 1 + rng.uniform_below(4);
        const double tau = 0.5 + rng.next_double();
        std::vector<float> q(d), pos(d);
        std::vector<std::vector<float>> negs(n_negs, std::vector<float>(d));
        for (auto& v : q) v = rng.gaussian();
        for (auto& v : pos) v = rng.gaussian();
        for (auto& n : negs) {
            for (auto& v : n) v = rng.gaussian();
        }
        const auto r = info_nce(q, pos, negs, tau);
        auto loss = [&] { return info_nce(q, pos, negs, tau).loss; };
        for (std::size_t k = 0; k < d; ++k) {
            CHECK(rel_close(r.grad_query[k], central_diff(q[k], loss), 1e-4));
            CHECK(rel_close(r.grad_pos[k], central_diff(pos[k], loss), 1e-4));
            checked += 2;
        }
        for (auto& n : negs) {
            CHECK(rel_close(r.grad_negs[&n - negs.data()][0], central_diff(n[0], loss), 1e-4));
            ++checked;
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("straight-through quantizer gradients") {
    CodebookSet books;
    books.num_books = 2;
    books.book_size = 3;
    books.subdim = 2;
    CounterRng rng(8);
    books.codewords.resize(2 * 3 * 2);
    for (auto& v : books.codewords) v = rng.gaussian();

    SUBCASE("zero upstream zeroes both gradients") {
        const std::vector<float> upstream(4, 0.0f);
        SparseCode code;
        code.indices = {1, 2};
        std::vector<float> dz(4, 1.0f);
        std::vector<double> dcw(books.codewords.size(), 0.0);
        grad_through_quantizer(upstream, code, books, dz, dcw);
        for (const float v : dz) CHECK(v == 0.0f);
        for (const double v : dcw) CHECK(v == 0.0);
    }
    SUBCASE("single book routes upstream to the selected codeword only") {
        CodebookSet one;
        one.num_books = 1;
        one.book_size = 4;
        one.subdim = 3;
        one.codewords.assign(12, 0.5f);
        const std::vector<float> upstream{1.0f, -2.0f, 3.0f};
        SparseCode code;
        code.indices = {2};
        std::vector<float> dz(3);
        std::vector<double> dcw(12, 0.0);
        grad_through_quantizer(upstream, code, one, dz, dcw);
        CHECK(std::memcmp(dz.data(), upstream.data(), 3 * sizeof(float)) == 0);
        for (std::uint32_t j = 0; j < 4; ++j) {
            for (std::uint32_t k = 0; k < 3; ++k) {
                const double expect = (j == 2) ? upstream[k] : 0.0;
                CHECK(dcw[j * 3 + k] == expect);
            }
        }
    }
    SUBCASE("fixed-selection codeword gradient matches finite differences") {
        // downstream loss: <w, concat(selected codewords)> with selection held
        // fixed, so no re-encoding inside the difference quotient
        CounterRng wrng(9);
        std::vector<float> w(4);
        for (auto& v : w) v = wrng.gaussian();
        std::vector<float> z(4);
        for (auto& v : z) v = wrng.gaussian();
        const auto code = encode(z, books);

        auto loss = [&] {
            std::vector<float> recon(4);
            reconstruct_into(code.indices, books, recon);
            return dot(w.data(), recon.data(), 4);
        };
        std::vector<float> dz(4);
        std::vector<double> dcw(books.codewords.size(), 0.0);
        grad_through_quantizer(w, code, books, dz, dcw);

        int checked = 0;
        for (std::size_t p = 0; p < books.codewords.size(); ++p) {
            const double fd = central_diff(books.codewords[p], loss);
            CHECK(rel_close(dcw[p], fd, 1e-4));
            ++checked;
        }
        CHECK(checked == 12);
    }
}
