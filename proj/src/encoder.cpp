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

#include "bigran/encoder.hpp"

#include <cmath>

#include "bigran/io.hpp"

namespace bigran {

TowerEncoder::TowerEncoder(std::uint32_t in, std::uint32_t hidden, std::uint32_t out)
    : in_(in), hidden_(hidden), out_(out) {
    require(in > 0 && out > 0, "TowerEncoder: dimensions must be positive");
    std::size_t count;
    if (hidden_ == 0) {
        count = static_cast<std::size_t>(out) * in + out;
    } else {
        count = static_cast<std::size_t>(hidden) * in + hidden +
                static_cast<std::size_t>(out) * hidden + out;
    }
    params_.assign(count, 0.0f);
}

std::size_t TowerEncoder::b1_off() const {
    const std::uint32_t rows = hidden_ == 0 ? out_ : hidden_;
    return static_cast<std::size_t>(rows) * in_;
}

std::size_t TowerEncoder::w2_off() const { return b1_off() + (hidden_ == 0 ? out_ : hidden_); }

std::size_t TowerEncoder::b2_off() const {
    return w2_off() + static_cast<std::size_t>(out_) * hidden_;
}

TowerEncoder TowerEncoder::identity(std::uint32_t dim) {
    TowerEncoder t(dim, 0, dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        t.params_[static_cast<std::size_t>(i) * dim + i] = 1.0f;
    }
    return t;
}

TowerEncoder TowerEncoder::zeros(std::uint32_t in, std::uint32_t out) {
    return TowerEncoder(in, 0, out);
}

TowerEncoder TowerEncoder::random(std::uint32_t in, std::uint32_t hidden, std::uint32_t out,
                                  CounterRng& rng) {
    TowerEncoder t(in, hidden, out);
    const std::uint32_t rows1 = hidden == 0 ? out : hidden;
    const float scale1 = 1.0f / std::sqrt(static_cast<float>(in));
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows1) * in; ++i) {
        t.params_[i] = scale1 * rng.gaussian();
    }
    if (hidden != 0) {
        const float scale2 = 1.0f / std::sqrt(static_cast<float>(hidden));
        float* w2 = t.params_.data() + t.w2_off();
        for (std::size_t i = 0; i < static_cast<std::size_t>(out) * hidden; ++i) {
            w2[i] = scale2 * rng.gaussian();
        }
    }
    return t;
}

void TowerEncoder::forward(std::span<const float> x, std::span<float> out) const {
    require(x.size() == in_, "TowerEncoder::forward: input dimension mismatch");
    require(out.size() == out_, "TowerEncoder::forward: output dimension mismatch");
    if (hidden_ == 0) {
        const float* w = params_.data();
        const float* b = params_.data() + b1_off();
        for (std::uint32_t i = 0; i < out_; ++i) {
            out[i] = static_cast<float>(dot(w + static_cast<std::size_t>(i) * in_, x.data(), in_) + b[i]);
        }
        return;
    }
    std::vector<float> h(hidden_);
    const float* w1 = params_.data();
    const float* b1 = params_.data() + b1_off();
    for (std::uint32_t i = 0; i < hidden_; ++i) {
        h[i] = std::tanh(static_cast<float>(
            dot(w1 + static_cast<std::size_t>(i) * in_, x.data(), in_) + b1[i]));
    }
    const float* w2 = params_.data() + w2_off();
    const float* b2 = params_.data() + b2_off();
    for (std::uint32_t i = 0; i < out_; ++i) {
        out[i] = static_cast<float>(
            dot(w2 + static_cast<std::size_t>(i) * hidden_, h.data(), hidden_) + b2[i]);
    }
}

std::vector<float> TowerEncoder::forward(std::span<const float> x) const {
    std::vector<float> out(out_);
    forward(x, out);
    return out;
}

void TowerEncoder::forward_trace(std::span<const float> x, Trace& trace) const {
    trace.input.assign(x.begin(), x.end());
    trace.output.resize(out_);
    if (hidden_ == 0) {
        trace.hidden.clear();
        forward(x, trace.output);
        return;
    }
    trace.hidden.resize(hidden_);
    const float* w1 = params_.data();
    const float* b1 = params_.data() + b1_off();
    for (std::uint32_t i = 0; i < hidden_; ++i) {
        trace.hidden[i] = std::tanh(static_cast<float>(
            dot(w1 + static_cast<std::size_t>(i) * in_, x.data(), in_) + b1[i]));
    }
    const float* w2 = params_.data() + w2_off();
    const float* b2 = params_.data() + b2_off();
    for (std::uint32_t i = 0; i < out_; ++i) {
        trace.output[i] = static_cast<float>(
            dot(w2 + static_cast<std::size_t>(i) * hidden_, trace.hidden.data(), hidden_) +
            b2[i]);
    }
}

void TowerEncoder::backward(const Trace& trace, std::span<const float> dout,
                            std::span<double> grad_params, std::span<float> dx) const {
    require(dout.size() == out_, "TowerEncoder::backward: upstream dimension mismatch");
    require(grad_params.size() == params_.size(),
            "TowerEncoder::backward: gradient buffer size mismatch");
    require(dx.empty() || dx.size() == in_,
            "TowerEncoder::backward: input-gradient buffer size mismatch");
    const float* x = trace.input.data();
    if (hidden_ == 0) {
        double* gw = grad_params.data();
        double* gb = grad_params.data() + b1_off();
        for (std::uint32_t i = 0; i < out_; ++i) {
            const double gi = dout[i];
            double* grow = gw + static_cast<std::size_t>(i) * in_;
            for (std::uint32_t k = 0; k < in_; ++k) grow[k] += gi * x[k];
            gb[i] += gi;
        }
        if (!dx.empty()) {
            const float* w = params_.data();
            for (std::uint32_t k = 0; k < in_; ++k) {
                double acc = 0.0;
                for (std::uint32_t i = 0; i < out_; ++i) {
                    acc += static_cast<double>(dout[i]) * w[static_cast<std::size_t>(i) * in_ + k];
                }
                dx[k] = static_cast<float>(acc);
            }
        }
        return;
    }

    const float* h = trace.hidden.data();
    const float* w2 = params_.data() + w2_off();
    double* gw2 = grad_params.data() + w2_off();
    double* gb2 = grad_params.data() + b2_off();
    std::vector<double> dh(hidden_, 0.0);
    for (std::uint32_t i = 0; i < out_; ++i) {
        const double gi = dout[i];
        double* grow = gw2 + static_cast<std::size_t>(i) * hidden_;
        const float* wrow = w2 + static_cast<std::size_t>(i) * hidden_;
        for (std::uint32_t k = 0; k < hidden_; ++k) {
            grow[k] += gi * h[k];
            dh[k] += gi * wrow[k];
        }
        gb2[i] += gi;
    }
    // tanh' = 1 - tanh^2
    for (std::uint32_t k = 0; k < hidden_; ++k) {
        dh[k] *= 1.0 - static_cast<double>(h[k]) * h[k];
    }
    double* gw1 = grad_params.data();
    double* gb1 = grad_params.data() + b1_off();
    for (std::uint32_t i = 0; i < hidden_; ++i) {
        const double gi = dh[i];
        double* grow = gw1 + static_cast<std::size_t>(i) * in_;
        for (std::uint32_t k = 0; k < in_; ++k) grow[k] += gi * x[k];
        gb1[i] += gi;
    }
    if (!dx.empty()) {
        const float* w1 = params_.data();
        for (std::uint32_t k = 0; k < in_; ++k) {
            double acc = 0.0;
            for (std::uint32_t i = 0; i < hidden_; ++i) {
                acc += dh[i] * w1[static_cast<std::size_t>(i) * in_ + k];
            }
            dx[k] = static_cast<float>(acc);
        }
    }
}

void TowerEncoder::fold_output_transform(std::span<const float> r) {
    require(r.size() == static_cast<std::size_t>(out_) * out_,
            "fold_output_transform: matrix shape mismatch");
    const std::uint32_t cols = hidden_ == 0 ? in_ : hidden_;
    const std::size_t w_off = hidden_ == 0 ? w1_off() : w2_off();
    const std::size_t b_off = hidden_ == 0 ? b1_off() : b2_off();
    std::vector<float> new_w(static_cast<std::size_t>(out_) * cols);
    std::vector<float> new_b(out_);
    const float* w = params_.data() + w_off;
    const float* b = params_.data() + b_off;
    for (std::uint32_t i = 0; i < out_; ++i) {
        const float* rrow = r.data() + static_cast<std::size_t>(i) * out_;
        for (std::uint32_t k = 0; k < cols; ++k) {
            double acc = 0.0;
            for (std::uint32_t j = 0; j < out_; ++j) {
                acc += static_cast<double>(rrow[j]) * w[static_cast<std::size_t>(j) * cols + k];
            }
            new_w[static_cast<std::size_t>(i) * cols + k] = static_cast<float>(acc);
        }
        double acc = 0.0;
        for (std::uint32_t j = 0; j < out_; ++j) acc += static_cast<double>(rrow[j]) * b[j];
        new_b[i] = static_cast<float>(acc);
    }
    std::copy(new_w.begin(), new_w.end(), params_.begin() + w_off);
    std::copy(new_b.begin(), new_b.end(), params_.begin() + b_off);
}

std::uint64_t TowerEncoder::params_hash() const {
    return fnv1a64(params_.data(), params_.size() * sizeof(float));
}

namespace {
constexpr char kEncoderMagic[4] = {'B', 'G', 'E', '1'};
}

void TowerEncoder::save(const std::filesystem::path& path) const {
    BinaryWriter w(path);
    w.write_magic(kEncoderMagic);
    w.begin_crc();
    const std::uint32_t layers = static_cast<std::uint32_t>(num_layers());
    w.write<std::uint32_t>(layers);
    if (layers == 1) {
        w.write<std::uint32_t>(in_);
        w.write<std::uint32_t>(out_);
    } else {
        w.write<std::uint32_t>(in_);
        w.write<std::uint32_t>(hidden_);
        w.write<std::uint32_t>(hidden_);
        w.write<std::uint32_t>(out_);
    }
    w.write_bytes(params_.data(), params_.size() * sizeof(float));
    const auto crc = w.end_crc();
    w.write<std::uint32_t>(crc);
    w.close();
}

TowerEncoder TowerEncoder::load(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kEncoderMagic);
    const std::size_t content_start = r.pos();
    const auto layers = r.read<std::uint32_t>();
    if (layers != 1 && layers != 2) r.fail("layer count must be 1 or 2");
    std::uint32_t in = 0, hidden = 0, out = 0;
    if (layers == 1) {
        in = r.read<std::uint32_t>();
        out = r.read<std::uint32_t>();
    } else {
        in = r.read<std::uint32_t>();
        hidden = r.read<std::uint32_t>();
        const auto in2 = r.read<std::uint32_t>();
        out = r.read<std::uint32_t>();
        if (in2 != hidden) r.fail("layer dimensions do not chain");
    }
    if (in == 0 || out == 0 || (layers == 2 && hidden == 0)) r.fail("invalid dimensions");
    TowerEncoder t(in, hidden, out);
    r.read_bytes(t.params_.data(), t.params_.size() * sizeof(float));
    const std::size_t content_len = r.pos() - content_start;
    const auto stored_crc = r.read<std::uint32_t>();
    if (r.remaining() != 0) r.fail("trailing bytes after checksum");
    const auto actual = crc32(r.view(content_start, content_len).data(), content_len);
    if (stored_crc != actual) r.fail("checksum mismatch");
    for (const float v : t.params_) {
        if (!std::isfinite(v)) r.fail("non-finite parameter");
    }
    return t;
}

} // namespace bigran
