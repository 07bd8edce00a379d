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
#include <span>
#include <vector>

#include "bigran/rng.hpp"
#include "bigran/vectors.hpp"

namespace bigran {

/// Small trainable feature encoder: one affine map, or two affine maps with
/// a tanh between them. Parameters live in one flat float buffer
/// ([W1 | b1 | W2 | b2], W row-major out x in) so optimizers, checkpoints
/// and freezing hashes can treat the whole tower uniformly.
class TowerEncoder {
public:
    TowerEncoder() = default;

    /// Single affine layer initialized to the identity (requires in == out).
    static TowerEncoder identity(std::uint32_t dim);
    /// Single affine layer with all-zero parameters.
    static TowerEncoder zeros(std::uint32_t in, std::uint32_t out);
    /// Random init, scale 1/sqrt(fan_in); hidden == 0 gives a single layer.
    static TowerEncoder random(std::uint32_t in, std::uint32_t hidden, std::uint32_t out,
                               CounterRng& rng);

    std::uint32_t in_dim() const { return in_; }
    std::uint32_t out_dim() const { return out_; }
    std::uint32_t hidden_dim() const { return hidden_; }
    std::size_t num_layers() const { return hidden_ == 0 ? 1 : 2; }

    std::span<const float> params() const { return params_; }
    std::span<float> params_mut() { return params_; }
    std::size_t param_count() const { return params_.size(); }

    void forward(std::span<const float> x, std::span<float> out) const;
    std::vector<float> forward(std::span<const float> x) const;

    /// Activations kept for the backward pass.
    struct Trace {
        std::vector<float> input;
        std::vector<float> hidden; // post-tanh, empty for single-layer towers
        std::vector<float> output;
    };

    void forward_trace(std::span<const float> x, Trace& trace) const;

    /// Accumulates parameter gradients (same layout as params, double) and,
    /// when dx is non-empty, writes the gradient w.r.t. the input.
    void backward(const Trace& trace, std::span<const float> dout,
                  std::span<double> grad_params, std::span<float> dx) const;

    /// out' = R * (W x + b) folded into the final layer; R is out x out
    /// row-major.
    void fold_output_transform(std::span<const float> r);

    std::uint64_t params_hash() const;

    /// BGE1 checkpoint: magic | layer count u32 | per layer in u32, out u32 |
    /// parameters f32 | crc32
    void save(const std::filesystem::path& path) const;
    static TowerEncoder load(const std::filesystem::path& path);

private:
    TowerEncoder(std::uint32_t in, std::uint32_t hidden, std::uint32_t out);

    // Layout offsets within params_.
    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const;
    std::size_t w2_off() const;
    std::size_t b2_off() const;

    std::uint32_t in_{0};
    std::uint32_t hidden_{0}; // 0 for single-layer towers
    std::uint32_t out_{0};
    std::vector<float> params_;
};

} // namespace bigran
