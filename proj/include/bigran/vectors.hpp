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

#include "bigran/error.hpp"

namespace bigran {

/// Dot product with a double accumulator. Dimension mismatch is a contract
/// violation.
double inner_product(std::span<const float> x, std::span<const float> y);

/// Raw dot over known-equal lengths; the hot path everywhere.
inline double dot(const float* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * y[i];
    return acc;
}

double squared_norm(std::span<const float> x);

/// Scales x to unit L2 norm; zero vectors are left unchanged. Never applied
/// implicitly by any other operation.
void normalize(std::span<float> x);

/// Fixed-dimension row-major block of float32 vectors, immutable in spirit
/// once populated (ids are implicit row indices).
class VectorSet {
public:
    VectorSet() = default;
    explicit VectorSet(std::uint32_t dim, std::size_t count = 0)
        : dim_(dim), data_(static_cast<std::size_t>(dim) * count) {
        require(dim > 0, "VectorSet dimension must be positive");
    }

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    bool empty() const { return data_.empty(); }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<float> row(std::size_t i) {
        return {data_.data() + i * dim_, dim_};
    }

    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }

    void append(std::span<const float> v);
    void resize(std::size_t count) { data_.resize(static_cast<std::size_t>(dim_) * count); }

    VectorSet normalized_copy() const;

private:
    std::uint32_t dim_{0};
    std::vector<float> data_;
};

/// BGV1 vector file, little-endian:
///   magic "BGV1" | dim u32 | count u64 | payload count*dim f32 row-major |
///   crc32(payload) u32
void save_vectors(const VectorSet& set, const std::filesystem::path& path);
VectorSet load_vectors(const std::filesystem::path& path);

} // namespace bigran
