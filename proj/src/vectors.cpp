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

#include "bigran/vectors.hpp"

#include <cmath>
#include <cstring>

#include "bigran/io.hpp"

namespace bigran {

double inner_product(std::span<const float> x, std::span<const float> y) {
    require(x.size() == y.size(),
            "inner_product: dimension mismatch (" + std::to_string(x.size()) +
                " vs " + std::to_string(y.size()) + ")");
    return dot(x.data(), y.data(), x.size());
}

double squared_norm(std::span<const float> x) {
    return dot(x.data(), x.data(), x.size());
}

void normalize(std::span<float> x) {
    const double n2 = squared_norm(x);
    if (n2 <= 0.0) return;
    const float inv = static_cast<float>(1.0 / std::sqrt(n2));
    for (auto& v : x) v *= inv;
}

void VectorSet::append(std::span<const float> v) {
    require(v.size() == dim_, "VectorSet::append: dimension mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
}

VectorSet VectorSet::normalized_copy() const {
    VectorSet out = *this;
    for (std::size_t i = 0; i < out.size(); ++i) normalize(out.row(i));
    return out;
}

namespace {
constexpr char kVectorMagic[4] = {'B', 'G', 'V', '1'};
constexpr std::size_t kVectorHeaderBytes = 4 + 4 + 8;
} // namespace

void save_vectors(const VectorSet& set, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.write_magic(kVectorMagic);
    w.write<std::uint32_t>(set.dim());
    w.write<std::uint64_t>(set.size());
    const std::size_t payload = set.size() * set.dim() * sizeof(float);
    w.begin_crc();
    if (payload > 0) w.write_bytes(set.data(), payload);
    const std::uint32_t crc = w.end_crc();
    w.write<std::uint32_t>(crc);
    w.close();
}

VectorSet load_vectors(const std::filesystem::path& path) {
    BinaryReader r(path);
    r.expect_magic(kVectorMagic);
    const auto dim = r.read<std::uint32_t>();
    const auto count = r.read<std::uint64_t>();
    if (dim == 0) r.fail("dimension must be positive");
    const std::size_t payload = static_cast<std::size_t>(count) * dim * sizeof(float);
    const std::size_t expected = kVectorHeaderBytes + payload + sizeof(std::uint32_t);
    if (r.size() != expected) {
        r.fail("size mismatch: expected " + std::to_string(expected) + " bytes, have " +
               std::to_string(r.size()) + " (payload starts at offset " +
               std::to_string(kVectorHeaderBytes) + ")");
    }
    VectorSet set(dim, static_cast<std::size_t>(count));
    if (payload > 0) r.read_bytes(set.data(), payload);
    const auto stored_crc = r.read<std::uint32_t>();
    const auto actual_crc = crc32(set.data(), payload);
    if (stored_crc != actual_crc) {
        r.fail("payload checksum mismatch at offset " +
               std::to_string(kVectorHeaderBytes + payload));
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto row = set.row(i);
        for (std::uint32_t j = 0; j < dim; ++j) {
            if (!std::isfinite(row[j])) {
                r.fail("non-finite value at byte offset " +
                       std::to_string(kVectorHeaderBytes + (i * dim + j) * sizeof(float)) +
                       " (vector " + std::to_string(i) + ", component " +
                       std::to_string(j) + ")");
            }
        }
    }
    return set;
}

} // namespace bigran
