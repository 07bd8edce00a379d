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
#include <memory>
#include <span>
#include <vector>

#include "bigran/vectors.hpp"

namespace bigran {

/// Disk-resident fixed-record vector file, BGD1:
///   magic "BGD1" | dim u32 | count u64 | payload count*dim f32 |
///   crc32(payload) u32
/// Record r starts at byte 16 + r*dim*4. Reads go through pread, so one
/// open store serves any number of concurrent readers.
class DenseStore {
public:
    DenseStore() = default;
    DenseStore(DenseStore&&) noexcept;
    DenseStore& operator=(DenseStore&&) noexcept;
    ~DenseStore();

    static void write(const VectorSet& vectors, const std::filesystem::path& path);
    /// Validates magic, header fields and total file length; the payload is
    /// not scanned (use verify_checksum for a full check).
    static DenseStore open(const std::filesystem::path& path);

    std::uint32_t dim() const { return dim_; }
    std::uint64_t count() const { return count_; }
    const std::filesystem::path& path() const { return path_; }

    /// Fetches records in input order (duplicates allowed). Internally the
    /// reads are deduplicated and issued in ascending offset order.
    VectorSet fetch(std::span<const std::uint32_t> ids) const;
    std::vector<float> fetch_one(std::uint32_t id) const;

    bool verify_checksum() const;

private:
    std::filesystem::path path_;
    int fd_{-1};
    std::uint32_t dim_{0};
    std::uint64_t count_{0};
};

} // namespace bigran
