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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bigran/error.hpp"

namespace bigran {

static_assert(std::endian::native == std::endian::little,
              "artifact formats assume a little-endian host");

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc = 0);

/// FNV-1a 64-bit, used for artifact content hashes and parameter freezing
/// checks (not cryptographic).
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t hash = 0xcbf29ce484222325ull);

std::uint64_t file_content_hash(const std::filesystem::path& path);

/// Buffered little-endian writer for the BG*1 artifact formats. Payload
/// bytes can be routed through a streaming CRC accumulator.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path);
    ~BinaryWriter();

    void write_bytes(const void* data, std::size_t len);

    template <typename T>
    void write(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        write_bytes(&value, sizeof(T));
    }

    void write_magic(const char magic[4]) { write_bytes(magic, 4); }

    void begin_crc() { crc_active_ = true; crc_ = 0; }
    std::uint32_t end_crc() { crc_active_ = false; return crc_; }

    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
    bool crc_active_{false};
    std::uint32_t crc_{0};
};

/// Whole-file reader with position tracking so format errors can name the
/// exact byte offset.
class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path);

    std::size_t size() const { return bytes_.size(); }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::uint8_t* cursor() const { return bytes_.data() + pos_; }

    void read_bytes(void* dst, std::size_t len);
    void skip(std::size_t len);

    template <typename T>
    T read() {
        static_assert(std::is_trivially_copyable_v<T>);
        T value;
        read_bytes(&value, sizeof(T));
        return value;
    }

    /// Fails with a FormatError naming the file when the magic differs.
    void expect_magic(const char magic[4]);

    std::span<const std::uint8_t> view(std::size_t offset, std::size_t len) const;

    const std::filesystem::path& path() const { return path_; }

    [[noreturn]] void fail(const std::string& what) const;

private:
    std::filesystem::path path_;
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_{0};
};

/// Runs fn(begin, end) over [0, n) split across worker threads. Thread
/// count comes from BIGRAN_THREADS (default: hardware concurrency, capped
/// at 16). Chunk boundaries are independent of thread count, so any
/// slot-writing workload is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

std::size_t worker_count();

} // namespace bigran
