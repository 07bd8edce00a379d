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

#include "bigran/io.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace bigran {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) {
            c = (c & 1u) ? (0xedb88320u ^ (c >> 1)) : (c >> 1);
        }
        table[i] = c;
    }
    return table;
}

const std::array<std::uint32_t, 256>& crc_table() {
    static const auto table = make_crc_table();
    return table;
}

} // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    const auto& table = crc_table();
    std::uint32_t c = crc ^ 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) {
        c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
    }
    return c ^ 0xffffffffu;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t hash) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t file_content_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for hashing: " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ull;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) hash = fnv1a64(buf.data(), static_cast<std::size_t>(got), hash);
    }
    return hash;
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open file for writing: " + path.string());
}

BinaryWriter::~BinaryWriter() {
    if (out_.is_open()) out_.close();
}

void BinaryWriter::write_bytes(const void* data, std::size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out_) throw IoError("write failed: " + path_.string());
    if (crc_active_) crc_ = crc32(data, len, crc_);
}

void BinaryWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("close failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    const auto size = in.tellg();
    in.seekg(0);
    bytes_.resize(static_cast<std::size_t>(size));
    if (size > 0) {
        in.read(reinterpret_cast<char*>(bytes_.data()), size);
        if (!in) throw IoError("read failed: " + path.string());
    }
}

void BinaryReader::read_bytes(void* dst, std::size_t len) {
    if (remaining() < len) {
        fail("truncated file: need " + std::to_string(len) + " bytes at offset " +
             std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
    std::memcpy(dst, bytes_.data() + pos_, len);
    pos_ += len;
}

void BinaryReader::skip(std::size_t len) {
    if (remaining() < len) {
        fail("truncated file: cannot skip " + std::to_string(len) +
             " bytes at offset " + std::to_string(pos_));
    }
    pos_ += len;
}

void BinaryReader::expect_magic(const char magic[4]) {
    char got[4];
    read_bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
        fail(std::string("bad magic, expected '") + std::string(magic, 4) + "'");
    }
}

std::span<const std::uint8_t> BinaryReader::view(std::size_t offset, std::size_t len) const {
    if (offset + len > bytes_.size()) {
        fail("view out of range at offset " + std::to_string(offset));
    }
    return {bytes_.data() + offset, len};
}

void BinaryReader::fail(const std::string& what) const {
    throw FormatError(path_.string() + ": " + what);
}

std::size_t worker_count() {
    static const std::size_t count = [] {
        if (const char* env = std::getenv("BIGRAN_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<std::size_t>(v);
        }
        const auto hc = std::thread::hardware_concurrency();
        return std::min<std::size_t>(hc == 0 ? 1 : hc, 16);
    }();
    return count;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n < 2048) {
        fn(0, n);
        return;
    }
    const std::size_t chunks = std::min(workers, (n + 511) / 512);
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mu;
    std::size_t begin = 0;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks && begin < n; ++c, begin += step) {
        const std::size_t end = std::min(begin + step, n);
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace bigran
