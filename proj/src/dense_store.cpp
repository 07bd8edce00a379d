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

#include "bigran/dense_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "bigran/io.hpp"

namespace bigran {

namespace {
constexpr char kStoreMagic[4] = {'B', 'G', 'D', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;
} // namespace

DenseStore::DenseStore(DenseStore&& other) noexcept { *this = std::move(other); }

DenseStore& DenseStore::operator=(DenseStore&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = other.fd_;
        dim_ = other.dim_;
        count_ = other.count_;
        other.fd_ = -1;
    }
    return *this;
}

DenseStore::~DenseStore() {
    if (fd_ >= 0) ::close(fd_);
}

void DenseStore::write(const VectorSet& vectors, const std::filesystem::path& path) {
    BinaryWriter w(path);
    w.write_magic(kStoreMagic);
    w.write<std::uint32_t>(vectors.dim());
    w.write<std::uint64_t>(vectors.size());
    w.begin_crc();
    const std::size_t payload = vectors.size() * vectors.dim() * sizeof(float);
    if (payload > 0) w.write_bytes(vectors.data(), payload);
    const auto crc = w.end_crc();
    w.write<std::uint32_t>(crc);
    w.close();
}

DenseStore DenseStore::open(const std::filesystem::path& path) {
    DenseStore store;
    store.path_ = path;
    store.fd_ = ::open(path.c_str(), O_RDONLY);
    if (store.fd_ < 0) throw IoError("cannot open dense store: " + path.string());

    char header[kHeaderBytes];
    const auto got = ::pread(store.fd_, header, kHeaderBytes, 0);
    if (got != static_cast<ssize_t>(kHeaderBytes)) {
        throw FormatError(path.string() + ": truncated header");
    }
    if (std::memcmp(header, kStoreMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic");
    }
    std::memcpy(&store.dim_, header + 4, 4);
    std::memcpy(&store.count_, header + 8, 8);
    if (store.dim_ == 0) throw FormatError(path.string() + ": dimension must be positive");

    const auto file_size = std::filesystem::file_size(path);
    const std::uint64_t expected =
        kHeaderBytes + store.count_ * store.dim_ * sizeof(float) + sizeof(std::uint32_t);
    if (file_size != expected) {
        throw FormatError(path.string() + ": size mismatch, expected " +
                          std::to_string(expected) + " bytes, have " +
                          std::to_string(file_size));
    }
    return store;
}

VectorSet DenseStore::fetch(std::span<const std::uint32_t> ids) const {
    require(fd_ >= 0, "DenseStore::fetch: store is not open");
    for (const auto id : ids) {
        if (id >= count_) {
            throw ValidationError("DenseStore::fetch: id " + std::to_string(id) +
                                  " out of range (count " + std::to_string(count_) + ")");
        }
    }
    VectorSet out(dim_, ids.size());
    if (ids.empty()) return out;

    // Deduplicate and read in ascending offset order, then scatter back to
    // the caller's order.
    std::vector<std::uint32_t> unique(ids.begin(), ids.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    const std::size_t record_bytes = static_cast<std::size_t>(dim_) * sizeof(float);
    VectorSet staged(dim_, unique.size());
    for (std::size_t i = 0; i < unique.size(); ++i) {
        const std::uint64_t offset = kHeaderBytes + static_cast<std::uint64_t>(unique[i]) * record_bytes;
        const auto got = ::pread(fd_, staged.row(i).data(), record_bytes,
                                 static_cast<off_t>(offset));
        if (got != static_cast<ssize_t>(record_bytes)) {
            throw IoError(path_.string() + ": short read at offset " + std::to_string(offset));
        }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = std::lower_bound(unique.begin(), unique.end(), ids[i]);
        const std::size_t slot = static_cast<std::size_t>(it - unique.begin());
        std::memcpy(out.row(i).data(), staged.row(slot).data(), record_bytes);
    }
    return out;
}

std::vector<float> DenseStore::fetch_one(std::uint32_t id) const {
    const std::uint32_t ids[1] = {id};
    auto set = fetch(ids);
    return {set.row(0).begin(), set.row(0).end()};
}

bool DenseStore::verify_checksum() const {
    require(fd_ >= 0, "DenseStore::verify_checksum: store is not open");
    const std::size_t payload = static_cast<std::size_t>(count_) * dim_ * sizeof(float);
    std::vector<std::uint8_t> buf(1 << 16);
    std::uint32_t crc = 0;
    std::uint64_t offset = kHeaderBytes;
    std::size_t left = payload;
    while (left > 0) {
        const std::size_t chunk = std::min(left, buf.size());
        const auto got = ::pread(fd_, buf.data(), chunk, static_cast<off_t>(offset));
        if (got != static_cast<ssize_t>(chunk)) {
            throw IoError(path_.string() + ": short read during checksum scan");
        }
        crc = crc32(buf.data(), chunk, crc);
        offset += chunk;
        left -= chunk;
    }
    std::uint32_t stored = 0;
    const auto got = ::pread(fd_, &stored, sizeof(stored), static_cast<off_t>(offset));
    if (got != static_cast<ssize_t>(sizeof(stored))) {
        throw IoError(path_.string() + ": short read at checksum");
    }
    return stored == crc;
}

} // namespace bigran
