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

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bigran/rng.hpp"
#include "bigran/vectors.hpp"

namespace bigran::test {

/// Relative closeness with an absolute floor near zero, matching the usual
/// test-framework definition of `epsilon`-relative comparison.
inline bool rel_close(double a, double b, double eps) {
    return std::abs(a - b) <= eps * (1.0 + std::max(std::abs(a), std::abs(b)));
}

inline VectorSet random_vectors(std::uint32_t dim, std::size_t count, std::uint64_t seed,
                                float scale = 1.0f) {
    CounterRng rng(seed);
    VectorSet set(dim, count);
    for (std::size_t i = 0; i < count; ++i) {
        auto row = set.row(i);
        for (auto& v : row) v = scale * rng.gaussian();
    }
    return set;
}

/// Unique temporary directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        path_ = base / ("bigran_test_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace bigran::test
