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

#include "bigran/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "bigran/rng.hpp"

namespace bigran {

void SyntheticSpec::validate() const {
    require(dim >= 2, "synthetic spec: dim must be >= 2");
    require(n_answers >= 1, "synthetic spec: n_answers must be >= 1");
    require(n_clusters >= 1, "synthetic spec: n_clusters must be >= 1");
    require(n_clusters <= n_answers, "synthetic spec: n_clusters must be <= n_answers");
    require(std::isfinite(noise_sigma) && noise_sigma >= 0.0f,
            "synthetic spec: noise_sigma must be finite and >= 0");
}

namespace {

// x <- x - 2 v (v.x) for a unit reflector v.
void apply_householder(std::span<float> x, std::span<const float> v) {
    const double proj = dot(x.data(), v.data(), x.size());
    const float two_proj = static_cast<float>(2.0 * proj);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= two_proj * v[k];
}

} // namespace

SyntheticDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    CounterRng root(seed);

    const std::uint32_t d = spec.dim;

    // Three random reflectors and a decaying spectrum give the cluster
    // centers a correlated, anisotropic covariance in the standard basis.
    CounterRng mix_rng = root.fork(1);
    std::vector<std::vector<float>> reflectors(3, std::vector<float>(d));
    for (auto& v : reflectors) {
        for (auto& e : v) e = mix_rng.gaussian();
        normalize(v);
    }
    std::vector<float> spectrum(d);
    const double decay = std::pow(0.15, 1.0 / std::max<std::uint32_t>(d - 1, 1));
    for (std::uint32_t k = 0; k < d; ++k) {
        spectrum[k] = static_cast<float>(2.0 * std::pow(decay, k));
    }

    CounterRng center_rng = root.fork(2);
    VectorSet centers(d, spec.n_clusters);
    for (std::uint32_t c = 0; c < spec.n_clusters; ++c) {
        auto row = centers.row(c);
        for (std::uint32_t k = 0; k < d; ++k) row[k] = spectrum[k] * center_rng.gaussian();
        for (const auto& v : reflectors) apply_householder(row, v);
    }

    SyntheticDataset ds;
    ds.answers = VectorSet(d, spec.n_answers);
    ds.cluster_labels.resize(spec.n_answers);
    CounterRng answer_rng = root.fork(3);
    for (std::uint32_t i = 0; i < spec.n_answers; ++i) {
        const std::uint32_t label = i % spec.n_clusters;
        ds.cluster_labels[i] = label;
        auto row = ds.answers.row(i);
        const auto center = centers.row(label);
        for (std::uint32_t k = 0; k < d; ++k) {
            row[k] = center[k] + spec.noise_sigma * answer_rng.gaussian();
        }
    }

    ds.queries = VectorSet(d, spec.n_queries);
    ds.positives.resize(spec.n_queries);
    CounterRng query_rng = root.fork(4);
    for (std::uint32_t q = 0; q < spec.n_queries; ++q) {
        const auto target =
            static_cast<std::uint32_t>(query_rng.uniform_below(spec.n_answers));
        ds.positives[q] = {target};
        auto row = ds.queries.row(q);
        const auto src = ds.answers.row(target);
        for (std::uint32_t k = 0; k < d; ++k) {
            row[k] = src[k] + spec.noise_sigma * query_rng.gaussian();
        }
    }
    return ds;
}

void save_positives_tsv(const std::vector<std::vector<std::uint32_t>>& positives,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    for (std::size_t q = 0; q < positives.size(); ++q) {
        for (const auto a : positives[q]) {
            out << q << '\t' << a << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::vector<std::uint32_t>> load_positives_tsv(
    const std::filesystem::path& path, std::size_t n_queries, std::size_t n_answers) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::vector<std::vector<std::uint32_t>> positives(n_queries);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                              ": expected `query_id\\tanswer_id`");
        }
        std::uint64_t q = 0, a = 0;
        const auto r1 = std::from_chars(line.data(), line.data() + tab, q);
        const auto r2 = std::from_chars(line.data() + tab + 1, line.data() + line.size(), a);
        if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                              ": malformed integer");
        }
        if (q >= n_queries || a >= n_answers) {
            throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                              ": id out of range");
        }
        positives[q].push_back(static_cast<std::uint32_t>(a));
    }
    for (std::size_t q = 0; q < n_queries; ++q) {
        if (positives[q].empty()) {
            throw FormatError(path.string() + ": query " + std::to_string(q) +
                              " has no positives");
        }
        std::sort(positives[q].begin(), positives[q].end());
        positives[q].erase(std::unique(positives[q].begin(), positives[q].end()),
                           positives[q].end());
    }
    return positives;
}

} // namespace bigran
