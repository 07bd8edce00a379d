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
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "bigran/encoder.hpp"
#include "bigran/graph.hpp"
#include "bigran/loss.hpp"
#include "bigran/quantizer.hpp"
#include "bigran/sampler.hpp"
#include "bigran/synthetic.hpp"

namespace bigran {

enum class OptimizerKind : std::uint8_t { kSgdMomentum, kAdamW };

struct StageConfig {
    std::uint32_t batch_size{32};
    float learning_rate{0.1f};
    std::uint32_t epochs{10};
    std::uint32_t steps{200}; // query unification is step-driven
    double temperature{1.0};
    OptimizerKind optimizer{OptimizerKind::kSgdMomentum};
    float momentum{0.9f};
    float adam_beta1{0.9f};
    float adam_beta2{0.999f};
    float adam_eps{1e-8f};
    float weight_decay{0.0f};
    float commit_weight{0.0f}; // optional MSE pull between z and its codewords
    std::uint32_t hidden_dim{96};
    std::uint32_t emb_dim{64};
    std::uint32_t num_books{8};
    std::uint32_t book_size{256};
    std::uint32_t opq_alternations{4};
    std::uint32_t kmeans_iters{25};
    bool ann_negatives{false};   // mine per-epoch hard negatives for stage 1
    std::uint32_t ann_top{200};
    bool warm_start{true};       // stage 2 encoders start from stage 1
    float dense_weight{1.0f};    // weight of the dense term in unification
    std::uint64_t seed{1234};

    void validate() const;
};

/// Quantized answer encoder: trainable tower producing z, plus the trainable
/// codebooks selecting and concatenating codewords.
struct SparseEncoder {
    TowerEncoder tower;
    CodebookSet books;

    std::vector<float> dense_projection(std::span<const float> features) const {
        return tower.forward(features);
    }
    SparseCode encode_answer(std::span<const float> features) const {
        return encode(tower.forward(features), books);
    }
    std::vector<float> embed_answer(std::span<const float> features) const {
        return reconstruct(encode_answer(features), books);
    }
};

struct TrainDiagnostics {
    std::vector<double> epoch_mean_loss;
    std::vector<double> probe_loss; // fixed probe batch; entry 0 is pre-training
    std::size_t positive_collisions{0};
    std::size_t sampler_skips{0};
};

struct Stage1Result {
    TowerEncoder query_encoder; // g
    SparseEncoder sparse;       // f_s
    TrainDiagnostics diag;
};

struct Stage2Result {
    TowerEncoder query_encoder; // g'
    TowerEncoder dense_encoder; // f_d
    TrainDiagnostics diag;
};

struct UnifyResult {
    TowerEncoder query_encoder; // g''
    TrainDiagnostics diag;
};

struct UnifyConfig {
    std::size_t queue_capacity{4096};
};

/// FIFO ring of recently encoded answers kept as (sparse, dense) embedding
/// pairs; ids ride along so positive collisions can be excluded.
class NegativeQueue {
public:
    struct Entry {
        std::uint32_t id;
        std::vector<float> sparse_embedding;
        std::vector<float> dense_embedding;
    };

    explicit NegativeQueue(std::size_t capacity);
    void push(Entry entry);
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<Entry>& entries() const { return entries_; }

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

/// Per-query stand-in for lexically similar negatives: the L2-nearest
/// non-positive answer in raw feature space (deterministic, ties to the
/// lower id). Real deployments supply this list externally.
std::vector<std::uint32_t> default_aux_negatives(const SyntheticDataset& data);

/// The in-batch negative id set for one instance: every other instance's
/// positive plus every auxiliary negative in the batch, deduplicated, with
/// ids equal to the instance's own positive excluded (and counted).
std::vector<std::uint32_t> assemble_inbatch_negatives(
    std::span<const std::uint32_t> batch_positives,
    std::span<const std::uint32_t> batch_aux, std::size_t instance,
    std::size_t* collisions);

/// Stage 1: joint contrastive training of the query encoder and the
/// quantized answer encoder (codebooks initialized by rotation-learning PQ,
/// the rotation folded into the answer tower).
Stage1Result train_stage1(const SyntheticDataset& data,
                          const std::vector<std::uint32_t>& aux_negatives,
                          const StageConfig& cfg);

/// Stage 2: dense encoders trained against locality-centric batches drawn
/// from the proximity graph.
Stage2Result train_stage2(const SyntheticDataset& data, const BipartiteGraph& graph,
                          SampleStrategy strategy, const StageConfig& cfg,
                          const Stage1Result& warm);

/// Query unification: fine-tunes a copy of g' against both frozen answer
/// representations under the summed contrastive loss, with queue-augmented
/// negatives. Answer encoders are never touched.
UnifyResult unify_query(const TowerEncoder& g_prime, const Stage1Result& stage1,
                        const TowerEncoder& dense_encoder, const SyntheticDataset& data,
                        const UnifyConfig& queue_cfg, const StageConfig& cfg);

/// Bulk helpers shared by training, evaluation and the CLI.
VectorSet encode_queries(const TowerEncoder& encoder, const VectorSet& features);
VectorSet sparse_embeddings(const SparseEncoder& sparse, const VectorSet& features);
VectorSet dense_embeddings(const TowerEncoder& encoder, const VectorSet& features);
CodeSet answer_codes(const SparseEncoder& sparse, const VectorSet& features);

} // namespace bigran
