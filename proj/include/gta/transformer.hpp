// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace gta {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct ModelConfig {
    int vocab_size = 0;
    int context_length = 96;
    int d_model = 128;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 512;
    double init_std = 0.02;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

// Offsets of every named tensor inside the flat parameter vector.
struct ParameterLayout {
    struct Block {
        std::size_t norm1, wq, wk, wv, wo, norm2, w1, b1, w2, b2;
    };
    std::size_t tok_emb = 0;
    std::size_t pos_emb = 0;
    std::vector<Block> blocks;
    std::size_t norm_f = 0;
    std::size_t w_out = 0;
    std::size_t b_out = 0;
    std::size_t total = 0;

    explicit ParameterLayout(const ModelConfig& cfg);
    ParameterLayout() = default;
};

// Per-layer keys/values of earlier positions that a segment attends to.
struct KvRef {
    const Matrix* k = nullptr;
    const Matrix* v = nullptr;
};

struct LayerActivations {
    Matrix x_in;
    Vector inv_rms1;
    Matrix a;
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head: rows x (context + rows)
    Matrix attn;
    Matrix x_mid;
    Vector inv_rms2;
    Matrix b;
    Matrix u;
    Matrix act;
};

// Forward activations of one contiguous run of tokens.
struct SegmentActivations {
    std::vector<int> tokens;
    int start_pos = 0;
    int context_rows = 0;
    std::vector<LayerActivations> layers;
    Matrix x_final;
    Vector inv_rmsf;
    Matrix f;
    Matrix logp;  // rows x vocab, log-softmax of the logits
};

// One shared prefix and several continuations scored under it. The prefix is
// run once; each continuation attends to the prefix keys/values.
struct GroupForward {
    SegmentActivations prefix;
    std::vector<SegmentActivations> continuations;
    std::vector<std::vector<int>> targets;
    std::vector<std::vector<double>> logprobs;  // logprobs[j][t] = log P(target_t | prefix, target_<t)
};

struct DecodeState {
    std::vector<Matrix> keys;
    std::vector<Matrix> values;
    int length = 0;
    RowVector next_logprobs;
};

// Decoder-only transformer: learned token and position embeddings, pre-norm
// blocks (RMSNorm, multi-head causal attention, GELU MLP), untied output head.
// All parameters live in one flat vector, which doubles as the layout for
// gradients and optimizer state.
class TransformerLM {
public:
    TransformerLM() = default;
    explicit TransformerLM(ModelConfig cfg);  // parameters zero, norm gains one

    void init_random(std::uint64_t seed);

    [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] bool all_finite() const noexcept;

    Eigen::Map<Matrix> output_weight();
    Eigen::Map<Vector> output_bias();

    // Per-token log-probabilities of `completion` given `prompt`.
    // Throws CapacityError if |prompt| + |completion| exceeds the context.
    [[nodiscard]] std::vector<double> score(std::span<const int> prompt, std::span<const int> completion) const;

    [[nodiscard]] GroupForward forward_group(std::span<const int> prefix,
                                             const std::vector<std::vector<int>>& continuations) const;

    // Accumulates into `grad` the gradient of sum_j sum_t dlogp[j][t] * logprobs[j][t].
    void backward_group(const GroupForward& fwd, const std::vector<std::vector<double>>& dlogp,
                        std::span<double> grad) const;

    [[nodiscard]] DecodeState begin_decode(std::span<const int> prefix) const;
    void advance(DecodeState& state, int token) const;

    // Full next-token distribution after `prefix` (log-softmax).
    [[nodiscard]] std::vector<double> next_token_logprobs(std::span<const int> prefix) const;

private:
    [[nodiscard]] SegmentActivations forward_segment(std::span<const int> tokens, int start_pos,
                                                     std::span<const KvRef> context) const;
    void backward_segment(const SegmentActivations& seg, const Matrix& dlogits, std::span<const KvRef> context,
                          const std::vector<Matrix>* extra_dk, const std::vector<Matrix>* extra_dv,
                          std::vector<Matrix>* context_dk, std::vector<Matrix>* context_dv,
                          std::span<double> grad) const;
    void check_tokens(std::span<const int> tokens) const;

    ModelConfig cfg_;
    ParameterLayout layout_;
    // Eigen's vectorized kernels peel on alignment, so every buffer they map
    // gets the same alignment to keep results independent of heap layout.
    std::vector<double, Eigen::aligned_allocator<double>> params_;
};

}  // namespace gta
