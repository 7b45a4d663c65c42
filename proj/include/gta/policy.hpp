// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gta/gta_format.hpp"
#include "gta/rollout.hpp"
#include "gta/transformer.hpp"

namespace gta {

struct SamplingControls {
    double temperature = 1.0;
    int top_k = 0;  // 0 disables top-k filtering
    int max_new_tokens = 32;
    bool greedy = false;
    std::vector<int> stop_tokens;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static SamplingControls from_json(const nlohmann::json& j);
};

struct SampledCompletion {
    std::vector<int> tokens;
    std::vector<double> logprobs;  // under the untempered model distribution
};

// Draws n completions independently. Generation stops at a stop token, at
// max_new_tokens, or when the context window is full. Reproducible for a
// fixed seed.
std::vector<SampledCompletion> sample_sequences(const TransformerLM& model, std::span<const int> prompt, int n,
                                                const SamplingControls& controls, std::uint64_t seed);

// A GTA-aware language model: template, tokenizer and transformer weights.
class Policy {
public:
    Policy() = default;
    Policy(GtaFormat format, ModelConfig cfg);  // cfg.vocab_size is taken from the tokenizer

    [[nodiscard]] const GtaFormat& format() const noexcept { return format_; }
    [[nodiscard]] const TransformerLM& model() const noexcept { return model_; }
    [[nodiscard]] TransformerLM& model() noexcept { return model_; }

    [[nodiscard]] std::vector<double> score_logprobs(std::span<const int> prompt,
                                                     std::span<const int> completion) const;

    // Rollouts with prompt, completion and logprobs_current filled. End of
    // sequence and the closing answer tag always stop generation.
    [[nodiscard]] std::vector<Rollout> sample_completions(std::span<const int> prompt, int n,
                                                          SamplingControls controls, std::uint64_t seed) const;

private:
    GtaFormat format_;
    TransformerLM model_;
};

struct ReferenceSnapshot {
    TransformerLM model;
    std::int64_t snapshot_step = 0;
};

// Deep copy; later updates to `model` leave the snapshot untouched.
ReferenceSnapshot clone_snapshot(const TransformerLM& model, std::int64_t step);

struct CheckpointInfo {
    std::int64_t step = 0;
    std::string config_hash;
};

// Binary archive: magic, JSON header (model config, template, vocabulary,
// tensor table, step, config hash), then the raw parameter doubles.
void save_checkpoint(const std::filesystem::path& path, const Policy& policy, const CheckpointInfo& info);
void save_checkpoint(const std::filesystem::path& path, const GtaFormat& format, const TransformerLM& model,
                     const CheckpointInfo& info);
Policy load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace gta
