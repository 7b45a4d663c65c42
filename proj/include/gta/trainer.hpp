// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gta/data_metrics.hpp"
#include "gta/losses.hpp"
#include "gta/optimizer.hpp"
#include "gta/policy.hpp"

namespace gta {

enum class Method { Gta, GrpoOnly, SftOnly };
enum class GuessLossMode { Sft, Rl };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(GuessLossMode m) noexcept;
std::string_view to_string(RatioMode m) noexcept;
Method parse_method(std::string_view s);
GuessLossMode parse_guess_loss_mode(std::string_view s);
RatioMode parse_ratio_mode(std::string_view s);

// ref_refresh_period value that keeps the initial reference for the whole run.
inline constexpr std::uint64_t kNeverRefresh = std::numeric_limits<std::uint64_t>::max();

struct TrainConfig {
    int group_size = 16;
    double clip_eps = 0.2;
    double kl_beta = 0.01;
    double lambda_sft = 1.0;
    double lambda_rl = 1.0;
    int reuse_factor = 4;
    std::uint64_t ref_refresh_period = 200;
    GuessLossMode guess_loss_mode = GuessLossMode::Sft;
    Method method = Method::Gta;
    RatioMode ratio_mode = RatioMode::Token;
    SamplingControls sampling;
    AdamConfig optimizer;
    std::uint64_t seed = 0;
    int batch_size = 4;
    int epochs = 3;
    std::int64_t max_steps = -1;         // -1: derived from epochs
    std::int64_t eval_period = 50;       // 0: initial and final evaluation only
    std::int64_t checkpoint_period = 100;  // 0: final checkpoint only
    int eval_limit = 0;                  // 0: whole test split
    double eps_std = 1e-4;
    std::string system_instruction = "classify";
    TagSet tags;
    ModelConfig model;
    std::string init_checkpoint;  // empty: random initialization from seed

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);

    [[nodiscard]] std::int64_t total_steps(std::size_t n_train) const;
    [[nodiscard]] RlLossOptions rl_options() const;
    [[nodiscard]] bool uses_sft() const noexcept;
    [[nodiscard]] bool uses_rl() const noexcept { return method != Method::SftOnly; }
    [[nodiscard]] bool guess_in_rl() const noexcept;
};

struct StepMetrics {
    std::int64_t step = 0;
    double mean_total_reward = 0.0;
    double mean_format_reward = 0.0;
    double mean_accuracy_reward = 0.0;
    double guess_accuracy = 0.0;   // fraction of rollouts whose guess matches gold
    double answer_accuracy = 0.0;  // fraction of rollouts whose answer matches gold
    double sft_loss = 0.0;         // at the first inner iteration
    double rl_loss = 0.0;          // at the first inner iteration
    double mean_kl = 0.0;          // mean k3 over RL tokens at the first inner iteration
    double grad_dot = 0.0;         // last inner update
    std::optional<double> grad_cosine;
    std::string choice;            // TOTAL, RL_ONLY or SFT
    int total_choices = 0;         // inner updates that applied the combined loss
    double mean_completion_length = 0.0;
    bool ref_refreshed = false;
    bool skipped = false;          // non-finite loss; parameters restored
};

struct GradientRecord {
    std::int64_t step = 0;
    int inner = 0;
    GradientReport report;
    std::string choice;
    double sft_loss = 0.0;
    double rl_loss = 0.0;
    double max_ratio_deviation = 0.0;  // max |ratio - 1| over RL tokens before the update
};

struct TrainState {
    Policy policy;
    ReferenceSnapshot reference;
    Adam optimizer;
    std::int64_t step = 0;
    int consecutive_failures = 0;
};

struct StepResult {
    StepMetrics metrics;
    std::vector<GradientRecord> gradients;
    std::vector<Group> groups;
};

GtaTemplate make_template(const TrainConfig& cfg, const std::vector<std::string>& label_set);

// Fresh state: policy from init_checkpoint (or random init), reference = policy.
TrainState init_state(const TrainConfig& cfg, const std::vector<std::string>& label_set);

// Dataset positions for a 1-based step. Each epoch is an independent uniform
// permutation derived from the seed, consumed without replacement.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_examples, int batch_size, std::int64_t step);

// One optimizer step on a batch of prompts (reuse_factor updates for RL
// methods). Advances state.step and refreshes the reference when due.
StepResult train_step(TrainState& state, std::span<const LabeledExample> batch, const TrainConfig& cfg);

// Replaces the reference with the current policy when step % period == 0 and step > 0.
bool maybe_refresh_reference(TrainState& state, const TrainConfig& cfg);

struct EvalResult {
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    double format_valid_rate = 0.0;
    double guess_accuracy = 0.0;
    std::vector<ClassCounts> per_class;
    std::vector<std::string> predictions;  // canonical label, or empty when no valid answer
};

// Greedy-decodes one completion per example. Predictions come from the answer
// segment; invalid outputs count as wrong.
EvalResult evaluate(const Policy& policy, std::span<const LabeledExample> examples, int max_new_tokens);

// Maps an answer segment onto the label set (normalized match), or "" if none.
std::string canonical_prediction(const GtaSegments& segments, const std::vector<std::string>& label_set);

struct FormatPriorConfig {
    int steps = 300;
    int batch_size = 16;
    double learning_rate = 3e-3;
    double copy_probability = 0.5;  // chance that the answer repeats the guess
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

// Base model that knows the output format but nothing about the task: it is
// fit on well-formed completions whose labels are drawn at random, whose think
// is a random word of the input, and whose answer repeats the guess with
// probability copy_probability. Gold labels are never read.
TransformerLM train_format_prior(const GtaFormat& format, const ModelConfig& model_cfg,
                                 const std::vector<std::string>& texts, const FormatPriorConfig& prior);

struct RunOptions {
    bool force = false;
    bool resume = false;
    std::string source_revision = "unknown";
    std::int64_t stop_after = -1;  // simulate an interruption after this step
};

struct RunResult {
    std::filesystem::path out_dir;
    std::int64_t final_step = 0;
    EvalResult final_eval;
    bool halted = false;
    bool interrupted = false;
    std::string config_hash;
};

// Full training run into out_dir: config.json, manifest.json, metrics.tsv,
// gradients.tsv, checkpoints/step_NNNNNN/ and policy.ckpt.
RunResult run(const TrainConfig& cfg, const DatasetSplits& data, const std::filesystem::path& out_dir,
              const RunOptions& options = {});

std::string canonical_config_text(const TrainConfig& cfg);

}  // namespace gta
