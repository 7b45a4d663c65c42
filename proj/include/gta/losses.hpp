// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gta/conflict.hpp"
#include "gta/gta_format.hpp"
#include "gta/rollout.hpp"
#include "gta/transformer.hpp"

namespace gta {

enum class RatioMode { Token, Sequence };

struct RlLossOptions {
    double clip_eps = 0.2;
    double kl_beta = 0.01;
    RatioMode ratio_mode = RatioMode::Token;
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

struct LossBundle {
    double sft_loss = 0.0;
    double rl_loss = 0.0;
    std::vector<double> sft_grad;
    std::vector<double> rl_grad;
    double grad_dot = 0.0;
    std::optional<double> grad_cosine;
    LossChoice final_loss_choice = LossChoice::RlOnly;
};

// Group-standardized rewards, (r - mean) / max(std, eps_std), with the
// population standard deviation. A zero-variance group maps to exact zeros.
AdvantageStats compute_advantages(std::span<const double> rewards, double eps_std = 1e-4);

// k3 estimator rho - ln(rho) - 1 with rho = exp(logp_ref - logp_current).
double kl_token(double logp_current, double logp_ref);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

struct RlObjective {
    double loss = 0.0;                              // -J
    std::vector<std::vector<double>> dloss_dlogp;   // per rollout, per completion token
    std::size_t empty_rollouts = 0;                 // rollouts with no RL-trained token
};

// Evaluates -J from cached log-probs alone: per-token (or per-sequence) clipped
// ratio surrogate plus the KL penalty, averaged over the rl_mask tokens of each
// rollout and then over the group.
RlObjective rl_objective(std::span<const Rollout> rollouts, std::span<const double> advantages,
                         const RlLossOptions& options);

// -sum over masked positions of log P(sequence_t | sequence_<t).
// Throws ConfigError if the mask selects no position.
LossAndGrad sft_loss(const TransformerLM& model, std::span<const int> sequence, const std::vector<bool>& sft_mask);

// Mean of sft_loss over the teacher sequences.
LossAndGrad sft_loss_batch(const TransformerLM& model, std::span<const TeacherSequence> sequences);

// Scores every rollout of the group under `model` in one shared-prompt pass.
GroupForward forward_rollouts(const TransformerLM& model, const Group& group);

// RL loss of one group. Refreshes logprobs_current from the live parameters.
LossAndGrad rl_loss(const TransformerLM& model, Group& group, const RlLossOptions& options);

// Mean RL loss over groups. When `cache_old` is set, logprobs_old is first
// overwritten with the freshly computed logprobs_current (ratios exactly 1).
LossAndGrad rl_loss_batch(const TransformerLM& model, std::span<Group> groups, const RlLossOptions& options,
                          bool cache_old = false);

}  // namespace gta
