// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/losses.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "gta/errors.hpp"

namespace gta {

AdvantageStats compute_advantages(std::span<const double> rewards, double eps_std) {
    if (rewards.size() < 2) {
        throw ConfigError("group size must be >= 2 to standardize rewards");
    }
    const auto G = static_cast<double>(rewards.size());
    AdvantageStats s;
    double sum = 0.0;
    for (double r : rewards) {
        sum += r;
    }
    s.group_mean = sum / G;
    double var = 0.0;
    for (double r : rewards) {
        var += (r - s.group_mean) * (r - s.group_mean);
    }
    s.group_std = std::sqrt(var / G);
    s.advantages.assign(rewards.size(), 0.0);
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    if (*lo == *hi) {
        s.group_std = 0.0;
        return s;
    }
    const double denom = std::max(s.group_std, eps_std);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        s.advantages[i] = (rewards[i] - s.group_mean) / denom;
    }
    return s;
}

double kl_token(double logp_current, double logp_ref) {
    if (!std::isfinite(logp_current) || !std::isfinite(logp_ref)) {
        throw NumericError("kl_token: non-finite log-probability");
    }
    const double x = logp_ref - logp_current;  // ln rho
    return std::max(0.0, std::expm1(x) - x);
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * advantage, clipped * advantage);
}

RlObjective rl_objective(std::span<const Rollout> rollouts, std::span<const double> advantages,
                         const RlLossOptions& options) {
    if (rollouts.size() != advantages.size()) {
        throw InternalError("rl_objective: one advantage per rollout required");
    }
    RlObjective out;
    out.dloss_dlogp.resize(rollouts.size());
    if (rollouts.empty()) {
        return out;
    }
    const auto G = static_cast<double>(rollouts.size());
    const double lo = 1.0 - options.clip_eps;
    const double hi = 1.0 + options.clip_eps;
    double J = 0.0;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        const Rollout& r = rollouts[i];
        const std::size_t n = r.completion_tokens.size();
        if (r.logprobs_current.size() != n || r.logprobs_old.size() != n || r.logprobs_ref.size() != n ||
            r.masks.size() != n) {
            throw InternalError("rl_objective: rollout log-prob/mask lengths must equal completion length");
        }
        auto& grad = out.dloss_dlogp[i];
        grad.assign(n, 0.0);
        const std::size_t count = r.masks.rl_count();
        if (count == 0) {
            ++out.empty_rollouts;
            spdlog::warn("rollout {} has an empty RL mask; it contributes nothing to the RL loss", i);
            continue;
        }
        const double A = advantages[i];
        const double inv_len = 1.0 / static_cast<double>(count);

        double seq_ratio = 0.0;
        bool seq_unclipped = false;
        if (options.ratio_mode == RatioMode::Sequence) {
            double log_ratio = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                if (r.masks.rl_mask[t]) {
                    log_ratio += r.logprobs_current[t] - r.logprobs_old[t];
                }
            }
            seq_ratio = std::exp(log_ratio);
            const double unclipped = seq_ratio * A;
            const double clipped = std::clamp(seq_ratio, lo, hi) * A;
            seq_unclipped = unclipped <= clipped;
            J += std::min(unclipped, clipped) / G;
        }

        double Ji = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            if (!r.masks.rl_mask[t]) {
                continue;
            }
            const double lc = r.logprobs_current[t];
            const double kl = kl_token(lc, r.logprobs_ref[t]);
            const double rho = std::exp(r.logprobs_ref[t] - lc);
            // The sequence-level surrogate is not length-averaged, so its
            // per-token derivative is rescaled to cancel inv_len below.
            double dsurrogate = 0.0;
            if (options.ratio_mode == RatioMode::Token) {
                const double ratio = std::exp(lc - r.logprobs_old[t]);
                const double unclipped = ratio * A;
                const double clipped = std::clamp(ratio, lo, hi) * A;
                Ji += std::min(unclipped, clipped);
                dsurrogate = unclipped <= clipped ? ratio * A : 0.0;
            } else {
                dsurrogate = seq_unclipped ? seq_ratio * A * static_cast<double>(count) : 0.0;
            }
            Ji -= options.kl_beta * kl;
            const double dJ = dsurrogate - options.kl_beta * (1.0 - rho);
            grad[t] = -dJ * inv_len / G;
        }
        J += Ji * inv_len / G;
    }
    out.loss = -J;
    if (!std::isfinite(out.loss)) {
        throw NumericError("rl_objective: non-finite loss");
    }
    return out;
}

LossAndGrad sft_loss(const TransformerLM& model, std::span<const int> sequence, const std::vector<bool>& sft_mask) {
    if (sft_mask.size() != sequence.size()) {
        throw InternalError("sft_loss: mask length must equal sequence length");
    }
    const auto first = std::find(sft_mask.begin(), sft_mask.end(), true);
    if (first == sft_mask.end()) {
        throw ConfigError("sft_loss: supervised span is empty");
    }
    const auto k = static_cast<std::size_t>(first - sft_mask.begin());
    if (k == 0) {
        throw InternalError("sft_loss: the first token has no history and cannot be supervised");
    }
    // Positions after the last supervised target never influence the loss.
    const auto last = static_cast<std::size_t>(sft_mask.rend() - std::find(sft_mask.rbegin(), sft_mask.rend(), true));
    std::vector<std::vector<int>> cont{std::vector<int>(sequence.begin() + static_cast<std::ptrdiff_t>(k),
                                                        sequence.begin() + static_cast<std::ptrdiff_t>(last))};
    const GroupForward fwd = model.forward_group(sequence.first(k), cont);
    const auto& lp = fwd.logprobs[0];
    std::vector<std::vector<double>> dlogp(1, std::vector<double>(lp.size(), 0.0));
    LossAndGrad out;
    for (std::size_t t = 0; t < lp.size(); ++t) {
        if (sft_mask[k + t]) {
            out.loss -= lp[t];
            dlogp[0][t] = -1.0;
        }
    }
    out.grad.assign(model.parameter_count(), 0.0);
    model.backward_group(fwd, dlogp, out.grad);
    return out;
}

LossAndGrad sft_loss_batch(const TransformerLM& model, std::span<const TeacherSequence> sequences) {
    if (sequences.empty()) {
        throw ConfigError("sft_loss_batch: no sequences");
    }
    LossAndGrad out;
    out.grad.assign(model.parameter_count(), 0.0);
    const double w = 1.0 / static_cast<double>(sequences.size());
    for (const auto& s : sequences) {
        const LossAndGrad one = sft_loss(model, s.tokens, s.mask.sft_mask);
        out.loss += w * one.loss;
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            out.grad[i] += w * one.grad[i];
        }
    }
    return out;
}

GroupForward forward_rollouts(const TransformerLM& model, const Group& group) {
    std::vector<std::vector<int>> conts;
    conts.reserve(group.rollouts.size());
    for (const auto& r : group.rollouts) {
        conts.push_back(r.completion_tokens);
    }
    return model.forward_group(group.prompt, conts);
}

namespace {

double accumulate_group_rl(const TransformerLM& model, Group& group, const RlLossOptions& options, bool cache_old,
                           double scale, std::span<double> grad) {
    GroupForward fwd = forward_rollouts(model, group);
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        group.rollouts[i].logprobs_current = fwd.logprobs[i];
        if (cache_old) {
            group.rollouts[i].logprobs_old = fwd.logprobs[i];
        }
    }
    RlObjective obj = rl_objective(group.rollouts, group.stats.advantages, options);
    for (auto& g : obj.dloss_dlogp) {
        for (double& v : g) {
            v *= scale;
        }
    }
    model.backward_group(fwd, obj.dloss_dlogp, grad);
    return obj.loss;
}

}  // namespace

LossAndGrad rl_loss(const TransformerLM& model, Group& group, const RlLossOptions& options) {
    LossAndGrad out;
    out.grad.assign(model.parameter_count(), 0.0);
    out.loss = accumulate_group_rl(model, group, options, false, 1.0, out.grad);
    return out;
}

LossAndGrad rl_loss_batch(const TransformerLM& model, std::span<Group> groups, const RlLossOptions& options,
                          bool cache_old) {
    LossAndGrad out;
    out.grad.assign(model.parameter_count(), 0.0);
    if (groups.empty()) {
        return out;
    }
    const double w = 1.0 / static_cast<double>(groups.size());
    for (auto& g : groups) {
        out.loss += w * accumulate_group_rl(model, g, options, cache_old, w, out.grad);
    }
    return out;
}

}  // namespace gta
