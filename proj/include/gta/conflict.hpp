// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gta {

enum class LossChoice { Total, RlOnly };

std::string_view to_string(LossChoice c) noexcept;

struct GradientReport {
    double dot = 0.0;
    std::optional<double> cosine;  // empty when either gradient has zero norm
    double sft_norm = 0.0;
    double rl_norm = 0.0;
    LossChoice choice = LossChoice::RlOnly;
    std::int64_t step = 0;
};

double dot_product(std::span<const double> a, std::span<const double> b);

// Compares the supervised and RL gradients of the same parameter state. The
// combined loss is kept only when their inner product is strictly positive.
GradientReport detect_conflict(std::span<const double> sft_grad, std::span<const double> rl_grad,
                               std::int64_t step = 0);

// Report for steps that never compute a supervised gradient.
GradientReport rl_only_report(std::span<const double> rl_grad, std::int64_t step = 0);

struct FinalLoss {
    double value = 0.0;
    LossChoice choice = LossChoice::RlOnly;
};

FinalLoss select_final_loss(const GradientReport& report, double sft_loss, double rl_loss, double lambda_sft,
                            double lambda_rl);

// Gradient of the selected final loss: lambda_sft*sft + lambda_rl*rl for
// Total, the untouched RL gradient for RlOnly.
std::vector<double> applied_gradient(const GradientReport& report, std::span<const double> sft_grad,
                                     std::span<const double> rl_grad, double lambda_sft, double lambda_rl);

}  // namespace gta
