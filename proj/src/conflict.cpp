// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/conflict.hpp"

#include <cmath>

#include "gta/errors.hpp"

namespace gta {

std::string_view to_string(LossChoice c) noexcept {
    return c == LossChoice::Total ? "TOTAL" : "RL_ONLY";
}

double dot_product(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InternalError("gradient length mismatch: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

GradientReport detect_conflict(std::span<const double> sft_grad, std::span<const double> rl_grad,
                               std::int64_t step) {
    GradientReport r;
    r.step = step;
    r.dot = dot_product(sft_grad, rl_grad);
    r.sft_norm = std::sqrt(dot_product(sft_grad, sft_grad));
    r.rl_norm = std::sqrt(dot_product(rl_grad, rl_grad));
    if (!std::isfinite(r.dot) || !std::isfinite(r.sft_norm) || !std::isfinite(r.rl_norm)) {
        throw NumericError("non-finite gradient in conflict detection");
    }
    if (r.sft_norm > 0.0 && r.rl_norm > 0.0) {
        r.cosine = r.dot / (r.sft_norm * r.rl_norm);
    }
    r.choice = r.dot > 0.0 ? LossChoice::Total : LossChoice::RlOnly;
    return r;
}

GradientReport rl_only_report(std::span<const double> rl_grad, std::int64_t step) {
    GradientReport r;
    r.step = step;
    r.rl_norm = std::sqrt(dot_product(rl_grad, rl_grad));
    r.choice = LossChoice::RlOnly;
    return r;
}

FinalLoss select_final_loss(const GradientReport& report, double sft_loss, double rl_loss, double lambda_sft,
                            double lambda_rl) {
    if (report.dot > 0.0) {
        return {lambda_sft * sft_loss + lambda_rl * rl_loss, LossChoice::Total};
    }
    return {rl_loss, LossChoice::RlOnly};
}

std::vector<double> applied_gradient(const GradientReport& report, std::span<const double> sft_grad,
                                     std::span<const double> rl_grad, double lambda_sft, double lambda_rl) {
    if (report.choice == LossChoice::RlOnly) {
        return {rl_grad.begin(), rl_grad.end()};
    }
    if (sft_grad.size() != rl_grad.size()) {
        throw InternalError("gradient length mismatch");
    }
    std::vector<double> g(rl_grad.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = lambda_sft * sft_grad[i] + lambda_rl * rl_grad[i];
    }
    return g;
}

}  // namespace gta
