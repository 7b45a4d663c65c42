// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace gta {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled
    double max_grad_norm = 1.0;  // 0 disables clipping

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static AdamConfig from_json(const nlohmann::json& j);
};

class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, std::size_t n_params);

    // Applies one update in place. Returns the gradient norm before clipping.
    double step(std::span<double> params, std::span<const double> grad);

    [[nodiscard]] const AdamConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] std::int64_t step_count() const noexcept { return t_; }

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

    bool operator==(const Adam& o) const { return t_ == o.t_ && m_ == o.m_ && v_ == o.v_; }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace gta
