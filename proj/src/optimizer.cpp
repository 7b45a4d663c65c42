// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/optimizer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "gta/errors.hpp"

namespace gta {

namespace {

constexpr char kMagic[8] = {'G', 'T', 'A', 'A', 'D', 'A', 'M', '\x01'};

}  // namespace

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("optimizer: learning_rate must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("optimizer: epsilon must be positive");
    }
    if (!(weight_decay >= 0.0) || !(max_grad_norm >= 0.0)) {
        throw ConfigError("optimizer: weight_decay and max_grad_norm must be non-negative");
    }
}

nlohmann::json AdamConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"beta1", beta1},
            {"beta2", beta2},                 {"epsilon", epsilon},
            {"weight_decay", weight_decay},   {"max_grad_norm", max_grad_norm}};
}

AdamConfig AdamConfig::from_json(const nlohmann::json& j) {
    AdamConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    return c;
}

Adam::Adam(AdamConfig cfg, std::size_t n_params) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {
    cfg_.validate();
}

double Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw InternalError("Adam::step: size mismatch");
    }
    double sq = 0.0;
    for (double g : grad) {
        sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
        throw NumericError("Adam::step: non-finite gradient");
    }
    const double scale = (cfg_.max_grad_norm > 0.0 && norm > cfg_.max_grad_norm) ? cfg_.max_grad_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] * scale;
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * params[i]);
    }
    return norm;
}

void Adam::save(const std::filesystem::path& path) const {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot write " + tmp.string());
        }
        const auto n = static_cast<std::uint64_t>(m_.size());
        os.write(kMagic, sizeof kMagic);
        os.write(reinterpret_cast<const char*>(&t_), sizeof t_);
        os.write(reinterpret_cast<const char*>(&n), sizeof n);
        os.write(reinterpret_cast<const char*>(m_.data()), static_cast<std::streamsize>(n * sizeof(double)));
        os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!os) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void Adam::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    char magic[sizeof kMagic];
    std::int64_t t = 0;
    std::uint64_t n = 0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&t), sizeof t);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw DataError(path.string() + ": not an optimizer state file");
    }
    if (n != m_.size()) {
        throw DataError(path.string() + ": optimizer state size does not match the model");
    }
    std::vector<double> m(n), v(n);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(n * sizeof(double)));
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) {
        throw DataError(path.string() + ": truncated optimizer state");
    }
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace gta
