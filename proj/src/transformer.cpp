// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gta/errors.hpp"

namespace gta {

namespace {

using MatMap = Eigen::Map<Matrix>;
using CMatMap = Eigen::Map<const Matrix>;
using VecMap = Eigen::Map<Vector>;
using CVecMap = Eigen::Map<const Vector>;

constexpr double kRmsEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void rmsnorm_forward(const Matrix& x, const CVecMap& gain, Matrix& y, Vector& inv_rms) {
    const auto d = static_cast<double>(x.cols());
    inv_rms.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        inv_rms(i) = 1.0 / std::sqrt(x.row(i).squaredNorm() / d + kRmsEps);
    }
    y = inv_rms.asDiagonal() * x * gain.asDiagonal();
}

// Returns dx; accumulates the gain gradient.
Matrix rmsnorm_backward(const Matrix& dy, const Matrix& x, const Vector& inv_rms, const CVecMap& gain,
                        VecMap dgain) {
    const auto d = static_cast<double>(x.cols());
    const Matrix xhat = inv_rms.asDiagonal() * x;
    dgain += dy.cwiseProduct(xhat).colwise().sum().transpose();
    const Matrix dxhat = dy * gain.asDiagonal();
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double m = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = inv_rms(i) * (dxhat.row(i) - m * xhat.row(i));
    }
    return dx;
}

double gelu(double u) {
    return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}

double gelu_grad(double u) {
    const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

void log_softmax_rows(Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double mx = m.row(i).maxCoeff();
        const double lse = mx + std::log((m.row(i).array() - mx).exp().sum());
        m.row(i).array() -= lse;
    }
}

// dlogits for one row given dL/dlogp(target) and the row's log-probabilities.
void accumulate_target_grad(Eigen::Ref<RowVector> dlogits, const Eigen::Ref<const RowVector>& logp, int target,
                            double dlogp) {
    dlogits -= dlogp * logp.array().exp().matrix();
    dlogits(target) += dlogp;
}

}  // namespace

void ModelConfig::validate() const {
    if (vocab_size < 1) {
        throw ConfigError("model.vocab_size must be >= 1");
    }
    if (context_length < 2) {
        throw ConfigError("model.context_length must be >= 2");
    }
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw ConfigError("model.d_model must be a positive multiple of model.n_heads");
    }
    if (n_layers < 0 || d_ff < 1) {
        throw ConfigError("model.n_layers must be >= 0 and model.d_ff >= 1");
    }
    if (!(init_std > 0.0)) {
        throw ConfigError("model.init_std must be positive");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"context_length", context_length}, {"d_model", d_model},
            {"n_heads", n_heads},       {"n_layers", n_layers},             {"d_ff", d_ff},
            {"init_std", init_std}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.context_length = j.value("context_length", c.context_length);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.init_std = j.value("init_std", c.init_std);
    return c;
}

ParameterLayout::ParameterLayout(const ModelConfig& cfg) {
    const auto V = static_cast<std::size_t>(cfg.vocab_size);
    const auto C = static_cast<std::size_t>(cfg.context_length);
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto f = static_cast<std::size_t>(cfg.d_ff);
    std::size_t off = 0;
    const auto take = [&off](std::size_t n) {
        const std::size_t at = off;
        off += n;
        return at;
    };
    tok_emb = take(V * d);
    pos_emb = take(C * d);
    for (int l = 0; l < cfg.n_layers; ++l) {
        Block b{};
        b.norm1 = take(d);
        b.wq = take(d * d);
        b.wk = take(d * d);
        b.wv = take(d * d);
        b.wo = take(d * d);
        b.norm2 = take(d);
        b.w1 = take(d * f);
        b.b1 = take(f);
        b.w2 = take(f * d);
        b.b2 = take(d);
        blocks.push_back(b);
    }
    norm_f = take(d);
    w_out = take(d * V);
    b_out = take(V);
    total = off;
}

TransformerLM::TransformerLM(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    layout_ = ParameterLayout(cfg_);
    params_.assign(layout_.total, 0.0);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto ones = [&](std::size_t off) { std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(off), d, 1.0); };
    for (const auto& b : layout_.blocks) {
        ones(b.norm1);
        ones(b.norm2);
    }
    ones(layout_.norm_f);
}

void TransformerLM::init_random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, cfg_.init_std);
    const auto d = static_cast<std::size_t>(cfg_.d_model);
    const auto f = static_cast<std::size_t>(cfg_.d_ff);
    const double residual_scale = 1.0 / std::sqrt(2.0 * std::max(1, cfg_.n_layers));
    const auto fill = [&](std::size_t off, std::size_t n, double scale) {
        for (std::size_t i = 0; i < n; ++i) {
            params_[off + i] = scale * normal(rng);
        }
    };
    TransformerLM fresh(cfg_);
    params_ = fresh.params_;
    fill(layout_.tok_emb, static_cast<std::size_t>(cfg_.vocab_size) * d, 1.0);
    fill(layout_.pos_emb, static_cast<std::size_t>(cfg_.context_length) * d, 1.0);
    for (const auto& b : layout_.blocks) {
        fill(b.wq, d * d, 1.0);
        fill(b.wk, d * d, 1.0);
        fill(b.wv, d * d, 1.0);
        fill(b.wo, d * d, residual_scale);
        fill(b.w1, d * f, 1.0);
        fill(b.w2, f * d, residual_scale);
    }
    fill(layout_.w_out, d * static_cast<std::size_t>(cfg_.vocab_size), 1.0);
}

bool TransformerLM::all_finite() const noexcept {
    for (double p : params_) {
        if (!std::isfinite(p)) {
            return false;
        }
    }
    return true;
}

Eigen::Map<Matrix> TransformerLM::output_weight() {
    return {params_.data() + layout_.w_out, cfg_.d_model, cfg_.vocab_size};
}

Eigen::Map<Vector> TransformerLM::output_bias() {
    return {params_.data() + layout_.b_out, cfg_.vocab_size};
}

void TransformerLM::check_tokens(std::span<const int> tokens) const {
    for (int t : tokens) {
        if (t < 0 || t >= cfg_.vocab_size) {
            throw InternalError("token id " + std::to_string(t) + " outside model vocabulary");
        }
    }
}

SegmentActivations TransformerLM::forward_segment(std::span<const int> tokens, int start_pos,
                                                  std::span<const KvRef> context) const {
    const int n = static_cast<int>(tokens.size());
    const int d = cfg_.d_model;
    const int H = cfg_.n_heads;
    const int dh = d / H;
    const int V = cfg_.vocab_size;
    const int m = context.empty() ? 0 : static_cast<int>(context[0].k->rows());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* p = params_.data();

    SegmentActivations seg;
    seg.tokens.assign(tokens.begin(), tokens.end());
    seg.start_pos = start_pos;
    seg.context_rows = m;

    const CMatMap tok_emb(p + layout_.tok_emb, V, d);
    const CMatMap pos_emb(p + layout_.pos_emb, cfg_.context_length, d);
    Matrix x(n, d);
    for (int i = 0; i < n; ++i) {
        x.row(i) = tok_emb.row(tokens[static_cast<std::size_t>(i)]) + pos_emb.row(start_pos + i);
    }

    seg.layers.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const auto& blk = layout_.blocks[static_cast<std::size_t>(l)];
        auto& act = seg.layers[static_cast<std::size_t>(l)];
        const CVecMap g1(p + blk.norm1, d);
        const CMatMap wq(p + blk.wq, d, d);
        const CMatMap wk(p + blk.wk, d, d);
        const CMatMap wv(p + blk.wv, d, d);
        const CMatMap wo(p + blk.wo, d, d);
        const CVecMap g2(p + blk.norm2, d);
        const CMatMap w1(p + blk.w1, d, cfg_.d_ff);
        const CVecMap b1(p + blk.b1, cfg_.d_ff);
        const CMatMap w2(p + blk.w2, cfg_.d_ff, d);
        const CVecMap b2(p + blk.b2, d);

        act.x_in = x;
        rmsnorm_forward(x, g1, act.a, act.inv_rms1);
        act.q.noalias() = act.a * wq;
        act.k.noalias() = act.a * wk;
        act.v.noalias() = act.a * wv;

        Matrix k_all;
        Matrix v_all;
        if (m > 0) {
            k_all.resize(m + n, d);
            v_all.resize(m + n, d);
            k_all.topRows(m) = *context[static_cast<std::size_t>(l)].k;
            k_all.bottomRows(n) = act.k;
            v_all.topRows(m) = *context[static_cast<std::size_t>(l)].v;
            v_all.bottomRows(n) = act.v;
        }
        const Matrix& K = m > 0 ? k_all : act.k;
        const Matrix& Vv = m > 0 ? v_all : act.v;

        act.attn.resize(n, d);
        act.probs.resize(static_cast<std::size_t>(H));
        for (int h = 0; h < H; ++h) {
            Matrix s = act.q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose();
            s *= scale;
            for (int i = 0; i < n; ++i) {
                const int visible = m + i + 1;
                auto row = s.row(i);
                const double mx = row.head(visible).maxCoeff();
                row.head(visible) = (row.head(visible).array() - mx).exp().matrix();
                row.head(visible) /= row.head(visible).sum();
                row.tail(m + n - visible).setZero();
            }
            act.attn.middleCols(h * dh, dh).noalias() = s * Vv.middleCols(h * dh, dh);
            act.probs[static_cast<std::size_t>(h)] = std::move(s);
        }
        act.x_mid = x;
        act.x_mid.noalias() += act.attn * wo;

        rmsnorm_forward(act.x_mid, g2, act.b, act.inv_rms2);
        act.u.noalias() = act.b * w1;
        act.u.rowwise() += b1.transpose();
        act.act = act.u.unaryExpr([](double v) { return gelu(v); });
        x = act.x_mid;
        x.noalias() += act.act * w2;
        x.rowwise() += b2.transpose();
    }

    seg.x_final = x;
    const CVecMap gf(p + layout_.norm_f, d);
    rmsnorm_forward(x, gf, seg.f, seg.inv_rmsf);
    const CMatMap w_out(p + layout_.w_out, d, V);
    const CVecMap b_out(p + layout_.b_out, V);
    seg.logp.noalias() = seg.f * w_out;
    seg.logp.rowwise() += b_out.transpose();
    log_softmax_rows(seg.logp);
    return seg;
}

void TransformerLM::backward_segment(const SegmentActivations& seg, const Matrix& dlogits,
                                     std::span<const KvRef> context, const std::vector<Matrix>* extra_dk,
                                     const std::vector<Matrix>* extra_dv, std::vector<Matrix>* context_dk,
                                     std::vector<Matrix>* context_dv, std::span<double> grad) const {
    const int n = static_cast<int>(seg.tokens.size());
    const int d = cfg_.d_model;
    const int H = cfg_.n_heads;
    const int dh = d / H;
    const int V = cfg_.vocab_size;
    const int m = seg.context_rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* p = params_.data();
    double* g = grad.data();

    const CMatMap w_out(p + layout_.w_out, d, V);
    MatMap(g + layout_.w_out, d, V).noalias() += seg.f.transpose() * dlogits;
    VecMap(g + layout_.b_out, V) += dlogits.colwise().sum().transpose();
    const Matrix df = dlogits * w_out.transpose();
    Matrix dx = rmsnorm_backward(df, seg.x_final, seg.inv_rmsf, CVecMap(p + layout_.norm_f, d),
                                 VecMap(g + layout_.norm_f, d));

    if (context_dk != nullptr) {
        context_dk->assign(static_cast<std::size_t>(cfg_.n_layers), Matrix());
        context_dv->assign(static_cast<std::size_t>(cfg_.n_layers), Matrix());
    }

    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
        const auto& blk = layout_.blocks[static_cast<std::size_t>(l)];
        const auto& act = seg.layers[static_cast<std::size_t>(l)];
        const CMatMap wq(p + blk.wq, d, d);
        const CMatMap wk(p + blk.wk, d, d);
        const CMatMap wv(p + blk.wv, d, d);
        const CMatMap wo(p + blk.wo, d, d);
        const CMatMap w1(p + blk.w1, d, cfg_.d_ff);
        const CMatMap w2(p + blk.w2, cfg_.d_ff, d);

        // MLP branch.
        MatMap(g + blk.w2, cfg_.d_ff, d).noalias() += act.act.transpose() * dx;
        VecMap(g + blk.b2, d) += dx.colwise().sum().transpose();
        Matrix du = dx * w2.transpose();
        du.array() *= act.u.unaryExpr([](double v) { return gelu_grad(v); }).array();
        MatMap(g + blk.w1, d, cfg_.d_ff).noalias() += act.b.transpose() * du;
        VecMap(g + blk.b1, cfg_.d_ff) += du.colwise().sum().transpose();
        const Matrix db = du * w1.transpose();
        dx += rmsnorm_backward(db, act.x_mid, act.inv_rms2, CVecMap(p + blk.norm2, d), VecMap(g + blk.norm2, d));

        // Attention branch.
        MatMap(g + blk.wo, d, d).noalias() += act.attn.transpose() * dx;
        const Matrix dattn = dx * wo.transpose();

        Matrix k_all;
        Matrix v_all;
        if (m > 0) {
            k_all.resize(m + n, d);
            v_all.resize(m + n, d);
            k_all.topRows(m) = *context[static_cast<std::size_t>(l)].k;
            k_all.bottomRows(n) = act.k;
            v_all.topRows(m) = *context[static_cast<std::size_t>(l)].v;
            v_all.bottomRows(n) = act.v;
        }
        const Matrix& K = m > 0 ? k_all : act.k;
        const Matrix& Vv = m > 0 ? v_all : act.v;

        Matrix dq(n, d);
        Matrix dk_all(m + n, d);
        Matrix dv_all(m + n, d);
        for (int h = 0; h < H; ++h) {
            const Matrix& P = act.probs[static_cast<std::size_t>(h)];
            const auto dO = dattn.middleCols(h * dh, dh);
            Matrix dP = dO * Vv.middleCols(h * dh, dh).transpose();
            dv_all.middleCols(h * dh, dh).noalias() = P.transpose() * dO;
            const Vector row_dot = dP.cwiseProduct(P).rowwise().sum();
            Matrix dS = P.cwiseProduct(dP.colwise() - row_dot);
            dS *= scale;
            dq.middleCols(h * dh, dh).noalias() = dS * K.middleCols(h * dh, dh);
            dk_all.middleCols(h * dh, dh).noalias() = dS.transpose() * act.q.middleCols(h * dh, dh);
        }
        Matrix dk = dk_all.bottomRows(n);
        Matrix dv = dv_all.bottomRows(n);
        if (extra_dk != nullptr) {
            dk += (*extra_dk)[static_cast<std::size_t>(l)];
            dv += (*extra_dv)[static_cast<std::size_t>(l)];
        }
        if (context_dk != nullptr && m > 0) {
            (*context_dk)[static_cast<std::size_t>(l)] = dk_all.topRows(m);
            (*context_dv)[static_cast<std::size_t>(l)] = dv_all.topRows(m);
        }

        MatMap(g + blk.wq, d, d).noalias() += act.a.transpose() * dq;
        MatMap(g + blk.wk, d, d).noalias() += act.a.transpose() * dk;
        MatMap(g + blk.wv, d, d).noalias() += act.a.transpose() * dv;
        Matrix da = dq * wq.transpose();
        da.noalias() += dk * wk.transpose();
        da.noalias() += dv * wv.transpose();
        dx += rmsnorm_backward(da, act.x_in, act.inv_rms1, CVecMap(p + blk.norm1, d), VecMap(g + blk.norm1, d));
    }

    MatMap dtok(g + layout_.tok_emb, V, d);
    MatMap dpos(g + layout_.pos_emb, cfg_.context_length, d);
    for (int i = 0; i < n; ++i) {
        dtok.row(seg.tokens[static_cast<std::size_t>(i)]) += dx.row(i);
        dpos.row(seg.start_pos + i) += dx.row(i);
    }
}

GroupForward TransformerLM::forward_group(std::span<const int> prefix,
                                          const std::vector<std::vector<int>>& continuations) const {
    if (prefix.empty()) {
        throw InputError("scoring requires a non-empty prompt");
    }
    check_tokens(prefix);
    const auto p = static_cast<int>(prefix.size());
    for (const auto& c : continuations) {
        check_tokens(c);
        if (prefix.size() + c.size() > static_cast<std::size_t>(cfg_.context_length)) {
            throw CapacityError("prompt + completion (" + std::to_string(prefix.size() + c.size()) +
                                " tokens) exceeds context length " + std::to_string(cfg_.context_length));
        }
    }

    GroupForward fwd;
    fwd.prefix = forward_segment(prefix, 0, {});
    std::vector<KvRef> ctx;
    for (const auto& layer : fwd.prefix.layers) {
        ctx.push_back({&layer.k, &layer.v});
    }
    fwd.targets = continuations;
    fwd.continuations.resize(continuations.size());
    fwd.logprobs.resize(continuations.size());
    for (std::size_t j = 0; j < continuations.size(); ++j) {
        const auto& c = continuations[j];
        auto& lp = fwd.logprobs[j];
        lp.resize(c.size());
        if (c.empty()) {
            continue;
        }
        lp[0] = fwd.prefix.logp(p - 1, c[0]);
        if (c.size() >= 2) {
            fwd.continuations[j] = forward_segment(std::span<const int>(c).first(c.size() - 1), p, ctx);
            for (std::size_t t = 1; t < c.size(); ++t) {
                lp[t] = fwd.continuations[j].logp(static_cast<Eigen::Index>(t - 1), c[t]);
            }
        } else {
            fwd.continuations[j].start_pos = p;
            fwd.continuations[j].context_rows = p;
        }
    }
    return fwd;
}

void TransformerLM::backward_group(const GroupForward& fwd, const std::vector<std::vector<double>>& dlogp,
                                   std::span<double> grad) const {
    if (grad.size() != params_.size()) {
        throw InternalError("gradient buffer size mismatch");
    }
    if (dlogp.size() != fwd.targets.size()) {
        throw InternalError("dlogp must have one entry per continuation");
    }
    const int V = cfg_.vocab_size;
    const auto p = static_cast<Eigen::Index>(fwd.prefix.tokens.size());
    Matrix prefix_dlogits = Matrix::Zero(p, V);
    std::vector<Matrix> extra_dk(static_cast<std::size_t>(cfg_.n_layers), Matrix::Zero(p, cfg_.d_model));
    std::vector<Matrix> extra_dv = extra_dk;
    std::vector<KvRef> ctx;
    for (const auto& layer : fwd.prefix.layers) {
        ctx.push_back({&layer.k, &layer.v});
    }

    std::vector<double, Eigen::aligned_allocator<double>> acc(params_.size(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < fwd.targets.size(); ++j) {
        const auto& c = fwd.targets[j];
        const auto& g = dlogp[j];
        if (g.size() != c.size()) {
            throw InternalError("dlogp length does not match continuation length");
        }
        if (c.empty() || std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
            continue;
        }
        any = true;
        accumulate_target_grad(prefix_dlogits.row(p - 1), fwd.prefix.logp.row(p - 1), c[0], g[0]);
        if (c.size() < 2) {
            continue;
        }
        const auto& seg = fwd.continuations[j];
        Matrix dlogits = Matrix::Zero(static_cast<Eigen::Index>(c.size() - 1), V);
        for (std::size_t t = 1; t < c.size(); ++t) {
            if (g[t] != 0.0) {
                const auto r = static_cast<Eigen::Index>(t - 1);
                accumulate_target_grad(dlogits.row(r), seg.logp.row(r), c[t], g[t]);
            }
        }
        std::vector<Matrix> cdk;
        std::vector<Matrix> cdv;
        backward_segment(seg, dlogits, ctx, nullptr, nullptr, &cdk, &cdv, acc);
        for (int l = 0; l < cfg_.n_layers; ++l) {
            extra_dk[static_cast<std::size_t>(l)] += cdk[static_cast<std::size_t>(l)];
            extra_dv[static_cast<std::size_t>(l)] += cdv[static_cast<std::size_t>(l)];
        }
    }
    if (any) {
        backward_segment(fwd.prefix, prefix_dlogits, {}, &extra_dk, &extra_dv, nullptr, nullptr, acc);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            grad[i] += acc[i];
        }
    }
}

std::vector<double> TransformerLM::score(std::span<const int> prompt, std::span<const int> completion) const {
    if (completion.empty()) {
        return {};
    }
    std::vector<std::vector<int>> conts{std::vector<int>(completion.begin(), completion.end())};
    return forward_group(prompt, conts).logprobs[0];
}

DecodeState TransformerLM::begin_decode(std::span<const int> prefix) const {
    if (prefix.empty()) {
        throw InputError("decoding requires a non-empty prompt");
    }
    if (prefix.size() > static_cast<std::size_t>(cfg_.context_length)) {
        throw CapacityError("prompt exceeds context length");
    }
    check_tokens(prefix);
    SegmentActivations seg = forward_segment(prefix, 0, {});
    DecodeState st;
    st.length = static_cast<int>(prefix.size());
    for (auto& layer : seg.layers) {
        st.keys.push_back(std::move(layer.k));
        st.values.push_back(std::move(layer.v));
    }
    st.next_logprobs = seg.logp.row(seg.logp.rows() - 1);
    return st;
}

void TransformerLM::advance(DecodeState& state, int token) const {
    if (state.length >= cfg_.context_length) {
        throw CapacityError("decode position exceeds context length");
    }
    const int tok[1] = {token};
    check_tokens(tok);
    std::vector<KvRef> ctx;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        ctx.push_back({&state.keys[static_cast<std::size_t>(l)], &state.values[static_cast<std::size_t>(l)]});
    }
    SegmentActivations seg = forward_segment(tok, state.length, ctx);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        auto& k = state.keys[static_cast<std::size_t>(l)];
        auto& v = state.values[static_cast<std::size_t>(l)];
        k.conservativeResize(k.rows() + 1, Eigen::NoChange);
        v.conservativeResize(v.rows() + 1, Eigen::NoChange);
        k.row(k.rows() - 1) = seg.layers[static_cast<std::size_t>(l)].k.row(0);
        v.row(v.rows() - 1) = seg.layers[static_cast<std::size_t>(l)].v.row(0);
    }
    ++state.length;
    state.next_logprobs = seg.logp.row(0);
}

std::vector<double> TransformerLM::next_token_logprobs(std::span<const int> prefix) const {
    const DecodeState st = begin_decode(prefix);
    return {st.next_logprobs.data(), st.next_logprobs.data() + st.next_logprobs.size()};
}

}  // namespace gta
