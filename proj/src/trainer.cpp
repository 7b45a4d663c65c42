// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gta/errors.hpp"
#include "gta/hashing.hpp"
#include "gta/rewards.hpp"
#include "gta/run_log.hpp"

namespace gta {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

constexpr int kMaxConsecutiveFailures = 3;

const std::vector<std::string> kMetricsColumns = {
    "kind",          "step",           "mean_total_reward", "mean_format_reward", "mean_accuracy_reward",
    "guess_accuracy", "answer_accuracy", "sft_loss",         "rl_loss",            "mean_kl",
    "grad_dot",      "grad_cosine",    "choice",            "total_choices",      "completion_length",
    "ref_refresh",   "skipped",        "eval_accuracy",     "eval_weighted_f1",   "eval_format_valid",
    "eval_guess_accuracy"};

const std::vector<std::string> kGradientColumns = {"step",    "inner",   "dot",     "cosine",
                                                   "sft_norm", "rl_norm", "choice",  "sft_loss",
                                                   "rl_loss", "max_ratio_deviation"};

std::string num(double v) { return fmt::format("{:.10g}", v); }

std::string join_tabs(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        out += (i > 0 ? "\t" : "") + fields[i];
    }
    return out;
}

std::string step_row(const StepMetrics& m) {
    return join_tabs({"step",
                      std::to_string(m.step),
                      num(m.mean_total_reward),
                      num(m.mean_format_reward),
                      num(m.mean_accuracy_reward),
                      num(m.guess_accuracy),
                      num(m.answer_accuracy),
                      num(m.sft_loss),
                      num(m.rl_loss),
                      num(m.mean_kl),
                      num(m.grad_dot),
                      m.grad_cosine ? num(*m.grad_cosine) : "-",
                      m.choice.empty() ? "-" : m.choice,
                      std::to_string(m.total_choices),
                      num(m.mean_completion_length),
                      m.ref_refreshed ? "1" : "0",
                      m.skipped ? "1" : "0",
                      "-",
                      "-",
                      "-",
                      "-"});
}

std::string eval_row(std::int64_t step, const EvalResult& e) {
    std::vector<std::string> fields(kMetricsColumns.size(), "-");
    fields[0] = "eval";
    fields[1] = std::to_string(step);
    fields[17] = num(e.accuracy);
    fields[18] = num(e.weighted_f1);
    fields[19] = num(e.format_valid_rate);
    fields[20] = num(e.guess_accuracy);
    return join_tabs(fields);
}

std::string gradient_row(const GradientRecord& g) {
    return join_tabs({std::to_string(g.step), std::to_string(g.inner), num(g.report.dot),
                      g.report.cosine ? num(*g.report.cosine) : "-", num(g.report.sft_norm), num(g.report.rl_norm),
                      g.choice, num(g.sft_loss), num(g.rl_loss), num(g.max_ratio_deviation)});
}

std::string period_text(std::uint64_t p) { return p == kNeverRefresh ? "never" : std::to_string(p); }

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << text;
        if (!os) {
            throw IoError("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                     std::chrono::system_clock::now())));
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) {
        words.push_back(w);
    }
    return words;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::Gta:
            return "gta";
        case Method::GrpoOnly:
            return "grpo";
        case Method::SftOnly:
            return "sft";
    }
    return "?";
}

std::string_view to_string(GuessLossMode m) noexcept { return m == GuessLossMode::Sft ? "sft" : "rl"; }

std::string_view to_string(RatioMode m) noexcept { return m == RatioMode::Token ? "token" : "sequence"; }

Method parse_method(std::string_view s) {
    const std::string v = lower(s);
    if (v == "gta") {
        return Method::Gta;
    }
    if (v == "grpo" || v == "grpo_only") {
        return Method::GrpoOnly;
    }
    if (v == "sft" || v == "sft_only") {
        return Method::SftOnly;
    }
    throw ConfigError(fmt::format("unknown method '{}' (expected gta, grpo or sft)", s));
}

GuessLossMode parse_guess_loss_mode(std::string_view s) {
    const std::string v = lower(s);
    if (v == "sft") {
        return GuessLossMode::Sft;
    }
    if (v == "rl") {
        return GuessLossMode::Rl;
    }
    throw ConfigError(fmt::format("unknown guess loss mode '{}' (expected sft or rl)", s));
}

RatioMode parse_ratio_mode(std::string_view s) {
    const std::string v = lower(s);
    if (v == "token") {
        return RatioMode::Token;
    }
    if (v == "sequence") {
        return RatioMode::Sequence;
    }
    throw ConfigError(fmt::format("unknown ratio mode '{}' (expected token or sequence)", s));
}

void TrainConfig::validate() const {
    if (group_size < 2) {
        throw ConfigError("group_size must be >= 2");
    }
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) {
        throw ConfigError("clip_eps must lie in (0, 1)");
    }
    if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) {
        throw ConfigError("kl_beta must be >= 0");
    }
    if (!(lambda_sft >= 0.0) || !(lambda_rl >= 0.0)) {
        throw ConfigError("lambda_sft and lambda_rl must be >= 0");
    }
    if (reuse_factor < 1) {
        throw ConfigError("reuse_factor must be >= 1");
    }
    if (ref_refresh_period < 1) {
        throw ConfigError("ref_refresh_period must be >= 1 (use \"never\" for a static reference)");
    }
    if (batch_size < 1 || epochs < 1) {
        throw ConfigError("batch_size and epochs must be >= 1");
    }
    if (max_steps < -1) {
        throw ConfigError("max_steps must be >= 0, or -1 to derive it from epochs");
    }
    if (eval_period < 0 || checkpoint_period < 0 || eval_limit < 0) {
        throw ConfigError("eval_period, checkpoint_period and eval_limit must be >= 0");
    }
    if (!(eps_std > 0.0)) {
        throw ConfigError("eps_std must be > 0");
    }
    sampling.validate();
    optimizer.validate();
    GtaTemplate probe;
    probe.tags = tags;
    probe.label_set = {"probe"};
    probe.validate();
    ModelConfig m = model;
    m.vocab_size = std::max(m.vocab_size, 1);
    m.validate();
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j;
    j["method"] = to_string(method);
    j["guess_loss_mode"] = to_string(guess_loss_mode);
    j["ratio_mode"] = to_string(ratio_mode);
    j["group_size"] = group_size;
    j["clip_eps"] = clip_eps;
    j["kl_beta"] = kl_beta;
    j["lambda_sft"] = lambda_sft;
    j["lambda_rl"] = lambda_rl;
    j["reuse_factor"] = reuse_factor;
    if (ref_refresh_period == kNeverRefresh) {
        j["ref_refresh_period"] = "never";
    } else {
        j["ref_refresh_period"] = ref_refresh_period;
    }
    j["sampling"] = sampling.to_json();
    j["optimizer"] = optimizer.to_json();
    j["seed"] = seed;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["max_steps"] = max_steps;
    j["eval_period"] = eval_period;
    j["checkpoint_period"] = checkpoint_period;
    j["eval_limit"] = eval_limit;
    j["eps_std"] = eps_std;
    j["system_instruction"] = system_instruction;
    j["tags"] = {{"tag_open_guess", tags.guess_open},   {"tag_close_guess", tags.guess_close},
                 {"tag_open_think", tags.think_open},   {"tag_close_think", tags.think_close},
                 {"tag_open_answer", tags.answer_open}, {"tag_close_answer", tags.answer_close}};
    j["model"] = model.to_json();
    j["init_checkpoint"] = init_checkpoint;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "method",     "guess_loss_mode", "ratio_mode",       "group_size",         "clip_eps",
        "kl_beta",    "lambda_sft",      "lambda_rl",        "reuse_factor",       "ref_refresh_period",
        "sampling",   "optimizer",       "seed",             "batch_size",         "epochs",
        "max_steps",  "eval_period",     "checkpoint_period", "eval_limit",        "eps_std",
        "system_instruction", "tags", "model",   "init_checkpoint"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    TrainConfig c;
    try {
        if (j.contains("method")) {
            c.method = parse_method(j["method"].get<std::string>());
        }
        if (j.contains("guess_loss_mode")) {
            c.guess_loss_mode = parse_guess_loss_mode(j["guess_loss_mode"].get<std::string>());
        }
        if (j.contains("ratio_mode")) {
            c.ratio_mode = parse_ratio_mode(j["ratio_mode"].get<std::string>());
        }
        c.group_size = j.value("group_size", c.group_size);
        c.clip_eps = j.value("clip_eps", c.clip_eps);
        c.kl_beta = j.value("kl_beta", c.kl_beta);
        c.lambda_sft = j.value("lambda_sft", c.lambda_sft);
        c.lambda_rl = j.value("lambda_rl", c.lambda_rl);
        c.reuse_factor = j.value("reuse_factor", c.reuse_factor);
        if (j.contains("ref_refresh_period")) {
            const auto& p = j["ref_refresh_period"];
            if (p.is_string()) {
                const std::string v = lower(p.get<std::string>());
                if (v != "never" && v != "inf") {
                    throw ConfigError("ref_refresh_period must be a positive integer or \"never\"");
                }
                c.ref_refresh_period = kNeverRefresh;
            } else {
                const auto v = p.get<std::int64_t>();
                if (v < 1) {
                    throw ConfigError("ref_refresh_period must be a positive integer or \"never\"");
                }
                c.ref_refresh_period = static_cast<std::uint64_t>(v);
            }
        }
        if (j.contains("sampling")) {
            c.sampling = SamplingControls::from_json(j["sampling"]);
        }
        if (j.contains("optimizer")) {
            c.optimizer = AdamConfig::from_json(j["optimizer"]);
        }
        c.seed = j.value("seed", c.seed);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.eval_period = j.value("eval_period", c.eval_period);
        c.checkpoint_period = j.value("checkpoint_period", c.checkpoint_period);
        c.eval_limit = j.value("eval_limit", c.eval_limit);
        c.eps_std = j.value("eps_std", c.eps_std);
        c.system_instruction = j.value("system_instruction", c.system_instruction);
        if (j.contains("tags")) {
            const auto& t = j["tags"];
            c.tags.guess_open = t.value("tag_open_guess", c.tags.guess_open);
            c.tags.guess_close = t.value("tag_close_guess", c.tags.guess_close);
            c.tags.think_open = t.value("tag_open_think", c.tags.think_open);
            c.tags.think_close = t.value("tag_close_think", c.tags.think_close);
            c.tags.answer_open = t.value("tag_open_answer", c.tags.answer_open);
            c.tags.answer_close = t.value("tag_close_answer", c.tags.answer_close);
        }
        if (j.contains("model")) {
            c.model = ModelConfig::from_json(j["model"]);
        }
        c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

std::int64_t TrainConfig::total_steps(std::size_t n_train) const {
    if (max_steps >= 0) {
        return max_steps;
    }
    const auto b = static_cast<std::size_t>(batch_size);
    return static_cast<std::int64_t>(epochs) * static_cast<std::int64_t>((n_train + b - 1) / b);
}

RlLossOptions TrainConfig::rl_options() const { return {clip_eps, kl_beta, ratio_mode}; }

bool TrainConfig::uses_sft() const noexcept {
    return method == Method::SftOnly || (method == Method::Gta && guess_loss_mode == GuessLossMode::Sft);
}

bool TrainConfig::guess_in_rl() const noexcept {
    return method == Method::GrpoOnly || (method == Method::Gta && guess_loss_mode == GuessLossMode::Rl);
}

std::string canonical_config_text(const TrainConfig& cfg) { return cfg.to_json().dump(2) + "\n"; }

GtaTemplate make_template(const TrainConfig& cfg, const std::vector<std::string>& label_set) {
    GtaTemplate t;
    t.system_instruction = cfg.system_instruction;
    t.label_set = label_set;
    t.tags = cfg.tags;
    t.validate();
    return t;
}

TrainState init_state(const TrainConfig& cfg, const std::vector<std::string>& label_set) {
    TrainState s;
    const GtaTemplate tmpl = make_template(cfg, label_set);
    if (!cfg.init_checkpoint.empty()) {
        s.policy = load_checkpoint(cfg.init_checkpoint);
        if (s.policy.format().tmpl().to_json() != tmpl.to_json()) {
            throw ConfigError("init_checkpoint was built for a different template (instruction, labels or tags)");
        }
        ModelConfig want = cfg.model;
        want.vocab_size = s.policy.model().config().vocab_size;
        if (!(want == s.policy.model().config())) {
            throw ConfigError("init_checkpoint model shape differs from the configured model");
        }
    } else {
        s.policy = Policy(GtaFormat(tmpl), cfg.model);
        s.policy.model().init_random(mix_seed(cfg.seed, fnv1a("init")));
    }
    s.reference = clone_snapshot(s.policy.model(), 0);
    s.optimizer = Adam(cfg.optimizer, s.policy.model().parameter_count());
    return s;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n_examples, int batch_size,
                                       std::int64_t step) {
    if (n_examples == 0 || batch_size < 1 || step < 1) {
        throw InternalError("batch_indices: bad arguments");
    }
    std::vector<std::size_t> out;
    std::uint64_t cached_epoch = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::size_t> perm(n_examples);
    const auto first = static_cast<std::uint64_t>(step - 1) * static_cast<std::uint64_t>(batch_size);
    for (std::uint64_t p = first; p < first + static_cast<std::uint64_t>(batch_size); ++p) {
        const std::uint64_t epoch = p / n_examples;
        if (epoch != cached_epoch) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::mt19937_64 rng(mix_seed(seed, fnv1a("epoch"), epoch));
            std::shuffle(perm.begin(), perm.end(), rng);
            cached_epoch = epoch;
        }
        out.push_back(perm[p % n_examples]);
    }
    return out;
}

bool maybe_refresh_reference(TrainState& state, const TrainConfig& cfg) {
    if (cfg.ref_refresh_period == kNeverRefresh || state.step <= 0 ||
        static_cast<std::uint64_t>(state.step) % cfg.ref_refresh_period != 0) {
        return false;
    }
    state.reference = clone_snapshot(state.policy.model(), state.step);
    return true;
}

StepResult train_step(TrainState& state, std::span<const LabeledExample> batch, const TrainConfig& cfg) {
    if (batch.empty()) {
        throw InputError("train_step: empty batch");
    }
    const std::int64_t step = state.step + 1;
    const GtaFormat& format = state.policy.format();
    const auto& labels = format.tmpl().label_set;
    StepResult out;
    StepMetrics& m = out.metrics;
    m.step = step;

    std::vector<Group> groups;
    std::vector<TeacherSequence> teachers;
    double n_rollouts = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledExample& ex = batch[i];
        Group g;
        g.prompt = format.build_prompt(ex.text);
        g.input_text = ex.text;
        g.gold_label = ex.label;
        g.rollouts = state.policy.sample_completions(g.prompt, cfg.group_size, cfg.sampling, mix_seed(cfg.seed, step, i));
        std::vector<std::vector<int>> conts;
        std::vector<double> rewards;
        for (auto& r : g.rollouts) {
            r.segments = format.parse_completion(r.completion_tokens);
            r.masks = derive_masks(r.segments, r.completion_tokens.size());
            if (cfg.guess_in_rl()) {
                r.masks = fold_guess_into_rl(std::move(r.masks));
            }
            r.reward = assign_rewards(r.segments, ex.label, labels);
            r.logprobs_old = r.logprobs_current;
            conts.push_back(r.completion_tokens);
            rewards.push_back(static_cast<double>(r.reward.total));

            m.mean_total_reward += r.reward.total;
            m.mean_format_reward += r.reward.format_reward;
            m.mean_accuracy_reward += r.reward.accuracy_reward;
            m.guess_accuracy += guess_matches(r.segments, ex.label) ? 1.0 : 0.0;
            m.mean_completion_length += static_cast<double>(r.completion_tokens.size());
            n_rollouts += 1.0;
        }
        if (cfg.uses_rl()) {
            const GroupForward ref = state.reference.model.forward_group(g.prompt, conts);
            for (std::size_t j = 0; j < g.rollouts.size(); ++j) {
                g.rollouts[j].logprobs_ref = ref.logprobs[j];
            }
            g.stats = compute_advantages(rewards, cfg.eps_std);
            for (std::size_t j = 0; j < g.rollouts.size(); ++j) {
                g.rollouts[j].advantage = g.stats.advantages[j];
            }
        }
        if (cfg.uses_sft()) {
            teachers.push_back(format.build_teacher_forced_guess(ex.text, ex.label));
        }
        groups.push_back(std::move(g));
    }
    m.mean_total_reward /= n_rollouts;
    m.mean_format_reward /= n_rollouts;
    m.mean_accuracy_reward /= n_rollouts;
    m.answer_accuracy = m.mean_accuracy_reward;
    m.guess_accuracy /= n_rollouts;
    m.mean_completion_length /= n_rollouts;

    TransformerLM& model = state.policy.model();
    const std::vector<double> saved_params(model.parameters().begin(), model.parameters().end());
    const Adam saved_optimizer = state.optimizer;
    const RlLossOptions opts = cfg.rl_options();
    const int inner_count = cfg.uses_rl() ? cfg.reuse_factor : 1;

    try {
        for (int inner = 0; inner < inner_count; ++inner) {
            GradientRecord rec;
            rec.step = step;
            rec.inner = inner;
            LossAndGrad rl;
            LossAndGrad sft;
            if (cfg.uses_rl()) {
                rl = rl_loss_batch(model, groups, opts, inner == 0);
                double kl_sum = 0.0;
                double kl_count = 0.0;
                for (const auto& g : groups) {
                    for (const auto& r : g.rollouts) {
                        for (std::size_t t = 0; t < r.completion_tokens.size(); ++t) {
                            if (!r.masks.rl_mask[t]) {
                                continue;
                            }
                            rec.max_ratio_deviation = std::max(
                                rec.max_ratio_deviation, std::abs(std::exp(r.logprobs_current[t] - r.logprobs_old[t]) - 1.0));
                            if (inner == 0) {
                                kl_sum += kl_token(r.logprobs_current[t], r.logprobs_ref[t]);
                                kl_count += 1.0;
                            }
                        }
                    }
                }
                if (inner == 0 && kl_count > 0.0) {
                    m.mean_kl = kl_sum / kl_count;
                }
            }
            if (cfg.uses_sft()) {
                sft = sft_loss_batch(model, teachers);
            }
            if (!std::isfinite(rl.loss) || !std::isfinite(sft.loss)) {
                throw NumericError(fmt::format("non-finite loss at step {} (sft={}, rl={})", step, sft.loss, rl.loss));
            }
            rec.sft_loss = sft.loss;
            rec.rl_loss = rl.loss;
            std::vector<double> applied;
            if (!cfg.uses_rl()) {
                rec.report.step = step;
                rec.report.sft_norm = std::sqrt(dot_product(sft.grad, sft.grad));
                rec.choice = "SFT";
                applied = std::move(sft.grad);
                for (double& v : applied) {
                    v *= cfg.lambda_sft;
                }
            } else if (cfg.uses_sft()) {
                rec.report = detect_conflict(sft.grad, rl.grad, step);
                rec.choice = std::string(to_string(rec.report.choice));
                applied = applied_gradient(rec.report, sft.grad, rl.grad, cfg.lambda_sft, cfg.lambda_rl);
            } else {
                rec.report = rl_only_report(rl.grad, step);
                rec.choice = std::string(to_string(rec.report.choice));
                applied = std::move(rl.grad);
            }
            if (inner == 0) {
                m.sft_loss = sft.loss;
                m.rl_loss = rl.loss;
            }
            state.optimizer.step(model.parameters(), applied);
            if (!model.all_finite()) {
                throw NumericError(fmt::format("non-finite parameters after update at step {}", step));
            }
            m.grad_dot = rec.report.dot;
            m.grad_cosine = rec.report.cosine;
            m.choice = rec.choice;
            m.total_choices += rec.report.choice == LossChoice::Total && cfg.uses_rl() && cfg.uses_sft() ? 1 : 0;
            out.gradients.push_back(std::move(rec));
        }
        state.consecutive_failures = 0;
    } catch (const NumericError& e) {
        std::copy(saved_params.begin(), saved_params.end(), model.parameters().begin());
        state.optimizer = saved_optimizer;
        ++state.consecutive_failures;
        m.skipped = true;
        out.gradients.clear();
        spdlog::error("step {} aborted and parameters restored: {}", step, e.what());
    }

    state.step = step;
    m.ref_refreshed = maybe_refresh_reference(state, cfg);
    out.groups = std::move(groups);
    return out;
}

std::string canonical_prediction(const GtaSegments& segments, const std::vector<std::string>& label_set) {
    if (!segments.format_valid) {
        return {};
    }
    const std::string answer = normalize_label(segments.answer_text);
    for (const auto& l : label_set) {
        if (normalize_label(l) == answer) {
            return l;
        }
    }
    return {};
}

EvalResult evaluate(const Policy& policy, std::span<const LabeledExample> examples, int max_new_tokens) {
    if (examples.empty()) {
        throw InputError("evaluate: empty split");
    }
    const GtaFormat& format = policy.format();
    const auto& labels = format.tmpl().label_set;
    SamplingControls greedy;
    greedy.greedy = true;
    greedy.max_new_tokens = max_new_tokens;
    EvalResult out;
    std::vector<std::string> golds;
    double valid = 0.0;
    double guess_ok = 0.0;
    for (const auto& ex : examples) {
        const auto prompt = format.build_prompt(ex.text);
        const auto rollouts = policy.sample_completions(prompt, 1, greedy, 0);
        const GtaSegments seg = format.parse_completion(rollouts.front().completion_tokens);
        valid += seg.format_valid ? 1.0 : 0.0;
        guess_ok += guess_matches(seg, ex.label) ? 1.0 : 0.0;
        out.predictions.push_back(canonical_prediction(seg, labels));
        golds.push_back(ex.label);
    }
    const auto n = static_cast<double>(examples.size());
    out.accuracy = accuracy(out.predictions, golds);
    out.weighted_f1 = weighted_f1(out.predictions, golds, labels);
    out.per_class = per_class_counts(out.predictions, golds, labels);
    out.format_valid_rate = valid / n;
    out.guess_accuracy = guess_ok / n;
    return out;
}

void FormatPriorConfig::validate() const {
    if (steps < 0 || batch_size < 1) {
        throw ConfigError("format prior: steps must be >= 0 and batch_size >= 1");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("format prior: learning_rate must be > 0");
    }
    if (!(copy_probability >= 0.0 && copy_probability <= 1.0)) {
        throw ConfigError("format prior: copy_probability must lie in [0, 1]");
    }
}

nlohmann::json FormatPriorConfig::to_json() const {
    return {{"steps", steps},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"copy_probability", copy_probability},
            {"seed", seed}};
}

TransformerLM train_format_prior(const GtaFormat& format, const ModelConfig& model_cfg,
                                 const std::vector<std::string>& texts, const FormatPriorConfig& prior) {
    prior.validate();
    if (texts.empty()) {
        throw InputError("format prior needs at least one input text");
    }
    ModelConfig mc = model_cfg;
    mc.vocab_size = format.tokenizer().vocab_size();
    TransformerLM model(mc);
    model.init_random(mix_seed(prior.seed, fnv1a("prior-init")));
    AdamConfig ac;
    ac.learning_rate = prior.learning_rate;
    Adam opt(ac, model.parameter_count());
    std::mt19937_64 rng(mix_seed(prior.seed, fnv1a("prior-data")));
    const auto& labels = format.tmpl().label_set;
    std::uniform_int_distribution<std::size_t> pick_text(0, texts.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_label(0, labels.size() - 1);
    std::bernoulli_distribution copy(prior.copy_probability);
    for (int s = 0; s < prior.steps; ++s) {
        std::vector<TeacherSequence> batch;
        for (int b = 0; b < prior.batch_size; ++b) {
            const std::string& text = texts[pick_text(rng)];
            const auto words = split_words(text);
            std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1);
            const std::string& guess = labels[pick_label(rng)];
            const std::string& think = words[pick_word(rng)];
            const std::string& answer = copy(rng) ? guess : labels[pick_label(rng)];
            TeacherSequence ts;
            ts.tokens = format.build_prompt(text);
            const std::size_t n_prompt = ts.tokens.size();
            const auto completion = format.render_completion(guess, think, answer, false);
            ts.tokens.insert(ts.tokens.end(), completion.begin(), completion.end());
            ts.mask.sft_mask.assign(ts.tokens.size(), true);
            std::fill_n(ts.mask.sft_mask.begin(), n_prompt, false);
            ts.mask.rl_mask.assign(ts.tokens.size(), false);
            batch.push_back(std::move(ts));
        }
        const LossAndGrad lg = sft_loss_batch(model, batch);
        opt.step(model.parameters(), lg.grad);
        if ((s + 1) % 50 == 0) {
            spdlog::info("format prior step {}/{} loss {:.4f}", s + 1, prior.steps, lg.loss);
        }
    }
    return model;
}

namespace {

struct RunPaths {
    fs::path root;
    fs::path config() const { return root / "config.json"; }
    fs::path manifest() const { return root / "manifest.json"; }
    fs::path metrics() const { return root / "metrics.tsv"; }
    fs::path gradients() const { return root / "gradients.tsv"; }
    fs::path checkpoints() const { return root / "checkpoints"; }
    fs::path latest() const { return checkpoints() / "latest"; }
    fs::path final_policy() const { return root / "policy.ckpt"; }
};

void check_capacity(const TrainConfig& cfg, const GtaFormat& format, const DatasetSplits& data) {
    std::size_t longest = 0;
    for (const auto* split : {&data.train, &data.test}) {
        for (const auto& ex : split->examples) {
            longest = std::max(longest, format.build_prompt(ex.text).size());
            if (!format.tmpl().has_label(ex.label)) {
                throw DataError("example " + ex.id + " has a label outside the label set: " + ex.label);
            }
        }
    }
    const auto need = longest + static_cast<std::size_t>(cfg.sampling.max_new_tokens);
    if (need > static_cast<std::size_t>(cfg.model.context_length)) {
        throw CapacityError(fmt::format("context_length {} is too small: longest prompt {} + max_new_tokens {}",
                                      cfg.model.context_length, longest, cfg.sampling.max_new_tokens));
    }
}

void save_run_checkpoint(const RunPaths& paths, const TrainState& state, const std::string& config_hash) {
    const std::string name = fmt::format("step_{:06d}", state.step);
    const fs::path dir = paths.checkpoints() / name;
    fs::create_directories(dir);
    save_checkpoint(dir / "policy.ckpt", state.policy, {state.step, config_hash});
    save_checkpoint(dir / "reference.ckpt", state.policy.format(), state.reference.model,
                    {state.reference.snapshot_step, config_hash});
    state.optimizer.save(dir / "optimizer.bin");
    const nlohmann::json meta = {{"step", state.step},
                                 {"consecutive_failures", state.consecutive_failures},
                                 {"reference_step", state.reference.snapshot_step},
                                 {"config_hash", config_hash}};
    write_text_atomic(dir / "state.json", meta.dump(2) + "\n");
    write_text_atomic(paths.latest(), name + "\n");
}

TrainState load_run_checkpoint(const RunPaths& paths, const TrainConfig& cfg, const std::string& config_hash) {
    if (!fs::exists(paths.latest())) {
        throw ConfigError("no checkpoint to resume from in " + paths.root.string());
    }
    std::string name = read_text(paths.latest());
    name.erase(name.find_last_not_of(" \n\r\t") + 1);
    const fs::path dir = paths.checkpoints() / name;
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text(dir / "state.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint state in " + dir.string() + ": " + e.what());
    }
    if (meta.value("config_hash", std::string{}) != config_hash) {
        throw ConfigError("checkpoint " + dir.string() + " belongs to a different config");
    }
    TrainState s;
    CheckpointInfo info;
    s.policy = load_checkpoint(dir / "policy.ckpt", &info);
    s.reference.model = load_checkpoint(dir / "reference.ckpt").model();
    s.reference.snapshot_step = meta.at("reference_step").get<std::int64_t>();
    s.optimizer = Adam(cfg.optimizer, s.policy.model().parameter_count());
    s.optimizer.load(dir / "optimizer.bin");
    s.step = meta.at("step").get<std::int64_t>();
    s.consecutive_failures = meta.at("consecutive_failures").get<int>();
    if (info.step != s.step) {
        throw DataError("checkpoint step mismatch in " + dir.string());
    }
    return s;
}

nlohmann::json eval_json(const EvalResult& e) {
    return {{"accuracy", e.accuracy},
            {"weighted_f1", e.weighted_f1},
            {"format_valid_rate", e.format_valid_rate},
            {"guess_accuracy", e.guess_accuracy}};
}

}  // namespace

RunResult run(const TrainConfig& cfg, const DatasetSplits& data, const fs::path& out_dir, const RunOptions& options) {
    cfg.validate();
    if (data.train.examples.empty() || data.test.examples.empty()) {
        throw DataError("train and test splits must be non-empty");
    }
    const RunPaths paths{out_dir};
    const std::string config_text = canonical_config_text(cfg);
    const std::string config_hash = to_hex(fnv1a(config_text));

    TrainState state;
    if (options.resume) {
        if (!fs::exists(paths.config())) {
            throw ConfigError("cannot resume: no run found in " + out_dir.string());
        }
        if (read_text(paths.config()) != config_text) {
            throw ConfigError("cannot resume: config differs from the one stored in " + out_dir.string());
        }
        state = load_run_checkpoint(paths, cfg, config_hash);
        check_capacity(cfg, state.policy.format(), data);
        truncate_log_after(paths.metrics(), state.step);
        truncate_log_after(paths.gradients(), state.step);
        spdlog::info("resuming {} from step {}", out_dir.string(), state.step);
    } else {
        state = init_state(cfg, data.label_set);
        check_capacity(cfg, state.policy.format(), data);
        if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
            if (!options.force) {
                throw ConfigError("run directory " + out_dir.string() + " already exists (use force to overwrite)");
            }
            fs::remove_all(out_dir);
        }
        fs::create_directories(paths.checkpoints());
        write_text_atomic(paths.config(), config_text);
        std::ofstream metrics(paths.metrics(), std::ios::trunc);
        metrics << "# format=gta-metrics-v1\n"
                << "# method=" << to_string(cfg.method) << "\n"
                << "# guess_loss_mode=" << to_string(cfg.guess_loss_mode) << "\n"
                << "# ratio_mode=" << to_string(cfg.ratio_mode) << "\n"
                << "# group_size=" << cfg.group_size << "\n"
                << "# reuse_factor=" << cfg.reuse_factor << "\n"
                << "# ref_refresh_period=" << period_text(cfg.ref_refresh_period) << "\n"
                << "# seed=" << cfg.seed << "\n"
                << "# config_hash=" << config_hash << "\n"
                << "# dataset_fingerprint=" << data.fingerprint << "\n"
                << join_tabs(kMetricsColumns) << "\n";
        std::ofstream grads(paths.gradients(), std::ios::trunc);
        grads << "# format=gta-gradients-v1\n" << join_tabs(kGradientColumns) << "\n";
        if (!metrics || !grads) {
            throw IoError("cannot create logs in " + out_dir.string());
        }
    }

    nlohmann::json manifest;
    if (fs::exists(paths.manifest())) {
        try {
            manifest = nlohmann::json::parse(read_text(paths.manifest()));
        } catch (const nlohmann::json::exception&) {
            manifest = nlohmann::json::object();
        }
    }
    if (!options.resume || !manifest.contains("started_at")) {
        manifest["started_at"] = utc_now();
    }
    manifest["run_id"] = fmt::format("{}-{}", fs::absolute(out_dir).filename().string(), config_hash.substr(0, 8));
    manifest["config_hash"] = config_hash;
    manifest["dataset_fingerprint"] = data.fingerprint;
    manifest["source_revision"] = options.source_revision;
    manifest["status"] = "running";
    manifest["finished_at"] = nullptr;
    write_text_atomic(paths.manifest(), manifest.dump(2) + "\n");

    std::ofstream metrics(paths.metrics(), std::ios::app);
    std::ofstream grads(paths.gradients(), std::ios::app);
    const auto& train = data.train.examples;
    std::vector<LabeledExample> eval_split = data.test.examples;
    if (cfg.eval_limit > 0 && eval_split.size() > static_cast<std::size_t>(cfg.eval_limit)) {
        eval_split.resize(static_cast<std::size_t>(cfg.eval_limit));
    }

    RunResult result;
    result.out_dir = out_dir;
    result.config_hash = config_hash;
    std::optional<EvalResult> last_eval;
    std::int64_t last_eval_step = -1;
    const auto run_eval = [&] {
        last_eval = evaluate(state.policy, eval_split, cfg.sampling.max_new_tokens);
        last_eval_step = state.step;
        metrics << eval_row(state.step, *last_eval) << '\n';
        metrics.flush();
    };
    if (!options.resume) {
        run_eval();
    }

    const std::int64_t total = cfg.total_steps(train.size());
    while (state.step < total) {
        const auto idx = batch_indices(cfg.seed, train.size(), cfg.batch_size, state.step + 1);
        std::vector<LabeledExample> batch;
        for (auto i : idx) {
            batch.push_back(train[i]);
        }
        const StepResult sr = train_step(state, batch, cfg);
        metrics << step_row(sr.metrics) << '\n';
        for (const auto& g : sr.gradients) {
            grads << gradient_row(g) << '\n';
        }
        metrics.flush();
        grads.flush();
        if (!metrics || !grads) {
            throw IoError("failed writing logs in " + out_dir.string());
        }
        if (state.consecutive_failures >= kMaxConsecutiveFailures) {
            result.halted = true;
            spdlog::error("halting after {} consecutive non-finite steps", state.consecutive_failures);
            break;
        }
        if ((cfg.eval_period > 0 && state.step % cfg.eval_period == 0) || state.step == total) {
            run_eval();
        }
        if (cfg.checkpoint_period > 0 && state.step % cfg.checkpoint_period == 0) {
            save_run_checkpoint(paths, state, config_hash);
        }
        if (options.stop_after >= 0 && state.step >= options.stop_after) {
            result.interrupted = true;
            result.final_step = state.step;
            return result;
        }
    }
    if (!last_eval || last_eval_step != state.step) {
        if (!result.halted) {
            run_eval();
        }
    }

    result.final_step = state.step;
    if (last_eval) {
        result.final_eval = *last_eval;
    }
    save_checkpoint(paths.final_policy(), state.policy, {state.step, config_hash});
    manifest["status"] = result.halted ? "halted" : "completed";
    manifest["finished_at"] = utc_now();
    manifest["final_step"] = state.step;
    manifest["final_metrics"] = last_eval ? eval_json(*last_eval) : nlohmann::json(nullptr);
    write_text_atomic(paths.manifest(), manifest.dump(2) + "\n");
    return result;
}

}  // namespace gta
