// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "gta/errors.hpp"

namespace gta {

namespace {

constexpr char kMagic[8] = {'G', 'T', 'A', 'C', 'K', 'P', 'T', '\x01'};

int choose_token(const RowVector& logprobs, const SamplingControls& controls, std::mt19937_64& rng) {
    const auto V = static_cast<int>(logprobs.size());
    if (controls.greedy) {
        int best = 0;
        for (int i = 1; i < V; ++i) {
            if (logprobs(i) > logprobs(best)) {
                best = i;
            }
        }
        return best;
    }
    std::vector<int> candidates(static_cast<std::size_t>(V));
    std::iota(candidates.begin(), candidates.end(), 0);
    if (controls.top_k > 0 && controls.top_k < V) {
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](int a, int b) { return logprobs(a) > logprobs(b); });
        candidates.resize(static_cast<std::size_t>(controls.top_k));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (int c : candidates) {
        mx = std::max(mx, logprobs(c) / controls.temperature);
    }
    std::vector<double> weights;
    weights.reserve(candidates.size());
    double total = 0.0;
    for (int c : candidates) {
        const double w = std::exp(logprobs(c) / controls.temperature - mx);
        weights.push_back(w);
        total += w;
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double r = uniform(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        acc += weights[i];
        if (r < acc) {
            return candidates[i];
        }
    }
    // Rounding at the top of the range: fall back to the last token with mass.
    for (std::size_t i = candidates.size(); i-- > 0;) {
        if (weights[i] > 0.0) {
            return candidates[i];
        }
    }
    return candidates.back();
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

nlohmann::json tensor_table(const ModelConfig& cfg, const ParameterLayout& lay) {
    const int d = cfg.d_model;
    nlohmann::json t = nlohmann::json::array();
    const auto add = [&](std::string name, std::size_t off, int rows, int cols) {
        t.push_back({{"name", std::move(name)}, {"offset", off}, {"shape", {rows, cols}}});
    };
    add("tok_emb", lay.tok_emb, cfg.vocab_size, d);
    add("pos_emb", lay.pos_emb, cfg.context_length, d);
    for (std::size_t l = 0; l < lay.blocks.size(); ++l) {
        const auto& b = lay.blocks[l];
        const std::string p = "block" + std::to_string(l) + ".";
        add(p + "norm1", b.norm1, 1, d);
        add(p + "wq", b.wq, d, d);
        add(p + "wk", b.wk, d, d);
        add(p + "wv", b.wv, d, d);
        add(p + "wo", b.wo, d, d);
        add(p + "norm2", b.norm2, 1, d);
        add(p + "w1", b.w1, d, cfg.d_ff);
        add(p + "b1", b.b1, 1, cfg.d_ff);
        add(p + "w2", b.w2, cfg.d_ff, d);
        add(p + "b2", b.b2, 1, d);
    }
    add("norm_f", lay.norm_f, 1, d);
    add("w_out", lay.w_out, d, cfg.vocab_size);
    add("b_out", lay.b_out, 1, cfg.vocab_size);
    return t;
}

}  // namespace

void SamplingControls::validate() const {
    if (!greedy && !(temperature > 0.0)) {
        throw ConfigError("sampling temperature must be > 0 (use greedy decoding for the zero limit)");
    }
    if (top_k < 0) {
        throw ConfigError("top_k must be >= 0");
    }
    if (max_new_tokens < 1) {
        throw ConfigError("max_new_tokens must be >= 1");
    }
}

nlohmann::json SamplingControls::to_json() const {
    return {{"temperature", temperature}, {"top_k", top_k}, {"max_new_tokens", max_new_tokens}, {"greedy", greedy}};
}

SamplingControls SamplingControls::from_json(const nlohmann::json& j) {
    SamplingControls c;
    c.temperature = j.value("temperature", c.temperature);
    c.top_k = j.value("top_k", c.top_k);
    c.max_new_tokens = j.value("max_new_tokens", c.max_new_tokens);
    c.greedy = j.value("greedy", c.greedy);
    return c;
}

std::vector<SampledCompletion> sample_sequences(const TransformerLM& model, std::span<const int> prompt, int n,
                                                const SamplingControls& controls, std::uint64_t seed) {
    if (n < 1) {
        throw ConfigError("number of samples must be >= 1");
    }
    controls.validate();
    const auto context = static_cast<std::size_t>(model.config().context_length);
    if (prompt.size() >= context) {
        throw CapacityError("prompt leaves no room for a completion");
    }
    std::mt19937_64 rng(seed);
    const DecodeState start = model.begin_decode(prompt);
    const auto is_stop = [&](int tok) {
        return std::find(controls.stop_tokens.begin(), controls.stop_tokens.end(), tok) != controls.stop_tokens.end();
    };
    const auto max_new = static_cast<std::size_t>(controls.max_new_tokens);

    std::vector<SampledCompletion> out(static_cast<std::size_t>(n));
    for (auto& sample : out) {
        DecodeState state = start;
        while (sample.tokens.size() < max_new && prompt.size() + sample.tokens.size() < context) {
            const int tok = choose_token(state.next_logprobs, controls, rng);
            sample.tokens.push_back(tok);
            sample.logprobs.push_back(state.next_logprobs(tok));
            if (is_stop(tok) || sample.tokens.size() >= max_new || prompt.size() + sample.tokens.size() >= context) {
                break;
            }
            model.advance(state, tok);
        }
    }
    return out;
}

Policy::Policy(GtaFormat format, ModelConfig cfg) : format_(std::move(format)) {
    for (const auto& label : format_.tmpl().label_set) {
        for (int id : format_.tokenizer().encode(label)) {
            if (id == Tokenizer::kUnk) {
                throw ConfigError("label contains characters outside the tokenizer alphabet: " + label);
            }
        }
    }
    cfg.vocab_size = format_.tokenizer().vocab_size();
    model_ = TransformerLM(cfg);
}

std::vector<double> Policy::score_logprobs(std::span<const int> prompt, std::span<const int> completion) const {
    return model_.score(prompt, completion);
}

std::vector<Rollout> Policy::sample_completions(std::span<const int> prompt, int n, SamplingControls controls,
                                                std::uint64_t seed) const {
    for (int stop : {static_cast<int>(Tokenizer::kEos), format_.answer_close_id()}) {
        if (std::find(controls.stop_tokens.begin(), controls.stop_tokens.end(), stop) == controls.stop_tokens.end()) {
            controls.stop_tokens.push_back(stop);
        }
    }
    auto samples = sample_sequences(model_, prompt, n, controls, seed);
    std::vector<Rollout> rollouts;
    rollouts.reserve(samples.size());
    for (auto& s : samples) {
        Rollout r;
        r.prompt_tokens.assign(prompt.begin(), prompt.end());
        r.completion_tokens = std::move(s.tokens);
        r.logprobs_current = std::move(s.logprobs);
        rollouts.push_back(std::move(r));
    }
    return rollouts;
}

ReferenceSnapshot clone_snapshot(const TransformerLM& model, std::int64_t step) {
    if (!model.all_finite()) {
        throw NumericError("cannot snapshot non-finite parameters");
    }
    return ReferenceSnapshot{model, step};
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, const CheckpointInfo& info) {
    save_checkpoint(path, policy.format(), policy.model(), info);
}

void save_checkpoint(const std::filesystem::path& path, const GtaFormat& format, const TransformerLM& model,
                     const CheckpointInfo& info) {
    nlohmann::json header;
    header["format_version"] = 1;
    header["model"] = model.config().to_json();
    header["template"] = format.tmpl().to_json();
    header["vocabulary"] = format.tokenizer().vocabulary();
    header["n_specials"] = format.tokenizer().special_count();
    header["step"] = info.step;
    header["config_hash"] = info.config_hash;
    header["parameter_count"] = model.parameter_count();
    header["tensors"] = tensor_table(model.config(), model.layout());
    const std::string text = header.dump();

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot open checkpoint for writing: " + tmp.string());
        }
        os.write(kMagic, sizeof kMagic);
        write_u64(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        const auto params = model.parameters();
        write_u64(os, params.size());
        os.write(reinterpret_cast<const char*>(params.data()),
                 static_cast<std::streamsize>(params.size() * sizeof(double)));
        if (!os) {
            throw IoError("failed writing checkpoint: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Policy load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw DataError("not a GTA checkpoint: " + path.string());
    }
    const std::uint64_t header_len = read_u64(is);
    if (!is || header_len > (1ULL << 30)) {
        throw DataError("corrupt checkpoint header: " + path.string());
    }
    std::string text(header_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(header_len));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    Policy policy;
    try {
        const ModelConfig cfg = ModelConfig::from_json(header.at("model"));
        const GtaTemplate tmpl = GtaTemplate::from_json(header.at("template"));
        Tokenizer tok = Tokenizer::from_vocabulary(header.at("vocabulary").get<std::vector<std::string>>(),
                                                   header.at("n_specials").get<std::size_t>());
        if (tok.vocab_size() != cfg.vocab_size) {
            throw DataError("checkpoint vocabulary size disagrees with model config");
        }
        policy = Policy(GtaFormat(tmpl, std::move(tok)), cfg);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("incomplete checkpoint header in " + path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError("invalid checkpoint header in " + path.string() + ": " + e.what());
    }
    const std::uint64_t count = read_u64(is);
    auto params = policy.model().parameters();
    if (!is || count != params.size()) {
        throw DataError("checkpoint parameter count mismatch in " + path.string());
    }
    is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) {
        throw DataError("truncated checkpoint: " + path.string());
    }
    if (info != nullptr) {
        info->step = header.value("step", std::int64_t{0});
        info->config_hash = header.value("config_hash", std::string{});
    }
    return policy;
}

}  // namespace gta
