// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gta/tokenizer.hpp"

namespace gta {

struct TagSet {
    std::string guess_open = "<guess>";
    std::string guess_close = "</guess>";
    std::string think_open = "<think>";
    std::string think_close = "</think>";
    std::string answer_open = "<answer>";
    std::string answer_close = "</answer>";

    [[nodiscard]] std::vector<std::string> in_order() const {
        return {guess_open, guess_close, think_open, think_close, answer_open, answer_close};
    }
};

// Prompt instruction, label set and the six segment markers.
struct GtaTemplate {
    std::string system_instruction = "classify";
    std::vector<std::string> label_set;
    TagSet tags;

    // Throws ConfigError when tags are empty/duplicated or labels are empty/duplicated.
    void validate() const;
    [[nodiscard]] bool has_label(std::string_view label) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static GtaTemplate from_json(const nlohmann::json& j);
};

// Half-open token interval [begin, end).
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
    [[nodiscard]] bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
    bool operator==(const TokenSpan&) const = default;
};

struct GtaSegments {
    std::string guess_text;
    std::string think_text;
    std::string answer_text;
    TokenSpan guess_span;
    TokenSpan think_span;
    TokenSpan answer_span;
    bool format_valid = false;
};

// Per completion position: sft_mask routes a token to the supervised loss,
// rl_mask to the policy-gradient loss. Never both.
struct SpanMask {
    std::vector<bool> sft_mask;
    std::vector<bool> rl_mask;

    [[nodiscard]] std::size_t size() const noexcept { return rl_mask.size(); }
    [[nodiscard]] std::size_t sft_count() const noexcept;
    [[nodiscard]] std::size_t rl_count() const noexcept;
};

struct TeacherSequence {
    std::vector<int> tokens;
    SpanMask mask;  // over all of `tokens`; only sft_mask is meaningful
};

// Lowercased, whitespace-trimmed copy. Used for every label comparison.
std::string normalize_label(std::string_view text);

// Routes guess tokens to the RL loss as well (no supervised guess).
SpanMask fold_guess_into_rl(SpanMask mask);

SpanMask derive_masks(const GtaSegments& segments, std::size_t completion_length);

// Template plus the tokenizer derived from its tags.
class GtaFormat {
public:
    GtaFormat() = default;
    explicit GtaFormat(GtaTemplate tmpl);
    GtaFormat(GtaTemplate tmpl, Tokenizer tokenizer);

    [[nodiscard]] const GtaTemplate& tmpl() const noexcept { return template_; }
    [[nodiscard]] const Tokenizer& tokenizer() const noexcept { return tokenizer_; }

    [[nodiscard]] std::string prompt_text(std::string_view input_text) const;
    [[nodiscard]] std::vector<int> build_prompt(std::string_view input_text) const;

    // Never throws on malformed structure; returns format_valid = false instead.
    [[nodiscard]] GtaSegments parse_completion(std::span<const int> completion) const;

    [[nodiscard]] TeacherSequence build_teacher_forced_guess(std::string_view input_text,
                                                             std::string_view gold_label) const;

    // Renders a well-formed completion; used by the base-model prior and tests.
    [[nodiscard]] std::vector<int> render_completion(std::string_view guess, std::string_view think,
                                                     std::string_view answer, bool with_eos) const;

    [[nodiscard]] int guess_open_id() const noexcept { return tag_ids_[0]; }
    [[nodiscard]] int guess_close_id() const noexcept { return tag_ids_[1]; }
    [[nodiscard]] int think_open_id() const noexcept { return tag_ids_[2]; }
    [[nodiscard]] int think_close_id() const noexcept { return tag_ids_[3]; }
    [[nodiscard]] int answer_open_id() const noexcept { return tag_ids_[4]; }
    [[nodiscard]] int answer_close_id() const noexcept { return tag_ids_[5]; }

private:
    GtaTemplate template_;
    Tokenizer tokenizer_;
    int tag_ids_[6] = {};
};

}  // namespace gta
