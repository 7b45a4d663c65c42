// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/gta_format.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "gta/errors.hpp"

namespace gta {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

std::string normalize_label(std::string_view text) {
    std::string out(trim(text));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void GtaTemplate::validate() const {
    const auto tags_in_order = tags.in_order();
    std::set<std::string> seen;
    for (const auto& t : tags_in_order) {
        if (t.empty()) {
            throw ConfigError("GTA tag strings must be non-empty");
        }
        if (!seen.insert(t).second) {
            throw ConfigError("GTA tag strings must be pairwise distinct: " + t);
        }
        if (t.front() != '<') {
            throw ConfigError("GTA tag strings must start with '<': " + t);
        }
    }
    if (label_set.empty()) {
        throw ConfigError("label set must be non-empty");
    }
    std::set<std::string> labels;
    for (const auto& l : label_set) {
        if (trim(l).empty()) {
            throw ConfigError("labels must be non-empty");
        }
        if (!labels.insert(normalize_label(l)).second) {
            throw ConfigError("duplicate label: " + l);
        }
    }
}

bool GtaTemplate::has_label(std::string_view label) const {
    const std::string key = normalize_label(label);
    return std::any_of(label_set.begin(), label_set.end(),
                       [&](const std::string& l) { return normalize_label(l) == key; });
}

nlohmann::json GtaTemplate::to_json() const {
    return {
        {"system_instruction", system_instruction},
        {"labels", label_set},
        {"tag_open_guess", tags.guess_open},
        {"tag_close_guess", tags.guess_close},
        {"tag_open_think", tags.think_open},
        {"tag_close_think", tags.think_close},
        {"tag_open_answer", tags.answer_open},
        {"tag_close_answer", tags.answer_close},
    };
}

GtaTemplate GtaTemplate::from_json(const nlohmann::json& j) {
    GtaTemplate t;
    t.system_instruction = j.value("system_instruction", t.system_instruction);
    t.label_set = j.value("labels", std::vector<std::string>{});
    t.tags.guess_open = j.value("tag_open_guess", t.tags.guess_open);
    t.tags.guess_close = j.value("tag_close_guess", t.tags.guess_close);
    t.tags.think_open = j.value("tag_open_think", t.tags.think_open);
    t.tags.think_close = j.value("tag_close_think", t.tags.think_close);
    t.tags.answer_open = j.value("tag_open_answer", t.tags.answer_open);
    t.tags.answer_close = j.value("tag_close_answer", t.tags.answer_close);
    return t;
}

std::size_t SpanMask::sft_count() const noexcept {
    return static_cast<std::size_t>(std::count(sft_mask.begin(), sft_mask.end(), true));
}

std::size_t SpanMask::rl_count() const noexcept {
    return static_cast<std::size_t>(std::count(rl_mask.begin(), rl_mask.end(), true));
}

SpanMask fold_guess_into_rl(SpanMask mask) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask.sft_mask[i]) {
            mask.rl_mask[i] = true;
            mask.sft_mask[i] = false;
        }
    }
    return mask;
}

SpanMask derive_masks(const GtaSegments& segments, std::size_t completion_length) {
    if (completion_length == 0) {
        throw InternalError("derive_masks: completion must contain at least one token");
    }
    SpanMask mask;
    mask.sft_mask.assign(completion_length, false);
    mask.rl_mask.assign(completion_length, true);
    if (!segments.format_valid) {
        return mask;
    }
    for (const TokenSpan& s : {segments.guess_span, segments.think_span, segments.answer_span}) {
        if (s.begin > s.end || s.end > completion_length) {
            throw InternalError("derive_masks: span exceeds completion length");
        }
    }
    for (std::size_t i = segments.guess_span.begin; i < segments.guess_span.end; ++i) {
        mask.sft_mask[i] = true;
        mask.rl_mask[i] = false;
    }
    return mask;
}

GtaFormat::GtaFormat(GtaTemplate tmpl) : template_(std::move(tmpl)) {
    template_.validate();
    tokenizer_ = Tokenizer(template_.tags.in_order());
    const auto tags = template_.tags.in_order();
    for (int i = 0; i < 6; ++i) {
        tag_ids_[i] = tokenizer_.id_of(tags[static_cast<std::size_t>(i)]);
    }
}

GtaFormat::GtaFormat(GtaTemplate tmpl, Tokenizer tokenizer)
    : template_(std::move(tmpl)), tokenizer_(std::move(tokenizer)) {
    template_.validate();
    const auto tags = template_.tags.in_order();
    for (int i = 0; i < 6; ++i) {
        auto id = tokenizer_.find(tags[static_cast<std::size_t>(i)]);
        if (!id || !tokenizer_.is_special(*id)) {
            throw DataError("tokenizer does not register tag as an atomic token: " + tags[static_cast<std::size_t>(i)]);
        }
        tag_ids_[i] = *id;
    }
}

std::string GtaFormat::prompt_text(std::string_view input_text) const {
    const std::string_view body = trim(input_text);
    if (body.empty()) {
        throw InputError("input text is empty");
    }
    std::string p = template_.system_instruction;
    p += "\n[";
    for (std::size_t i = 0; i < template_.label_set.size(); ++i) {
        if (i > 0) {
            p += '|';
        }
        p += template_.label_set[i];
    }
    p += "]\n";
    p += template_.tags.guess_open;
    p += template_.tags.think_open;
    p += template_.tags.answer_open;
    p += '\n';
    p += body;
    p += '\n';
    return p;
}

std::vector<int> GtaFormat::build_prompt(std::string_view input_text) const {
    return tokenizer_.encode(prompt_text(input_text));
}

GtaSegments GtaFormat::parse_completion(std::span<const int> completion) const {
    GtaSegments out;
    std::size_t n = completion.size();
    if (n > 0 && completion[n - 1] == Tokenizer::kEos) {
        --n;
    }
    std::size_t pos = 0;
    const auto skip_whitespace = [&] {
        while (pos < n && tokenizer_.is_whitespace(completion[pos])) {
            ++pos;
        }
    };
    // Reads open-tag, interior, close-tag; interior may not contain any special token.
    const auto read_segment = [&](int open_id, int close_id, TokenSpan& span) -> bool {
        skip_whitespace();
        if (pos >= n || completion[pos] != open_id) {
            return false;
        }
        ++pos;
        span.begin = pos;
        while (pos < n && !tokenizer_.is_special(completion[pos])) {
            ++pos;
        }
        if (pos >= n || completion[pos] != close_id) {
            return false;
        }
        span.end = pos;
        ++pos;
        return true;
    };

    GtaSegments parsed;
    if (!read_segment(guess_open_id(), guess_close_id(), parsed.guess_span) ||
        !read_segment(think_open_id(), think_close_id(), parsed.think_span) ||
        !read_segment(answer_open_id(), answer_close_id(), parsed.answer_span)) {
        return out;
    }
    skip_whitespace();
    if (pos != n) {
        return out;
    }

    const auto text_of = [&](const TokenSpan& s) {
        return tokenizer_.decode(completion.subspan(s.begin, s.size()));
    };
    parsed.guess_text = text_of(parsed.guess_span);
    parsed.think_text = text_of(parsed.think_span);
    parsed.answer_text = text_of(parsed.answer_span);

    // A tag spelled out character by character still counts as a second occurrence.
    for (const std::string* text : {&parsed.guess_text, &parsed.think_text, &parsed.answer_text}) {
        if (trim(*text).empty()) {
            return out;
        }
        for (const auto& tag : template_.tags.in_order()) {
            if (text->find(tag) != std::string::npos) {
                return out;
            }
        }
    }
    parsed.format_valid = true;
    return parsed;
}

TeacherSequence GtaFormat::build_teacher_forced_guess(std::string_view input_text,
                                                      std::string_view gold_label) const {
    if (!template_.has_label(gold_label)) {
        throw DataError("gold label not in label set: " + std::string(gold_label));
    }
    TeacherSequence seq;
    seq.tokens = build_prompt(input_text);
    seq.tokens.push_back(guess_open_id());
    const std::size_t first = seq.tokens.size();
    for (int id : tokenizer_.encode(gold_label)) {
        seq.tokens.push_back(id);
    }
    seq.tokens.push_back(guess_close_id());
    seq.mask.sft_mask.assign(seq.tokens.size(), false);
    seq.mask.rl_mask.assign(seq.tokens.size(), false);
    for (std::size_t i = first; i < seq.tokens.size(); ++i) {
        seq.mask.sft_mask[i] = true;
    }
    return seq;
}

std::vector<int> GtaFormat::render_completion(std::string_view guess, std::string_view think,
                                              std::string_view answer, bool with_eos) const {
    std::vector<int> ids;
    const auto append = [&](int open_id, std::string_view body, int close_id) {
        ids.push_back(open_id);
        for (int id : tokenizer_.encode(body)) {
            ids.push_back(id);
        }
        ids.push_back(close_id);
    };
    append(guess_open_id(), guess, guess_close_id());
    append(think_open_id(), think, think_close_id());
    append(answer_open_id(), answer, answer_close_id());
    if (with_eos) {
        ids.push_back(Tokenizer::kEos);
    }
    return ids;
}

}  // namespace gta
