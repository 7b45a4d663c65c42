// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gta/errors.hpp"
#include "gta/gta_format.hpp"

namespace {

using gta::GtaFormat;
using gta::GtaTemplate;

GtaFormat make_format(std::vector<std::string> labels = {"joy", "anger"}) {
    GtaTemplate t;
    t.label_set = std::move(labels);
    return GtaFormat(t);
}

gta::GtaSegments parse_text(const GtaFormat& f, const std::string& text) {
    return f.parse_completion(f.tokenizer().encode(text));
}

TEST(Tokenizer, RoundTripsPrintableText) {
    const GtaFormat f = make_format();
    const std::string text = "<guess>joy</guess> a <b> \n\t~ <think>";
    const auto ids = f.tokenizer().encode(text);
    EXPECT_EQ(f.tokenizer().decode(ids), text);
    EXPECT_EQ(ids.front(), f.guess_open_id());
    EXPECT_EQ(ids.back(), f.think_open_id());
}

TEST(Tokenizer, UnknownBytesMapToUnk) {
    const GtaFormat f = make_format();
    const auto ids = f.tokenizer().encode("a\x01z");
    ASSERT_EQ(ids.size(), 3U);
    EXPECT_EQ(ids[1], gta::Tokenizer::kUnk);
}

TEST(Template, RejectsBadTagsAndLabels) {
    GtaTemplate t;
    t.label_set = {"a", "b"};
    EXPECT_NO_THROW(t.validate());
    GtaTemplate dup = t;
    dup.tags.think_open = dup.tags.guess_open;
    EXPECT_THROW(dup.validate(), gta::ConfigError);
    GtaTemplate empty_tag = t;
    empty_tag.tags.answer_close = "";
    EXPECT_THROW(empty_tag.validate(), gta::ConfigError);
    GtaTemplate no_labels = t;
    no_labels.label_set.clear();
    EXPECT_THROW(no_labels.validate(), gta::ConfigError);
    GtaTemplate dup_labels = t;
    dup_labels.label_set = {"a", "A "};
    EXPECT_THROW(dup_labels.validate(), gta::ConfigError);
    GtaTemplate blank_label = t;
    blank_label.label_set = {"a", "  "};
    EXPECT_THROW(blank_label.validate(), gta::ConfigError);
}

TEST(Template, JsonRoundTrip) {
    GtaTemplate t;
    t.label_set = {"pos", "neg"};
    t.system_instruction = "label it";
    t.tags.think_open = "<reason>";
    const GtaTemplate back = GtaTemplate::from_json(t.to_json());
    EXPECT_EQ(back.to_json(), t.to_json());
    EXPECT_EQ(back.tags.think_open, "<reason>");
}

TEST(Prompt, ContainsInstructionLabelsTagOrderAndText) {
    const GtaFormat f = make_format({"pos", "neg"});
    const std::string p = f.prompt_text("  great movie ");
    EXPECT_NE(p.find("great movie"), std::string::npos);
    EXPECT_NE(p.find("pos"), std::string::npos);
    EXPECT_NE(p.find("neg"), std::string::npos);
    EXPECT_NE(p.find("classify"), std::string::npos);
    EXPECT_NE(p.find("<guess><think><answer>"), std::string::npos);
    EXPECT_EQ(f.build_prompt("great movie"), f.build_prompt("great movie"));
    EXPECT_THROW((void)f.build_prompt(""), gta::InputError);
    EXPECT_THROW((void)f.build_prompt(" \n "), gta::InputError);
}

TEST(Parse, WellFormedCompletion) {
    const GtaFormat f = make_format();
    const auto s = parse_text(f, "<guess>joy</guess><think>mentions happiness</think><answer>joy</answer>");
    ASSERT_TRUE(s.format_valid);
    EXPECT_EQ(s.guess_text, "joy");
    EXPECT_EQ(s.think_text, "mentions happiness");
    EXPECT_EQ(s.answer_text, "joy");
    EXPECT_EQ(s.guess_span, (gta::TokenSpan{1, 4}));
    EXPECT_LT(s.guess_span.end, s.think_span.begin);
    EXPECT_LT(s.think_span.end, s.answer_span.begin);
}

TEST(Parse, RejectsMalformedStructure) {
    const GtaFormat f = make_format();
    for (const char* bad : {
             "<think>x</think><answer>joy</answer>",
             "<guess>joy</guess><answer>joy</answer><think>x</think>",
             "<guess>joy</guess><think>x</think>",
             "oops<guess>joy</guess><think>x</think><answer>joy</answer>",
             "<guess>joy</guess><think>x</think><answer>joy</answer>tail",
             "<guess>joy</guess><think>x</think><answer>joy</answer><answer>joy</answer>",
             "<guess></guess><think>x</think><answer>joy</answer>",
             "<guess>joy</guess><think>  </think><answer>joy</answer>",
             "<guess>joy<think></guess><think>x</think><answer>joy</answer>",
             "",
         }) {
        EXPECT_FALSE(parse_text(f, bad).format_valid) << bad;
    }
}

TEST(Parse, SpelledOutTagInsideInteriorIsRejected) {
    const GtaFormat f = make_format();
    std::vector<int> ids = f.tokenizer().encode("<guess>joy</guess><think>");
    for (char c : std::string("see </answer> here")) {
        ids.push_back(f.tokenizer().id_of(std::string(1, c)));
    }
    const auto tail = f.tokenizer().encode("</think><answer>joy</answer>");
    ids.insert(ids.end(), tail.begin(), tail.end());
    EXPECT_FALSE(f.parse_completion(ids).format_valid);
}

TEST(Parse, ToleratesWhitespaceAndOneTrailingEos) {
    const GtaFormat f = make_format();
    auto ids = f.tokenizer().encode(" <guess>joy</guess>\n<think>x</think> <answer>joy</answer>\n");
    EXPECT_TRUE(f.parse_completion(ids).format_valid);
    ids.push_back(gta::Tokenizer::kEos);
    EXPECT_TRUE(f.parse_completion(ids).format_valid);
    ids.push_back(gta::Tokenizer::kEos);
    EXPECT_FALSE(f.parse_completion(ids).format_valid);
}

TEST(Parse, IsTotalOverRandomTokenSequences) {
    const GtaFormat f = make_format();
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> tok(0, f.tokenizer().vocab_size() - 1);
    std::uniform_int_distribution<int> len(0, 30);
    for (int i = 0; i < 5000; ++i) {
        std::vector<int> ids(static_cast<std::size_t>(len(rng)));
        for (auto& t : ids) {
            t = tok(rng);
        }
        EXPECT_NO_THROW((void)f.parse_completion(ids));
    }
}

TEST(Parse, RoundTripsAssembledCompletions) {
    const GtaFormat f = make_format();
    std::mt19937_64 rng(2);
    const std::string alphabet = "abcdefghij klmnop.,!";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<int> len(1, 12);
    const auto word = [&] {
        std::string w;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            w += alphabet[pick(rng)];
        }
        if (w.find_first_not_of(' ') == std::string::npos) {
            w = "x" + w;
        }
        return w;
    };
    for (int i = 0; i < 1000; ++i) {
        const std::string g = word(), t = word(), a = word();
        const auto ids = f.render_completion(g, t, a, i % 2 == 0);
        const auto s = f.parse_completion(ids);
        ASSERT_TRUE(s.format_valid);
        EXPECT_EQ(s.guess_text, g);
        EXPECT_EQ(s.think_text, t);
        EXPECT_EQ(s.answer_text, a);
        EXPECT_EQ(f.tokenizer().decode(std::span<const int>(ids).subspan(s.guess_span.begin, s.guess_span.size())), g);
    }
}

TEST(Masks, SpanArithmetic) {
    gta::GtaSegments s;
    s.format_valid = true;
    s.guess_span = {3, 6};
    s.think_span = {7, 12};
    s.answer_span = {13, 18};
    const auto m = gta::derive_masks(s, 20);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_EQ(m.sft_mask[i], i >= 3 && i < 6) << i;
        EXPECT_EQ(m.rl_mask[i], !(i >= 3 && i < 6)) << i;
    }
    EXPECT_EQ(m.sft_count(), 3U);
    EXPECT_EQ(m.rl_count(), 17U);
}

TEST(Masks, InvalidFormatFallsBackToAllRl) {
    gta::GtaSegments s;
    s.guess_span = {1, 4};
    const auto m = gta::derive_masks(s, 9);
    EXPECT_EQ(m.sft_count(), 0U);
    EXPECT_EQ(m.rl_count(), 9U);
}

TEST(Masks, GuardsAgainstInconsistentSpans) {
    gta::GtaSegments s;
    s.format_valid = true;
    s.guess_span = {1, 4};
    s.think_span = {5, 30};
    EXPECT_THROW((void)gta::derive_masks(s, 10), gta::InternalError);
    EXPECT_THROW((void)gta::derive_masks(s, 0), gta::InternalError);
}

TEST(Masks, DisjointAndCoveringOnFuzzedCompletions) {
    const GtaFormat f = make_format();
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> len(1, 10);
    std::uniform_int_distribution<int> ch('a', 'z');
    const auto word = [&] {
        std::string w(static_cast<std::size_t>(len(rng)), 'a');
        for (auto& c : w) {
            c = static_cast<char>(ch(rng));
        }
        return w;
    };
    int valid = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto ids = f.render_completion(word(), word(), word(), i % 3 == 0);
        const auto seg = f.parse_completion(ids);
        ASSERT_TRUE(seg.format_valid);
        ++valid;
        const auto m = gta::derive_masks(seg, ids.size());
        for (std::size_t t = 0; t < ids.size(); ++t) {
            EXPECT_FALSE(m.sft_mask[t] && m.rl_mask[t]);
            EXPECT_TRUE(m.sft_mask[t] || m.rl_mask[t]);
        }
        EXPECT_EQ(m.sft_count(), seg.guess_span.size());
        const auto folded = gta::fold_guess_into_rl(m);
        EXPECT_EQ(folded.sft_count(), 0U);
        EXPECT_EQ(folded.rl_count(), ids.size());
    }
    EXPECT_EQ(valid, 1000);
}

TEST(Teacher, GuessSequenceAndMask) {
    const GtaFormat f = make_format();
    const auto seq = f.build_teacher_forced_guess("so happy", "joy");
    const auto prompt = f.build_prompt("so happy");
    ASSERT_EQ(seq.tokens.size(), prompt.size() + 5);
    EXPECT_TRUE(std::equal(prompt.begin(), prompt.end(), seq.tokens.begin()));
    EXPECT_EQ(f.tokenizer().decode(std::span<const int>(seq.tokens).subspan(prompt.size())), "<guess>joy</guess>");
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
        EXPECT_EQ(seq.mask.sft_mask[i], i > prompt.size()) << i;
    }
    EXPECT_EQ(seq.tokens, f.build_teacher_forced_guess("so happy", "joy").tokens);
    EXPECT_THROW((void)f.build_teacher_forced_guess("so happy", "surprise"), gta::DataError);
}

TEST(Labels, Normalization) {
    EXPECT_EQ(gta::normalize_label("  Joy\n"), "joy");
    EXPECT_EQ(gta::normalize_label("ANGER"), "anger");
}

}  // namespace
