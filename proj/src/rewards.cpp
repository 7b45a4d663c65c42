// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/rewards.hpp"

#include <algorithm>

#include "gta/errors.hpp"

namespace gta {

int format_reward(const GtaSegments& segments) {
    return segments.format_valid ? 1 : 0;
}

int accuracy_reward(const GtaSegments& segments, std::string_view gold_label,
                    const std::vector<std::string>& label_set) {
    const std::string gold = normalize_label(gold_label);
    const bool known = std::any_of(label_set.begin(), label_set.end(),
                                   [&](const std::string& l) { return normalize_label(l) == gold; });
    if (!known) {
        throw DataError("gold label not in label set: " + std::string(gold_label));
    }
    if (!segments.format_valid) {
        return 0;
    }
    return normalize_label(segments.answer_text) == gold ? 1 : 0;
}

int total_reward(int format, int accuracy) {
    if ((format != 0 && format != 1) || (accuracy != 0 && accuracy != 1)) {
        throw InternalError("reward components must be 0 or 1");
    }
    return format + accuracy;
}

RewardBreakdown assign_rewards(const GtaSegments& segments, std::string_view gold_label,
                               const std::vector<std::string>& label_set) {
    RewardBreakdown r;
    r.format_reward = format_reward(segments);
    r.accuracy_reward = accuracy_reward(segments, gold_label, label_set);
    r.total = total_reward(r.format_reward, r.accuracy_reward);
    return r;
}

bool guess_matches(const GtaSegments& segments, std::string_view gold_label) {
    return segments.format_valid && normalize_label(segments.guess_text) == normalize_label(gold_label);
}

}  // namespace gta
