// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gta/gta_format.hpp"

namespace gta {

struct RewardBreakdown {
    int format_reward = 0;    // {0,1}
    int accuracy_reward = 0;  // {0,1}
    int total = 0;            // format_reward + accuracy_reward
};

// 1 iff the completion parsed as guess, think, answer.
int format_reward(const GtaSegments& segments);

// 1 iff the answer segment matches the gold label after trimming and
// case-folding. Answers outside the label set score 0; a gold label outside
// the label set is a DataError.
int accuracy_reward(const GtaSegments& segments, std::string_view gold_label,
                    const std::vector<std::string>& label_set);

int total_reward(int format, int accuracy);

RewardBreakdown assign_rewards(const GtaSegments& segments, std::string_view gold_label,
                               const std::vector<std::string>& label_set);

// Same matching rule as accuracy_reward, applied to the guess segment.
bool guess_matches(const GtaSegments& segments, std::string_view gold_label);

}  // namespace gta
