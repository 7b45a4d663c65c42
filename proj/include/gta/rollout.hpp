// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gta/gta_format.hpp"
#include "gta/rewards.hpp"

namespace gta {

// One sampled completion. The three log-prob vectors are per completion token:
// current = live parameters, old = parameters at sampling time (cached),
// ref = frozen reference snapshot.
struct Rollout {
    std::vector<int> prompt_tokens;
    std::vector<int> completion_tokens;
    std::vector<double> logprobs_current;
    std::vector<double> logprobs_old;
    std::vector<double> logprobs_ref;
    GtaSegments segments;
    SpanMask masks;
    RewardBreakdown reward;
    double advantage = 0.0;
};

struct AdvantageStats {
    double group_mean = 0.0;
    double group_std = 0.0;
    std::vector<double> advantages;
};

// G rollouts of a single prompt.
struct Group {
    std::vector<int> prompt;
    std::string input_text;
    std::string gold_label;
    std::vector<Rollout> rollouts;
    AdvantageStats stats;
};

}  // namespace gta
