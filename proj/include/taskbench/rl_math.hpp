#pragma once

#include "taskbench/sokoban.hpp"

#include <optional>
#include <span>
#include <vector>

namespace taskbench::rl {

inline constexpr double kActionMatchReward = 1.0;
inline constexpr double kFormatReward = 0.1;

/// 1.0 for the expert action, 0.1 for a well-formatted miss, 0.0 otherwise.
double action_match_reward(std::optional<sokoban::Action> predicted, sokoban::Action expert, bool format_ok);

struct AdvantageGroup {
    std::vector<double> rewards;
    double epsilon_std = 1e-8;
};

/// (r_i - mean) / std with the population standard deviation. Groups whose
/// std falls below epsilon_std get all-zero advantages.
std::vector<double> group_relative_advantage(const AdvantageGroup& group);

struct ClipParams {
    double epsilon = 0.2;
};

/// min(ratio * A, clamp(ratio, 1 - eps, 1 + eps) * A)
double grpo_clipped_term(double ratio, double advantage, const ClipParams& clip = {});

}  // namespace taskbench::rl
