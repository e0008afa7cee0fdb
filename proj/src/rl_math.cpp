#include "taskbench/rl_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taskbench::rl {

double action_match_reward(std::optional<sokoban::Action> predicted, sokoban::Action expert, bool format_ok) {
    if (predicted && *predicted == expert) return kActionMatchReward;
    return format_ok ? kFormatReward : 0.0;
}

std::vector<double> group_relative_advantage(const AdvantageGroup& group) {
    const auto& r = group.rewards;
    if (r.empty()) throw std::invalid_argument("advantage group must be non-empty");
    const double n = static_cast<double>(r.size());

    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : r) var += (x - mean) * (x - mean);
    const double std = std::sqrt(var / n);

    std::vector<double> out(r.size(), 0.0);
    if (std < group.epsilon_std) return out;
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mean) / std;
    return out;
}

double grpo_clipped_term(double ratio, double advantage, const ClipParams& clip) {
    if (!(ratio > 0.0)) throw std::invalid_argument("probability ratio must be positive");
    const double clipped = std::clamp(ratio, 1.0 - clip.epsilon, 1.0 + clip.epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

}  // namespace taskbench::rl
