#pragma once

#include "taskbench/formula.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taskbench::gp {

inline constexpr int kDefaultTarget = 24;

/// Ranks 1..13 are A,2..10,J,Q,K. Ranks above 13 are raw numbers (large-number split).
struct Card {
    int rank = 1;
    bool operator==(const Card&) const = default;
    bool is_face() const { return rank >= 11 && rank <= 13; }
};

std::string card_label(Card card);
/// Accepts "A", "2".."10", "J", "Q", "K" (case-insensitive) and raw numbers up to 99.
std::optional<Card> card_from_label(std::string_view label);

struct FaceMapping {
    std::string name;
    int j = 10;
    int q = 10;
    int k = 10;
    bool uniform() const { return j == q && q == k; }
    bool operator==(const FaceMapping&) const = default;
};

/// Named regimes: all_10 (training), all_5, all_7, all_8, all_9, all_12, regular, mixed, staggered.
std::span<const FaceMapping> face_mappings();
/// Throws std::out_of_range for unknown names.
const FaceMapping& face_mapping(std::string_view name);

int map_card_value(Card card, const FaceMapping& mapping);
std::vector<int> mapped_values(std::span<const Card> cards, const FaceMapping& mapping);

enum class SplitGroup { InDistribution, Instruction, Mixed, Difficulty, Fake, Training };
std::string_view split_group_name(SplitGroup g);

struct SplitConfig {
    std::string name;
    SplitGroup group = SplitGroup::InDistribution;
    std::string prompt_mapping;   // declared in the prompt
    std::string scoring_mapping;  // what the environment scores with
    int num_cards = 4;
    bool require_face_card = false;
    bool inject_large_number = false;
    int target = kDefaultTarget;

    bool fake() const { return prompt_mapping != scoring_mapping; }
};

/// Evaluation splits in report order, followed by the training-side diversity regimes.
std::span<const SplitConfig> splits();
const SplitConfig& split(std::string_view name);
/// Regimes used for diversity-mode demonstrations.
std::span<const std::string> diversity_regimes();

struct GPInstance {
    std::vector<Card> cards;
    FaceMapping mapping;          // prompted
    FaceMapping scoring_mapping;  // equals mapping except on fake splits
    int target = kDefaultTarget;
    std::string split;
    std::uint64_t seed = 0;

    int num_cards() const { return static_cast<int>(cards.size()); }
    std::vector<int> prompted_values() const { return mapped_values(cards, mapping); }
    std::vector<int> scoring_values() const { return mapped_values(cards, scoring_mapping); }
};

class GenerationExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// First formula reaching target over every ordering of values, every operator
/// assignment and every bracketing, all evaluated exactly. Deterministic.
/// Requires 1 <= values.size() <= 5 and every value in [0, 99].
std::optional<formula::Expr> find_solution(std::span<const int> values, std::int64_t target);
std::optional<std::string> solve_exhaustive(std::span<const int> values, std::int64_t target);

/// Draws a hand for the split from the seed, retrying until solvable under the scoring mapping.
GPInstance generate_instance(const SplitConfig& config, std::uint64_t seed, int attempt_budget = 10'000);

/// The three-key object requested by the prompt.
struct GPAnswer {
    std::vector<std::string> cards;
    std::vector<std::int64_t> numbers;
    std::string formula;
};

/// Lenient reader for the answer object: accepts JSON as well as single quotes,
/// bare card labels and trailing commas. nullopt if any key is missing or mistyped.
std::optional<GPAnswer> parse_answer(std::string_view text);
/// Compact JSON with keys in the order cards, number, formula.
std::string format_answer(const GPAnswer& answer);
/// Answer object for a formula over the instance's prompted values.
GPAnswer make_answer(const GPInstance& instance, const std::string& formula_text);

struct GPScore {
    int points = -3;
    formula::Verdict verdict = formula::Verdict::Illegal;
    bool success = false;
};

inline constexpr int kPointsCorrect = 5;
inline constexpr int kPointsPartial = 1;
inline constexpr int kPointsBadNumbers = -2;
inline constexpr int kPointsIllegal = -3;

/// Rubric: unparsable object or illegal formula -3; numbers not exactly the card
/// values -2; legal but off target +1; correct +5. Uses the scoring mapping.
GPScore score_answer(std::string_view response_text, const GPInstance& instance);

}  // namespace taskbench::gp
