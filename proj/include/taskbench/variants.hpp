#pragma once

#include "taskbench/general_points.hpp"
#include "taskbench/response.hpp"
#include "taskbench/sokoban.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace taskbench::variants {

enum class SokobanGroup { InDistribution, Instruction, Difficulty, Fake, Diverse };
std::string_view sokoban_group_name(SokobanGroup g);

/// An action vocabulary plus the puzzle configuration it is evaluated on.
/// Tokens are indexed by sokoban::Action (Up, Right, Down, Left).
struct SokobanVariant {
    std::string name;
    SokobanGroup group = SokobanGroup::InDistribution;
    std::array<std::string, 4> tokens{"Up", "Right", "Down", "Left"};
    bool fake = false;
    int width = 6;
    int height = 6;
    int num_boxes = 1;

    const std::string& token(sokoban::Action a) const { return tokens[static_cast<std::size_t>(a)]; }
    bool canonical_tokens() const;
    /// Tokens the prompt advertises; the validity metric's admissible set.
    const std::array<std::string, 4>& prompt_tokens() const { return tokens; }
    /// Tokens the environment accepts: canonical names when fake.
    std::array<std::string, 4> decoding_tokens() const;
    sokoban::PuzzleSpec puzzle_spec(std::uint64_t seed) const;
};

/// Canonical action names in Action order.
const std::array<std::string, 4>& canonical_tokens();

struct Registry {
    std::vector<SokobanVariant> sokoban;
    std::vector<gp::SplitConfig> general_points;
    std::vector<gp::FaceMapping> face_mappings;

    /// Throws std::out_of_range.
    const SokobanVariant& sokoban_variant(std::string_view name) const;
};

/// SimpleSokoban, the three instruction variants, the three difficulty
/// configurations and FakeSokobanNumerical, in report column order, plus the
/// General Points splits and face-card regimes.
const Registry& builtin_variants();

/// Bundled lowercase English wordlist used for prompt diversity.
std::span<const std::string> wordlist();

struct VocabularySample {
    std::array<std::string, 4> words;  // for Up, Down, Left, Right
    std::uint64_t seed = 0;

    /// Canonical SimpleSokoban puzzle with these words as its action tokens.
    SokobanVariant to_variant() const;
};

/// Four distinct words drawn uniformly without replacement; deterministic in seed.
VocabularySample sample_diverse_vocab(std::uint64_t seed, std::span<const std::string> words = wordlist());

std::string render_sokoban_prompt(const sokoban::SokobanState& state, const SokobanVariant& variant);

/// "'J', 'Q', and 'K' count as '10'" or "... count as '11', '12', and '13' respectively".
std::string face_card_message(const gp::FaceMapping& mapping);
std::string render_gp_prompt(const gp::GPInstance& instance);

struct DecodeOptions {
    bool case_sensitive = false;
};

/// Single-token match against the variant's decoding vocabulary.
std::optional<sokoban::Action> decode_action(std::string_view answer_text, const SokobanVariant& variant,
                                             const DecodeOptions& options = {});

/// Answer token lies in the prompted (admissible) vocabulary. Format failures are invalid.
bool check_validity(const ParsedResponse& response, const SokobanVariant& variant,
                    const DecodeOptions& options = {});

/// Number field equals the prompted card values and the formula parses. Target not required.
bool check_validity(const ParsedResponse& response, const gp::GPInstance& instance);

}  // namespace taskbench::variants
