#include "taskbench/variants.hpp"

#include "taskbench/random.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace taskbench::variants {

extern const char* const kWordlistText;  // generated from assets/wordlist.txt

using sokoban::Action;

namespace {

bool token_equals(std::string_view a, std::string_view b, bool case_sensitive) {
    if (case_sensitive) return a == b;
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Order used by the prompt's answer exemplars and mapping sentence.
constexpr std::array<Action, 4> kPromptOrder{Action::Up, Action::Down, Action::Left, Action::Right};

}  // namespace

std::string_view sokoban_group_name(SokobanGroup g) {
    switch (g) {
        case SokobanGroup::InDistribution: return "id";
        case SokobanGroup::Instruction: return "instruction";
        case SokobanGroup::Difficulty: return "difficulty";
        case SokobanGroup::Fake: return "fake";
        case SokobanGroup::Diverse: return "diverse";
    }
    return "unknown";
}

const std::array<std::string, 4>& canonical_tokens() {
    static const std::array<std::string, 4> tokens{"Up", "Right", "Down", "Left"};
    return tokens;
}

bool SokobanVariant::canonical_tokens() const { return tokens == variants::canonical_tokens(); }

std::array<std::string, 4> SokobanVariant::decoding_tokens() const {
    return fake ? variants::canonical_tokens() : tokens;
}

sokoban::PuzzleSpec SokobanVariant::puzzle_spec(std::uint64_t seed) const {
    sokoban::PuzzleSpec spec;
    spec.width = width;
    spec.height = height;
    spec.num_boxes = num_boxes;
    spec.seed = seed;
    return spec;
}

const SokobanVariant& Registry::sokoban_variant(std::string_view name) const {
    for (const auto& v : sokoban) {
        if (v.name == name) return v;
    }
    throw std::out_of_range("unknown sokoban variant: " + std::string(name));
}

const Registry& builtin_variants() {
    static const Registry registry = [] {
        using G = SokobanGroup;
        Registry r;
        const auto& canon = canonical_tokens();
        // Token arrays are in Action order: Up, Right, Down, Left.
        r.sokoban = {
            {"SimpleSokoban", G::InDistribution, canon, false, 6, 6, 1},
            {"SimpleSokobanAlphabetical", G::Instruction, {"A", "D", "B", "C"}, false, 6, 6, 1},
            {"SimpleSokobanNumerical", G::Instruction, {"1", "4", "2", "3"}, false, 6, 6, 1},
            {"SimpleSokobanRandom", G::Instruction, {"*", "M", "&", "1"}, false, 6, 6, 1},
            {"LargerSokoban", G::Difficulty, canon, false, 10, 10, 1},
            {"TwoBoxesSokoban", G::Difficulty, canon, false, 6, 6, 2},
            {"ComplexSokoban", G::Difficulty, canon, false, 10, 10, 2},
            {"FakeSokobanNumerical", G::Fake, {"1", "4", "2", "3"}, true, 6, 6, 1},
        };
        r.general_points.assign(gp::splits().begin(), gp::splits().end());
        r.face_mappings.assign(gp::face_mappings().begin(), gp::face_mappings().end());
        return r;
    }();
    return registry;
}

std::span<const std::string> wordlist() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> out;
        std::istringstream in(kWordlistText);
        std::string line;
        while (std::getline(in, line)) {
            auto w = trim(line);
            if (!w.empty()) out.emplace_back(w);
        }
        return out;
    }();
    return words;
}

SokobanVariant VocabularySample::to_variant() const {
    SokobanVariant v;
    v.name = "Diverse";
    v.group = SokobanGroup::Diverse;
    for (std::size_t i = 0; i < kPromptOrder.size(); ++i) {
        v.tokens[static_cast<std::size_t>(kPromptOrder[i])] = words[i];
    }
    return v;
}

VocabularySample sample_diverse_vocab(std::uint64_t seed, std::span<const std::string> words) {
    if (words.size() < 4) throw std::invalid_argument("wordlist needs at least four words");
    Rng rng(seed);
    VocabularySample out;
    out.seed = seed;
    // Partial Fisher-Yates over indices: uniform over ordered 4-subsets.
    std::vector<std::size_t> idx(words.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.words[i] = words[idx[i]];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts

std::string render_sokoban_prompt(const sokoban::SokobanState& state, const SokobanVariant& variant) {
    const auto& tokens = variant.prompt_tokens();
    auto tok = [&](Action a) -> const std::string& { return tokens[static_cast<std::size_t>(a)]; };

    std::string p;
    p += "<|im_start|>user\n";
    p += "You are a Sokoban solver.\n";
    p += "Sokoban Quick Guide\n";
    p += "Goal: Push all boxes (X) onto targets (O).\n";
    p += "\n";
    p += "Symbols:\n";
    p += "# Wall | _ Floor | O Target | X Box | P You | ✓ = Box on Target | S = You on Target\n";
    p += "\n";
    p += "Rules:\n";
    p += "1. Push boxes (can't pull).\n";
    p += "2. Avoid walls (#).\n";
    p += "\n";
    p += "Answers:\n";
    for (std::size_t i = 0; i < kPromptOrder.size(); ++i) {
        if (i > 0) p += " | ";
        p += "<answer> " + tok(kPromptOrder[i]) + " </answer>";
    }
    p += "\n";
    if (!variant.canonical_tokens()) {
        for (std::size_t i = 0; i < kPromptOrder.size(); ++i) {
            if (i > 0) p += ", ";
            p += tok(kPromptOrder[i]) + " means " + std::string(sokoban::action_name(kPromptOrder[i]));
        }
        p += "\n";
    }
    p += "\n";
    p += "Rewards:\n";
    p += "Move: -0.1\n";
    p += "Box on target: +1.0\n";
    p += "All boxes placed: +10.0\n";
    p += "\n";
    p += "[Current Observation]:\n";
    p += sokoban::render(state);
    p += "\n";
    p += "Decide the next action:\n";
    p += "Always output: <think> [Your thoughts] </think> <answer> [your answer] </answer> with no extra text. "
         "Strictly follow this format. <|im_end|>\n";
    p += "<|im_start|>assistant\n";
    p += "<think>";
    return p;
}

std::string face_card_message(const gp::FaceMapping& m) {
    if (m.uniform()) return "'J', 'Q', and 'K' count as '" + std::to_string(m.j) + "'";
    return "'J', 'Q', and 'K' count as '" + std::to_string(m.j) + "', '" + std::to_string(m.q) + "', and '" +
           std::to_string(m.k) + "' respectively";
}

std::string render_gp_prompt(const gp::GPInstance& instance) {
    const std::string target = std::to_string(instance.target);
    const std::string msg = face_card_message(instance.mapping);
    std::string cards = "[";
    for (std::size_t i = 0; i < instance.cards.size(); ++i) {
        if (i > 0) cards += ", ";
        cards += "'" + gp::card_label(instance.cards[i]) + "'";
    }
    cards += "]";

    std::string p;
    p += "<|im_start|>user\n";
    p += "[Task Description]\n";
    p += "You are an expert " + target + " points card game player. You will receive a set of " +
         std::to_string(instance.num_cards()) + " cards.\n";
    p += "Note that " + msg + ", and each card must be used once.\n";
    p += "Your goal is to output a formula that evaluates to " + target +
         " using numbers from the cards and operators such as '+', '-', '*', '/', '(', ')', and '='.\n";
    p += "\n";
    p += "[Input]\n";
    p += "Cards: " + cards + "\n";
    p += "\n";
    p += "[Output]\n";
    p += "{\n";
    p += "  \"cards\": [x, y, z, w], where " + msg + ",\n";
    p += "  \"number\": [a, b, c, d], where a, b, c, and d are the numbers on the cards,\n";
    p += "  \"formula\": 'an equation that equals " + target + "',\n";
    p += "}\n";
    p += "\n";
    p += "Always output: <think> [Your thoughts] </think> <answer> [your answer] </answer> with no extra text. "
         "Strictly follow this format. <|im_end|>\n";
    p += "<|im_start|>assistant\n";
    p += "<think>";
    return p;
}

// ---------------------------------------------------------------------------
// Decoding and validity

std::optional<Action> decode_action(std::string_view answer_text, const SokobanVariant& variant,
                                    const DecodeOptions& options) {
    const std::string_view token = trim(answer_text);
    const auto vocab = variant.decoding_tokens();
    for (Action a : sokoban::kActions) {
        if (token_equals(token, vocab[static_cast<std::size_t>(a)], options.case_sensitive)) return a;
    }
    return std::nullopt;
}

bool check_validity(const ParsedResponse& response, const SokobanVariant& variant, const DecodeOptions& options) {
    if (!response.format_ok) return false;
    const std::string_view token = trim(response.answer_text);
    const auto& admissible = variant.prompt_tokens();
    return std::any_of(admissible.begin(), admissible.end(),
                       [&](const std::string& t) { return token_equals(token, t, options.case_sensitive); });
}

bool check_validity(const ParsedResponse& response, const gp::GPInstance& instance) {
    if (!response.format_ok) return false;
    const auto answer = gp::parse_answer(response.answer_text);
    if (!answer) return false;

    std::vector<std::int64_t> expected;
    for (int v : instance.prompted_values()) expected.push_back(v);
    std::vector<std::int64_t> given = answer->numbers;
    std::sort(expected.begin(), expected.end());
    std::sort(given.begin(), given.end());
    if (given != expected) return false;

    try {
        formula::parse_formula(answer->formula);
    } catch (const formula::ParseError&) {
        return false;
    }
    return true;
}

}  // namespace taskbench::variants
