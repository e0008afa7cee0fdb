#include "taskbench/general_points.hpp"

#include "taskbench/random.hpp"
#include "taskbench/response.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <variant>

namespace taskbench::gp {

using formula::Expr;
using formula::Op;
using formula::Rational;

// ---------------------------------------------------------------------------
// Cards and mappings

std::string card_label(Card card) {
    switch (card.rank) {
        case 1: return "A";
        case 11: return "J";
        case 12: return "Q";
        case 13: return "K";
        default: return std::to_string(card.rank);
    }
}

std::optional<Card> card_from_label(std::string_view label) {
    if (label.size() == 1) {
        switch (std::toupper(static_cast<unsigned char>(label[0]))) {
            case 'A': return Card{1};
            case 'J': return Card{11};
            case 'Q': return Card{12};
            case 'K': return Card{13};
            default: break;
        }
    }
    if (label.empty() || label.size() > 2) return std::nullopt;
    int v = 0;
    for (char c : label) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v * 10 + (c - '0');
    }
    // Face ranks must be spelled as letters.
    if (v < 2 || v == 11 || v == 12 || v == 13) return std::nullopt;
    return Card{v};
}

namespace {

const std::vector<FaceMapping>& mapping_table() {
    static const std::vector<FaceMapping> table{
        {"all_10", 10, 10, 10}, {"all_5", 5, 5, 5},      {"all_7", 7, 7, 7},
        {"all_8", 8, 8, 8},     {"all_9", 9, 9, 9},      {"all_12", 12, 12, 12},
        {"regular", 11, 12, 13}, {"mixed", 8, 9, 10},    {"staggered", 7, 8, 9},
    };
    return table;
}

}  // namespace

std::span<const FaceMapping> face_mappings() { return mapping_table(); }

const FaceMapping& face_mapping(std::string_view name) {
    for (const auto& m : mapping_table()) {
        if (m.name == name) return m;
    }
    throw std::out_of_range("unknown face mapping: " + std::string(name));
}

int map_card_value(Card card, const FaceMapping& mapping) {
    switch (card.rank) {
        case 11: return mapping.j;
        case 12: return mapping.q;
        case 13: return mapping.k;
        default: return card.rank;
    }
}

std::vector<int> mapped_values(std::span<const Card> cards, const FaceMapping& mapping) {
    std::vector<int> out;
    out.reserve(cards.size());
    for (Card c : cards) out.push_back(map_card_value(c, mapping));
    return out;
}

std::string_view split_group_name(SplitGroup g) {
    switch (g) {
        case SplitGroup::InDistribution: return "id";
        case SplitGroup::Instruction: return "instruction";
        case SplitGroup::Mixed: return "mixed";
        case SplitGroup::Difficulty: return "difficulty";
        case SplitGroup::Fake: return "fake";
        case SplitGroup::Training: return "training";
    }
    return "unknown";
}

namespace {

const std::vector<SplitConfig>& split_table() {
    using G = SplitGroup;
    static const std::vector<SplitConfig> table{
        {"training", G::InDistribution, "all_10", "all_10", 4, false, false},
        {"all_5", G::Instruction, "all_5", "all_5", 4, false, false},
        {"all_7", G::Instruction, "all_7", "all_7", 4, false, false},
        {"all_12", G::Mixed, "all_12", "all_12", 4, true, false},
        {"regular", G::Mixed, "regular", "regular", 4, true, false},
        {"large_number", G::Difficulty, "all_10", "all_10", 4, false, true},
        {"five_cards", G::Difficulty, "all_10", "all_10", 5, false, false},
        {"fake", G::Fake, "regular", "all_10", 4, true, false},
        {"all_8", G::Training, "all_8", "all_8", 4, false, false},
        {"all_9", G::Training, "all_9", "all_9", 4, false, false},
        {"mixed", G::Training, "mixed", "mixed", 4, false, false},
        {"staggered", G::Training, "staggered", "staggered", 4, false, false},
    };
    return table;
}

}  // namespace

std::span<const SplitConfig> splits() { return split_table(); }

const SplitConfig& split(std::string_view name) {
    for (const auto& s : split_table()) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("unknown general points split: " + std::string(name));
}

std::span<const std::string> diversity_regimes() {
    static const std::array<std::string, 5> regimes{"training", "all_8", "all_9", "mixed", "staggered"};
    return regimes;
}

// ---------------------------------------------------------------------------
// Exhaustive solver

namespace {

/// Every (value, expression) reachable from one contiguous run of leaves.
/// Entries are produced split point first, then left entry, right entry, operator.
struct Entry {
    Rational value;
    Op op;
    std::int32_t left;   // -1 for a leaf
    std::int32_t right;
    std::int8_t split;
};

class IntervalTable {
public:
    explicit IntervalTable(std::span<const int> leaves) : leaves_(leaves), n_(static_cast<int>(leaves.size())) {
        cells_.resize(static_cast<std::size_t>(n_ * (n_ + 1)));
    }

    std::optional<Expr> first_hit(const Rational& target) {
        for (int len = 1; len < n_; ++len) {
            for (int i = 0; i + len <= n_; ++i) fill(i, i + len, nullptr);
        }
        std::optional<std::size_t> hit;
        fill(0, n_, [&](std::size_t idx, const Entry& e) {
            if (e.value == target) {
                hit = idx;
                return true;
            }
            return false;
        });
        if (!hit) return std::nullopt;
        return build(0, n_, static_cast<std::int32_t>(*hit));
    }

private:
    using Visitor = std::function<bool(std::size_t, const Entry&)>;

    std::vector<Entry>& cell(int i, int j) { return cells_[static_cast<std::size_t>(i * (n_ + 1) + j)]; }

    void fill(int i, int j, const Visitor& visit) {
        auto& out = cell(i, j);
        out.clear();
        if (j - i == 1) {
            out.push_back({Rational(leaves_[static_cast<std::size_t>(i)]), Op::Add, -1, -1, 0});
            if (visit) visit(0, out.back());
            return;
        }
        for (int k = i + 1; k < j; ++k) {
            const auto& lhs = cell(i, k);
            const auto& rhs = cell(k, j);
            for (std::size_t a = 0; a < lhs.size(); ++a) {
                for (std::size_t b = 0; b < rhs.size(); ++b) {
                    for (Op op : formula::kOps) {
                        if (op == Op::Div && rhs[b].value.num() == 0) continue;
                        Rational v;
                        try {
                            v = formula::apply(op, lhs[a].value, rhs[b].value);
                        } catch (const formula::ArithmeticError&) {
                            continue;
                        }
                        out.push_back({v, op, static_cast<std::int32_t>(a), static_cast<std::int32_t>(b),
                                       static_cast<std::int8_t>(k)});
                        if (visit && visit(out.size() - 1, out.back())) return;
                    }
                }
            }
        }
    }

    Expr build(int i, int j, std::int32_t idx) {
        const Entry& e = cell(i, j)[static_cast<std::size_t>(idx)];
        if (e.left < 0) return Expr::literal(leaves_[static_cast<std::size_t>(i)]);
        return Expr::binary(e.op, build(i, e.split, e.left), build(e.split, j, e.right));
    }

    std::span<const int> leaves_;
    int n_;
    std::vector<std::vector<Entry>> cells_;
};

}  // namespace

std::optional<Expr> find_solution(std::span<const int> values, std::int64_t target) {
    if (values.empty() || values.size() > 5) throw std::invalid_argument("solver takes 1 to 5 values");
    std::vector<int> order(values.begin(), values.end());
    for (int v : order) {
        if (v < 0 || v > formula::kMaxLiteral) throw std::invalid_argument("solver values must lie in [0, 99]");
    }
    std::sort(order.begin(), order.end());
    const Rational goal(target);
    do {
        IntervalTable table(order);
        if (auto hit = table.first_hit(goal)) return hit;
    } while (std::next_permutation(order.begin(), order.end()));
    return std::nullopt;
}

std::optional<std::string> solve_exhaustive(std::span<const int> values, std::int64_t target) {
    auto expr = find_solution(values, target);
    if (!expr) return std::nullopt;
    return formula::to_string(*expr);
}

// ---------------------------------------------------------------------------
// Instance generation

GPInstance generate_instance(const SplitConfig& config, std::uint64_t seed, int attempt_budget) {
    Rng rng(seed);
    GPInstance inst;
    inst.mapping = face_mapping(config.prompt_mapping);
    inst.scoring_mapping = face_mapping(config.scoring_mapping);
    inst.target = config.target;
    inst.split = config.name;
    inst.seed = seed;

    for (int attempt = 0; attempt < attempt_budget; ++attempt) {
        inst.cards.clear();
        for (int i = 0; i < config.num_cards; ++i) inst.cards.push_back(Card{uniform_int(rng, 1, 13)});
        if (config.inject_large_number) {
            const auto at = static_cast<std::size_t>(uniform_below(rng, inst.cards.size()));
            inst.cards[at] = Card{uniform_int(rng, 14, 19)};
        }
        if (config.require_face_card &&
            std::none_of(inst.cards.begin(), inst.cards.end(), [](Card c) { return c.is_face(); })) {
            continue;
        }
        const auto values = inst.scoring_values();
        if (find_solution(values, inst.target)) return inst;
    }
    throw GenerationExhausted("no solvable hand for split " + config.name);
}

// ---------------------------------------------------------------------------
// Answer object

namespace {

struct Loose;
using LooseList = std::vector<Loose>;
using LooseObject = std::vector<std::pair<std::string, Loose>>;
struct Loose {
    std::variant<std::string, std::int64_t, LooseList, LooseObject> v;
};

/// Reader for JSON-like text as models write it.
class LooseReader {
public:
    explicit LooseReader(std::string_view s) : s_(s) {}

    std::optional<Loose> value() {
        skip();
        if (pos_ >= s_.size()) return std::nullopt;
        const char c = s_[pos_];
        if (c == '{') return object();
        if (c == '[') return list();
        if (c == '"' || c == '\'') return quoted();
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return word();
        return std::nullopt;
    }

private:
    std::optional<Loose> object() {
        ++pos_;
        LooseObject obj;
        for (;;) {
            skip();
            if (eat('}')) return Loose{std::move(obj)};
            auto key = value();
            if (!key || !std::holds_alternative<std::string>(key->v)) return std::nullopt;
            skip();
            if (!eat(':')) return std::nullopt;
            auto val = value();
            if (!val) return std::nullopt;
            obj.emplace_back(std::get<std::string>(key->v), std::move(*val));
            skip();
            if (eat('}')) return Loose{std::move(obj)};
            if (!eat(',')) return std::nullopt;
        }
    }

    std::optional<Loose> list() {
        ++pos_;
        LooseList items;
        for (;;) {
            skip();
            if (eat(']')) return Loose{std::move(items)};
            auto val = value();
            if (!val) return std::nullopt;
            items.push_back(std::move(*val));
            skip();
            if (eat(']')) return Loose{std::move(items)};
            if (!eat(',')) return std::nullopt;
        }
    }

    std::optional<Loose> quoted() {
        const char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != quote) {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
            out += s_[pos_++];
        }
        if (!eat(quote)) return std::nullopt;
        return Loose{std::move(out)};
    }

    std::optional<Loose> number() {
        const std::size_t start = pos_;
        if (s_[pos_] == '-') ++pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        // Integral decimals such as 10.0 are tolerated.
        if (pos_ < s_.size() && s_[pos_] == '.') {
            const std::size_t dot = pos_++;
            while (pos_ < s_.size() && s_[pos_] == '0') ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) return std::nullopt;
            return parse_int(s_.substr(start, dot - start));
        }
        return parse_int(s_.substr(start, pos_ - start));
    }

    static std::optional<Loose> parse_int(std::string_view digits) {
        if (digits.empty() || digits == "-" || digits.size() > 18) return std::nullopt;
        return Loose{std::stoll(std::string(digits))};
    }

    std::optional<Loose> word() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        return Loose{std::string(s_.substr(start, pos_ - start))};
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

const Loose* find_key(const LooseObject& obj, std::string_view key) {
    for (const auto& [k, v] : obj) {
        if (k == key) return &v;
    }
    return nullptr;
}

std::optional<std::int64_t> as_integer(const Loose& v) {
    if (auto* i = std::get_if<std::int64_t>(&v.v)) return *i;
    if (auto* s = std::get_if<std::string>(&v.v)) {
        if (s->empty() || s->size() > 18) return std::nullopt;
        if (!std::all_of(s->begin(), s->end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            return std::nullopt;
        }
        return std::stoll(*s);
    }
    return std::nullopt;
}

}  // namespace

std::optional<GPAnswer> parse_answer(std::string_view text) {
    const std::size_t brace = text.find('{');
    if (brace == std::string_view::npos) return std::nullopt;
    auto root = LooseReader(text.substr(brace)).value();
    if (!root) return std::nullopt;
    const auto* obj = std::get_if<LooseObject>(&root->v);
    if (!obj) return std::nullopt;

    const Loose* cards = find_key(*obj, "cards");
    const Loose* numbers = find_key(*obj, "number");
    const Loose* formula_text = find_key(*obj, "formula");
    if (!cards || !numbers || !formula_text) return std::nullopt;

    GPAnswer out;
    const auto* card_list = std::get_if<LooseList>(&cards->v);
    if (!card_list) return std::nullopt;
    for (const auto& c : *card_list) {
        if (auto* s = std::get_if<std::string>(&c.v)) {
            out.cards.push_back(*s);
        } else if (auto* i = std::get_if<std::int64_t>(&c.v)) {
            out.cards.push_back(std::to_string(*i));
        } else {
            return std::nullopt;
        }
    }
    const auto* number_list = std::get_if<LooseList>(&numbers->v);
    if (!number_list) return std::nullopt;
    for (const auto& n : *number_list) {
        auto v = as_integer(n);
        if (!v) return std::nullopt;
        out.numbers.push_back(*v);
    }
    const auto* f = std::get_if<std::string>(&formula_text->v);
    if (!f) return std::nullopt;
    out.formula = *f;
    return out;
}

std::string format_answer(const GPAnswer& answer) {
    nlohmann::ordered_json j;
    j["cards"] = answer.cards;
    j["number"] = answer.numbers;
    j["formula"] = answer.formula;
    return j.dump();
}

GPAnswer make_answer(const GPInstance& instance, const std::string& formula_text) {
    GPAnswer a;
    for (Card c : instance.cards) a.cards.push_back(card_label(c));
    for (int v : instance.prompted_values()) a.numbers.push_back(v);
    a.formula = formula_text;
    return a;
}

// ---------------------------------------------------------------------------
// Scoring

GPScore score_answer(std::string_view response_text, const GPInstance& instance) {
    using formula::Verdict;
    GPScore score;

    const ParsedResponse parsed = parse_response(response_text);
    if (!parsed.format_ok) return score;
    const auto answer = parse_answer(parsed.answer_text);
    if (!answer) return score;

    std::vector<int> expected = instance.scoring_values();
    std::vector<std::int64_t> expected64(expected.begin(), expected.end());
    std::vector<std::int64_t> given = answer->numbers;
    std::sort(expected64.begin(), expected64.end());
    std::sort(given.begin(), given.end());

    // check_formula covers the formula side; the number field is checked here.
    Verdict verdict = formula::check_formula(answer->formula, expected, instance.target);
    if (verdict != Verdict::Illegal && given != expected64) verdict = Verdict::WrongNumbers;

    score.verdict = verdict;
    switch (verdict) {
        case Verdict::Illegal: score.points = kPointsIllegal; break;
        case Verdict::WrongNumbers: score.points = kPointsBadNumbers; break;
        case Verdict::WrongTarget: score.points = kPointsPartial; break;
        case Verdict::Correct: score.points = kPointsCorrect; break;
    }
    score.success = score.points == kPointsCorrect;
    return score;
}

}  // namespace taskbench::gp
