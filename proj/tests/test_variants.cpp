#include "golden_cases.hpp"
#include "taskbench/variants.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace taskbench;
using namespace taskbench::variants;
using sokoban::Action;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(TASKBENCH_FIXTURE_DIR) + "/prompts/" + name, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing fixture " << name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const SokobanVariant& variant(std::string_view name) { return builtin_variants().sokoban_variant(name); }

gp::GPInstance hand(std::vector<int> ranks, std::string_view split_name) {
    const auto& cfg = gp::split(split_name);
    gp::GPInstance inst;
    for (int r : ranks) inst.cards.push_back(gp::Card{r});
    inst.mapping = gp::face_mapping(cfg.prompt_mapping);
    inst.scoring_mapping = gp::face_mapping(cfg.scoring_mapping);
    inst.split = cfg.name;
    return inst;
}

}  // namespace

TEST_CASE("registry contents") {
    const auto& reg = builtin_variants();
    std::vector<std::string> names;
    for (const auto& v : reg.sokoban) names.push_back(v.name);
    CHECK(names == std::vector<std::string>{"SimpleSokoban", "SimpleSokobanAlphabetical", "SimpleSokobanNumerical",
                                            "SimpleSokobanRandom", "LargerSokoban", "TwoBoxesSokoban",
                                            "ComplexSokoban", "FakeSokobanNumerical"});
    CHECK(variant("LargerSokoban").width == 10);
    CHECK(variant("LargerSokoban").num_boxes == 1);
    CHECK(variant("TwoBoxesSokoban").width == 6);
    CHECK(variant("TwoBoxesSokoban").num_boxes == 2);
    CHECK(variant("ComplexSokoban").height == 10);
    CHECK(variant("ComplexSokoban").num_boxes == 2);
    CHECK(variant("FakeSokobanNumerical").fake);

    std::set<std::string> mappings;
    for (const auto& m : reg.face_mappings) mappings.insert(m.name);
    for (auto name : {"all_10", "all_5", "all_7", "all_12", "regular", "all_8", "all_9", "mixed", "staggered"}) {
        CHECK(mappings.count(name) == 1);
    }
    std::set<std::string> splits;
    for (const auto& s : reg.general_points) splits.insert(s.name);
    for (auto name : {"training", "all_5", "all_7", "all_12", "regular", "large_number", "five_cards", "fake"}) {
        CHECK(splits.count(name) == 1);
    }
    CHECK_THROWS_AS(reg.sokoban_variant("Nope"), std::out_of_range);
}

TEST_CASE("variant token mappings decode as published") {
    CHECK(decode_action("B", variant("SimpleSokobanAlphabetical")) == Action::Down);
    CHECK(decode_action("A", variant("SimpleSokobanAlphabetical")) == Action::Up);
    CHECK(decode_action("M", variant("SimpleSokobanRandom")) == Action::Right);
    CHECK(decode_action("&", variant("SimpleSokobanRandom")) == Action::Down);
    CHECK(decode_action("1", variant("SimpleSokobanRandom")) == Action::Left);
    CHECK(decode_action("*", variant("SimpleSokobanRandom")) == Action::Up);
    CHECK(decode_action("1", variant("SimpleSokobanNumerical")) == Action::Up);
    CHECK(decode_action("2", variant("SimpleSokobanNumerical")) == Action::Down);
    CHECK(decode_action("3", variant("SimpleSokobanNumerical")) == Action::Left);
    CHECK(decode_action("4", variant("SimpleSokobanNumerical")) == Action::Right);
}

TEST_CASE("fake variant prompts with numbers but decodes canonical names") {
    const auto& fake = variant("FakeSokobanNumerical");
    const auto& admissible = fake.prompt_tokens();
    CHECK(std::set<std::string>(admissible.begin(), admissible.end()) == std::set<std::string>{"1", "2", "3", "4"});
    CHECK(fake.decoding_tokens() == canonical_tokens());
    CHECK_FALSE(decode_action("2", fake));
    CHECK(decode_action("Up", fake) == Action::Up);
    CHECK(decode_action(" up ", fake) == Action::Up);
    CHECK_FALSE(decode_action("up", fake, {true}));
    CHECK_FALSE(decode_action("Up Down", fake));
}

TEST_CASE("decode and validity agree with the admissible sets") {
    std::vector<std::string> probes{"Up", "up", "Down", "Left", "Right", "1", "2", "3", "4", "A", "b", "*", "&",
                                    "M", "m", "x", "", "Upp", "5"};
    for (const auto& v : builtin_variants().sokoban) {
        for (const auto& t : probes) {
            const ParsedResponse r = parse_response(format_response("", t));
            const auto decoded = decode_action(t, v);
            if (decoded) {
                const auto vocab = v.decoding_tokens();
                CHECK(std::any_of(vocab.begin(), vocab.end(), [&](const std::string& w) {
                    return decode_action(w, v) == decoded;
                }));
                if (!v.fake) CHECK(check_validity(r, v));
            }
            if (v.fake && check_validity(r, v)) {
                // valid under the prompt yet numeric: the environment must refuse it
                CHECK_FALSE(decode_action(t, v));
            }
            if (v.fake) CHECK(decode_action(t, v).has_value() == sokoban::action_from_name(t).has_value());
        }
    }
}

TEST_CASE("validity metric examples") {
    const auto& num = variant("SimpleSokobanNumerical");
    CHECK(check_validity(parse_response("<think>x</think><answer> 3 </answer>"), num));
    CHECK_FALSE(check_validity(parse_response("<think>x</think><answer> Left </answer>"), num));
    CHECK_FALSE(check_validity(parse_response("Left"), num));

    const auto inst = hand({13, 11, 3, 2}, "all_5");
    const std::string twenty = R"J({"cards": ["K", "J", "3", "2"], "number": [5, 5, 3, 2], "formula": "5+5+3*2+5-5"})J";
    // The formula above uses extra numbers; validity checks only the number field and legality.
    CHECK(check_validity(parse_response(format_response("", twenty)), inst));
    const std::string legal20 = R"J({"cards": ["K", "J", "3", "2"], "number": [5, 5, 3, 2], "formula": "(5+5)*2"})J";
    CHECK(check_validity(parse_response(format_response("", legal20)), inst));
    CHECK(gp::score_answer(format_response("", legal20), inst).points != 5);
    const std::string tens = R"J({"cards": ["K", "J", "3", "2"], "number": [10, 10, 3, 2], "formula": "10+10+3-2"})J";
    CHECK_FALSE(check_validity(parse_response(format_response("", tens)), inst));
    const std::string illegal = R"J({"cards": ["K", "J", "3", "2"], "number": [5, 5, 3, 2], "formula": "5+5+"})J";
    CHECK_FALSE(check_validity(parse_response(format_response("", illegal)), inst));
}

TEST_CASE("parse_response") {
    auto a = parse_response("<think>go up</think> <answer> Up </answer>");
    CHECK(a.format_ok);
    CHECK(a.answer_text == "Up");
    CHECK(a.think_text == "go up");

    CHECK_FALSE(parse_response("the answer is Up").format_ok);

    auto b = parse_response("plan...</think><answer>2</answer>");
    CHECK(b.format_ok);
    CHECK(b.answer_text == "2");
    CHECK(b.think_text == "plan...");

    CHECK_FALSE(parse_response("<think>a</think><answer>   </answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a</think><answer>Up").format_ok);
    CHECK_FALSE(parse_response("<answer>Up</answer>").format_ok);
    CHECK_FALSE(parse_response("<think>a</think><answer><answer>Up</answer>").format_ok);

    auto first = parse_response("<think>a</think><answer>Up</answer><answer>Down</answer>");
    CHECK(first.answer_text == "Up");

    CHECK(format_response("", "Up") == "<think> </think> <answer> Up </answer>");
    CHECK(parse_response(format_response("why", "Left")).answer_text == "Left");
}

TEST_CASE("diverse vocabulary sampling") {
    const auto a = sample_diverse_vocab(17);
    const auto b = sample_diverse_vocab(17);
    CHECK(a.words == b.words);
    CHECK(wordlist().size() >= 1900);

    for (std::uint64_t seed = 0; seed < 10'000; ++seed) {
        const auto s = sample_diverse_vocab(seed);
        std::set<std::string> distinct(s.words.begin(), s.words.end());
        REQUIRE(distinct.size() == 4);
    }

    const auto v = a.to_variant();
    CHECK(decode_action(a.words[0], v) == Action::Up);
    CHECK(decode_action(a.words[1], v) == Action::Down);
    CHECK(decode_action(a.words[2], v) == Action::Left);
    CHECK(decode_action(a.words[3], v) == Action::Right);

    std::vector<std::string> tiny{"a", "b", "c"};
    CHECK_THROWS_AS(sample_diverse_vocab(1, tiny), std::invalid_argument);
}

TEST_CASE("diverse vocabulary word frequencies are uniform (chi-square, alpha 0.01)") {
    const auto words = wordlist();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < words.size(); ++i) index[words[i]] = i;
    std::vector<double> counts(words.size(), 0.0);
    const int samples = 100'000;
    for (int seed = 0; seed < samples; ++seed) {
        for (const auto& w : sample_diverse_vocab(static_cast<std::uint64_t>(seed)).words) counts[index.at(w)] += 1;
    }
    const double expected = 4.0 * samples / static_cast<double>(words.size());
    double stat = 0.0;
    for (double c : counts) stat += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(static_cast<double>(words.size() - 1));
    const double critical = boost::math::quantile(boost::math::complement(dist, 0.01));
    MESSAGE("chi-square " << stat << " vs critical " << critical);
    CHECK(stat < critical);
}

TEST_CASE("sokoban prompts match the golden fixtures") {
    const auto& observations = golden::sokoban_observations();
    for (const auto& v : builtin_variants().sokoban) {
        const auto state = sokoban::parse_observation(observations.at(v.name));
        CHECK_MESSAGE(render_sokoban_prompt(state, v) == fixture("sokoban_" + v.name + ".txt"), v.name);
    }
    const auto canonical = render_sokoban_prompt(sokoban::parse_observation(golden::kObs6), variant("SimpleSokoban"));
    CHECK(canonical.find("<answer> Up </answer> | <answer> Down </answer>") != std::string::npos);
    CHECK(canonical.ends_with("<|im_start|>assistant\n<think>"));
    CHECK(canonical.find("means") == std::string::npos);
}

TEST_CASE("diverse prompts declare their own mapping") {
    const auto sample = sample_diverse_vocab(5);
    const auto prompt = render_sokoban_prompt(sokoban::parse_observation(golden::kObs6), sample.to_variant());
    const std::string decl = sample.words[0] + " means Up, " + sample.words[1] + " means Down, " + sample.words[2] +
                             " means Left, " + sample.words[3] + " means Right\n";
    CHECK(prompt.find(decl) != std::string::npos);
}

TEST_CASE("general points prompts match the golden fixtures") {
    for (const auto& [name, ranks] : golden::gp_hands()) {
        const auto inst = hand(ranks, name);
        CHECK_MESSAGE(render_gp_prompt(inst) == fixture("gp_" + name + ".txt"), name);
    }
    const auto p = render_gp_prompt(hand({13, 11, 3, 2}, "all_5"));
    CHECK(p.find("'J', 'Q', and 'K' count as '5'") != std::string::npos);
    for (auto key : {"\"cards\"", "\"number\"", "\"formula\""}) CHECK(p.find(key) != std::string::npos);
}
