#include "taskbench/datagen.hpp"
#include "taskbench/response.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace taskbench;
using namespace taskbench::datagen;
using sokoban::Action;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "taskbench_test_datagen";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::filesystem::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// Token between the answer tags, looked up in the record's own token table.
std::optional<Action> label_action(const DemonstrationRecord& r) {
    const auto open = r.response.find("<answer>");
    const auto close = r.response.find("</answer>");
    if (open == std::string::npos || close == std::string::npos) return std::nullopt;
    std::string token = r.response.substr(open + 8, close - open - 8);
    token.erase(0, token.find_first_not_of(' '));
    token.erase(token.find_last_not_of(' ') + 1);
    for (const auto& [name, tok] : r.extra.at("action_tokens").items()) {
        if (tok == token) return sokoban::action_from_name(name);
    }
    return std::nullopt;
}

// Independent replay: every trajectory, decoded through its own prompt vocabulary, must end solved.
bool trajectories_replay(const std::vector<DemonstrationRecord>& records) {
    std::map<long, std::vector<const DemonstrationRecord*>> by_trajectory;
    for (const auto& r : records) by_trajectory[r.extra.at("trajectory").get<long>()].push_back(&r);
    for (const auto& [id, steps] : by_trajectory) {
        auto state = sokoban::parse_observation(steps.front()->extra.at("observation").get<std::string>());
        for (const auto* r : steps) {
            if (sokoban::render(state) != r->extra.at("observation").get<std::string>()) return false;
            if (r->prompt.find(r->extra.at("observation").get<std::string>()) == std::string::npos) return false;
            const auto a = label_action(*r);
            if (!a) return false;
            state = sokoban::step(state, *a).next_state;
        }
        if (!state.solved() || state.steps_taken > sokoban::kDefaultMaxSteps) return false;
    }
    return true;
}

CotCandidate sokoban_candidate(std::string id, const std::string& obs, std::string expert, std::string response,
                               std::string variant = "SimpleSokoban") {
    return {std::move(id), "sokoban", std::move(response),
            Json{{"observation", obs}, {"expert_action", std::move(expert)}, {"variant", std::move(variant)}}};
}

const std::string kObs = "######\n#__O_#\n#_X__#\n#_P#_#\n#____#\n######";

}  // namespace

TEST_CASE("sokoban demonstrations hit the configured pair count and replay") {
    SokobanDemoConfig cfg;
    cfg.target_pairs = 500;
    const auto records = gen_sokoban_demos(cfg, 11);
    REQUIRE(records.size() == 500);
    CHECK(trajectories_replay(records));
    CHECK(count_label_failures(records) == 0);
    for (const auto& r : records) {
        CHECK(r.task == "sokoban");
        CHECK(r.variant == "SimpleSokoban");
        CHECK_FALSE(r.prompt.empty());
        const auto parsed = parse_response(r.response);
        CHECK(parsed.format_ok);
        CHECK(parsed.think_text.empty());
        CHECK((r.split == "train" || r.split == "validation"));
    }
    CHECK(records.front().response == "<think> </think> <answer> " + records.front().extra.at("action_tokens").at(
                                           records.front().extra.at("expert_action").get<std::string>()).get<std::string>() +
                                           " </answer>");
}

TEST_CASE("instruction-variant demonstrations use the variant's tokens") {
    SokobanDemoConfig cfg;
    cfg.variant = "SimpleSokobanAlphabetical";
    cfg.target_pairs = 60;
    const auto records = gen_sokoban_demos(cfg, 5);
    REQUIRE(records.size() == 60);
    CHECK(trajectories_replay(records));
    for (const auto& r : records) {
        const auto answer = parse_response(r.response).answer_text;
        CHECK((answer == "A" || answer == "B" || answer == "C" || answer == "D"));
    }
    cfg.variant = "FakeSokobanNumerical";
    CHECK_THROWS_AS(gen_sokoban_demos(cfg, 5), std::invalid_argument);
}

TEST_CASE("diversity mode resamples the vocabulary per record") {
    SokobanDemoConfig cfg;
    cfg.diverse = true;
    cfg.target_pairs = 50;
    const auto records = gen_sokoban_demos(cfg, 3);
    REQUIRE(records.size() == 50);
    CHECK(trajectories_replay(records));
    CHECK(count_label_failures(records) == 0);
    std::set<std::string> vocabularies;
    for (const auto& r : records) {
        vocabularies.insert(r.extra.at("action_tokens").dump());
        for (const auto& [name, tok] : r.extra.at("action_tokens").items()) {
            CHECK(r.prompt.find(tok.get<std::string>()) != std::string::npos);
        }
    }
    CHECK(vocabularies.size() > 1);
}

TEST_CASE("sokoban generation is deterministic across worker counts") {
    SokobanDemoConfig cfg;
    cfg.target_pairs = 200;
    cfg.workers = 1;
    const auto a = gen_sokoban_demos(cfg, 42);
    cfg.workers = 4;
    const auto b = gen_sokoban_demos(cfg, 42);
    CHECK(a == b);
    const auto pa = temp_path("det_a.jsonl"), pb = temp_path("det_b.jsonl");
    persist_dataset(a, pa);
    persist_dataset(b, pb);
    CHECK(slurp(pa) == slurp(pb));
    CHECK_FALSE(a == gen_sokoban_demos(cfg, 43));
}

TEST_CASE("gp demonstrations self-score +5") {
    GpDemoConfig cfg;
    cfg.count = 1000;
    cfg.workers = 4;
    const auto records = gen_gp_demos(cfg, 9);
    REQUIRE(records.size() == 1000);
    CHECK(count_label_failures(records) == 0);
    for (const auto& r : records) {
        CHECK(r.variant == "training");
        CHECK(parse_response(r.response).format_ok);
        gp::GPInstance inst;
        for (const auto& c : r.extra.at("cards")) inst.cards.push_back(*gp::card_from_label(c.get<std::string>()));
        inst.mapping = inst.scoring_mapping = gp::face_mapping("all_10");
        CHECK(gp::score_answer(r.response, inst).points == 5);
    }
    cfg.workers = 1;
    CHECK(gen_gp_demos(cfg, 9) == records);
}

TEST_CASE("gp diversity mode covers every regime") {
    GpDemoConfig cfg;
    cfg.diverse = true;
    cfg.count = 500;
    const auto records = gen_gp_demos(cfg, 1);
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[r.variant];
    for (const auto& regime : gp::diversity_regimes()) CHECK(counts[regime] > 0);
    CHECK(counts.size() == gp::diversity_regimes().size());
    CHECK(count_label_failures(records) == 0);

    GpDemoConfig fake;
    fake.split = "fake";
    CHECK_THROWS_AS(gen_gp_demos(fake, 1), std::invalid_argument);
}

TEST_CASE("split assignment is roughly 95/5 and deterministic") {
    int validation = 0;
    for (std::uint64_t i = 0; i < 20'000; ++i) validation += assign_split(7, i) == kValidation;
    CHECK(validation > 800);
    CHECK(validation < 1200);
    CHECK(assign_split(7, 123) == assign_split(7, 123));
}

TEST_CASE("filter_cot keeps exactly the verified candidates") {
    std::vector<CotCandidate> pool;
    // expert action for kObs is Up; five correct answers with varied think text
    for (int i = 0; i < 16; ++i) {
        const bool correct = i % 3 == 0 && i < 15;
        const std::string think = "step " + std::to_string(i) + " reasoning";
        pool.push_back(sokoban_candidate("p0", kObs, "Up", format_response(think, correct ? "Up" : "Left")));
    }
    const auto result = filter_cot(pool);
    CHECK(result.accepted.size() == 5);
    CHECK(result.rejected_incorrect == 11);
    CHECK(result.rejected_malformed == 0);
    for (const auto& r : result.accepted) {
        CHECK(r.response.find("reasoning") != std::string::npos);
        CHECK(r.extra.at("prompt_id") == "p0");
        CHECK(r.prompt.find(kObs) != std::string::npos);
    }
}

TEST_CASE("filter_cot rejects adversarial and malformed candidates") {
    std::vector<CotCandidate> pool{
        sokoban_candidate("a", kObs, "Up", "<think> x </think> <answer> Up Up </answer>"),
        sokoban_candidate("a", kObs, "Up", "<answer> Up </answer>"),
        sokoban_candidate("a", kObs, "Up", "<think> Up </think> <answer> </answer>"),
        sokoban_candidate("a", kObs, "Up", "<think> </think> <answer> 1 </answer>"),
        sokoban_candidate("a", kObs, "Up", "<think> </think> <answer> 1 </answer>", "SimpleSokobanNumerical"),
        sokoban_candidate("a", kObs, "Up", "<think> </think> <answer> Up </answer>", "NoSuchVariant"),
        sokoban_candidate("a", "not a grid", "Up", "<think> </think> <answer> Up </answer>"),
        {"b", "chess", "<think> </think> <answer> e4 </answer>", Json::object()},
        {"c", "gp", "<think> </think> <answer> {} </answer>", Json{{"cards", "K"}}},
        {"d", "gp", R"J(<think> </think> <answer> {"cards": ["3","3","8","8"], "number": [3,3,8,8], "formula": "8/(3-8/3)"} </answer>)J",
         Json{{"cards", {"3", "3", "8", "8"}}, {"mapping", "all_10"}}},
        {"d", "gp", R"J(<think> </think> <answer> {"cards": ["3","3","8","8"], "number": [3,3,8,8], "formula": "8+8+3+3"} </answer>)J",
         Json{{"cards", {"3", "3", "8", "8"}}, {"mapping", "all_10"}}},
    };
    const auto result = filter_cot(pool);
    REQUIRE(result.accepted.size() == 2);
    CHECK(result.accepted[0].variant == "SimpleSokobanNumerical");
    CHECK(result.accepted[1].task == "gp");
    CHECK(result.rejected_incorrect == 5);
    CHECK(result.rejected_malformed == 4);
}

TEST_CASE("filter_cot caps accepted candidates per prompt") {
    std::vector<CotCandidate> pool;
    for (int i = 0; i < 20; ++i) pool.push_back(sokoban_candidate("p", kObs, "Up", format_response("t", "up")));
    pool.push_back(sokoban_candidate("q", kObs, "Up", format_response("t", "Up")));
    const auto result = filter_cot(pool, 16);
    CHECK(result.accepted.size() == 17);
    CHECK(result.over_quota == 4);

    // without an expert action the verifier falls back to the BFS solution
    std::vector<CotCandidate> no_expert{{"r", "sokoban", format_response("", "Up"),
                                         Json{{"observation", kObs}, {"variant", "SimpleSokoban"}}}};
    CHECK(filter_cot(no_expert).accepted.size() == 1);
}

TEST_CASE("persist and load round trip") {
    SokobanDemoConfig cfg;
    cfg.target_pairs = 700;
    auto records = gen_sokoban_demos(cfg, 2);
    GpDemoConfig gcfg;
    gcfg.count = 300;
    const auto gp_records = gen_gp_demos(gcfg, 2);
    records.insert(records.end(), gp_records.begin(), gp_records.end());
    REQUIRE(records.size() == 1000);

    const auto path = temp_path("roundtrip.jsonl");
    const auto manifest = persist_dataset(records, path, digest(Json{{"n", 1000}}), 2);
    CHECK(manifest.total == 1000);
    CHECK(count_lines(path) == 1000);
    std::size_t split_total = 0;
    for (const auto& [k, v] : manifest.per_split) split_total += v;
    CHECK(split_total == 1000);
    CHECK(manifest.per_variant.at("SimpleSokoban") == 700);
    CHECK(manifest.per_variant.at("training") == 300);
    const auto on_disk = Json::parse(slurp(manifest_path(path)));
    CHECK(on_disk.at("total") == 1000);
    CHECK(on_disk.at("seed") == 2);

    CHECK(load_dataset(path) == records);

    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    const auto keys = Json::parse(first);
    std::vector<std::string> order;
    for (const auto& [k, v] : keys.items()) order.push_back(k);
    CHECK(order == std::vector<std::string>{"prompt", "response", "task", "variant", "seed", "split", "extra"});
}

TEST_CASE("load_dataset names the bad line") {
    GpDemoConfig cfg;
    cfg.count = 5;
    const auto records = gen_gp_demos(cfg, 4);
    const auto path = temp_path("truncated.jsonl");
    persist_dataset(records, path);
    auto text = slurp(path);
    text.resize(text.size() - 20);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    try {
        load_dataset(path);
        FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
        CHECK(e.line() == 5);
        CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }

    const auto extra_key = temp_path("extra_key.jsonl");
    auto j = to_json(records[0]);
    j["note"] = "x";
    std::ofstream(extra_key, std::ios::binary | std::ios::trunc) << to_json(records[1]).dump() << '\n' << j.dump() << '\n';
    try {
        load_dataset(extra_key);
        FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_dataset(temp_path("missing.jsonl")), DatasetError);
}
