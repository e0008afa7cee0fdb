// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit on any failure.

#include "golden_cases.hpp"
#include "oracles.hpp"
#include "taskbench/datagen.hpp"
#include "taskbench/eval.hpp"
#include "taskbench/formula.hpp"
#include "taskbench/general_points.hpp"
#include "taskbench/parallel.hpp"
#include "taskbench/random.hpp"
#include "taskbench/response.hpp"
#include "taskbench/rl_math.hpp"
#include "taskbench/service.hpp"
#include "taskbench/sokoban.hpp"
#include "taskbench/variants.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace taskbench;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kMomentTolerance = 1e-9;
constexpr double kClipTolerance = 1e-12;
constexpr double kSolverBudgetSeconds = 300.0;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << title;
    if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
    std::cout << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "taskbench_acceptance";
    fs::create_directories(dir);
    return dir / name;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TASKBENCH_CLI) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

const variants::SokobanVariant& variant(std::string_view name) {
    return variants::builtin_variants().sokoban_variant(name);
}

// ---------------------------------------------------------------------------

Outcome solver_soundness() {
    Outcome o;
    constexpr std::size_t kPuzzles = 500;
    const auto start = std::chrono::steady_clock::now();
    for (auto name : {"SimpleSokoban", "LargerSokoban", "TwoBoxesSokoban", "ComplexSokoban"}) {
        const auto& v = variant(name);
        std::atomic<int> bad{0};
        parallel_for_index(kPuzzles, default_workers(), [&](std::size_t i) {
            const auto puzzle = sokoban::generate_puzzle(v.puzzle_spec(derive_seed(1000, i)));
            if (puzzle.solution.size() > static_cast<std::size_t>(sokoban::kDefaultMaxSteps) ||
                !sokoban::replay_solves(puzzle.state, puzzle.solution, sokoban::kDefaultMaxSteps)) {
                ++bad;
            }
        });
        o.require(bad == 0, std::string(name) + ": " + std::to_string(bad.load()) + " solutions failed to replay");
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(seconds < kSolverBudgetSeconds, "took " + std::to_string(seconds) + " s");
    if (o.pass) o.detail = "4 x 500 puzzles in " + std::to_string(seconds).substr(0, 5) + " s";
    return o;
}

Outcome solver_minimality() {
    Outcome o;
    const auto& v = variant("SimpleSokoban");
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto puzzle = sokoban::generate_puzzle(v.puzzle_spec(derive_seed(2000, i)));
        const int expected = oracle::iddfs_min_moves(puzzle.state, sokoban::kDefaultMaxSteps);
        o.require(static_cast<int>(puzzle.solution.size()) == expected,
                  "puzzle " + std::to_string(i) + ": bfs " + std::to_string(puzzle.solution.size()) + " vs " +
                      std::to_string(expected));
    }
    return o;
}

Outcome gp_oracle_agreement() {
    Outcome o;
    Rng rng(3000);
    int solvable = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<int> values;
        for (int c = 0; c < 4; ++c) values.push_back(std::min(uniform_int(rng, 1, 13), 10));
        const auto found = gp::solve_exhaustive(values, 24);
        const bool reference = oracle::combine_solvable(values, 24);
        o.require(found.has_value() == reference, "hand " + std::to_string(i) + " disagrees");
        if (found) {
            o.require(formula::check_formula(*found, values, 24) == formula::Verdict::Correct,
                      "hand " + std::to_string(i) + ": returned formula does not verify");
            ++solvable;
        }
    }
    const std::vector<int> eights{3, 3, 8, 8}, ones{1, 1, 1, 1};
    o.require(gp::solve_exhaustive(eights, 24).has_value(), "{3,3,8,8} reported unsolvable");
    o.require(!gp::solve_exhaustive(ones, 24).has_value(), "{1,1,1,1} reported solvable");
    if (o.pass) o.detail = std::to_string(solvable) + "/1000 solvable";
    return o;
}

Outcome rubric_table() {
    Outcome o;
    const auto cases = nlohmann::json::parse(slurp(fs::path(TASKBENCH_FIXTURE_DIR) / "rubric.json"));
    std::set<int> seen;
    for (const auto& c : cases) {
        const auto& cfg = gp::split(c.at("split").get<std::string>());
        gp::GPInstance inst;
        for (const auto& label : c.at("cards")) inst.cards.push_back(*gp::card_from_label(label.get<std::string>()));
        inst.mapping = gp::face_mapping(cfg.prompt_mapping);
        inst.scoring_mapping = gp::face_mapping(cfg.scoring_mapping);
        inst.target = cfg.target;
        inst.split = cfg.name;
        const std::string response = c.contains("response") ? c.at("response").get<std::string>()
                                                            : format_response("", c.at("answer").get<std::string>());
        const int points = gp::score_answer(response, inst).points;
        const int expected = c.at("points").get<int>();
        seen.insert(points);
        o.require(points == expected, c.at("name").get<std::string>() + ": got " + std::to_string(points));
    }
    o.require(cases.size() >= 12, "fixture has fewer than 12 cases");
    o.require(seen == std::set<int>{5, 1, -2, -3}, "fixture does not cover every rubric value");
    if (o.pass) o.detail = std::to_string(cases.size()) + " cases";
    return o;
}

Outcome frozen_prompt_mechanics() {
    Outcome o;
    eval::EvalConfig cfg;
    cfg.task = std::string(eval::kSokoban);
    cfg.seed = 5000;
    cfg.concurrency = default_workers();
    eval::OracleAgent frozen(eval::OracleAgent::Vocabulary::Canonical);
    eval::OracleAgent oracle;
    const auto f = eval::evaluate(cfg, frozen).report;
    const auto a = eval::evaluate(cfg, oracle).report;
    for (const auto& s : f.splits) o.require(s.episodes == 100, s.split + " did not run 100 episodes");

    o.require(f.split("FakeSokobanNumerical").successes == f.split("SimpleSokoban").successes,
              "frozen fake success differs from ID success");
    o.require(f.split("SimpleSokobanNumerical").validity_rate() == 0.0, "frozen validity on numerical is not 0");
    for (const auto& v : variants::builtin_variants().sokoban) {
        o.require(a.split(v.name).validity_rate() == 1.0, "oracle validity on " + v.name + " is not 1");
    }
    o.require(a.split("FakeSokobanNumerical").successes == 0, "oracle succeeded on the fake split");
    if (o.pass) {
        o.detail = "frozen ID " + std::to_string(f.split("SimpleSokoban").successes) + "/100, fake " +
                   std::to_string(f.split("FakeSokobanNumerical").successes) + "/100";
    }
    return o;
}

Outcome validity_metric() {
    Outcome o;
    eval::EvalConfig cfg;
    cfg.task = std::string(eval::kSokoban);
    cfg.seed = 6000;
    cfg.episodes_per_split = 20;
    cfg.concurrency = default_workers();
    // cycle through the prompted tokens, or answer with a token no variant uses
    eval::ScriptedAgent inside([](const eval::AgentQuery& q) {
        return format_response("", q.variant->prompt_tokens()[static_cast<std::size_t>(q.turn) % 4]);
    });
    eval::ScriptedAgent outside = eval::ScriptedAgent::constant(format_response("", "Jump"));
    const auto in = eval::evaluate(cfg, inside).report;
    const auto out = eval::evaluate(cfg, outside).report;
    for (const auto& s : in.splits) o.require(s.validity_rate() == 1.0, "inside agent on " + s.split);
    for (const auto& s : out.splits) o.require(s.validity_rate() == 0.0, "outside agent on " + s.split);
    return o;
}

Outcome dataset_contracts() {
    Outcome o;
    datagen::SokobanDemoConfig scfg;
    scfg.workers = default_workers();
    const auto sokoban = datagen::gen_sokoban_demos(scfg, 7000);
    o.require(sokoban.size() == static_cast<std::size_t>(datagen::kPaperSokobanPairs),
              "sokoban pairs: " + std::to_string(sokoban.size()));
    o.require(datagen::count_label_failures(sokoban) == 0, "sokoban labels failed to replay");

    datagen::GpDemoConfig gcfg;
    gcfg.workers = default_workers();
    const auto gp_records = datagen::gen_gp_demos(gcfg, 7001);
    o.require(gp_records.size() == static_cast<std::size_t>(datagen::kPaperGpDemos),
              "gp demos: " + std::to_string(gp_records.size()));
    for (const auto& r : gp_records) {
        const auto inst = datagen::gp_instance_from_context(r.extra);
        o.require(inst && gp::score_answer(r.response, *inst).points == gp::kPointsCorrect, "gp label below +5");
    }

    scfg.workers = 1;
    gcfg.workers = 1;
    datagen::persist_dataset(sokoban, scratch("sokoban_a.jsonl"), "", 7000);
    datagen::persist_dataset(datagen::gen_sokoban_demos(scfg, 7000), scratch("sokoban_b.jsonl"), "", 7000);
    datagen::persist_dataset(gp_records, scratch("gp_a.jsonl"), "", 7001);
    datagen::persist_dataset(datagen::gen_gp_demos(gcfg, 7001), scratch("gp_b.jsonl"), "", 7001);
    for (auto stem : {"sokoban", "gp"}) {
        const auto a = scratch(std::string(stem) + "_a.jsonl"), b = scratch(std::string(stem) + "_b.jsonl");
        o.require(slurp(a) == slurp(b), std::string(stem) + " regeneration differs");
        o.require(slurp(datagen::manifest_path(a)) == slurp(datagen::manifest_path(b)),
                  std::string(stem) + " manifest differs");
    }
    return o;
}

Outcome cot_filter() {
    Outcome o;
    std::vector<datagen::CotCandidate> pool;
    std::set<std::string> correct;
    const auto& simple = variant("SimpleSokoban");
    const std::vector<std::string> gp_cards{"3", "3", "8", "8"};
    const std::vector<std::string> gp_bad{"8+8+3+3", "8*3", "(8-3)*(8-3)", "8/(3-8/3"};
    // 100 prompts x 10 candidates, 4 correct per prompt; half Sokoban, half GP
    for (int p = 0; p < 100; ++p) {
        const std::string id = "prompt-" + std::to_string(p);
        const bool is_gp = p % 2 == 1;
        nlohmann::ordered_json context;
        std::string expert;
        std::string wrong;
        if (is_gp) {
            context = {{"cards", gp_cards}, {"mapping", "all_10"}};
        } else {
            const auto puzzle = sokoban::generate_puzzle(simple.puzzle_spec(derive_seed(8000, p)));
            expert = std::string(sokoban::action_name(puzzle.solution.front()));
            wrong = std::string(sokoban::action_name(
                sokoban::kActions[(static_cast<std::size_t>(puzzle.solution.front()) + 2) % 4]));
            context = {{"observation", sokoban::render(puzzle.state)}, {"expert_action", expert},
                       {"variant", "SimpleSokoban"}};
        }
        for (int k = 0; k < 10; ++k) {
            const bool ok = (k * 7 + p) % 10 < 4;
            const std::string think = id + " candidate " + std::to_string(k);
            std::string answer;
            if (is_gp) {
                const std::string f = ok ? "8/(3-8/3)" : gp_bad[static_cast<std::size_t>(k) % gp_bad.size()];
                answer = R"({"cards": ["3","3","8","8"], "number": [3,3,8,8], "formula": ")" + f + "\"}";
            } else {
                answer = ok ? expert : wrong;
            }
            if (ok) correct.insert(think);
            pool.push_back({id, is_gp ? "gp" : "sokoban", format_response(think, answer), context});
        }
    }
    const auto result = datagen::filter_cot(pool);
    std::set<std::string> accepted;
    for (const auto& r : result.accepted) accepted.insert(parse_response(r.response).think_text);
    o.require(correct.size() * 10 == pool.size() * 4, "pool is not 40% correct");
    o.require(accepted == correct, "accepted " + std::to_string(accepted.size()) + " of " +
                                       std::to_string(correct.size()) + " correct");
    o.require(result.rejected_incorrect == pool.size() - correct.size(), "rejection count mismatch");
    if (o.pass) o.detail = std::to_string(accepted.size()) + "/" + std::to_string(pool.size()) + " accepted";
    return o;
}

Outcome rl_math() {
    Outcome o;
    Rng rng(9000);
    int groups = 0;
    while (groups < 1000) {
        rl::AdvantageGroup g;
        const int n = uniform_int(rng, 2, 16);
        for (int i = 0; i < n; ++i) g.rewards.push_back(uniform_unit(rng) * 20.0 - 10.0);
        const auto adv = rl::group_relative_advantage(g);
        double mean = 0;
        for (double a : adv) mean += a;
        mean /= n;
        double var = 0;
        for (double a : adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / n);
        o.require(std::abs(mean) <= kMomentTolerance, "mean " + std::to_string(mean));
        o.require(std::abs(sd - 1.0) <= kMomentTolerance, "std " + std::to_string(sd));
        ++groups;
    }
    o.require(rl::group_relative_advantage({{1, 0, 1, 0}}) == std::vector<double>{1, -1, 1, -1}, "[1,0,1,0]");
    for (double c : {0.0, 1.0, -3.5}) {
        o.require(rl::group_relative_advantage({{c, c, c, c, c}}) == std::vector<double>(5, 0.0), "constant group");
    }
    int points = 0;
    for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 20; ++j) {
            for (int k = 0; k < 20; ++k) {
                const double ratio = 0.05 + i * 0.1;
                const double adv = -2.0 + j * 0.2;
                const double eps = 0.05 + k * 0.025;
                const double clamped = ratio < 1 - eps ? 1 - eps : (ratio > 1 + eps ? 1 + eps : ratio);
                const double expected = std::min(ratio * adv, clamped * adv);
                o.require(std::abs(rl::grpo_clipped_term(ratio, adv, {eps}) - expected) <= kClipTolerance,
                          "clip term at ratio " + std::to_string(ratio));
                ++points;
            }
        }
    }
    o.require(points == 10'000, "grid size");
    return o;
}

Outcome wire_determinism() {
    Outcome o;
    // CLI eval with a replay agent
    for (auto task : {"sokoban", "gp"}) {
        const std::string t(task);
        const auto transcript = scratch(t + "_transcript.jsonl");
        o.require(run_cli("eval --task " + t + " --episodes 12 --seed 11 --save-transcript " + transcript.string()) == 0,
                  t + ": recording run failed");
        const std::string replay =
            "eval --task " + t + " --episodes 12 --seed 11 --agent replay --transcript " + transcript.string();
        const auto c1 = scratch(t + "_c1"), c8 = scratch(t + "_c8"), again = scratch(t + "_again");
        o.require(run_cli(replay + " --concurrency 1 --out " + c1.string()) == 0, t + ": replay failed");
        o.require(run_cli(replay + " --concurrency 8 --out " + c8.string()) == 0, t + ": replay failed");
        o.require(run_cli(replay + " --concurrency 8 --out " + again.string()) == 0, t + ": replay failed");
        for (const char* ext : {".json", ".txt", ".csv"}) {
            const auto base = slurp(c1.string() + ext);
            o.require(!base.empty(), t + ext + " missing");
            o.require(base == slurp(c8.string() + ext), t + ext + " differs across concurrency");
            o.require(base == slurp(again.string() + ext), t + ext + " differs across runs");
        }
    }

    // service driven by a recorded transcript
    eval::OracleAgent agent;
    std::vector<eval::EpisodeRecord> episodes;
    for (auto task : {eval::kSokoban, eval::kGeneralPoints}) {
        eval::EvalConfig cfg;
        cfg.task = std::string(task);
        cfg.episodes_per_split = 8;
        cfg.seed = 12;
        auto run = eval::evaluate(cfg, agent);
        episodes.insert(episodes.end(), run.episodes.begin(), run.episodes.end());
    }
    auto drive = [&](std::size_t concurrency) {
        service::EpisodeService svc;
        service::HttpServer http(svc);
        const int port = http.bind("127.0.0.1", 0);
        std::thread thread([&] { http.listen(); });
        http.wait_until_ready();
        std::string out;
        try {
            out = service::replay_transcript("http://127.0.0.1:" + std::to_string(port), episodes, concurrency).dump();
        } catch (...) {
            http.stop();
            thread.join();
            throw;
        }
        http.stop();
        thread.join();
        return out;
    };
    const auto one = drive(1);
    o.require(one == drive(8), "service replay differs across concurrency");
    o.require(one == drive(8), "service replay differs across runs");
    const auto parsed = nlohmann::json::parse(one);
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        o.require(parsed[i].at("success") == episodes[i].success, "service success disagrees with eval");
    }
    return o;
}

Outcome golden_prompts() {
    Outcome o;
    const fs::path dir = fs::path(TASKBENCH_FIXTURE_DIR) / "prompts";
    int checked = 0;
    for (const auto& v : variants::builtin_variants().sokoban) {
        const auto state = sokoban::parse_observation(golden::sokoban_observations().at(v.name));
        o.require(variants::render_sokoban_prompt(state, v) == slurp(dir / ("sokoban_" + v.name + ".txt")), v.name);
        ++checked;
    }
    for (const auto& [name, ranks] : golden::gp_hands()) {
        const auto& cfg = gp::split(name);
        gp::GPInstance inst;
        for (int r : ranks) inst.cards.push_back(gp::Card{r});
        inst.mapping = gp::face_mapping(cfg.prompt_mapping);
        inst.scoring_mapping = gp::face_mapping(cfg.scoring_mapping);
        inst.split = cfg.name;
        o.require(variants::render_gp_prompt(inst) == slurp(dir / ("gp_" + name + ".txt")), "gp " + name);
        ++checked;
    }
    if (o.pass) o.detail = std::to_string(checked) + " fixtures";
    return o;
}

}  // namespace

int main() {
    report(1, "solver soundness", solver_soundness);
    report(2, "solver minimality", solver_minimality);
    report(3, "general points oracle agreement", gp_oracle_agreement);
    report(4, "rubric table", rubric_table);
    report(5, "frozen prompt mechanics", frozen_prompt_mechanics);
    report(6, "validity metric", validity_metric);
    report(7, "dataset contracts", dataset_contracts);
    report(8, "chain-of-thought filter", cot_filter);
    report(9, "rl math", rl_math);
    report(10, "wire and cli determinism", wire_determinism);
    report(11, "golden prompts", golden_prompts);
    return failures == 0 ? 0 : 1;
}
