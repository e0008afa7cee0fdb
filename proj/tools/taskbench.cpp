// taskbench command-line entry point.
//
// Exit status: 0 success, 1 failure or partial failure, 2 usage error.

#include "json_config.hpp"

#include "taskbench/datagen.hpp"
#include "taskbench/eval.hpp"
#include "taskbench/parallel.hpp"
#include "taskbench/random.hpp"
#include "taskbench/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

namespace {

using namespace taskbench;
using Json = nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    std::string config;
};

void add_common(CLI::App* sub, Common& common) {
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", common.out, "Output path (stdout when omitted)");
    sub->add_option("--config", common.config, "JSON (or TOML) file of option values; unknown keys are rejected");
}

/// Fills options of `sub` that were not given on the command line from the
/// --config file. Keys are long option names without dashes.
void apply_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config file " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = cli::JsonOrTomlConfig().from_config(in);
    } catch (const CLI::Error& e) {
        throw UsageError(path + ": " + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty() || item.name == "config") throw UsageError(path + ": unknown key '" + item.fullname() + "'");
        CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
        if (!opt) throw UsageError(path + ": unknown key '" + item.name + "'");
        if (opt->count() > 0) continue;  // the command line wins
        try {
            opt->add_result(item.inputs);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw UsageError(path + ": key '" + item.name + "': " + e.what());
        }
    }
}

/// Writes to --out when given, else stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void require_task(const std::string& task) {
    if (task != eval::kSokoban && task != eval::kGeneralPoints) {
        throw UsageError("--task must be 'sokoban' or 'gp', got '" + task + "'");
    }
}

// ---------------------------------------------------------------------------

struct GenPuzzles {
    Common common;
    std::string task = "sokoban";
    std::string variant;
    int count = 10;
    std::size_t workers = 1;

    int run() {
        require_task(task);
        if (count < 0) throw UsageError("--count must be non-negative");
        std::vector<std::string> lines(static_cast<std::size_t>(count));
        if (task == eval::kSokoban) {
            const auto& v = variants::builtin_variants().sokoban_variant(variant.empty() ? "SimpleSokoban" : variant);
            parallel_for_index(lines.size(), workers, [&](std::size_t i) {
                const auto seed = derive_seed(common.seed, i);
                const auto puzzle = sokoban::generate_puzzle(v.puzzle_spec(seed));
                Json solution = Json::array(), tokens = Json::array();
                for (auto a : puzzle.solution) {
                    solution.push_back(sokoban::action_name(a));
                    tokens.push_back(v.token(a));
                }
                lines[i] = Json{{"variant", v.name},        {"seed", seed},         {"observation", sokoban::render(puzzle.state)},
                                {"solution", solution},     {"tokens", tokens},     {"attempts", puzzle.attempts}}
                               .dump();
            });
        } else {
            const auto& cfg = gp::split(variant.empty() ? "training" : variant);
            parallel_for_index(lines.size(), workers, [&](std::size_t i) {
                const auto seed = derive_seed(common.seed, i);
                const auto inst = gp::generate_instance(cfg, seed);
                Json cards = Json::array();
                for (auto c : inst.cards) cards.push_back(gp::card_label(c));
                lines[i] = Json{{"split", inst.split},
                                {"seed", seed},
                                {"cards", cards},
                                {"mapping", inst.mapping.name},
                                {"scoring_mapping", inst.scoring_mapping.name},
                                {"target", inst.target},
                                {"solution", gp::solve_exhaustive(inst.scoring_values(), inst.target).value_or("")}}
                               .dump();
            });
        }
        Output out(common.out);
        for (const auto& line : lines) out.stream() << line << '\n';
        return kOk;
    }
};

struct GenData {
    Common common;
    std::string task;
    std::string variant;
    int count = -1;
    bool diverse = false;
    std::size_t workers = 1;
    std::string candidates;
    int k = datagen::kCandidatesPerPrompt;

    int run() {
        require_task(task);
        Json effective{{"task", task}, {"variant", variant}, {"diverse", diverse}, {"seed", common.seed}};
        std::vector<datagen::DemonstrationRecord> records;
        int status = kOk;
        if (!candidates.empty()) {
            const auto pool = datagen::load_cot_candidates(candidates);
            auto result = datagen::filter_cot(pool, k);
            std::cerr << "accepted " << result.accepted.size() << ", incorrect " << result.rejected_incorrect
                      << ", malformed " << result.rejected_malformed << ", over quota " << result.over_quota << '\n';
            records = std::move(result.accepted);
            effective["candidates"] = candidates;
            effective["k"] = k;
            if (result.rejected_malformed > 0) status = kFailure;
        } else if (task == eval::kSokoban) {
            datagen::SokobanDemoConfig cfg;
            if (!variant.empty()) cfg.variant = variant;
            cfg.diverse = diverse;
            if (count >= 0) cfg.target_pairs = count;
            cfg.workers = workers;
            effective["count"] = cfg.target_pairs;
            records = datagen::gen_sokoban_demos(cfg, common.seed);
        } else {
            datagen::GpDemoConfig cfg;
            if (!variant.empty()) cfg.split = variant;
            cfg.diverse = diverse;
            if (count >= 0) cfg.count = count;
            cfg.workers = workers;
            effective["count"] = cfg.count;
            records = datagen::gen_gp_demos(cfg, common.seed);
        }
        if (common.out.empty()) {
            for (const auto& r : records) std::cout << datagen::to_json(r).dump() << '\n';
        } else {
            const auto manifest = datagen::persist_dataset(records, common.out, datagen::digest(effective), common.seed);
            std::cerr << "wrote " << manifest.total << " records to " << common.out << '\n';
        }
        return status;
    }
};

struct Solve {
    Common common;
    std::string task;
    std::string cards;
    std::string mapping = "all_10";
    int target = gp::kDefaultTarget;
    std::string variant = "SimpleSokoban";
    std::string observation;

    int run() {
        require_task(task);
        Output out(common.out);
        if (task == eval::kGeneralPoints) {
            if (cards.empty()) throw UsageError("--cards is required for gp");
            const auto& m = gp::face_mapping(mapping);
            std::vector<int> values;
            for (const auto& label : split_list(cards)) {
                // plain numbers are taken as values, letters as cards under --mapping
                if (label.find_first_not_of("0123456789") == std::string::npos && label.size() <= 2) {
                    values.push_back(std::stoi(label));
                    continue;
                }
                const auto card = gp::card_from_label(label);
                if (!card) throw UsageError("not a card: '" + label + "'");
                values.push_back(gp::map_card_value(*card, m));
            }
            const auto formula = gp::solve_exhaustive(values, target);
            if (!formula) {
                std::cerr << "no solution\n";
                return kFailure;
            }
            out.stream() << *formula << '\n';
            return kOk;
        }
        const auto& v = variants::builtin_variants().sokoban_variant(variant);
        sokoban::SokobanState state;
        if (!observation.empty()) {
            std::ifstream in(observation, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open " + observation);
            std::stringstream ss;
            ss << in.rdbuf();
            auto text = ss.str();
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
            state = sokoban::parse_observation(text);
        } else {
            state = sokoban::generate_puzzle(v.puzzle_spec(common.seed)).state;
        }
        const auto plan = sokoban::solve_bfs(state);
        out.stream() << sokoban::render(state) << '\n';
        if (!plan) {
            std::cerr << "no solution within " << sokoban::kDefaultMaxSteps << " steps\n";
            return kFailure;
        }
        std::string line;
        for (auto a : *plan) line += (line.empty() ? "" : " ") + v.token(a);
        out.stream() << line << '\n';
        return kOk;
    }
};

struct Score {
    Common common;
    std::string responses;

    int run() {
        if (responses.empty()) throw UsageError("--responses is required");
        const auto rows = datagen::load_cot_candidates(responses);
        Output out(common.out);
        std::size_t malformed = 0, successes = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            // Score each row on its own by running it through the verifier with k = 1.
            const auto& row = rows[i];
            Json line{{"index", i}, {"task", row.task}};
            const std::array<datagen::CotCandidate, 1> one{row};
            const auto verdict = datagen::filter_cot(one, 1);
            if (verdict.rejected_malformed) {
                ++malformed;
                line["error"] = "malformed row";
            } else if (row.task == eval::kGeneralPoints) {
                const auto inst = *datagen::gp_instance_from_context(row.context);
                const auto s = gp::score_answer(row.response, inst);
                line["points"] = s.points;
                line["verdict"] = formula::verdict_name(s.verdict);
                line["success"] = s.success;
            } else {
                line["success"] = !verdict.accepted.empty();
            }
            successes += line.value("success", false);
            out.stream() << line.dump() << '\n';
        }
        std::cerr << rows.size() << " rows, " << successes << " correct, " << malformed << " malformed\n";
        return malformed ? kFailure : kOk;
    }
};

struct Eval {
    Common common;
    std::string task = "sokoban";
    std::string splits;
    int episodes = eval::kDefaultEpisodesPerSplit;
    std::size_t concurrency = 1;
    std::string agent = "oracle";
    std::string transcript;
    std::string save_transcript;
    std::string response;
    eval::RemoteAgentConfig remote;
    int backoff_ms = 200;

    std::unique_ptr<eval::Agent> make_agent() {
        if (agent == "oracle") return std::make_unique<eval::OracleAgent>();
        if (agent == "frozen") return std::make_unique<eval::OracleAgent>(eval::OracleAgent::Vocabulary::Canonical);
        if (agent == "scripted") return std::make_unique<eval::ScriptedAgent>(eval::ScriptedAgent::constant(response));
        if (agent == "replay") {
            if (transcript.empty()) throw UsageError("--transcript is required for the replay agent");
            return std::make_unique<eval::ReplayAgent>(eval::ReplayAgent::from_file(transcript));
        }
        if (agent == "remote") {
            remote.backoff = std::chrono::milliseconds(backoff_ms);
            return std::make_unique<eval::RemoteAgent>(remote);
        }
        throw UsageError("unknown agent '" + agent + "'");
    }

    int run() {
        require_task(task);
        eval::EvalConfig cfg;
        cfg.task = task;
        cfg.splits = split_list(splits);
        cfg.episodes_per_split = episodes;
        cfg.seed = common.seed;
        cfg.concurrency = concurrency;
        auto a = make_agent();
        const auto result = eval::evaluate(cfg, *a);
        const auto& report = result.report;
        std::cout << report.to_table();
        if (!common.out.empty()) {
            std::ofstream(common.out + ".json", std::ios::binary) << report.to_json().dump(2) << '\n';
            std::ofstream(common.out + ".txt", std::ios::binary) << report.to_table();
            std::ofstream(common.out + ".csv", std::ios::binary) << report.to_csv();
        }
        if (!save_transcript.empty()) eval::write_transcript(result.episodes, save_transcript);
        if (report.partial_failure()) std::cerr << report.errored() << " episodes errored\n";
        // Partial failures are reported in the document; only a total failure is a failing run.
        return report.total_failure() ? kFailure : kOk;
    }
};

struct Serve {
    Common common;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string reward_mode = "env";
    int idle_timeout = 600;

    int run() {
        service::ServiceConfig cfg;
        cfg.reward_mode = service::reward_mode_from_name(reward_mode);
        cfg.idle_timeout = std::chrono::seconds(idle_timeout);
        service::EpisodeService svc(cfg);
        service::HttpServer http(svc);

        // Signals are taken by a waiter thread so stop() never runs inside a handler.
        sigset_t signals;
        sigemptyset(&signals);
        sigaddset(&signals, SIGINT);
        sigaddset(&signals, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &signals, nullptr);

        const int bound = http.bind(host, port);
        if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        std::cerr << "listening on " << host << ":" << bound << '\n';
        std::jthread waiter([&] {
            int sig = 0;
            sigwait(&signals, &sig);
            http.stop();
        });
        http.listen();
        pthread_kill(waiter.native_handle(), SIGTERM);
        return kOk;
    }
};

int list_variants(const Common& common, bool as_json) {
    const auto& reg = variants::builtin_variants();
    Output out(common.out);
    if (as_json) {
        Json sok = Json::array(), splits = Json::array(), maps = Json::array();
        for (const auto& v : reg.sokoban) {
            sok.push_back(Json{{"name", v.name},
                               {"group", variants::sokoban_group_name(v.group)},
                               {"tokens", {v.token(sokoban::Action::Up), v.token(sokoban::Action::Down),
                                           v.token(sokoban::Action::Left), v.token(sokoban::Action::Right)}},
                               {"fake", v.fake},
                               {"size", std::to_string(v.width) + "x" + std::to_string(v.height)},
                               {"boxes", v.num_boxes}});
        }
        for (const auto& s : reg.general_points) {
            splits.push_back(Json{{"name", s.name},
                                  {"group", gp::split_group_name(s.group)},
                                  {"prompt_mapping", s.prompt_mapping},
                                  {"scoring_mapping", s.scoring_mapping},
                                  {"cards", s.num_cards}});
        }
        for (const auto& m : reg.face_mappings) maps.push_back(Json{{"name", m.name}, {"J", m.j}, {"Q", m.q}, {"K", m.k}});
        out.stream() << Json{{"sokoban", sok}, {"general_points", splits}, {"face_mappings", maps}}.dump(2) << '\n';
        return kOk;
    }
    auto& os = out.stream();
    os << "Sokoban variants (tokens for Up Down Left Right):\n";
    for (const auto& v : reg.sokoban) {
        os << "  " << v.name << "  [" << variants::sokoban_group_name(v.group) << "]  " << v.token(sokoban::Action::Up)
           << ' ' << v.token(sokoban::Action::Down) << ' ' << v.token(sokoban::Action::Left) << ' '
           << v.token(sokoban::Action::Right) << "  " << v.width << 'x' << v.height << ", " << v.num_boxes
           << (v.num_boxes == 1 ? " box" : " boxes") << (v.fake ? ", scored canonically" : "") << '\n';
    }
    os << "General Points splits:\n";
    for (const auto& s : reg.general_points) {
        os << "  " << s.name << "  [" << gp::split_group_name(s.group) << "]  prompt " << s.prompt_mapping
           << ", scoring " << s.scoring_mapping << ", " << s.num_cards << " cards\n";
    }
    os << "Face-card mappings (J Q K):\n";
    for (const auto& m : reg.face_mappings) os << "  " << m.name << "  " << m.j << ' ' << m.q << ' ' << m.k << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sokoban and General Points task environments, datasets and evaluation"};
    app.require_subcommand(1);
    app.fallthrough(false);

    GenPuzzles gen_puzzles;
    auto* s = app.add_subcommand("gen-puzzles", "Generate solvable puzzles or hands with their solutions");
    add_common(s, gen_puzzles.common);
    s->add_option("--task", gen_puzzles.task, "sokoban or gp")->capture_default_str();
    s->add_option("--variant", gen_puzzles.variant, "Sokoban variant or GP split");
    s->add_option("--count", gen_puzzles.count)->capture_default_str();
    s->add_option("--workers", gen_puzzles.workers)->capture_default_str();

    GenData gen_data;
    s = app.add_subcommand("gen-data", "Generate an answer-only demonstration dataset, or filter CoT candidates");
    add_common(s, gen_data.common);
    s->add_option("--task", gen_data.task, "sokoban or gp (required)");
    s->add_option("--variant", gen_data.variant, "Sokoban variant or GP split");
    s->add_option("--count", gen_data.count, "Records (default 3981 Sokoban pairs, 10000 GP demos)");
    s->add_flag("--diverse", gen_data.diverse, "Random action words (Sokoban) or mixed face-card regimes (GP)");
    s->add_option("--workers", gen_data.workers)->capture_default_str();
    s->add_option("--candidates", gen_data.candidates, "JSON-lines candidate responses to filter");
    s->add_option("--k", gen_data.k, "Accepted candidates kept per prompt")->capture_default_str();

    Solve solve;
    s = app.add_subcommand("solve", "Solve one hand or puzzle");
    add_common(s, solve.common);
    s->add_option("--task", solve.task, "sokoban or gp (required)");
    s->add_option("--cards", solve.cards, "Comma-separated values or cards, e.g. 3,3,8,8 or K,J,3,A");
    s->add_option("--mapping", solve.mapping, "Face-card mapping")->capture_default_str();
    s->add_option("--target", solve.target)->capture_default_str();
    s->add_option("--variant", solve.variant, "Sokoban variant (puzzle from --seed)")->capture_default_str();
    s->add_option("--observation", solve.observation, "File holding a rendered Sokoban grid");

    Score score;
    s = app.add_subcommand("score", "Score responses against their instances");
    add_common(s, score.common);
    s->add_option("--responses", score.responses, "JSON-lines rows {prompt_id, task, response, context}");

    Eval ev;
    s = app.add_subcommand("eval", "Evaluate an agent on every split of a task");
    add_common(s, ev.common);
    s->add_option("--task", ev.task, "sokoban or gp")->capture_default_str();
    s->add_option("--splits", ev.splits, "Comma-separated split names (default: all)");
    s->add_option("--episodes", ev.episodes, "Episodes per split")->capture_default_str();
    s->add_option("--concurrency", ev.concurrency)->capture_default_str();
    s->add_option("--agent", ev.agent, "oracle, frozen, scripted, replay or remote")->capture_default_str();
    s->add_option("--transcript", ev.transcript, "Transcript for the replay agent");
    s->add_option("--save-transcript", ev.save_transcript, "Write episode records as JSON-lines");
    s->add_option("--response", ev.response, "Fixed response of the scripted agent");
    s->add_option("--url", ev.remote.url, "Remote agent base URL")->capture_default_str();
    s->add_option("--endpoint", ev.remote.path, "Remote agent request path")->capture_default_str();
    s->add_option("--model", ev.remote.model)->capture_default_str();
    s->add_option("--temperature", ev.remote.temperature)->capture_default_str();
    s->add_option("--max-tokens", ev.remote.max_tokens)->capture_default_str();
    s->add_option("--token-env", ev.remote.token_env, "Environment variable holding the bearer token")
        ->capture_default_str();
    s->add_option("--retries", ev.remote.retries)->capture_default_str();
    s->add_option("--backoff-ms", ev.backoff_ms)->capture_default_str();

    Serve serve;
    s = app.add_subcommand("serve", "Run the episode service over HTTP");
    add_common(s, serve.common);
    s->add_option("--host", serve.host)->capture_default_str();
    s->add_option("--port", serve.port)->capture_default_str();
    s->add_option("--reward-mode", serve.reward_mode, "env or action_match")->capture_default_str();
    s->add_option("--idle-timeout", serve.idle_timeout, "Seconds before an idle episode expires")
        ->capture_default_str();

    Common variants_common;
    bool variants_json = false;
    s = app.add_subcommand("variants", "List the variant registry");
    add_common(s, variants_common);
    s->add_flag("--json", variants_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        for (const Common* c : {&gen_puzzles.common, &gen_data.common, &solve.common, &score.common, &ev.common,
                                &serve.common, &variants_common}) {
            if (!c->config.empty()) apply_config(sub, c->config);
        }
        if (name == "gen-puzzles") return gen_puzzles.run();
        if (name == "gen-data") return gen_data.run();
        if (name == "solve") return solve.run();
        if (name == "score") return score.run();
        if (name == "eval") return ev.run();
        if (name == "serve") return serve.run();
        return list_variants(variants_common, variants_json);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    } catch (const std::out_of_range& e) {
        // unknown variant, split or mapping name
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
