#include "taskbench/eval.hpp"

#include "taskbench/datagen.hpp"
#include "taskbench/parallel.hpp"
#include "taskbench/random.hpp"
#include "taskbench/response.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace taskbench::eval {

using sokoban::Action;

namespace {

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string join_sum(std::span<const int> values) {
    std::string out;
    for (int v : values) {
        if (!out.empty()) out += '+';
        out += std::to_string(v);
    }
    return out;
}

std::string gp_oracle_answer(const gp::GPInstance& inst, std::span<const int> values) {
    gp::GPAnswer answer;
    for (gp::Card c : inst.cards) answer.cards.push_back(gp::card_label(c));
    answer.numbers.assign(values.begin(), values.end());
    // No solution under these values: still answer, with an arithmetically wrong sum.
    answer.formula = gp::solve_exhaustive(values, inst.target).value_or(join_sum(values));
    return gp::format_answer(answer);
}

std::string group_of(std::string_view task, const std::string& split) {
    if (task == kSokoban) {
        return std::string(variants::sokoban_group_name(variants::builtin_variants().sokoban_variant(split).group));
    }
    return std::string(gp::split_group_name(gp::split(split).group));
}

}  // namespace

// ---------------------------------------------------------------------------
// Agents

std::string OracleAgent::respond(const AgentQuery& q) {
    if (q.state && q.variant) {
        const auto plan = sokoban::solve_bfs(*q.state);
        const Action a = plan && !plan->empty() ? plan->front() : Action::Up;
        const std::string token =
            vocabulary_ == Vocabulary::Prompted ? q.variant->token(a) : std::string(sokoban::action_name(a));
        return format_response("", token);
    }
    if (q.instance) {
        const auto values = vocabulary_ == Vocabulary::Prompted
                                ? q.instance->prompted_values()
                                : gp::mapped_values(q.instance->cards, gp::face_mapping("all_10"));
        return format_response("", gp_oracle_answer(*q.instance, values));
    }
    throw std::logic_error("oracle agent needs the in-process state or instance");
}

ScriptedAgent ScriptedAgent::constant(std::string response) {
    return ScriptedAgent([response = std::move(response)](const AgentQuery&) { return response; });
}

ReplayAgent::ReplayAgent(std::span<const EpisodeRecord> transcript) {
    for (const auto& ep : transcript) {
        for (std::size_t t = 0; t < ep.turns.size(); ++t) {
            responses_[{ep.task, ep.split, ep.seed, static_cast<int>(t)}] = ep.turns[t].response;
        }
    }
}

ReplayAgent ReplayAgent::from_file(const std::filesystem::path& path) {
    const auto episodes = read_transcript(path);
    return ReplayAgent(episodes);
}

std::string ReplayAgent::respond(const AgentQuery& q) {
    const auto it = responses_.find({q.task, q.split, q.seed, q.turn});
    if (it == responses_.end()) {
        throw TransportError("no recorded response for " + q.task + "/" + q.split + " seed " + std::to_string(q.seed) +
                             " turn " + std::to_string(q.turn));
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Records

Json EpisodeRecord::to_json() const {
    Json turn_list = Json::array();
    for (const auto& t : turns) {
        turn_list.push_back(Json{{"prompt", t.prompt},
                                 {"response", t.response},
                                 {"decoded", t.decoded},
                                 {"score", t.score},
                                 {"reward", t.reward},
                                 {"valid", t.valid}});
    }
    Json j{{"task", task},
           {"split", split},
           {"seed", seed},
           {"episode", episode},
           {"turns", turn_list},
           {"success", success},
           {"validity_fraction", validity_fraction},
           {"steps_used", steps_used}};
    j["error"] = error ? Json(*error) : Json(nullptr);
    return j;
}

EpisodeRecord EpisodeRecord::from_json(const Json& j) {
    EpisodeRecord r;
    r.task = j.at("task").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.episode = j.value("episode", std::size_t{0});
    for (const auto& t : j.at("turns")) {
        Turn turn;
        turn.prompt = t.value("prompt", std::string());
        turn.response = t.at("response").get<std::string>();
        turn.decoded = t.value("decoded", std::string());
        turn.score = t.value("score", 0);
        turn.reward = t.value("reward", 0.0);
        turn.valid = t.value("valid", false);
        r.turns.push_back(std::move(turn));
    }
    r.success = j.value("success", false);
    r.validity_fraction = j.value("validity_fraction", 0.0);
    r.steps_used = j.value("steps_used", 0);
    if (j.contains("error") && j.at("error").is_string()) r.error = j.at("error").get<std::string>();
    return r;
}

void write_transcript(std::span<const EpisodeRecord> episodes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& ep : episodes) out << ep.to_json().dump() << '\n';
    if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

std::vector<EpisodeRecord> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<EpisodeRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            out.push_back(EpisodeRecord::from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episodes

EpisodeRecord run_sokoban_episode(const sokoban::SokobanState& start, const variants::SokobanVariant& variant,
                                  Agent& agent, const sokoban::RewardSchedule& schedule, std::uint64_t seed,
                                  int max_steps) {
    EpisodeRecord rec;
    rec.task = kSokoban;
    rec.split = variant.name;
    rec.seed = seed;
    auto state = start;
    int valid = 0;
    while (!state.solved() && state.steps_taken < max_steps) {
        AgentQuery q;
        q.task = rec.task;
        q.split = rec.split;
        q.seed = seed;
        q.turn = static_cast<int>(rec.turns.size());
        q.prompt = variants::render_sokoban_prompt(state, variant);
        q.state = &state;
        q.variant = &variant;

        Turn turn;
        turn.prompt = q.prompt;
        try {
            turn.response = agent.respond(q);
        } catch (const std::exception& e) {
            rec.error = e.what();
            break;
        }
        const auto parsed = parse_response(turn.response);
        turn.valid = variants::check_validity(parsed, variant);
        const auto action =
            parsed.format_ok ? variants::decode_action(parsed.answer_text, variant) : std::optional<Action>{};
        // An undecodable answer is a no-op that still spends a step.
        const auto outcome = action ? sokoban::step(state, *action, schedule, max_steps)
                                    : sokoban::idle_step(state, schedule, max_steps);
        if (action) turn.decoded = sokoban::action_name(*action);
        turn.reward = outcome.reward;
        valid += turn.valid;
        rec.turns.push_back(std::move(turn));
        state = outcome.next_state;
        if (outcome.terminated) break;
    }
    rec.success = !rec.error && state.solved();
    rec.steps_used = state.steps_taken - start.steps_taken;
    rec.validity_fraction = rec.turns.empty() ? 0.0 : static_cast<double>(valid) / rec.turns.size();
    return rec;
}

EpisodeRecord run_gp_trial(const gp::GPInstance& instance, Agent& agent) {
    EpisodeRecord rec;
    rec.task = kGeneralPoints;
    rec.split = instance.split;
    rec.seed = instance.seed;
    AgentQuery q;
    q.task = rec.task;
    q.split = rec.split;
    q.seed = instance.seed;
    q.prompt = variants::render_gp_prompt(instance);
    q.instance = &instance;

    Turn turn;
    turn.prompt = q.prompt;
    try {
        turn.response = agent.respond(q);
    } catch (const std::exception& e) {
        rec.error = e.what();
        return rec;
    }
    const auto score = gp::score_answer(turn.response, instance);
    turn.score = score.points;
    turn.reward = score.points;
    turn.decoded = formula::verdict_name(score.verdict);
    turn.valid = variants::check_validity(parse_response(turn.response), instance);
    rec.success = score.success;
    rec.validity_fraction = turn.valid ? 1.0 : 0.0;
    rec.steps_used = 1;
    rec.turns.push_back(std::move(turn));
    return rec;
}

// ---------------------------------------------------------------------------
// Batches and reports

Json EvalConfig::to_json() const {
    const auto names = splits.empty() ? default_splits(task) : splits;
    // concurrency is deliberately absent: it must not change the report
    return Json{{"task", task},
                {"splits", names},
                {"episodes_per_split", episodes_per_split},
                {"seed", seed},
                {"schedule",
                 {schedule.move_penalty, schedule.box_on_target, schedule.box_off_target, schedule.all_placed_bonus}}};
}

std::vector<std::string> default_splits(std::string_view task) {
    std::vector<std::string> names;
    if (task == kSokoban) {
        for (const auto& v : variants::builtin_variants().sokoban) names.push_back(v.name);
    } else if (task == kGeneralPoints) {
        for (const auto& s : gp::splits()) {
            if (s.group != gp::SplitGroup::Training) names.push_back(s.name);
        }
    } else {
        throw std::invalid_argument("unknown task '" + std::string(task) + "'");
    }
    return names;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, index); }

int EvalReport::errored() const {
    return std::accumulate(splits.begin(), splits.end(), 0, [](int n, const SplitResult& s) { return n + s.errored; });
}

int EvalReport::total_episodes() const {
    return std::accumulate(splits.begin(), splits.end(), 0, [](int n, const SplitResult& s) { return n + s.episodes; });
}

const SplitResult& EvalReport::split(std::string_view name) const {
    for (const auto& s : splits) {
        if (s.split == name) return s;
    }
    throw std::out_of_range("split not in report: " + std::string(name));
}

Json EvalReport::to_json() const {
    Json rows = Json::array();
    for (const auto& s : splits) {
        rows.push_back(Json{{"split", s.split},
                            {"group", s.group},
                            {"episodes", s.episodes},
                            {"successes", s.successes},
                            {"errored", s.errored},
                            {"valid_turns", s.valid_turns},
                            {"total_turns", s.total_turns},
                            {"success_rate", s.success_rate()},
                            {"validity_rate", s.validity_rate()}});
    }
    return Json{{"task", task},
                {"agent", agent},
                {"seed", seed},
                {"episodes_per_split", episodes_per_split},
                {"config_digest", config_digest},
                {"errored", errored()},
                {"partial_failure", partial_failure()},
                {"splits", rows}};
}

std::string EvalReport::to_table() const {
    // Cell widths per column, then groups separated by " | ".
    std::vector<std::size_t> width;
    for (const auto& s : splits) width.push_back(std::max<std::size_t>(s.split.size(), 4));
    constexpr std::size_t kLabel = 9;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    auto row = [&](const std::string& label, auto cell_of) {
        std::string line = pad(label, kLabel);
        for (std::size_t i = 0; i < splits.size(); ++i) {
            const bool new_group = i == 0 || splits[i].group != splits[i - 1].group;
            line += new_group ? " | " : "  ";
            line += pad(cell_of(i), width[i]);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        return line + '\n';
    };

    std::ostringstream out;
    out << "task " << task << ", agent " << agent << ", seed " << seed << ", " << episodes_per_split
        << " episodes per split\n";
    // group header spans its columns
    std::string header = pad("", kLabel);
    for (std::size_t i = 0; i < splits.size();) {
        std::size_t span = width[i];
        std::size_t j = i + 1;
        while (j < splits.size() && splits[j].group == splits[i].group) span += 2 + width[j++];
        header += " | " + pad(splits[i].group, span);
        i = j;
    }
    while (!header.empty() && header.back() == ' ') header.pop_back();
    out << header << '\n';
    out << row("split", [&](std::size_t i) { return splits[i].split; });
    out << row("success", [&](std::size_t i) { return fixed(splits[i].success_rate(), 2); });
    out << row("validity", [&](std::size_t i) { return fixed(splits[i].validity_rate(), 2); });
    if (partial_failure()) out << "errored episodes: " << errored() << '\n';
    return out.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "split,group,episodes,successes,errored,success_rate,validity_rate\n";
    for (const auto& s : splits) {
        out << s.split << ',' << s.group << ',' << s.episodes << ',' << s.successes << ',' << s.errored << ','
            << fixed(s.success_rate(), 4) << ',' << fixed(s.validity_rate(), 4) << '\n';
    }
    return out.str();
}

EvalRun evaluate(const EvalConfig& config, Agent& agent) {
    if (config.episodes_per_split < 0) throw std::invalid_argument("episodes_per_split must be non-negative");
    const auto names = config.splits.empty() ? default_splits(config.task) : config.splits;
    for (const auto& name : names) group_of(config.task, name);  // validates every name up front

    const auto per_split = static_cast<std::size_t>(config.episodes_per_split);
    EvalRun run;
    run.episodes.resize(names.size() * per_split);
    parallel_for_index(run.episodes.size(), config.concurrency, [&](std::size_t job) {
        const auto& name = names[job / per_split];
        const std::size_t index = job % per_split;
        const std::uint64_t seed = episode_seed(config.seed, index);
        EpisodeRecord rec;
        try {
            if (config.task == kSokoban) {
                const auto& variant = variants::builtin_variants().sokoban_variant(name);
                const auto puzzle = sokoban::generate_puzzle(variant.puzzle_spec(seed));
                rec = run_sokoban_episode(puzzle.state, variant, agent, config.schedule, seed);
            } else {
                rec = run_gp_trial(gp::generate_instance(gp::split(name), seed), agent);
            }
        } catch (const std::exception& e) {
            rec = EpisodeRecord{};
            rec.task = config.task;
            rec.split = name;
            rec.seed = seed;
            rec.error = e.what();
        }
        rec.episode = index;
        run.episodes[job] = std::move(rec);
    });

    auto& report = run.report;
    report.task = config.task;
    report.agent = agent.kind();
    report.seed = config.seed;
    report.episodes_per_split = config.episodes_per_split;
    report.config_digest = datagen::digest(config.to_json());
    for (std::size_t s = 0; s < names.size(); ++s) {
        SplitResult r;
        r.split = names[s];
        r.group = group_of(config.task, names[s]);
        for (std::size_t i = 0; i < per_split; ++i) {
            const auto& ep = run.episodes[s * per_split + i];
            ++r.episodes;
            r.successes += ep.success;
            r.errored += ep.error.has_value();
            r.total_turns += static_cast<int>(ep.turns.size());
            r.valid_turns += static_cast<int>(std::count_if(ep.turns.begin(), ep.turns.end(),
                                                            [](const Turn& t) { return t.valid; }));
        }
        report.splits.push_back(std::move(r));
    }
    return run;
}

}  // namespace taskbench::eval
