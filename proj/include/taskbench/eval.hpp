#pragma once

#include "taskbench/general_points.hpp"
#include "taskbench/sokoban.hpp"
#include "taskbench/variants.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace taskbench::eval {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kSokoban = "sokoban";
inline constexpr std::string_view kGeneralPoints = "gp";

/// What an agent sees for one turn. The state/instance pointers are for
/// in-process agents (oracles); remote agents only use the prompt.
struct AgentQuery {
    std::string task;
    std::string split;  // variant or GP split name
    std::uint64_t seed = 0;
    int turn = 0;
    std::string prompt;
    const sokoban::SokobanState* state = nullptr;
    const variants::SokobanVariant* variant = nullptr;
    const gp::GPInstance* instance = nullptr;
};

/// Raised by agents when no completion could be obtained.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Agents must be safe to call from several threads at once.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string respond(const AgentQuery& query) = 0;
    virtual std::string kind() const = 0;
};

/// Answers with the exact solvers. Prompted vocabulary by default; Canonical
/// vocabulary makes it the "frozen" agent that ignores the prompt's mapping.
class OracleAgent : public Agent {
public:
    enum class Vocabulary { Prompted, Canonical };
    explicit OracleAgent(Vocabulary vocabulary = Vocabulary::Prompted) : vocabulary_(vocabulary) {}
    std::string respond(const AgentQuery& query) override;
    std::string kind() const override { return vocabulary_ == Vocabulary::Prompted ? "oracle" : "frozen"; }

private:
    Vocabulary vocabulary_;
};

/// Fixed policy: a function of the query.
class ScriptedAgent : public Agent {
public:
    using Policy = std::function<std::string(const AgentQuery&)>;
    explicit ScriptedAgent(Policy policy) : policy_(std::move(policy)) {}
    /// Always answers with the same response text.
    static ScriptedAgent constant(std::string response);
    std::string respond(const AgentQuery& query) override { return policy_(query); }
    std::string kind() const override { return "scripted"; }

private:
    Policy policy_;
};

struct EpisodeRecord;

/// Replays responses recorded in a transcript, keyed by (task, split, seed, turn).
class ReplayAgent : public Agent {
public:
    explicit ReplayAgent(std::span<const EpisodeRecord> transcript);
    static ReplayAgent from_file(const std::filesystem::path& path);
    std::string respond(const AgentQuery& query) override;
    std::string kind() const override { return "replay"; }

private:
    std::map<std::tuple<std::string, std::string, std::uint64_t, int>, std::string> responses_;
};

struct RemoteAgentConfig {
    std::string url = "http://127.0.0.1:8000";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string token_env = "TASKBENCH_API_KEY";
    int retries = 3;
    std::chrono::milliseconds backoff{200};
    std::chrono::seconds timeout{120};
};

/// Chat-completion client: one user message per turn, assistant text out.
/// Transient failures are retried with exponential backoff, then TransportError.
class RemoteAgent : public Agent {
public:
    explicit RemoteAgent(RemoteAgentConfig config);
    std::string respond(const AgentQuery& query) override;
    std::string kind() const override { return "remote"; }

private:
    RemoteAgentConfig config_;
    std::string token_;
};

// ---------------------------------------------------------------------------

struct Turn {
    std::string prompt;
    std::string response;
    std::string decoded;  // action name (Sokoban) or empty when undecodable
    int score = 0;        // GP rubric points
    double reward = 0.0;
    bool valid = false;
};

struct EpisodeRecord {
    std::string task;
    std::string split;
    std::uint64_t seed = 0;  // puzzle or instance seed
    std::size_t episode = 0;
    std::vector<Turn> turns;
    bool success = false;
    double validity_fraction = 0.0;
    int steps_used = 0;
    std::optional<std::string> error;

    Json to_json() const;
    static EpisodeRecord from_json(const Json& j);
};

void write_transcript(std::span<const EpisodeRecord> episodes, const std::filesystem::path& path);
std::vector<EpisodeRecord> read_transcript(const std::filesystem::path& path);

/// Agent transport failures end the episode with an error tag; they are not rethrown.
EpisodeRecord run_sokoban_episode(const sokoban::SokobanState& start, const variants::SokobanVariant& variant,
                                  Agent& agent, const sokoban::RewardSchedule& schedule = {},
                                  std::uint64_t seed = 0, int max_steps = sokoban::kDefaultMaxSteps);

EpisodeRecord run_gp_trial(const gp::GPInstance& instance, Agent& agent);

// ---------------------------------------------------------------------------

inline constexpr int kDefaultEpisodesPerSplit = 100;

struct EvalConfig {
    std::string task = std::string(kSokoban);
    std::vector<std::string> splits;  // empty: every split of the task, in report order
    int episodes_per_split = kDefaultEpisodesPerSplit;
    std::uint64_t seed = 0;
    std::size_t concurrency = 1;
    sokoban::RewardSchedule schedule;

    Json to_json() const;
};

/// Split names in report column order.
std::vector<std::string> default_splits(std::string_view task);

struct SplitResult {
    std::string split;
    std::string group;
    int episodes = 0;
    int successes = 0;
    int errored = 0;
    int valid_turns = 0;
    int total_turns = 0;

    double success_rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
    double validity_rate() const { return total_turns ? static_cast<double>(valid_turns) / total_turns : 0.0; }
};

struct EvalReport {
    std::string task;
    std::string agent;
    std::uint64_t seed = 0;
    int episodes_per_split = 0;
    std::string config_digest;
    std::vector<SplitResult> splits;

    int errored() const;
    int total_episodes() const;
    bool partial_failure() const { return errored() > 0; }
    bool total_failure() const { return total_episodes() > 0 && errored() == total_episodes(); }
    const SplitResult& split(std::string_view name) const;

    Json to_json() const;
    /// Columns grouped ID | instruction | difficulty | Fake (GP adds mixed).
    std::string to_table() const;
    std::string to_csv() const;
};

struct EvalRun {
    EvalReport report;
    std::vector<EpisodeRecord> episodes;  // split-major, episode index order
};

/// Episode i of every split uses the same puzzle/instance seed derive_seed(seed, i),
/// so the fake split shares its puzzles with the ID split.
EvalRun evaluate(const EvalConfig& config, Agent& agent);

/// Instance seed used by evaluate for episode `index`.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t index);

}  // namespace taskbench::eval
