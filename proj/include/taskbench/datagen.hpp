#pragma once

#include "taskbench/general_points.hpp"
#include "taskbench/sokoban.hpp"
#include "taskbench/variants.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskbench::datagen {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kTrain = "train";
inline constexpr std::string_view kValidation = "validation";

/// One supervised example. Serialised with keys in exactly this order.
struct DemonstrationRecord {
    std::string prompt;
    std::string response;
    std::string task;
    std::string variant;
    std::uint64_t seed = 0;
    std::string split;
    Json extra = Json::object();

    bool operator==(const DemonstrationRecord&) const = default;
};

Json to_json(const DemonstrationRecord& record);
/// Throws std::invalid_argument when fields are missing, mistyped or unexpected.
DemonstrationRecord record_from_json(const Json& j);

/// Deterministic 95/5 train/validation assignment from (seed, record index).
std::string_view assign_split(std::uint64_t seed, std::uint64_t index);

inline constexpr int kPaperSokobanPairs = 3981;
inline constexpr int kPaperGpDemos = 10'000;

struct SokobanDemoConfig {
    std::string variant = "SimpleSokoban";
    bool diverse = false;  // fresh random-word vocabulary per record
    int target_pairs = kPaperSokobanPairs;
    int max_skipped_puzzles = 100'000;
    std::size_t workers = 1;
};

/// One record per (state, expert action) along BFS solutions of generated
/// puzzles. Whole trajectories only: a puzzle whose solution would overshoot
/// target_pairs is skipped, so the count is met exactly.
std::vector<DemonstrationRecord> gen_sokoban_demos(const SokobanDemoConfig& config, std::uint64_t seed);

struct GpDemoConfig {
    std::string split = "training";
    bool diverse = false;  // each record draws one regime from gp::diversity_regimes()
    int count = kPaperGpDemos;
    std::size_t workers = 1;
};

std::vector<DemonstrationRecord> gen_gp_demos(const GpDemoConfig& config, std::uint64_t seed);

/// Rebuilds a GP instance from {"cards", "mapping", "scoring_mapping"?, "target"?, "split"?};
/// nullopt when the context is incomplete or names unknown cards or mappings.
std::optional<gp::GPInstance> gp_instance_from_context(const Json& context);

/// Rebuilds the variant a Sokoban record was prompted with (from extra.action_tokens).
variants::SokobanVariant record_variant(const DemonstrationRecord& record);

/// Label check: Sokoban labels must replay their trajectory to success, GP labels must score +5.
/// Returns the number of records that fail.
std::size_t count_label_failures(std::span<const DemonstrationRecord> records);

// ---------------------------------------------------------------------------
// Chain-of-thought rejection sampling

/// A candidate response plus enough context to verify its final answer.
///   sokoban: {"observation", "expert_action"?, "variant" | "action_tokens"}
///   gp:      {"cards", "mapping", "scoring_mapping"?, "target"?, "split"?}
struct CotCandidate {
    std::string prompt_id;
    std::string task;
    std::string response;
    Json context;
};

struct CotFilterResult {
    std::vector<DemonstrationRecord> accepted;
    std::size_t rejected_incorrect = 0;
    std::size_t rejected_malformed = 0;
    std::size_t over_quota = 0;
};

inline constexpr int kCandidatesPerPrompt = 16;

/// Keeps candidates whose final answer verifies, at most k_per_prompt per prompt id,
/// in input order. Responses are kept verbatim, think text included.
CotFilterResult filter_cot(std::span<const CotCandidate> candidates, int k_per_prompt = kCandidatesPerPrompt);

/// Reads candidates from JSON-lines; unparsable lines become malformed candidates.
std::vector<CotCandidate> load_cot_candidates(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Persistence

class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct DatasetManifest {
    std::size_t total = 0;
    std::map<std::string, std::size_t> per_split;
    std::map<std::string, std::size_t> per_variant;
    std::string config_digest;
    std::uint64_t seed = 0;

    Json to_json() const;
};

std::filesystem::path manifest_path(const std::filesystem::path& dataset);

/// Writes one JSON object per line plus "<path>.manifest.json". Throws DatasetError on I/O failure.
DatasetManifest persist_dataset(std::span<const DemonstrationRecord> records, const std::filesystem::path& path,
                                const std::string& config_digest = {}, std::uint64_t seed = 0);

/// Throws DatasetError naming the first bad line.
std::vector<DemonstrationRecord> load_dataset(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string digest(const nlohmann::ordered_json& config);

}  // namespace taskbench::datagen
