#include "taskbench/datagen.hpp"

#include "taskbench/parallel.hpp"
#include "taskbench/random.hpp"
#include "taskbench/response.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

namespace taskbench::datagen {

using sokoban::Action;

namespace {

constexpr std::uint64_t kVocabStream = 0x766f636162ULL;
constexpr std::uint64_t kRegimeStream = 0x726567696d65ULL;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;
constexpr std::size_t kPuzzleBatch = 64;

constexpr std::array<std::string_view, 7> kRecordKeys{"prompt", "response", "task", "variant",
                                                      "seed",   "split",    "extra"};

Json tokens_json(const variants::SokobanVariant& v) {
    Json t = Json::object();
    for (Action a : sokoban::kActions) t[std::string(sokoban::action_name(a))] = v.token(a);
    return t;
}

std::optional<variants::SokobanVariant> variant_from_context(const Json& ctx) {
    if (ctx.contains("action_tokens")) {
        const auto& t = ctx.at("action_tokens");
        if (!t.is_object()) return std::nullopt;
        variants::SokobanVariant v;
        v.name = ctx.value("variant", std::string("Diverse"));
        v.group = variants::SokobanGroup::Diverse;
        for (Action a : sokoban::kActions) {
            const auto key = std::string(sokoban::action_name(a));
            if (!t.contains(key) || !t.at(key).is_string()) return std::nullopt;
            v.tokens[static_cast<std::size_t>(a)] = t.at(key).get<std::string>();
        }
        v.fake = ctx.value("fake", false);
        return v;
    }
    if (ctx.contains("variant") && ctx.at("variant").is_string()) {
        try {
            return variants::builtin_variants().sokoban_variant(ctx.at("variant").get<std::string>());
        } catch (const std::out_of_range&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

Json gp_context(const gp::GPInstance& inst) {
    Json cards = Json::array();
    for (gp::Card c : inst.cards) cards.push_back(gp::card_label(c));
    return Json{{"cards", cards},
                {"mapping", inst.mapping.name},
                {"scoring_mapping", inst.scoring_mapping.name},
                {"target", inst.target},
                {"split", inst.split}};
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::optional<gp::GPInstance> gp_instance_from_context(const Json& ctx) {
    if (!ctx.is_object() || !ctx.contains("cards") || !ctx.at("cards").is_array()) return std::nullopt;
    gp::GPInstance inst;
    for (const auto& c : ctx.at("cards")) {
        if (!c.is_string()) return std::nullopt;
        auto card = gp::card_from_label(c.get<std::string>());
        if (!card) {
            // large-number cards are written as plain integers above 13
            const auto text = c.get<std::string>();
            int v = 0;
            if (std::sscanf(text.c_str(), "%d", &v) != 1 || v < 14 || v > 99 || std::to_string(v) != text) {
                return std::nullopt;
            }
            card = gp::Card{v};
        }
        inst.cards.push_back(*card);
    }
    if (inst.cards.empty() || inst.cards.size() > 5) return std::nullopt;
    try {
        inst.mapping = gp::face_mapping(ctx.value("mapping", std::string("all_10")));
        inst.scoring_mapping = gp::face_mapping(ctx.value("scoring_mapping", inst.mapping.name));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (ctx.contains("target")) {
        if (!ctx.at("target").is_number_integer()) return std::nullopt;
        inst.target = ctx.at("target").get<int>();
    }
    inst.split = ctx.value("split", std::string("training"));
    return inst;
}

Json to_json(const DemonstrationRecord& r) {
    return Json{{"prompt", r.prompt}, {"response", r.response}, {"task", r.task}, {"variant", r.variant},
                {"seed", r.seed},     {"split", r.split},       {"extra", r.extra}};
}

DemonstrationRecord record_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("record is not an object");
    for (auto key : kRecordKeys) {
        if (!j.contains(std::string(key))) throw std::invalid_argument("missing field '" + std::string(key) + "'");
    }
    if (j.size() != kRecordKeys.size()) throw std::invalid_argument("unexpected field in record");
    auto text = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    };
    DemonstrationRecord r;
    r.prompt = text("prompt");
    r.response = text("response");
    r.task = text("task");
    r.variant = text("variant");
    r.split = text("split");
    if (!j.at("seed").is_number_unsigned()) throw std::invalid_argument("field 'seed' must be a non-negative integer");
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("extra").is_object()) throw std::invalid_argument("field 'extra' must be an object");
    r.extra = j.at("extra");
    if (r.prompt.empty()) throw std::invalid_argument("empty prompt");
    if (r.split != kTrain && r.split != kValidation) throw std::invalid_argument("unknown split '" + r.split + "'");
    return r;
}

std::string_view assign_split(std::uint64_t seed, std::uint64_t index) {
    return derive_seed(seed ^ kSplitStream, index) % 100 < 5 ? kValidation : kTrain;
}

// ---------------------------------------------------------------------------

std::vector<DemonstrationRecord> gen_sokoban_demos(const SokobanDemoConfig& config, std::uint64_t seed) {
    if (config.target_pairs < 0) throw std::invalid_argument("target_pairs must be non-negative");
    const auto& base = config.diverse ? variants::builtin_variants().sokoban_variant("SimpleSokoban")
                                      : variants::builtin_variants().sokoban_variant(config.variant);
    if (base.fake) throw std::invalid_argument("cannot label demonstrations for a fake variant");

    const auto target = static_cast<std::size_t>(config.target_pairs);
    std::vector<DemonstrationRecord> records;
    records.reserve(target);
    std::uint64_t puzzle_index = 0;
    std::size_t trajectory = 0;
    int skipped = 0;
    while (records.size() < target) {
        // Puzzles are generated in parallel batches, then consumed in index order.
        std::vector<sokoban::Puzzle> batch(kPuzzleBatch);
        parallel_for_index(kPuzzleBatch, config.workers, [&](std::size_t i) {
            batch[i] = sokoban::generate_puzzle(base.puzzle_spec(derive_seed(seed, puzzle_index + i)));
        });
        for (std::size_t i = 0; i < kPuzzleBatch && records.size() < target; ++i) {
            const auto& puzzle = batch[i];
            const std::uint64_t puzzle_seed = derive_seed(seed, puzzle_index + i);
            if (puzzle.solution.size() > target - records.size()) {
                if (++skipped > config.max_skipped_puzzles) {
                    throw sokoban::GenerationExhausted("no puzzle fits the remaining pair budget");
                }
                continue;
            }
            auto state = puzzle.state;
            for (std::size_t k = 0; k < puzzle.solution.size(); ++k) {
                const Action a = puzzle.solution[k];
                const std::uint64_t index = records.size();
                auto variant = base;
                std::optional<std::uint64_t> vocab_seed;
                if (config.diverse) {
                    vocab_seed = derive_seed(seed ^ kVocabStream, index);
                    variant = variants::sample_diverse_vocab(*vocab_seed).to_variant();
                }
                DemonstrationRecord r;
                r.prompt = variants::render_sokoban_prompt(state, variant);
                r.response = format_response("", variant.token(a));
                r.task = "sokoban";
                r.variant = variant.name;
                r.seed = puzzle_seed;
                r.split = std::string(assign_split(seed, index));
                r.extra = Json{{"trajectory", trajectory},
                               {"step", k},
                               {"observation", sokoban::render(state)},
                               {"expert_action", sokoban::action_name(a)},
                               {"action_tokens", tokens_json(variant)}};
                if (vocab_seed) r.extra["vocab_seed"] = *vocab_seed;
                records.push_back(std::move(r));
                state = sokoban::step(state, a).next_state;
            }
            ++trajectory;
        }
        puzzle_index += kPuzzleBatch;
    }
    return records;
}

std::vector<DemonstrationRecord> gen_gp_demos(const GpDemoConfig& config, std::uint64_t seed) {
    if (config.count < 0) throw std::invalid_argument("count must be non-negative");
    if (!config.diverse && gp::split(config.split).fake()) {
        throw std::invalid_argument("cannot label demonstrations for a fake split");
    }
    const auto regimes = gp::diversity_regimes();
    std::vector<DemonstrationRecord> records(static_cast<std::size_t>(config.count));
    parallel_for_index(records.size(), config.workers, [&](std::size_t i) {
        std::string regime = config.split;
        if (config.diverse) {
            Rng rng(derive_seed(seed ^ kRegimeStream, i));
            regime = regimes[uniform_below(rng, regimes.size())];
        }
        const std::uint64_t instance_seed = derive_seed(seed, i);
        const auto inst = gp::generate_instance(gp::split(regime), instance_seed);
        const auto formula = gp::solve_exhaustive(inst.prompted_values(), inst.target);
        if (!formula) throw gp::GenerationExhausted("generated hand has no solution");
        auto& r = records[i];
        r.prompt = variants::render_gp_prompt(inst);
        r.response = format_response("", gp::format_answer(gp::make_answer(inst, *formula)));
        r.task = "gp";
        r.variant = regime;
        r.seed = instance_seed;
        r.split = std::string(assign_split(seed, i));
        r.extra = gp_context(inst);
    });
    return records;
}

variants::SokobanVariant record_variant(const DemonstrationRecord& record) {
    auto v = variant_from_context(record.extra);
    if (!v) throw std::invalid_argument("record carries no action vocabulary");
    return *v;
}

std::size_t count_label_failures(std::span<const DemonstrationRecord> records) {
    std::size_t failures = 0;
    std::size_t i = 0;
    while (i < records.size()) {
        const auto& r = records[i];
        if (r.task == "gp") {
            const auto inst = gp_instance_from_context(r.extra);
            if (!inst || gp::score_answer(r.response, *inst).points != gp::kPointsCorrect) ++failures;
            ++i;
            continue;
        }
        // Sokoban: decode each label of one trajectory and replay it from the first observation.
        std::size_t end = i + 1;
        while (end < records.size() && records[end].task == "sokoban" &&
               records[end].extra.value("trajectory", -1) == r.extra.value("trajectory", -1)) {
            ++end;
        }
        bool ok = true;
        try {
            auto state = sokoban::parse_observation(r.extra.at("observation").get<std::string>());
            for (std::size_t k = i; k < end && ok; ++k) {
                if (sokoban::render(state) != records[k].extra.at("observation").get<std::string>()) {
                    ok = false;
                    break;
                }
                const auto parsed = parse_response(records[k].response);
                const auto action = parsed.format_ok
                                        ? variants::decode_action(parsed.answer_text, record_variant(records[k]))
                                        : std::nullopt;
                if (!action) {
                    ok = false;
                    break;
                }
                state = sokoban::step(state, *action).next_state;
            }
            ok = ok && state.solved();
        } catch (const std::exception&) {
            ok = false;
        }
        if (!ok) failures += end - i;
        i = end;
    }
    return failures;
}

// ---------------------------------------------------------------------------

CotFilterResult filter_cot(std::span<const CotCandidate> candidates, int k_per_prompt) {
    if (k_per_prompt < 0) throw std::invalid_argument("k_per_prompt must be non-negative");
    CotFilterResult result;
    std::map<std::string, int> kept;
    for (const auto& c : candidates) {
        const Json& ctx = c.context;
        DemonstrationRecord r;
        bool correct = false;
        if (!ctx.is_object()) {
            ++result.rejected_malformed;
            continue;
        }
        if (c.task == "gp") {
            const auto inst = gp_instance_from_context(ctx);
            if (!inst) {
                ++result.rejected_malformed;
                continue;
            }
            correct = gp::score_answer(c.response, *inst).points == gp::kPointsCorrect;
            r.variant = inst->split;
            r.prompt = ctx.contains("prompt") && ctx.at("prompt").is_string() ? ctx.at("prompt").get<std::string>()
                                                                            : variants::render_gp_prompt(*inst);
        } else if (c.task == "sokoban") {
            const auto variant = variant_from_context(ctx);
            std::optional<sokoban::SokobanState> state;
            std::optional<Action> expert;
            try {
                state = sokoban::parse_observation(ctx.at("observation").get<std::string>());
                if (ctx.contains("expert_action")) {
                    expert = sokoban::action_from_name(ctx.at("expert_action").get<std::string>());
                } else if (auto plan = sokoban::solve_bfs(*state); plan && !plan->empty()) {
                    expert = plan->front();
                }
            } catch (const std::exception&) {
                state.reset();
            }
            if (!variant || !state || !expert) {
                ++result.rejected_malformed;
                continue;
            }
            const auto parsed = parse_response(c.response);
            correct = parsed.format_ok && variants::decode_action(parsed.answer_text, *variant) == expert;
            r.variant = variant->name;
            r.prompt = ctx.contains("prompt") && ctx.at("prompt").is_string()
                           ? ctx.at("prompt").get<std::string>()
                           : variants::render_sokoban_prompt(*state, *variant);
        } else {
            ++result.rejected_malformed;
            continue;
        }
        if (!correct) {
            ++result.rejected_incorrect;
            continue;
        }
        int& count = kept[c.prompt_id];
        if (count >= k_per_prompt) {
            ++result.over_quota;
            continue;
        }
        ++count;
        r.response = c.response;
        r.task = c.task;
        r.seed = ctx.contains("seed") && ctx.at("seed").is_number_unsigned() ? ctx.at("seed").get<std::uint64_t>() : 0;
        r.split = std::string(assign_split(fnv1a(c.prompt_id), static_cast<std::uint64_t>(count - 1)));
        r.extra = ctx;
        r.extra.erase("prompt");
        r.extra["prompt_id"] = c.prompt_id;
        result.accepted.push_back(std::move(r));
    }
    return result;
}

std::vector<CotCandidate> load_cot_candidates(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string(), 0);
    std::vector<CotCandidate> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CotCandidate c;
        try {
            const auto j = Json::parse(line);
            c.prompt_id = j.at("prompt_id").get<std::string>();
            c.task = j.at("task").get<std::string>();
            c.response = j.at("response").get<std::string>();
            c.context = j.at("context");
        } catch (const std::exception&) {
            c = CotCandidate{};  // empty task: counted as malformed by filter_cot
        }
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------

Json DatasetManifest::to_json() const {
    Json split_counts = Json::object();
    for (const auto& [k, v] : per_split) split_counts[k] = v;
    Json variant_counts = Json::object();
    for (const auto& [k, v] : per_variant) variant_counts[k] = v;
    return Json{{"total", total},
                {"per_split", split_counts},
                {"per_variant", variant_counts},
                {"config_digest", config_digest},
                {"seed", seed}};
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
    auto p = dataset;
    p += ".manifest.json";
    return p;
}

DatasetManifest persist_dataset(std::span<const DemonstrationRecord> records, const std::filesystem::path& path,
                                const std::string& config_digest, std::uint64_t seed) {
    DatasetManifest manifest;
    manifest.config_digest = config_digest;
    manifest.seed = seed;
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DatasetError("cannot write " + path.string(), 0);
        for (const auto& r : records) {
            out << to_json(r).dump() << '\n';
            ++manifest.total;
            ++manifest.per_split[r.split];
            ++manifest.per_variant[r.variant];
        }
        if (!out.flush()) throw DatasetError("write failed for " + path.string(), 0);
    }
    std::ofstream mout(manifest_path(path), std::ios::binary | std::ios::trunc);
    if (!mout) throw DatasetError("cannot write " + manifest_path(path).string(), 0);
    mout << manifest.to_json().dump(2) << '\n';
    if (!mout.flush()) throw DatasetError("write failed for " + manifest_path(path).string(), 0);
    return manifest;
}

std::vector<DemonstrationRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string(), 0);
    std::vector<DemonstrationRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        try {
            out.push_back(record_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw DatasetError(e.what(), number);
        }
    }
    return out;
}

std::string digest(const nlohmann::ordered_json& config) { return hex64(fnv1a(config.dump())); }

}  // namespace taskbench::datagen
