#include "taskbench/service.hpp"

#include "taskbench/parallel.hpp"
#include "taskbench/response.hpp"
#include "taskbench/rl_math.hpp"
#include "taskbench/variants.hpp"

#include <httplib.h>

#include <cstdio>
#include <optional>

namespace taskbench::service {

using sokoban::Action;

std::string_view reward_mode_name(RewardMode mode) {
    return mode == RewardMode::Environment ? "env" : "action_match";
}

RewardMode reward_mode_from_name(std::string_view name) {
    if (name == "env") return RewardMode::Environment;
    if (name == "action_match") return RewardMode::ActionMatch;
    throw std::invalid_argument("unknown reward mode '" + std::string(name) + "'");
}

struct EpisodeService::Episode {
    std::mutex mutex;
    std::string task;
    variants::SokobanVariant variant;
    std::optional<sokoban::SokobanState> state;
    std::optional<gp::GPInstance> instance;
    bool done = false;
    Clock::time_point last_used;
};

namespace {

const Json& field(const Json& body, const char* key) {
    if (!body.is_object() || !body.contains(key)) throw ServiceError(400, std::string("missing field '") + key + "'");
    return body.at(key);
}

std::string string_field(const Json& body, const char* key) {
    const auto& v = field(body, key);
    if (!v.is_string()) throw ServiceError(400, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

EpisodeService::EpisodeService(ServiceConfig config, std::function<Clock::time_point()> now)
    : config_(std::move(config)), now_(std::move(now)) {}

EpisodeService::~EpisodeService() = default;

Json EpisodeService::reset(const Json& body) {
    expire_idle();
    const std::string task = string_field(body, "task");
    const std::string variant = string_field(body, "variant");
    const auto& seed_field = field(body, "seed");
    if (!seed_field.is_number_unsigned()) throw ServiceError(400, "field 'seed' must be a non-negative integer");
    const auto seed = seed_field.get<std::uint64_t>();

    auto ep = std::make_shared<Episode>();
    ep->task = task;
    std::string prompt;
    try {
        if (task == eval::kSokoban) {
            // "Diverse" draws a fresh random-word vocabulary from the seed.
            ep->variant = variant == "Diverse" ? variants::sample_diverse_vocab(seed).to_variant()
                                               : variants::builtin_variants().sokoban_variant(variant);
            ep->state = sokoban::generate_puzzle(ep->variant.puzzle_spec(seed)).state;
            prompt = variants::render_sokoban_prompt(*ep->state, ep->variant);
        } else if (task == eval::kGeneralPoints) {
            ep->instance = gp::generate_instance(gp::split(variant), seed);
            prompt = variants::render_gp_prompt(*ep->instance);
        } else {
            throw ServiceError(400, "unknown task '" + task + "'");
        }
    } catch (const std::out_of_range& e) {
        throw ServiceError(400, e.what());
    } catch (const sokoban::GenerationExhausted& e) {
        throw ServiceError(500, e.what());
    } catch (const gp::GenerationExhausted& e) {
        throw ServiceError(500, e.what());
    }
    ep->last_used = now_();

    std::string id;
    {
        std::lock_guard lock(mutex_);
        char buf[24];
        std::snprintf(buf, sizeof buf, "ep-%06llu", static_cast<unsigned long long>(++next_id_));
        id = buf;
        episodes_[id] = ep;
    }
    return Json{{"episode_id", id}, {"prompt", prompt}};
}

std::shared_ptr<EpisodeService::Episode> EpisodeService::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = episodes_.find(id);
    if (it == episodes_.end()) throw ServiceError(404, "unknown episode '" + id + "'");
    return it->second;
}

Json EpisodeService::step(const Json& body) {
    expire_idle();
    const std::string id = string_field(body, "episode_id");
    const std::string text = string_field(body, "response_text");
    const auto ep = find(id);

    std::lock_guard lock(ep->mutex);
    if (ep->done) throw ServiceError(409, "episode '" + id + "' is finished");
    ep->last_used = now_();
    const auto parsed = parse_response(text);
    Json out = Json::object();

    if (ep->instance) {
        const auto score = gp::score_answer(text, *ep->instance);
        ep->done = true;
        out["reward"] = score.points;
        out["done"] = true;
        out["success"] = score.success;
        out["info"] = Json{{"valid", variants::check_validity(parsed, *ep->instance)},
                           {"format_ok", parsed.format_ok},
                           {"score", score.points},
                           {"verdict", formula::verdict_name(score.verdict)}};
        return out;
    }

    auto& state = *ep->state;
    const auto action =
        parsed.format_ok ? variants::decode_action(parsed.answer_text, ep->variant) : std::optional<Action>{};
    double reward = 0.0;
    if (config_.reward_mode == RewardMode::ActionMatch) {
        const auto plan = sokoban::solve_bfs(state, {config_.max_steps});
        if (plan && !plan->empty()) {
            reward = rl::action_match_reward(action, plan->front(), parsed.format_ok);
        } else {
            reward = parsed.format_ok ? 0.1 : 0.0;  // no expert action exists
        }
    }
    const auto outcome = action ? sokoban::step(state, *action, config_.schedule, config_.max_steps)
                                : sokoban::idle_step(state, config_.schedule, config_.max_steps);
    if (config_.reward_mode == RewardMode::Environment) reward = outcome.reward;
    state = outcome.next_state;
    ep->done = outcome.terminated;

    if (!ep->done) out["prompt"] = variants::render_sokoban_prompt(state, ep->variant);
    out["reward"] = reward;
    out["done"] = ep->done;
    out["success"] = outcome.success;
    out["info"] = Json{{"valid", variants::check_validity(parsed, ep->variant)},
                       {"format_ok", parsed.format_ok},
                       {"action", action ? Json(sokoban::action_name(*action)) : Json(nullptr)},
                       {"moved", outcome.moved},
                       {"steps_taken", state.steps_taken}};
    return out;
}

Json EpisodeService::health() {
    expire_idle();
    return Json{{"status", "ok"}, {"episodes", active()}, {"reward_mode", reward_mode_name(config_.reward_mode)}};
}

std::size_t EpisodeService::expire_idle() {
    const auto now = now_();
    std::lock_guard lock(mutex_);
    return std::erase_if(episodes_, [&](const auto& kv) {
        // an episode mid-step is not idle
        std::unique_lock ep_lock(kv.second->mutex, std::try_to_lock);
        return ep_lock.owns_lock() && now - kv.second->last_used > config_.idle_timeout;
    });
}

std::size_t EpisodeService::active() {
    std::lock_guard lock(mutex_);
    return episodes_.size();
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Handler>
httplib::Server::Handler json_route(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::parse_error& e) {
            reply(res, 400, Json{{"error", std::string("malformed JSON: ") + e.what()}});
            return;
        }
        try {
            reply(res, 200, handler(body));
        } catch (const ServiceError& e) {
            reply(res, e.status(), Json{{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, Json{{"error", e.what()}});
        }
    };
}

}  // namespace

HttpServer::HttpServer(EpisodeService& service) : impl_(std::make_unique<Impl>()) {
    auto& s = impl_->server;
    s.Post("/reset", json_route([&service](const Json& body) { return service.reset(body); }));
    s.Post("/step", json_route([&service](const Json& body) { return service.step(body); }));
    s.Get("/health", [&service](const httplib::Request&, httplib::Response& res) { reply(res, 200, service.health()); });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }
void HttpServer::wait_until_ready() { impl_->server.wait_until_ready(); }

// ---------------------------------------------------------------------------

Json replay_transcript(const std::string& base_url, std::span<const eval::EpisodeRecord> transcript,
                       std::size_t concurrency) {
    std::vector<Json> results(transcript.size());
    parallel_for_index(transcript.size(), concurrency, [&](std::size_t i) {
        const auto& ep = transcript[i];
        httplib::Client client(base_url);
        auto post = [&](const char* path, const Json& body) {
            const auto res = client.Post(path, body.dump(), "application/json");
            if (!res) throw std::runtime_error(std::string("POST ") + path + ": " + httplib::to_string(res.error()));
            auto j = Json::parse(res->body);
            if (res->status != 200) throw std::runtime_error(std::string("POST ") + path + ": " + j.dump());
            return j;
        };
        const auto started = post("/reset", Json{{"task", ep.task}, {"variant", ep.split}, {"seed", ep.seed}});
        Json rewards = Json::array(), done = Json::array();
        bool success = false;
        for (const auto& turn : ep.turns) {
            const auto r =
                post("/step", Json{{"episode_id", started.at("episode_id")}, {"response_text", turn.response}});
            rewards.push_back(r.at("reward"));
            done.push_back(r.at("done"));
            success = r.at("success").get<bool>();
            if (r.at("done").get<bool>()) break;
        }
        results[i] = Json{{"task", ep.task}, {"variant", ep.split}, {"seed", ep.seed},
                          {"rewards", rewards},  {"done", done},       {"success", success}};
    });
    Json out = Json::array();
    for (auto& r : results) out.push_back(std::move(r));
    return out;
}

}  // namespace taskbench::service
