#pragma once

#include "taskbench/eval.hpp"
#include "taskbench/sokoban.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>

namespace taskbench::service {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

enum class RewardMode { Environment, ActionMatch };
std::string_view reward_mode_name(RewardMode mode);
/// "env" or "action_match"; throws std::invalid_argument.
RewardMode reward_mode_from_name(std::string_view name);

struct ServiceConfig {
    RewardMode reward_mode = RewardMode::Environment;  // GP always uses the rubric
    std::chrono::seconds idle_timeout{600};
    sokoban::RewardSchedule schedule;
    int max_steps = sokoban::kDefaultMaxSteps;
};

/// Carries the HTTP status the transport should answer with.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

/// Transport-independent episode store behind /reset, /step and /health.
/// Thread-safe; steps on one episode are serialised, distinct episodes run in parallel.
class EpisodeService {
public:
    explicit EpisodeService(ServiceConfig config = {}, std::function<Clock::time_point()> now = Clock::now);
    ~EpisodeService();

    /// {task, variant, seed} -> {episode_id, prompt}
    Json reset(const Json& body);
    /// {episode_id, response_text} -> {prompt?, reward, done, success, info}
    Json step(const Json& body);
    Json health();

    /// Drops episodes idle for longer than the timeout; returns how many.
    std::size_t expire_idle();
    std::size_t active();

private:
    struct Episode;
    std::shared_ptr<Episode> find(const std::string& id);

    ServiceConfig config_;
    std::function<Clock::time_point()> now_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Episode>> episodes_;
    std::uint64_t next_id_ = 0;
};

/// HTTP front end. bind() with port 0 picks a free port.
class HttpServer {
public:
    explicit HttpServer(EpisodeService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    void wait_until_ready();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Drives a running service with the responses of a recorded transcript: one
/// reset per episode, then one step per recorded turn. Returns, per episode
/// and in transcript order, the reward/done sequence and final success.
Json replay_transcript(const std::string& base_url, std::span<const eval::EpisodeRecord> transcript,
                       std::size_t concurrency = 1);

}  // namespace taskbench::service
