#include "taskbench/eval.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace taskbench::eval {

RemoteAgent::RemoteAgent(RemoteAgentConfig config) : config_(std::move(config)) {
    if (config_.retries < 0) throw std::invalid_argument("retries must be non-negative");
    if (const char* token = std::getenv(config_.token_env.c_str())) token_ = token;
}

std::string RemoteAgent::respond(const AgentQuery& query) {
    const nlohmann::json body{{"model", config_.model},
                              {"messages", {{{"role", "user"}, {"content", query.prompt}}}},
                              {"temperature", config_.temperature},
                              {"max_tokens", config_.max_tokens}};
    const std::string payload = body.dump();

    // A client per call keeps concurrent episodes independent.
    httplib::Client client(config_.url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    std::string last_error;
    auto delay = config_.backoff;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        const auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& e) {
            throw TransportError(std::string("unexpected completion body: ") + e.what());
        }
    }
    throw TransportError("no completion after " + std::to_string(config_.retries + 1) + " attempts (" +
                         last_error + ")");
}

}  // namespace taskbench::eval
