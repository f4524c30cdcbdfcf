#include "maka/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "maka/error.hpp"
#include "maka/io.hpp"
#include "maka/taxonomy.hpp"

namespace maka {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// "http://host:port/path" -> (scheme://host:port, /path)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        fail("BadParams", "endpoint '" + endpoint + "' has no scheme");
    const std::size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path), endpoint.substr(path)};
}

bool transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string stub_llm_reply(const std::string& query) {
    (void)query;
    static const std::vector<std::pair<std::string, std::string>> sentences = {
        {"Scene Type", "The action takes place in a setting that suits it."},
        {"Scene Elements", "The scene contains the objects this action needs."},
        {"Scene Conditions", "The conditions around the action are unremarkable."},
        {"Prop Usage", "Common props for this action are in use."},
        {"Number of Actors", "One or more people perform the action."},
        {"Clothing", "The actors wear clothing appropriate to the action."},
        {"Actor Identity", "The actors are people who usually do this action."},
        {"Facial Expression", "Their expressions match the effort involved."},
        {"Body Move Speed", "The movement proceeds at a characteristic pace."},
        {"Body Part Movement", "The relevant body parts move in the usual way."},
        {"Body Posture", "The posture is typical for this action."},
        {"Body Position", "The body stays where the action requires it."},
    };
    json reply = json::object();
    for (const auto& [attr, sentence] : sentences) reply[attr] = sentence;
    return reply.dump();
}

LlmClient::LlmClient(LlmClientConfig config) : config_(std::move(config)) {
    if (!config_.cache_dir.empty()) fs::create_directories(config_.cache_dir);
}

std::uint64_t LlmClient::cache_key(const std::string& query) const {
    return fnv1a64(config_.model + "\n" + query);
}

std::string LlmClient::cache_path(const std::string& query) const {
    return (fs::path(config_.cache_dir) / (to_hex64(cache_key(query)) + ".txt")).string();
}

std::string LlmClient::request_descriptions(const std::string& query) {
    const bool cached = !config_.cache_dir.empty();
    if (cached) {
        const fs::path p = cache_path(query);
        if (fs::exists(p)) return read_file(p);
    }

    std::string reply = config_.stub ? stub_llm_reply(query) : perform_request(query);

    if (cached) write_file_atomic(cache_path(query), reply);
    return reply;
}

std::string LlmClient::perform_request(const std::string& query) {
    if (config_.endpoint.empty())
        fail("BadParams", "LLM endpoint not configured (set it in the config file or use --stub-llm)");
    const auto [base, path] = split_endpoint(config_.endpoint);

    const json body{{"model", config_.model},
                    {"messages", json::array({json{{"role", "user"}, {"content", query}}})},
                    {"temperature", config_.temperature}};
    const std::string payload = body.dump();

    const char* key = config_.api_key_env.empty() ? nullptr : std::getenv(config_.api_key_env.c_str());

    std::string last_error;
    const int attempts = std::max(1, config_.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) {
            const int delay = config_.backoff_base_ms * (1 << (attempt - 2));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }

        httplib::Client client(base);
        client.set_connection_timeout(config_.timeout_s);
        client.set_read_timeout(config_.timeout_s);
        httplib::Headers headers;
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);

        ++network_requests_;
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            fail("AuthError", "LLM service returned " + std::to_string(res->status));
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            if (transient_status(res->status)) continue;
            fail("HttpError", "LLM service returned " + last_error);
        }

        try {
            const json reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            fail("SchemaError", std::string("LLM reply is not chat-completions shaped: ") + e.what());
        }
    }
    fail("HttpError", "LLM request failed after " + std::to_string(attempts) +
                          " attempts (" + last_error + ")");
}

}  // namespace maka
