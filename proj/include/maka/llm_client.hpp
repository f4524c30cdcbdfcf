#pragma once

#include <atomic>
#include <cstdint>
#include <string>

namespace maka {

struct LlmClientConfig {
    std::string endpoint;                        // e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model = "gpt-4";
    std::string api_key_env = "MAKA_LLM_API_KEY";  // env var holding the bearer token
    double temperature = 0.0;
    int max_attempts = 3;     // total tries for transient failures
    int backoff_base_ms = 250;  // doubled per retry
    std::string cache_dir;    // empty disables caching
    bool stub = false;        // serve deterministic built-in replies, no network
    int timeout_s = 60;
};

// Chat-completions client used for description generation. Replies are cached
// one file per key under cache_dir, keyed by fnv1a64(model + '\n' + query), so
// reruns are reproducible and tests can run from primed fixtures without a
// server. Safe to call from several request workers at once: cache writes go
// through atomic renames and each call uses its own connection.
class LlmClient {
public:
    explicit LlmClient(LlmClientConfig config);
    LlmClient(LlmClient&& other) noexcept
        : config_(std::move(other.config_)), network_requests_(other.network_requests_.load()) {}

    // Returns the model's reply text for a single-message chat query.
    // Cache hits skip the network entirely. Transient failures (transport
    // errors, 429, 5xx) are retried with exponential backoff up to
    // max_attempts; 401/403 raise AuthError immediately.
    std::string request_descriptions(const std::string& query);

    std::uint64_t cache_key(const std::string& query) const;
    std::string cache_path(const std::string& query) const;

    // Network round-trips performed so far (cache hits excluded).
    int network_requests() const { return network_requests_.load(); }

    const LlmClientConfig& config() const { return config_; }

private:
    std::string perform_request(const std::string& query);

    LlmClientConfig config_;
    std::atomic<int> network_requests_{0};
};

// The built-in stub reply: a JSON object with one fixed sentence per default
// attribute. Deterministic per (model, query); used by --stub-llm and tests.
std::string stub_llm_reply(const std::string& query);

}  // namespace maka
