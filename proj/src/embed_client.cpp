#include "maka/embed_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "maka/error.hpp"

namespace maka {

using json = nlohmann::json;

namespace {

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        fail("BadParams", "endpoint '" + endpoint + "' has no scheme");
    const std::size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path), endpoint.substr(path)};
}

EmbeddingMatrix parse_embedding_reply(const std::string& body, std::size_t n_texts) {
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception& e) {
        fail("SchemaError", std::string("embedding reply is not JSON: ") + e.what());
    }
    if (!reply.contains("data") || !reply["data"].is_array())
        fail("SchemaError", "embedding reply has no data array");
    const auto& data = reply["data"];
    if (data.size() != n_texts)
        fail("SchemaError", "embedding reply has " + std::to_string(data.size()) +
                                " vectors for " + std::to_string(n_texts) + " texts");

    std::vector<std::vector<float>> by_index(n_texts);
    std::vector<bool> seen(n_texts, false);
    for (const auto& item : data) {
        std::size_t index;
        std::vector<float> vec;
        try {
            index = item.at("index").get<std::size_t>();
            vec = item.at("embedding").get<std::vector<float>>();
        } catch (const json::exception& e) {
            fail("SchemaError", std::string("embedding reply item malformed: ") + e.what());
        }
        if (index >= n_texts || seen[index])
            fail("SchemaError", "embedding reply has bad or duplicate index " + std::to_string(index));
        seen[index] = true;
        by_index[index] = std::move(vec);
    }

    const std::size_t dim = by_index.front().size();
    if (dim == 0) fail("SchemaError", "embedding reply has empty vectors");
    EmbeddingMatrix m(n_texts, dim);
    for (std::size_t i = 0; i < n_texts; ++i) {
        if (by_index[i].size() != dim)
            fail("DimMismatch", "embedding " + std::to_string(i) + " has dim " +
                                    std::to_string(by_index[i].size()) + ", expected " +
                                    std::to_string(dim));
        std::copy(by_index[i].begin(), by_index[i].end(), m.row(i));
    }
    l2_normalize_in_place(m);
    return m;
}

}  // namespace

EmbeddingMatrix fetch_text_embeddings(const std::vector<std::string>& texts,
                                      const EmbeddingServiceConfig& config) {
    if (texts.empty()) fail("EmptyInput", "fetch_text_embeddings: no texts");
    if (config.endpoint.empty()) fail("BadParams", "embedding endpoint not configured");
    const auto [base, path] = split_endpoint(config.endpoint);

    const json body{{"input", texts}, {"model", config.model}};
    const std::string payload = body.dump();
    const char* key = config.api_key_env.empty() ? nullptr : std::getenv(config.api_key_env.c_str());

    std::string last_error;
    const int attempts = std::max(1, config.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config.backoff_base_ms * (1 << (attempt - 2))));

        httplib::Client client(base);
        client.set_connection_timeout(config.timeout_s);
        client.set_read_timeout(config.timeout_s);
        httplib::Headers headers;
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            fail("AuthError", "embedding service returned " + std::to_string(res->status));
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            if (res->status == 429 || res->status >= 500) continue;
            fail("HttpError", "embedding service returned " + last_error);
        }
        return parse_embedding_reply(res->body, texts.size());
    }
    fail("HttpError", "embedding request failed after " + std::to_string(attempts) +
                          " attempts (" + last_error + ")");
}

}  // namespace maka
