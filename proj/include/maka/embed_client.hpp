#pragma once

#include <string>
#include <vector>

#include "maka/embedding.hpp"

namespace maka {

struct EmbeddingServiceConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/embeddings
    std::string model = "text-embedding-3-small";
    std::string api_key_env = "MAKA_EMBED_API_KEY";
    int max_attempts = 3;
    int backoff_base_ms = 250;
    int timeout_s = 60;
};

// POSTs {"input": [texts], "model": ...} and expects
// {"data": [{"index": i, "embedding": [...]}, ...]} with one vector per input
// text. Rows come back in input order and are l2-normalized before return.
// Errors: EmptyInput, HttpError(status), AuthError, SchemaError (vector count
// mismatch), DimMismatch (inconsistent dims across vectors).
EmbeddingMatrix fetch_text_embeddings(const std::vector<std::string>& texts,
                                      const EmbeddingServiceConfig& config);

}  // namespace maka
