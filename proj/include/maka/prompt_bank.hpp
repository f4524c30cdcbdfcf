#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "maka/llm_client.hpp"
#include "maka/prompt_templates.hpp"
#include "maka/taxonomy.hpp"
#include "maka/tokenizer.hpp"

namespace maka {

inline constexpr std::size_t kPromptTokenBudget = 30;
inline constexpr const char* kStandardPromptPrefix = "a video of ";

struct ActionConditionedPrompt {
    std::string action;
    std::string attribute;   // canonical taxonomy name
    int template_id = 0;
    std::string raw_text;    // sentence as returned by the model
    std::string final_text;  // "a video of {action}. " + processed sentence
    std::size_t token_count = 0;  // of the processed sentence, prefix excluded
};

struct ActionPrompts {
    std::string action;
    std::vector<ActionConditionedPrompt> prompts;
};

struct PromptBank {
    AttributeTaxonomy taxonomy;
    std::vector<int> templates_used;
    std::vector<ActionPrompts> entries;  // insertion order = actions-file order
    std::string version = "1";
    std::string created_at;

    const ActionPrompts* find(const std::string& action) const;
    // entry count per action == 12 * |templates_used|, no duplicate
    // (action, attribute, template) triples
    void validate() const;
};

// Extracts the first JSON object from `reply` (tolerating surrounding prose
// and ``` fences) and maps its keys to canonical attribute names. Returns one
// (attribute, sentence) pair per taxonomy attribute, in taxonomy order.
// Errors: MalformedJson, MissingAttribute.
std::vector<std::pair<std::string, std::string>> parse_response(
    const std::string& reply, const AttributeTaxonomy& taxonomy);

// Whitespace collapse, trim, terminal punctuation normalized to one period,
// token budget enforced (truncate at the last sentence boundary that fits,
// else at the token boundary), then the standard prefix is attached.
ActionConditionedPrompt postprocess(const std::string& action, const std::string& attribute,
                                    int template_id, const std::string& sentence,
                                    const Tokenizer& tokenizer = default_tokenizer());

// n_templates * 12 * n_actions
std::size_t expected_prompt_count(std::size_t n_actions, std::size_t n_templates);

struct GenerateOptions {
    std::vector<int> template_ids = default_template_ids();
    bool allow_partial = false;
    const Tokenizer* tokenizer = &default_tokenizer();
    int concurrency = 4;  // max in-flight LLM requests
};

struct FailedPair {
    std::string action;
    int template_id = 0;
    std::string reason;
};

// Runs the full query -> parse -> postprocess pipeline for every
// (action, template) pair. Failures are collected per pair; unless
// allow_partial is set, any failure raises GenerationIncomplete naming them.
PromptBank generate_bank(const std::vector<std::string>& actions, const GenerateOptions& options,
                         const AttributeTaxonomy& taxonomy, LlmClient& client,
                         std::vector<FailedPair>* failures = nullptr);

PromptBank load_bank(const std::filesystem::path& path);
void save_bank(const PromptBank& bank, const std::filesystem::path& path);

// RFC 3339 UTC timestamp; honors SOURCE_DATE_EPOCH for reproducible outputs.
std::string current_timestamp();

}  // namespace maka
