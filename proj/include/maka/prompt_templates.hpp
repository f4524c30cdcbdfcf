#pragma once

#include <string>
#include <vector>

#include "maka/taxonomy.hpp"

namespace maka {

// One LLM-prompt template. The pattern must contain the {action} and
// {attribute} placeholders exactly once each.
struct LlmPromptTemplate {
    int id = 0;
    std::string pattern;

    void validate() const;
};

// The five shipped templates; generation defaults to ids {1, 3, 4}.
const std::vector<LlmPromptTemplate>& builtin_templates();
const LlmPromptTemplate& get_template(int id);

inline const std::vector<int>& default_template_ids() {
    static const std::vector<int> ids = {1, 3, 4};
    return ids;
}

// Expands a pattern's placeholders.
std::string instantiate(const LlmPromptTemplate& tpl, const std::string& action,
                        const std::string& attribute);

// The full chat message for one (action, template) query: the instantiated
// template covering all attributes, the attribute list with glosses, and the
// JSON output instruction (one key per attribute, one sentence per key).
// Pure: identical inputs produce the identical string.
std::string build_query(const std::string& action, const LlmPromptTemplate& tpl,
                        const AttributeTaxonomy& taxonomy);

}  // namespace maka
