#include "maka/prompt_templates.hpp"

#include <sstream>

#include "maka/error.hpp"

namespace maka {

namespace {

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
    std::size_t n = 0, pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

std::string replace_once(std::string s, const std::string& placeholder, const std::string& value) {
    const std::size_t pos = s.find(placeholder);
    if (pos != std::string::npos) s.replace(pos, placeholder.size(), value);
    return s;
}

}  // namespace

void LlmPromptTemplate::validate() const {
    if (count_occurrences(pattern, "{action}") != 1 ||
        count_occurrences(pattern, "{attribute}") != 1)
        fail("BadParams", "template " + std::to_string(id) +
                              " must contain {action} and {attribute} exactly once");
}

const std::vector<LlmPromptTemplate>& builtin_templates() {
    static const std::vector<LlmPromptTemplate> templates = {
        {1, "Describe the following actions by adding one sentence about its {attribute} for {action}."},
        {2, "Visually describe {action} about its {attribute} in one sentence."},
        {3, "What are the primary characteristics of {action} interm of its {attribute}, explain in one sentence."},
        {4, "Explain how {action} typically manifests in terms of its {attribute}, providing a descriptive sentence."},
        {5, "Analyze {action} in the context of its {attribute}, and describe it in one sentence."},
    };
    return templates;
}

const LlmPromptTemplate& get_template(int id) {
    for (const auto& t : builtin_templates())
        if (t.id == id) return t;
    fail("BadParams", "unknown template id " + std::to_string(id));
}

std::string instantiate(const LlmPromptTemplate& tpl, const std::string& action,
                        const std::string& attribute) {
    return replace_once(replace_once(tpl.pattern, "{action}", action), "{attribute}", attribute);
}

std::string build_query(const std::string& action, const LlmPromptTemplate& tpl,
                        const AttributeTaxonomy& taxonomy) {
    if (action.empty()) fail("BadParams", "build_query: action must be non-empty");
    taxonomy.validate();
    tpl.validate();

    std::ostringstream out;
    out << instantiate(tpl, action, "each of the following attributes") << "\n\n";
    out << "Attributes:\n";
    for (const auto& a : taxonomy.attributes)
        out << "- " << a.name << " (" << a.description << ")\n";
    out << "\nOutput the results in a JSON format, where each key is an attribute and the "
           "corresponding value is the descriptive sentence for that attribute.";
    return out.str();
}

}  // namespace maka
