#include "maka/prompt_bank.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "maka/error.hpp"
#include "maka/io.hpp"

namespace maka {

using json = nlohmann::json;

const ActionPrompts* PromptBank::find(const std::string& action) const {
    for (const auto& e : entries)
        if (e.action == action) return &e;
    return nullptr;
}

void PromptBank::validate() const {
    taxonomy.validate();
    const std::size_t expected = 12 * templates_used.size();
    std::set<std::string> seen_actions;
    for (const auto& e : entries) {
        if (!seen_actions.insert(e.action).second)
            fail("BadParams", "bank has duplicate action '" + e.action + "'");
        if (e.prompts.size() != expected)
            fail("BadParams", "action '" + e.action + "' has " + std::to_string(e.prompts.size()) +
                                  " prompts, expected " + std::to_string(expected));
        std::set<std::pair<std::string, int>> triples;
        for (const auto& p : e.prompts) {
            if (!triples.insert({p.attribute, p.template_id}).second)
                fail("BadParams", "duplicate (action, attribute, template) triple for '" +
                                      e.action + "'/" + p.attribute + "/" +
                                      std::to_string(p.template_id));
        }
    }
}

namespace {

// First parseable JSON object in `text`, scanning brace-balanced candidates
// (string-aware, so braces inside values do not confuse the scan).
json first_json_object(const std::string& text) {
    for (std::size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char ch = text[i];
            if (in_string) {
                if (ch == '\\')
                    ++i;
                else if (ch == '"')
                    in_string = false;
                continue;
            }
            if (ch == '"') in_string = true;
            else if (ch == '{') ++depth;
            else if (ch == '}') {
                if (--depth == 0) {
                    json parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;
                }
            }
        }
    }
    fail("MalformedJson", "reply contains no parseable JSON object");
}

std::string collapse_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = false;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(ch);
    }
    return out;
}

bool is_terminal_punct(char ch) { return ch == '.' || ch == '!' || ch == '?'; }

// Trailing run of terminal punctuation becomes a single period; a period is
// appended when there is none.
std::string normalize_terminal(std::string s) {
    while (!s.empty() && is_terminal_punct(s.back())) s.pop_back();
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    if (s.empty()) return s;
    s.push_back('.');
    return s;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_response(
    const std::string& reply, const AttributeTaxonomy& taxonomy) {
    const json obj = first_json_object(reply);

    std::vector<std::pair<std::string, std::string>> found;  // canonical -> sentence
    for (const auto& [key, value] : obj.items()) {
        const auto canonical = canonical_attribute(key, taxonomy);
        if (!canonical) continue;  // unknown keys are ignored
        if (!value.is_string()) continue;
        bool already = false;
        for (const auto& [name, _] : found) already = already || name == *canonical;
        if (!already) found.emplace_back(*canonical, value.get<std::string>());
    }

    std::vector<std::pair<std::string, std::string>> ordered;
    for (const auto& attr : taxonomy.attributes) {
        const auto it = std::find_if(found.begin(), found.end(),
                                     [&](const auto& p) { return p.first == attr.name; });
        if (it == found.end())
            fail("MissingAttribute", "reply lacks a sentence for '" + attr.name + "'");
        ordered.emplace_back(attr.name, it->second);
    }
    return ordered;
}

ActionConditionedPrompt postprocess(const std::string& action, const std::string& attribute,
                                    int template_id, const std::string& sentence,
                                    const Tokenizer& tokenizer) {
    if (sentence.empty()) fail("EmptyAfterProcessing", "empty sentence for '" + action + "'");

    std::string text = normalize_terminal(collapse_whitespace(sentence));
    if (text.empty()) fail("EmptyAfterProcessing", "sentence for '" + action + "' is empty after cleanup");

    if (tokenizer.count_tokens(text) > kPromptTokenBudget) {
        // longest sentence-boundary prefix within budget, else a hard token cut
        std::string best;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (is_terminal_punct(text[i]) && (i + 1 == text.size() || text[i + 1] == ' ')) {
                const std::string prefix = text.substr(0, i + 1);
                if (tokenizer.count_tokens(prefix) <= kPromptTokenBudget)
                    best = prefix;
                else
                    break;
            }
        }
        if (best.empty()) {
            const auto words = split_words(text);
            std::string joined;
            for (std::size_t i = 0; i < std::min(words.size(), kPromptTokenBudget); ++i) {
                if (!joined.empty()) joined.push_back(' ');
                joined.append(words[i]);
            }
            best = joined;
        }
        text = normalize_terminal(best);
        if (text.empty())
            fail("EmptyAfterProcessing", "sentence for '" + action + "' is empty after truncation");
    }

    ActionConditionedPrompt p;
    p.action = action;
    p.attribute = attribute;
    p.template_id = template_id;
    p.raw_text = sentence;
    p.final_text = std::string(kStandardPromptPrefix) + action + ". " + text;
    p.token_count = tokenizer.count_tokens(text);
    return p;
}

std::size_t expected_prompt_count(std::size_t n_actions, std::size_t n_templates) {
    if (n_actions < 1 || n_templates < 1)
        fail("BadParams", "expected_prompt_count: both counts must be >= 1");
    return n_templates * 12 * n_actions;
}

PromptBank generate_bank(const std::vector<std::string>& actions, const GenerateOptions& options,
                         const AttributeTaxonomy& taxonomy, LlmClient& client,
                         std::vector<FailedPair>* failures_out) {
    if (actions.empty()) fail("BadParams", "generate_bank: no actions given");
    taxonomy.validate();
    if (options.template_ids.empty()) fail("BadParams", "generate_bank: no templates given");
    if (options.concurrency < 1) fail("BadParams", "generate_bank: concurrency must be >= 1");

    PromptBank bank;
    bank.taxonomy = taxonomy;
    bank.templates_used = options.template_ids;
    bank.created_at = current_timestamp();

    // fan the LLM round-trips out over up to `concurrency` workers; parsing
    // and assembly stay single-threaded and ordered
    struct PairJob {
        std::size_t action_idx;
        int template_id;
        std::string reply;
        std::string error;
    };
    std::vector<PairJob> jobs;
    for (std::size_t a = 0; a < actions.size(); ++a)
        for (int tid : options.template_ids) jobs.push_back({a, tid, "", ""});
    for (const auto& job : jobs) get_template(job.template_id);  // validate ids up front

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
            PairJob& job = jobs[i];
            try {
                const std::string query =
                    build_query(actions[job.action_idx], get_template(job.template_id), taxonomy);
                job.reply = client.request_descriptions(query);
            } catch (const Error& e) {
                job.error = std::string(e.code()) + ": " + e.what();
            }
        }
    };
    const std::size_t n_workers =
        std::min<std::size_t>(std::max(options.concurrency, 1), jobs.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<FailedPair> failures;
    std::size_t job_idx = 0;
    for (std::size_t a = 0; a < actions.size(); ++a) {
        ActionPrompts entry;
        entry.action = actions[a];
        for (int tid : options.template_ids) {
            const PairJob& job = jobs[job_idx++];
            if (!job.error.empty()) {
                failures.push_back({actions[a], tid, job.error});
                continue;
            }
            try {
                for (const auto& [attribute, sentence] : parse_response(job.reply, taxonomy))
                    entry.prompts.push_back(
                        postprocess(actions[a], attribute, tid, sentence, *options.tokenizer));
            } catch (const Error& e) {
                failures.push_back({actions[a], tid, std::string(e.code()) + ": " + e.what()});
            }
        }
        bank.entries.push_back(std::move(entry));
    }

    if (failures_out) *failures_out = failures;
    if (!failures.empty() && !options.allow_partial) {
        std::ostringstream msg;
        msg << failures.size() << " (action, template) pair(s) failed:";
        for (const auto& f : failures)
            msg << " [" << f.action << ", template " << f.template_id << ": " << f.reason << "]";
        fail("GenerationIncomplete", msg.str());
    }
    if (failures.empty()) bank.validate();
    return bank;
}

namespace {

json prompt_to_json(const ActionConditionedPrompt& p) {
    return json{{"action", p.action},
                {"attribute", p.attribute},
                {"template_id", p.template_id},
                {"raw_text", p.raw_text},
                {"final_text", p.final_text},
                {"token_count", p.token_count}};
}

ActionConditionedPrompt prompt_from_json(const json& j) {
    ActionConditionedPrompt p;
    p.action = j.at("action").get<std::string>();
    p.attribute = j.at("attribute").get<std::string>();
    p.template_id = j.at("template_id").get<int>();
    p.raw_text = j.at("raw_text").get<std::string>();
    p.final_text = j.at("final_text").get<std::string>();
    p.token_count = j.at("token_count").get<std::size_t>();
    return p;
}

}  // namespace

void save_bank(const PromptBank& bank, const std::filesystem::path& path) {
    json aspects = json::array();
    for (const auto& a : bank.taxonomy.aspects) aspects.push_back(a);
    json attributes = json::array();
    for (const auto& a : bank.taxonomy.attributes)
        attributes.push_back({{"name", a.name}, {"aspect", a.aspect}, {"description", a.description}});

    json entries = json::array();
    for (const auto& e : bank.entries) {
        json prompts = json::array();
        for (const auto& p : e.prompts) prompts.push_back(prompt_to_json(p));
        entries.push_back({{"action", e.action}, {"prompts", prompts}});
    }

    const json j{{"taxonomy", {{"aspects", aspects}, {"attributes", attributes}}},
                 {"templates_used", bank.templates_used},
                 {"entries", entries},
                 {"version", bank.version},
                 {"created_at", bank.created_at}};
    write_file_atomic(path, j.dump(2) + "\n");
}

PromptBank load_bank(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail("MalformedJson", "bank '" + path.string() + "': " + e.what());
    }
    PromptBank bank;
    try {
        for (const auto& a : j.at("taxonomy").at("aspects"))
            bank.taxonomy.aspects.push_back(a.get<std::string>());
        for (const auto& a : j.at("taxonomy").at("attributes"))
            bank.taxonomy.attributes.push_back({a.at("name").get<std::string>(),
                                                a.at("aspect").get<std::string>(),
                                                a.at("description").get<std::string>()});
        bank.templates_used = j.at("templates_used").get<std::vector<int>>();
        for (const auto& e : j.at("entries")) {
            ActionPrompts entry;
            entry.action = e.at("action").get<std::string>();
            for (const auto& p : e.at("prompts")) entry.prompts.push_back(prompt_from_json(p));
            bank.entries.push_back(std::move(entry));
        }
        bank.version = j.at("version").get<std::string>();
        bank.created_at = j.at("created_at").get<std::string>();
    } catch (const json::exception& e) {
        fail("SchemaError", "bank '" + path.string() + "': " + e.what());
    }
    return bank;
}

std::string current_timestamp() {
    std::time_t now;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
        now = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
    else
        now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

}  // namespace maka
