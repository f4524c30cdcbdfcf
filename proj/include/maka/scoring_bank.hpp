#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "maka/embedding.hpp"
#include "maka/prompt_bank.hpp"

namespace maka {

struct PromptColumnMeta {
    std::string attribute;
    int template_id = 0;
    std::string text;
};

// One category ready for scoring: its prompt embedding matrix plus, when a
// prompt bank is attached, per-row provenance (row i of the matrix is prompt
// i of the bank entry).
struct CategoryEntry {
    int id = 0;
    std::string name;
    EmbeddingMatrix prompts;                // normalized
    std::vector<PromptColumnMeta> meta;     // empty when no bank was attached
};

struct ScoringBank {
    std::vector<CategoryEntry> categories;
    std::size_t dim = 0;

    const CategoryEntry* find(const std::string& name) const;
    const CategoryEntry* find(int id) const;
};

// Builds the bank from an embeddings directory's prompt manifest
// (prompts.manifest.json, kind "prompt_texts"; entry ids are category names).
// Category ids follow manifest order. When bank_path is given, each matrix's
// rows are matched 1:1 with that action's prompts for filtering/attribution.
ScoringBank load_scoring_bank(const std::filesystem::path& embeddings_dir,
                              const std::optional<std::filesystem::path>& bank_path = {});

inline constexpr const char* kPromptManifestName = "prompts.manifest.json";
inline constexpr const char* kVideoManifestName = "videos.manifest.json";

// Keeps only prompt rows whose attribute / template id are in the requested
// subsets (empty optional = no filtering on that axis). Requires metadata.
// Errors: EmptyAfterFilter if any category would lose all prompts.
ScoringBank filter_bank(const ScoringBank& bank,
                        const std::optional<std::set<std::string>>& attributes,
                        const std::optional<std::set<int>>& templates);

}  // namespace maka
