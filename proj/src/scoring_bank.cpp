#include "maka/scoring_bank.hpp"

#include "maka/error.hpp"
#include "maka/io.hpp"

namespace maka {

namespace fs = std::filesystem;

const CategoryEntry* ScoringBank::find(const std::string& name) const {
    for (const auto& c : categories)
        if (c.name == name) return &c;
    return nullptr;
}

const CategoryEntry* ScoringBank::find(int id) const {
    for (const auto& c : categories)
        if (c.id == id) return &c;
    return nullptr;
}

ScoringBank load_scoring_bank(const fs::path& embeddings_dir,
                              const std::optional<fs::path>& bank_path) {
    const fs::path manifest_path = embeddings_dir / kPromptManifestName;
    const EmbeddingManifest manifest = load_manifest(manifest_path);
    if (manifest.kind != "prompt_texts")
        fail("SchemaError", "'" + manifest_path.string() + "' is not a prompt manifest");

    std::optional<PromptBank> bank;
    if (bank_path) bank = load_bank(*bank_path);

    ScoringBank out;
    int next_id = 0;
    for (const auto& entry : manifest.entries) {
        CategoryEntry cat;
        cat.id = next_id++;
        cat.name = entry.id;
        cat.prompts = load_matrix_normalized(embeddings_dir / entry.path);
        if (bank) {
            const ActionPrompts* prompts = bank->find(cat.name);
            if (!prompts)
                fail("UnknownLabel", "category '" + cat.name + "' is missing from the prompt bank");
            if (prompts->prompts.size() != cat.prompts.rows)
                fail("ShapeMismatch", "category '" + cat.name + "': " +
                                          std::to_string(cat.prompts.rows) +
                                          " embedding rows vs " +
                                          std::to_string(prompts->prompts.size()) +
                                          " bank prompts");
            for (const auto& p : prompts->prompts)
                cat.meta.push_back({p.attribute, p.template_id, p.final_text});
        }
        out.categories.push_back(std::move(cat));
    }
    if (out.categories.empty()) fail("EmptyBank", "prompt manifest lists no categories");
    out.dim = out.categories.front().prompts.dim;
    for (const auto& c : out.categories) {
        if (c.prompts.dim != out.dim)
            fail("DimMismatch", "category '" + c.name + "' has dim " +
                                    std::to_string(c.prompts.dim) + ", expected " +
                                    std::to_string(out.dim));
    }
    return out;
}

ScoringBank filter_bank(const ScoringBank& bank,
                        const std::optional<std::set<std::string>>& attributes,
                        const std::optional<std::set<int>>& templates) {
    if (!attributes && !templates) return bank;

    ScoringBank out;
    out.dim = bank.dim;
    for (const auto& cat : bank.categories) {
        if (cat.meta.size() != cat.prompts.rows)
            fail("BadParams", "category '" + cat.name +
                                  "' has no prompt metadata; filtering needs a prompt bank");
        CategoryEntry kept;
        kept.id = cat.id;
        kept.name = cat.name;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < cat.prompts.rows; ++i) {
            const auto& m = cat.meta[i];
            if (attributes && !attributes->count(m.attribute)) continue;
            if (templates && !templates->count(m.template_id)) continue;
            rows.push_back(i);
        }
        if (rows.empty())
            fail("EmptyAfterFilter", "category '" + cat.name + "' has no prompts left after filtering");
        if (rows.size() == cat.prompts.rows) {
            kept.prompts = cat.prompts;
            kept.meta = cat.meta;
        } else {
            kept.prompts = EmbeddingMatrix(rows.size(), cat.prompts.dim);
            kept.prompts.normalized = cat.prompts.normalized;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const float* src = cat.prompts.row(rows[r]);
                std::copy(src, src + cat.prompts.dim, kept.prompts.row(r));
                kept.meta.push_back(cat.meta[rows[r]]);
            }
        }
        out.categories.push_back(std::move(kept));
    }
    return out;
}

}  // namespace maka
