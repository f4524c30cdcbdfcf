#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maka/scoring.hpp"
#include "maka/scoring_bank.hpp"

namespace maka {

// Frame <-> prompt relevancy grid for one (video, category) pair, plus the
// argmax indices in both directions and per-column prompt provenance. The
// grid is frame-major: grid[i * n_t + j] is frame i against prompt j.
struct AttributionMap {
    std::string video_id;
    int category = 0;
    std::size_t n_v = 0;
    std::size_t n_t = 0;
    std::vector<float> grid;
    std::vector<std::uint32_t> row_argmax;  // best prompt per frame
    std::vector<std::uint32_t> col_argmax;  // best frame per prompt
    std::vector<PromptColumnMeta> prompt_meta;  // may be empty

    float at(std::size_t frame, std::size_t prompt) const { return grid[frame * n_t + prompt]; }
    // column header "attr:template" (or "p<j>" when no metadata is attached)
    std::string column_label(std::size_t j) const;
};

// Builds the map from a captured relevancy tensor cell (NotCaptured if the
// tensor was not retained for this pair). Argmaxes are taken verbatim from
// the capture, so they follow the kernel's lowest-index tie rule.
AttributionMap build_map(const std::string& video_id, const CategoryEntry& category,
                         const RelevancyTensor& tensor, std::size_t b, std::size_t k);

// Per-frame prompt ranking by grid score (ties: lower column index first),
// truncated to k entries.
std::vector<std::vector<std::uint32_t>> top_prompts_per_frame(const AttributionMap& map,
                                                              std::size_t k = 5);

// CSV: one header row of column labels, then one row per frame with scores
// printed at 6 decimal places. JSON mirrors the struct fields.
std::string to_csv(const AttributionMap& map);
std::string to_json_string(const AttributionMap& map);

void export_map(const AttributionMap& map, const std::string& format,
                const std::filesystem::path& path);

}  // namespace maka
