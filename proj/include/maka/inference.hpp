#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maka/embedding.hpp"
#include "maka/scoring.hpp"
#include "maka/scoring_bank.hpp"

namespace maka {

enum class ViewPolicy {
    concat_frames,         // one frame set = row-concatenation of all views
    average_view_logits,   // score views independently, average the raw scores
};

ViewPolicy view_policy_from_string(const std::string& s);
std::string to_string(ViewPolicy p);

struct InferenceConfig {
    double temperature = 0.01;
    ViewPolicy view_policy = ViewPolicy::concat_frames;
    std::size_t top_k = 5;
    std::optional<std::set<std::string>> attribute_filter;
    std::optional<std::set<int>> template_filter;
    int jobs = 0;

    void validate() const;  // temperature > 0, top_k >= 1
};

struct RankedEntry {
    int category = 0;
    double score = 0.0;
    double prob = 0.0;
};

struct Prediction {
    std::string video_id;
    std::vector<RankedEntry> ranked;  // score desc, ties by category id asc
    std::size_t views_used = 0;
};

// Numerically stable softmax of scores / temperature (max subtraction).
std::vector<double> softmax(std::span<const double> scores, double temperature);

// Row-concatenation of all views of a record (the concat_frames input).
EmbeddingMatrix concat_views(const VideoRecord& record);

// Raw per-category scores for one record under the chosen view policy.
std::vector<double> raw_scores(const VideoRecord& record, const ScoringBank& bank,
                               ViewPolicy policy);

// Full ranking for one record: filter bank, score, softmax, order, truncate
// the ranked list to top_k (probabilities are over all K categories).
Prediction predict_topk(const VideoRecord& record, const ScoringBank& bank,
                        const InferenceConfig& config);

// Batched variant over many records against one (already filtered) bank;
// scoring fans out through the OpenMP kernel.
std::vector<Prediction> predict_batch(std::span<const VideoRecord> records,
                                      const ScoringBank& bank, const InferenceConfig& config);

// One JSON object per line: {"video_id", "topk": [...], "views_used"}.
std::string predictions_to_jsonl(std::span<const Prediction> predictions);
void save_predictions_jsonl(std::span<const Prediction> predictions,
                            const std::filesystem::path& path);

}  // namespace maka
