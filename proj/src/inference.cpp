#include "maka/inference.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "maka/error.hpp"
#include "maka/io.hpp"

namespace maka {

using json = nlohmann::json;

ViewPolicy view_policy_from_string(const std::string& s) {
    if (s == "concat_frames" || s == "concat") return ViewPolicy::concat_frames;
    if (s == "average_view_logits" || s == "average") return ViewPolicy::average_view_logits;
    fail("BadParams", "unknown view policy '" + s + "'");
}

std::string to_string(ViewPolicy p) {
    return p == ViewPolicy::concat_frames ? "concat_frames" : "average_view_logits";
}

void InferenceConfig::validate() const {
    if (!(temperature > 0)) fail("BadParams", "temperature must be > 0");
    if (top_k < 1) fail("BadParams", "top_k must be >= 1");
}

std::vector<double> softmax(std::span<const double> scores, double temperature) {
    if (!(temperature > 0)) fail("BadParams", "softmax temperature must be > 0");
    if (scores.empty()) fail("BadParams", "softmax of an empty score vector");
    double max_score = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) fail("NonFiniteValue", "softmax input is not finite");
        max_score = std::max(max_score, s);
    }
    std::vector<double> probs(scores.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        probs[i] = std::exp((scores[i] - max_score) / temperature);
        denom += probs[i];
    }
    for (double& p : probs) p /= denom;
    return probs;
}

EmbeddingMatrix concat_views(const VideoRecord& record) {
    record.validate();
    std::size_t total_rows = 0;
    for (const auto& v : record.views) total_rows += v.rows;
    EmbeddingMatrix out(total_rows, record.views.front().dim);
    out.normalized = true;
    std::size_t row = 0;
    for (const auto& v : record.views) {
        if (!v.normalized)
            fail("NotNormalized", "view of video '" + record.video_id + "' is not normalized");
        std::copy(v.data.begin(), v.data.end(), out.row(row));
        row += v.rows;
    }
    return out;
}

namespace {

std::vector<EmbeddingMatrix> copy_bank_matrices(const ScoringBank& bank) {
    if (bank.categories.empty()) fail("EmptyBank", "scoring bank has no categories");
    std::vector<EmbeddingMatrix> out;
    out.reserve(bank.categories.size());
    for (const auto& c : bank.categories) out.push_back(c.prompts);
    return out;
}

Prediction rank_scores(const std::string& video_id, const std::vector<double>& scores,
                       const ScoringBank& bank, const InferenceConfig& config,
                       std::size_t views_used) {
    const std::vector<double> probs = softmax(scores, config.temperature);
    Prediction pred;
    pred.video_id = video_id;
    pred.views_used = views_used;
    pred.ranked.resize(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k)
        pred.ranked[k] = {bank.categories[k].id, scores[k], probs[k]};
    std::sort(pred.ranked.begin(), pred.ranked.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.category < b.category;
    });
    if (pred.ranked.size() > config.top_k) pred.ranked.resize(config.top_k);
    return pred;
}

}  // namespace

std::vector<double> raw_scores(const VideoRecord& record, const ScoringBank& bank,
                               ViewPolicy policy) {
    record.validate();
    const std::vector<EmbeddingMatrix> cats = copy_bank_matrices(bank);
    const std::size_t K = cats.size();
    std::vector<double> scores(K, 0.0);

    if (policy == ViewPolicy::concat_frames) {
        const EmbeddingMatrix frames = concat_views(record);
        const BatchedScores s = batched_scores({&frames, 1}, cats, nullptr, 1);
        for (std::size_t k = 0; k < K; ++k) scores[k] = s.at(0, k).score;
    } else {
        const BatchedScores s = batched_scores(record.views, cats, nullptr, 1);
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (std::size_t v = 0; v < record.views.size(); ++v) sum += s.at(v, k).score;
            scores[k] = sum / static_cast<double>(record.views.size());
        }
    }
    return scores;
}

Prediction predict_topk(const VideoRecord& record, const ScoringBank& bank,
                        const InferenceConfig& config) {
    config.validate();
    const ScoringBank filtered = filter_bank(bank, config.attribute_filter, config.template_filter);
    const std::vector<double> scores = raw_scores(record, filtered, config.view_policy);
    return rank_scores(record.video_id, scores, filtered, config, record.views.size());
}

std::vector<Prediction> predict_batch(std::span<const VideoRecord> records,
                                      const ScoringBank& bank, const InferenceConfig& config) {
    config.validate();
    if (records.empty()) return {};
    const ScoringBank filtered = filter_bank(bank, config.attribute_filter, config.template_filter);
    const std::vector<EmbeddingMatrix> cats = copy_bank_matrices(filtered);
    const std::size_t K = cats.size();

    // flatten views (or concatenations) into one batch for the kernel
    std::vector<EmbeddingMatrix> batch;
    std::vector<std::pair<std::size_t, std::size_t>> slices;  // per record: (first, count)
    for (const auto& record : records) {
        record.validate();
        if (config.view_policy == ViewPolicy::concat_frames) {
            slices.emplace_back(batch.size(), 1);
            batch.push_back(concat_views(record));
        } else {
            slices.emplace_back(batch.size(), record.views.size());
            for (const auto& view : record.views) batch.push_back(view);
        }
    }

    const BatchedScores s = batched_scores(batch, cats, nullptr, config.jobs);

    std::vector<Prediction> out;
    out.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto [first, count] = slices[r];
        std::vector<double> scores(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (std::size_t v = 0; v < count; ++v) sum += s.at(first + v, k).score;
            scores[k] = sum / static_cast<double>(count);
        }
        out.push_back(rank_scores(records[r].video_id, scores, filtered, config,
                                  records[r].views.size()));
    }
    return out;
}

std::string predictions_to_jsonl(std::span<const Prediction> predictions) {
    std::string out;
    for (const auto& p : predictions) {
        json topk = json::array();
        for (const auto& e : p.ranked)
            topk.push_back({{"category", e.category}, {"score", e.score}, {"prob", e.prob}});
        const json line{{"video_id", p.video_id}, {"topk", topk}, {"views_used", p.views_used}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

void save_predictions_jsonl(std::span<const Prediction> predictions,
                            const std::filesystem::path& path) {
    write_file_atomic(path, predictions_to_jsonl(predictions));
}

}  // namespace maka
