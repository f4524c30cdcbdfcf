#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maka/adapter.hpp"
#include "maka/embedding.hpp"
#include "maka/inference.hpp"
#include "maka/scoring_bank.hpp"

namespace maka {

struct ClassInfo {
    int id = 0;
    std::string name;
    std::size_t train_sample_count = 0;
};

struct VideoInfo {
    std::string video_id;
    int label = 0;
    std::string split;  // "train" | "val"
    std::vector<std::string> embedding_ids;  // one per view, ids in videos.manifest.json
};

struct DatasetManifest {
    std::string name;
    std::vector<ClassInfo> classes;
    std::vector<VideoInfo> videos;

    void validate() const;  // unique ids, labels reference declared classes
    const ClassInfo* find_class(int id) const;
};

DatasetManifest load_dataset_manifest(const std::filesystem::path& path);
void save_dataset_manifest(const DatasetManifest& m, const std::filesystem::path& path);

enum class Protocol { zero_shot, base_to_novel, few_shot };
Protocol protocol_from_string(const std::string& s);

struct SplitSpec {
    Protocol kind = Protocol::zero_shot;
    int n_splits = 3;
    std::size_t subset_size = 160;  // zero-shot: classes per subset
    int shots = 16;                 // base-to-novel: shots per base class
    int k_shot = 16;                // few-shot K
    std::uint64_t seed = 0;
};

struct MetricsReport {
    double top1 = 0.0;  // percent
    double top5 = 0.0;
    std::vector<double> split_top1;
    std::vector<double> split_top5;
    double mean = 0.0;    // of split_top1
    double stddev = 0.0;  // population std of split_top1
    std::optional<double> base, novel, hm;

    std::string to_json_string() const;
    std::string to_text() const;
};

void save_report(const MetricsReport& r, const std::filesystem::path& path);

// 2ab / (a+b); both arguments must be positive (NonPositive otherwise).
double harmonic_mean(double base, double novel);

// Percent of predictions whose true label is at rank 1 / within the first 5
// ranks (or all ranks when fewer than 5 are present).
// labels: video_id -> class id; MissingLabel if a prediction has no label.
std::pair<double, double> top1_top5(std::span<const Prediction> predictions,
                                    const std::vector<std::pair<std::string, int>>& labels);

struct BaseNovelSplit {
    std::vector<int> base_class_ids;   // frequency-sorted, top half (ceil)
    std::vector<int> novel_class_ids;
    std::vector<std::string> train_video_ids;  // `shots` per base class, seeded
    std::vector<std::string> warnings;         // classes that fell back to all videos
};

// Classes sorted by train_sample_count descending (ties: name ascending);
// the top ceil(n/2) are base. The base training set draws `shots` train-split
// videos per base class with the given seed (all of them, with a warning,
// when a class has fewer).
BaseNovelSplit make_base_novel_split(const DatasetManifest& manifest, int shots,
                                     std::uint64_t seed, const std::string& train_split = "train");

// n_splits seeded subsets of class ids, each of subset_size, drawn without
// replacement (per-split seeds derived from spec.seed).
std::vector<std::vector<int>> make_zero_shot_subsets(const DatasetManifest& manifest,
                                                     const SplitSpec& spec);

// K train-split videos per class (all of them, with a warning, when fewer).
std::vector<std::string> sample_few_shot(const DatasetManifest& manifest, int k,
                                         std::uint64_t seed,
                                         const std::string& train_split = "train",
                                         std::vector<std::string>* warnings = nullptr);

// Arithmetic mean and population standard deviation across split reports.
MetricsReport aggregate_splits(std::span<const MetricsReport> reports);

// Videos materialized with their view matrices (normalized; adapter applied
// when given). Labels carry the manifest class ids.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<VideoRecord> videos;  // same order as manifest.videos
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path,
                           const std::filesystem::path& embeddings_dir,
                           const LinearAdapter* adapter = nullptr);

// Bank restricted to the given classes, re-keyed to the manifest class ids
// (categories matched to classes by name, in `classes` order).
ScoringBank bank_for_classes(const ScoringBank& bank, std::span<const ClassInfo> classes);

// Protocol runners. Evaluation always uses videos whose split tag matches
// eval_split; training-set sampling is consumed by adapter training.
MetricsReport run_zero_shot(const LoadedDataset& data, const ScoringBank& bank,
                            const SplitSpec& spec, const InferenceConfig& config,
                            const std::string& eval_split = "val");
MetricsReport run_base_to_novel(const LoadedDataset& data, const ScoringBank& bank,
                                const SplitSpec& spec, const InferenceConfig& config,
                                const std::string& eval_split = "val");
MetricsReport run_few_shot(const LoadedDataset& data, const ScoringBank& bank,
                           const SplitSpec& spec, const InferenceConfig& config,
                           const std::string& eval_split = "val");

// ---------------------------------------------------------------------------
// Synthetic dataset generator
// ---------------------------------------------------------------------------

// Class concepts and attribute offsets are disjoint basis directions (hence
// dim >= n_classes + n_attributes). A prompt is
//   normalize(concept_k + attr_scale * offset_m + prompt_noise * g)
// and a signal frame is the same construction over the frame's sampled
// attribute subset plus frame_noise. The last `context_frames` of each video
// carry attribute content without the class concept: prompt-to-frame max-sim
// skips them, while mean pooling dilutes the class signal with them — that
// gap is what separates the two scorers on this data. `distortion` mixes
// frames through a fixed random linear map, which a trained linear adapter
// can learn to undo.
struct SynthParams {
    std::size_t n_classes = 20;
    std::size_t n_attributes = 12;
    std::size_t dim = 64;
    std::size_t frames_per_video = 8;
    std::size_t prompts_per_class = 12;
    std::size_t videos_per_class = 6;
    std::size_t attrs_per_frame = 1;
    std::size_t context_frames = 4;  // trailing frames without the concept
    double attr_scale = 1.5;
    double prompt_noise = 0.05;
    double frame_noise = 0.35;
    double distortion = 0.0;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SynthDataset {
    DatasetManifest manifest;
    std::vector<std::pair<std::string, EmbeddingMatrix>> video_frames;  // video_id -> frames
    std::vector<std::pair<std::string, EmbeddingMatrix>> class_prompts;  // class name -> prompts
};

// Deterministic per params (integer RNG, Irwin-Hall noise, no libm beyond
// sqrt), so fixtures frozen from it reproduce bitwise across platforms.
SynthDataset synth_generate(const SynthParams& params);

// dataset.json + videos.manifest.json + prompts.manifest.json + .apeb files.
void write_synth_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace maka
