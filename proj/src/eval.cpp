#include "maka/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maka/error.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"

namespace maka {

namespace fs = std::filesystem;
using json = nlohmann::json;

void DatasetManifest::validate() const {
    std::set<int> class_ids;
    std::set<std::string> class_names;
    for (const auto& c : classes) {
        if (!class_ids.insert(c.id).second)
            fail("SchemaError", "dataset has duplicate class id " + std::to_string(c.id));
        if (!class_names.insert(c.name).second)
            fail("SchemaError", "dataset has duplicate class name '" + c.name + "'");
    }
    std::set<std::string> video_ids;
    for (const auto& v : videos) {
        if (!video_ids.insert(v.video_id).second)
            fail("SchemaError", "dataset has duplicate video id '" + v.video_id + "'");
        if (!class_ids.count(v.label))
            fail("UnknownLabel", "video '" + v.video_id + "' references undeclared class " +
                                     std::to_string(v.label));
        if (v.embedding_ids.empty())
            fail("SchemaError", "video '" + v.video_id + "' lists no embeddings");
    }
}

const ClassInfo* DatasetManifest::find_class(int id) const {
    for (const auto& c : classes)
        if (c.id == id) return &c;
    return nullptr;
}

DatasetManifest load_dataset_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail("MalformedJson", "dataset manifest '" + path.string() + "': " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        for (const auto& c : j.at("classes"))
            m.classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(),
                                 c.at("train_sample_count").get<std::size_t>()});
        for (const auto& v : j.at("videos")) {
            VideoInfo info;
            info.video_id = v.at("video_id").get<std::string>();
            info.label = v.at("label").get<int>();
            info.split = v.at("split").get<std::string>();
            info.embedding_ids = v.at("embedding_ids").get<std::vector<std::string>>();
            m.videos.push_back(std::move(info));
        }
    } catch (const json::exception& e) {
        fail("SchemaError", "dataset manifest '" + path.string() + "': " + e.what());
    }
    m.validate();
    return m;
}

void save_dataset_manifest(const DatasetManifest& m, const fs::path& path) {
    json classes = json::array();
    for (const auto& c : m.classes)
        classes.push_back({{"id", c.id}, {"name", c.name}, {"train_sample_count", c.train_sample_count}});
    json videos = json::array();
    for (const auto& v : m.videos)
        videos.push_back({{"video_id", v.video_id},
                          {"label", v.label},
                          {"split", v.split},
                          {"embedding_ids", v.embedding_ids}});
    const json j{{"name", m.name}, {"classes", classes}, {"videos", videos}};
    write_file_atomic(path, j.dump(2) + "\n");
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "zeroshot" || s == "zero_shot") return Protocol::zero_shot;
    if (s == "base2novel" || s == "base_to_novel") return Protocol::base_to_novel;
    if (s == "fewshot" || s == "few_shot") return Protocol::few_shot;
    fail("BadParams", "unknown protocol '" + s + "'");
}

double harmonic_mean(double base, double novel) {
    if (!(base > 0) || !(novel > 0))
        fail("NonPositive", "harmonic_mean needs positive inputs");
    return 2.0 * base * novel / (base + novel);
}

std::pair<double, double> top1_top5(std::span<const Prediction> predictions,
                                    const std::vector<std::pair<std::string, int>>& labels) {
    if (predictions.empty()) fail("BadParams", "top1_top5 of no predictions");
    std::map<std::string, int> by_id(labels.begin(), labels.end());
    std::size_t hit1 = 0, hit5 = 0;
    for (const auto& p : predictions) {
        const auto it = by_id.find(p.video_id);
        if (it == by_id.end())
            fail("MissingLabel", "no label for video '" + p.video_id + "'");
        const int truth = it->second;
        const std::size_t depth = std::min<std::size_t>(5, p.ranked.size());
        for (std::size_t r = 0; r < depth; ++r) {
            if (p.ranked[r].category == truth) {
                ++hit5;
                if (r == 0) ++hit1;
                break;
            }
        }
    }
    const double n = static_cast<double>(predictions.size());
    return {100.0 * static_cast<double>(hit1) / n, 100.0 * static_cast<double>(hit5) / n};
}

namespace {

std::vector<ClassInfo> frequency_sorted(const DatasetManifest& manifest) {
    std::vector<ClassInfo> sorted = manifest.classes;
    std::sort(sorted.begin(), sorted.end(), [](const ClassInfo& a, const ClassInfo& b) {
        if (a.train_sample_count != b.train_sample_count)
            return a.train_sample_count > b.train_sample_count;
        return a.name < b.name;
    });
    return sorted;
}

std::vector<std::string> train_videos_of_class(const DatasetManifest& manifest, int class_id,
                                               const std::string& train_split) {
    std::vector<std::string> out;
    for (const auto& v : manifest.videos)
        if (v.label == class_id && v.split == train_split) out.push_back(v.video_id);
    return out;
}

}  // namespace

BaseNovelSplit make_base_novel_split(const DatasetManifest& manifest, int shots,
                                     std::uint64_t seed, const std::string& train_split) {
    if (manifest.classes.size() < 2)
        fail("BadParams", "base-to-novel split needs at least 2 classes");
    if (shots < 1) fail("BadParams", "shots must be >= 1");

    const std::vector<ClassInfo> sorted = frequency_sorted(manifest);
    const std::size_t n_base = (sorted.size() + 1) / 2;

    BaseNovelSplit split;
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i < n_base)
            split.base_class_ids.push_back(sorted[i].id);
        else
            split.novel_class_ids.push_back(sorted[i].id);
    }
    for (int id : split.base_class_ids) {
        const std::vector<std::string> pool = train_videos_of_class(manifest, id, train_split);
        if (pool.size() < static_cast<std::size_t>(shots)) {
            split.warnings.push_back("class " + std::to_string(id) + " has only " +
                                     std::to_string(pool.size()) + " train videos for " +
                                     std::to_string(shots) + " shots; using all");
            for (const auto& v : pool) split.train_video_ids.push_back(v);
            continue;
        }
        for (std::size_t idx : sample_without_replacement(pool.size(), shots, rng))
            split.train_video_ids.push_back(pool[idx]);
    }
    return split;
}

std::vector<std::vector<int>> make_zero_shot_subsets(const DatasetManifest& manifest,
                                                     const SplitSpec& spec) {
    if (spec.subset_size > manifest.classes.size())
        fail("BadParams", "subset_size " + std::to_string(spec.subset_size) + " exceeds class count " +
                              std::to_string(manifest.classes.size()));
    if (spec.n_splits < 1) fail("BadParams", "n_splits must be >= 1");

    SplitMix64 seeder(spec.seed);
    std::vector<std::vector<int>> subsets;
    for (int s = 0; s < spec.n_splits; ++s) {
        SplitMix64 rng(seeder.derive_seed());
        std::vector<int> subset;
        for (std::size_t idx :
             sample_without_replacement(manifest.classes.size(), spec.subset_size, rng))
            subset.push_back(manifest.classes[idx].id);
        std::sort(subset.begin(), subset.end());
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

std::vector<std::string> sample_few_shot(const DatasetManifest& manifest, int k,
                                         std::uint64_t seed, const std::string& train_split,
                                         std::vector<std::string>* warnings) {
    if (k < 1) fail("BadParams", "K must be >= 1");
    SplitMix64 rng(seed);
    std::vector<std::string> out;
    for (const auto& c : manifest.classes) {
        const std::vector<std::string> pool = train_videos_of_class(manifest, c.id, train_split);
        if (pool.size() <= static_cast<std::size_t>(k)) {
            if (pool.size() < static_cast<std::size_t>(k) && warnings)
                warnings->push_back("class '" + c.name + "' has only " +
                                    std::to_string(pool.size()) + " train videos for K=" +
                                    std::to_string(k) + "; using all");
            for (const auto& v : pool) out.push_back(v);
            continue;
        }
        for (std::size_t idx : sample_without_replacement(pool.size(), k, rng))
            out.push_back(pool[idx]);
    }
    return out;
}

MetricsReport aggregate_splits(std::span<const MetricsReport> reports) {
    if (reports.empty()) fail("BadParams", "aggregate_splits of no reports");
    MetricsReport out;
    for (const auto& r : reports) {
        out.split_top1.push_back(r.top1);
        out.split_top5.push_back(r.top5);
    }
    const double n = static_cast<double>(reports.size());
    double m1 = 0, m5 = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        m1 += out.split_top1[i];
        m5 += out.split_top5[i];
    }
    m1 /= n;
    m5 /= n;
    double var = 0;
    for (double v : out.split_top1) var += (v - m1) * (v - m1);
    var /= n;  // population variance: the splits are the whole run population
    out.top1 = m1;
    out.top5 = m5;
    out.mean = m1;
    out.stddev = std::sqrt(var);
    return out;
}

std::string MetricsReport::to_json_string() const {
    json j{{"top1", top1},
           {"top5", top5},
           {"split_top1", split_top1},
           {"split_top5", split_top5},
           {"mean", mean},
           {"stddev", stddev}};
    if (base) j["base"] = *base;
    if (novel) j["novel"] = *novel;
    if (hm) j["hm"] = *hm;
    return j.dump(2) + "\n";
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "top1: " << top1 << "  top5: " << top5 << "\n";
    if (!split_top1.empty()) {
        out << "splits:";
        for (double v : split_top1) out << " " << v;
        out << "  (mean " << mean << " +/- " << stddev << ")\n";
    }
    if (base && novel && hm)
        out << "base: " << *base << "  novel: " << *novel << "  hm: " << *hm << "\n";
    return out.str();
}

void save_report(const MetricsReport& r, const fs::path& path) {
    write_file_atomic(path, r.to_json_string());
}

LoadedDataset load_dataset(const fs::path& manifest_path, const fs::path& embeddings_dir,
                           const LinearAdapter* adapter) {
    LoadedDataset data;
    data.manifest = load_dataset_manifest(manifest_path);
    const EmbeddingManifest videos_manifest =
        load_manifest(embeddings_dir / kVideoManifestName);
    if (videos_manifest.kind != "video_frames")
        fail("SchemaError", "videos manifest has kind '" + videos_manifest.kind + "'");

    for (const auto& info : data.manifest.videos) {
        VideoRecord record;
        record.video_id = info.video_id;
        record.label = info.label;
        for (const auto& id : info.embedding_ids) {
            const ManifestEntry* entry = videos_manifest.find(id);
            if (!entry)
                fail("SchemaError", "video '" + info.video_id + "' references unknown embedding '" +
                                        id + "'");
            EmbeddingMatrix m = load_matrix_normalized(embeddings_dir / entry->path);
            if (adapter) m = apply_adapter(*adapter, m);
            record.views.push_back(std::move(m));
        }
        record.validate();
        data.videos.push_back(std::move(record));
    }
    return data;
}

ScoringBank bank_for_classes(const ScoringBank& bank, std::span<const ClassInfo> classes) {
    ScoringBank out;
    for (const auto& c : classes) {
        const CategoryEntry* entry = bank.find(c.name);
        if (!entry)
            fail("UnknownLabel", "no prompts for class '" + c.name + "' in the bank");
        CategoryEntry copy = *entry;
        copy.id = c.id;
        out.categories.push_back(std::move(copy));
    }
    if (out.categories.empty()) fail("EmptyBank", "no classes to evaluate");
    out.dim = out.categories.front().prompts.dim;
    return out;
}

namespace {

struct EvalSlice {
    std::vector<VideoRecord> videos;  // copies restricted to the slice
    std::vector<std::pair<std::string, int>> labels;
};

EvalSlice slice_videos(const LoadedDataset& data, const std::set<int>& class_ids,
                       const std::string& eval_split) {
    EvalSlice out;
    for (std::size_t i = 0; i < data.videos.size(); ++i) {
        const VideoInfo& info = data.manifest.videos[i];
        if (info.split != eval_split) continue;
        if (!class_ids.count(info.label)) continue;
        out.videos.push_back(data.videos[i]);
        out.labels.emplace_back(info.video_id, info.label);
    }
    return out;
}

MetricsReport eval_slice(const EvalSlice& slice, const ScoringBank& bank,
                         const InferenceConfig& config) {
    if (slice.videos.empty()) fail("BadParams", "no videos in the evaluation slice");
    const std::vector<Prediction> preds = predict_batch(slice.videos, bank, config);
    const auto [t1, t5] = top1_top5(preds, slice.labels);
    MetricsReport r;
    r.top1 = t1;
    r.top5 = t5;
    return r;
}

std::vector<ClassInfo> classes_by_ids(const DatasetManifest& manifest,
                                      const std::vector<int>& ids) {
    std::vector<ClassInfo> out;
    for (int id : ids) {
        const ClassInfo* c = manifest.find_class(id);
        if (!c) fail("UnknownLabel", "unknown class id " + std::to_string(id));
        out.push_back(*c);
    }
    return out;
}

}  // namespace

MetricsReport run_zero_shot(const LoadedDataset& data, const ScoringBank& bank,
                            const SplitSpec& spec, const InferenceConfig& config,
                            const std::string& eval_split) {
    const std::vector<std::vector<int>> subsets = make_zero_shot_subsets(data.manifest, spec);
    std::vector<MetricsReport> reports;
    for (const auto& subset : subsets) {
        const std::vector<ClassInfo> classes = classes_by_ids(data.manifest, subset);
        const ScoringBank subset_bank = bank_for_classes(bank, classes);
        const EvalSlice slice =
            slice_videos(data, std::set<int>(subset.begin(), subset.end()), eval_split);
        reports.push_back(eval_slice(slice, subset_bank, config));
    }
    return aggregate_splits(reports);
}

MetricsReport run_base_to_novel(const LoadedDataset& data, const ScoringBank& bank,
                                const SplitSpec& spec, const InferenceConfig& config,
                                const std::string& eval_split) {
    const BaseNovelSplit split = make_base_novel_split(data.manifest, spec.shots, spec.seed);

    const std::vector<ClassInfo> base_classes = classes_by_ids(data.manifest, split.base_class_ids);
    const std::vector<ClassInfo> novel_classes =
        classes_by_ids(data.manifest, split.novel_class_ids);

    const EvalSlice base_slice = slice_videos(
        data, std::set<int>(split.base_class_ids.begin(), split.base_class_ids.end()), eval_split);
    const EvalSlice novel_slice = slice_videos(
        data, std::set<int>(split.novel_class_ids.begin(), split.novel_class_ids.end()),
        eval_split);

    const MetricsReport base_report = eval_slice(base_slice, bank_for_classes(bank, base_classes), config);
    const MetricsReport novel_report =
        eval_slice(novel_slice, bank_for_classes(bank, novel_classes), config);

    MetricsReport out;
    out.base = base_report.top1;
    out.novel = novel_report.top1;
    out.hm = harmonic_mean(base_report.top1, novel_report.top1);
    out.top1 = *out.hm;
    out.top5 = 0.5 * (base_report.top5 + novel_report.top5);
    out.split_top1 = {base_report.top1, novel_report.top1};
    out.split_top5 = {base_report.top5, novel_report.top5};
    out.mean = out.top1;
    out.stddev = 0.0;
    return out;
}

MetricsReport run_few_shot(const LoadedDataset& data, const ScoringBank& bank,
                           const SplitSpec& spec, const InferenceConfig& config,
                           const std::string& eval_split) {
    (void)spec;  // K only shapes the training set, consumed by adapter training
    std::set<int> all_ids;
    for (const auto& c : data.manifest.classes) all_ids.insert(c.id);
    const ScoringBank full = bank_for_classes(bank, data.manifest.classes);
    const EvalSlice slice = slice_videos(data, all_ids, eval_split);
    MetricsReport r = eval_slice(slice, full, config);
    r.split_top1 = {r.top1};
    r.split_top5 = {r.top5};
    r.mean = r.top1;
    r.stddev = 0.0;
    return r;
}

}  // namespace maka
