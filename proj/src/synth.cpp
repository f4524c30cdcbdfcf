#include <cmath>
#include <cstdio>

#include "maka/error.hpp"
#include "maka/eval.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"

namespace maka {

namespace fs = std::filesystem;

void SynthParams::validate() const {
    if (n_classes < 2) fail("BadParams", "synth needs at least 2 classes");
    if (n_attributes < 1) fail("BadParams", "synth needs at least 1 attribute");
    if (dim < n_classes + n_attributes)
        fail("BadParams", "dim must be >= n_classes + n_attributes (" +
                              std::to_string(n_classes + n_attributes) + "), got " +
                              std::to_string(dim));
    if (frames_per_video < 1 || prompts_per_class < 1 || videos_per_class < 1)
        fail("BadParams", "frames, prompts and videos per class must be >= 1");
    if (attrs_per_frame < 1 || attrs_per_frame > n_attributes)
        fail("BadParams", "attrs_per_frame must be in [1, n_attributes]");
    if (context_frames >= frames_per_video)
        fail("BadParams", "context_frames must leave at least one signal frame");
    if (prompt_noise < 0 || frame_noise < 0 || distortion < 0 || attr_scale < 0)
        fail("BadParams", "scales and noise levels must be >= 0");
}

namespace {

std::string class_name(std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "class%02zu", k);
    return std::string(buf);
}

std::string video_name(std::size_t k, std::size_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "class%02zu_v%02zu", k, v);
    return std::string(buf);
}

void normalize_f64_to_f32(const std::vector<double>& src, float* dst, std::size_t d) {
    double n2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) n2 += src[i] * src[i];
    const double n = std::sqrt(n2);
    if (n <= 1e-12) fail("ZeroNormRow", "synthetic vector collapsed to zero");
    for (std::size_t i = 0; i < d; ++i) dst[i] = static_cast<float>(src[i] / n);
}

}  // namespace

SynthDataset synth_generate(const SynthParams& p) {
    p.validate();
    SplitMix64 rng(p.seed);
    const std::size_t d = p.dim;

    // Fixed draw order: distortion map (when used), then prompts in
    // (class, prompt, coordinate) order, then videos in
    // (class, video, frame) order. Changing it would invalidate frozen
    // fixtures, so extend the generator only by appending draws.
    std::vector<double> mix;  // distortion matrix, row-major
    if (p.distortion > 0) {
        mix.resize(d * d);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& x : mix) x = rng.next_gaussian() * scale;
    }

    SynthDataset out;
    out.manifest.name = "synth-seed" + std::to_string(p.seed);

    std::vector<double> vec(d), mixed(d);

    for (std::size_t k = 0; k < p.n_classes; ++k) {
        EmbeddingMatrix prompts(p.prompts_per_class, d);
        for (std::size_t m = 0; m < p.prompts_per_class; ++m) {
            const std::size_t attr = m % p.n_attributes;
            std::fill(vec.begin(), vec.end(), 0.0);
            vec[k] = 1.0;
            vec[p.n_classes + attr] += p.attr_scale;
            if (p.prompt_noise > 0)
                for (std::size_t i = 0; i < d; ++i) vec[i] += p.prompt_noise * rng.next_gaussian();
            normalize_f64_to_f32(vec, prompts.row(m), d);
        }
        prompts.normalized = true;
        out.class_prompts.emplace_back(class_name(k), std::move(prompts));
    }

    const std::size_t train_per_class = (p.videos_per_class + 1) / 2;
    for (std::size_t k = 0; k < p.n_classes; ++k) {
        out.manifest.classes.push_back(
            {static_cast<int>(k), class_name(k), train_per_class});
    }

    for (std::size_t k = 0; k < p.n_classes; ++k) {
        for (std::size_t v = 0; v < p.videos_per_class; ++v) {
            EmbeddingMatrix frames(p.frames_per_video, d);
            const std::size_t signal_frames = p.frames_per_video - p.context_frames;
            for (std::size_t f = 0; f < p.frames_per_video; ++f) {
                const auto attrs =
                    sample_without_replacement(p.n_attributes, p.attrs_per_frame, rng);
                std::fill(vec.begin(), vec.end(), 0.0);
                if (f < signal_frames) vec[k] = 1.0;
                for (std::size_t a : attrs)
                    vec[p.n_classes + a] += p.attr_scale / static_cast<double>(attrs.size());
                if (p.frame_noise > 0)
                    for (std::size_t i = 0; i < d; ++i) vec[i] += p.frame_noise * rng.next_gaussian();
                if (p.distortion > 0) {
                    for (std::size_t r = 0; r < d; ++r) {
                        double s = 0.0;
                        const double* row = mix.data() + r * d;
                        for (std::size_t c = 0; c < d; ++c) s += row[c] * vec[c];
                        mixed[r] = vec[r] + p.distortion * s;
                    }
                    vec = mixed;
                }
                normalize_f64_to_f32(vec, frames.row(f), d);
            }
            frames.normalized = true;

            const std::string id = video_name(k, v);
            VideoInfo info;
            info.video_id = id;
            info.label = static_cast<int>(k);
            info.split = v < train_per_class ? "train" : "val";
            info.embedding_ids = {id};
            out.manifest.videos.push_back(std::move(info));
            out.video_frames.emplace_back(id, std::move(frames));
        }
    }

    out.manifest.validate();
    return out;
}

void write_synth_dataset(const SynthDataset& data, const fs::path& dir) {
    fs::create_directories(dir / "videos");
    fs::create_directories(dir / "prompts");

    EmbeddingManifest videos;
    videos.kind = "video_frames";
    for (const auto& [id, m] : data.video_frames) {
        const std::string rel = "videos/" + id + ".apeb";
        const std::uint64_t checksum = save_matrix(m, dir / rel);
        videos.entries.push_back({id, rel, m.rows, m.dim, to_hex64(checksum)});
    }
    save_manifest(videos, dir / kVideoManifestName);

    EmbeddingManifest prompts;
    prompts.kind = "prompt_texts";
    for (const auto& [name, m] : data.class_prompts) {
        const std::string rel = "prompts/" + name + ".apeb";
        const std::uint64_t checksum = save_matrix(m, dir / rel);
        prompts.entries.push_back({name, rel, m.rows, m.dim, to_hex64(checksum)});
    }
    save_manifest(prompts, dir / kPromptManifestName);

    save_dataset_manifest(data.manifest, dir / "dataset.json");
}

}  // namespace maka
