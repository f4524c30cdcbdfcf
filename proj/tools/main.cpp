// maka - action-prompt scoring engine CLI
//
// Subcommands: gen-prompts, fetch-embeddings, score, eval, train-adapter,
// attribute, synth. Exit codes: 0 success, 1 domain error, 2 usage error.
// Domain errors print one line: "ERROR <code>: <message>".

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maka/adapter.hpp"
#include "maka/attribution.hpp"
#include "maka/embed_client.hpp"
#include "maka/error.hpp"
#include "maka/eval.hpp"
#include "maka/inference.hpp"
#include "maka/io.hpp"
#include "maka/llm_client.hpp"
#include "maka/prompt_bank.hpp"
#include "maka/scoring_bank.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace maka;

namespace {

struct GlobalConfig {
    LlmClientConfig llm;
    EmbeddingServiceConfig embed;
    std::string cache_dir;
    int jobs = 0;
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& valid,
                         const std::string& scope) {
    for (const auto& [key, _] : obj.items()) {
        if (!valid.count(key)) {
            std::string keys;
            for (const auto& k : valid) keys += (keys.empty() ? "" : ", ") + k;
            fail("BadConfig", "unknown key '" + key + "' in " + scope + " (valid: " + keys + ")");
        }
    }
}

GlobalConfig load_config(const std::string& path) {
    GlobalConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail("BadConfig", "config '" + path + "': " + e.what());
    }
    reject_unknown_keys(j, {"llm", "embedding_service", "cache_dir", "jobs"}, "config");
    if (j.contains("llm")) {
        const json& l = j["llm"];
        reject_unknown_keys(l, {"endpoint", "model", "api_key_env", "temperature",
                                "max_attempts", "backoff_ms", "stub"},
                            "config.llm");
        if (l.contains("endpoint")) cfg.llm.endpoint = l["endpoint"].get<std::string>();
        if (l.contains("model")) cfg.llm.model = l["model"].get<std::string>();
        if (l.contains("api_key_env")) cfg.llm.api_key_env = l["api_key_env"].get<std::string>();
        if (l.contains("temperature")) cfg.llm.temperature = l["temperature"].get<double>();
        if (l.contains("max_attempts")) cfg.llm.max_attempts = l["max_attempts"].get<int>();
        if (l.contains("backoff_ms")) cfg.llm.backoff_base_ms = l["backoff_ms"].get<int>();
        if (l.contains("stub")) cfg.llm.stub = l["stub"].get<bool>();
    }
    if (j.contains("embedding_service")) {
        const json& e = j["embedding_service"];
        reject_unknown_keys(e, {"endpoint", "model", "api_key_env", "max_attempts", "backoff_ms"},
                            "config.embedding_service");
        if (e.contains("endpoint")) cfg.embed.endpoint = e["endpoint"].get<std::string>();
        if (e.contains("model")) cfg.embed.model = e["model"].get<std::string>();
        if (e.contains("api_key_env")) cfg.embed.api_key_env = e["api_key_env"].get<std::string>();
        if (e.contains("max_attempts")) cfg.embed.max_attempts = e["max_attempts"].get<int>();
        if (e.contains("backoff_ms")) cfg.embed.backoff_base_ms = e["backoff_ms"].get<int>();
    }
    if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    return cfg;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char ch : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_');
    return out;
}

std::optional<std::set<std::string>> parse_attribute_filter(const std::string& csv) {
    if (csv.empty()) return std::nullopt;
    std::set<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t end = csv.find(',', start);
        if (end == std::string::npos) end = csv.size();
        std::string item = csv.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        while (!item.empty() && item.back() == ' ') item.pop_back();
        if (!item.empty()) out.insert(item);
        start = end + 1;
    }
    return out;
}

std::optional<std::set<int>> parse_template_filter(const std::vector<int>& ids) {
    if (ids.empty()) return std::nullopt;
    return std::set<int>(ids.begin(), ids.end());
}

// --- gen-prompts -----------------------------------------------------------

int cmd_gen_prompts(const GlobalConfig& cfg, const std::string& actions_path,
                    const std::vector<int>& template_ids, const std::string& out_path,
                    bool allow_partial, int concurrency) {
    const std::vector<std::string> actions = read_lines(actions_path);
    if (actions.empty()) fail("BadParams", "'" + actions_path + "' lists no actions");

    LlmClient client(cfg.llm);
    GenerateOptions options;
    if (!template_ids.empty()) options.template_ids = template_ids;
    options.allow_partial = allow_partial;
    options.concurrency = concurrency;

    std::vector<FailedPair> failures;
    const PromptBank bank =
        generate_bank(actions, options, default_taxonomy(), client, &failures);
    for (const auto& f : failures)
        std::cerr << "WARN generation failed for (" << f.action << ", template " << f.template_id
                  << "): " << f.reason << "\n";
    save_bank(bank, out_path);
    std::cout << "wrote " << out_path << " (" << bank.entries.size() << " actions, "
              << client.network_requests() << " network requests)\n";
    return 0;
}

// --- fetch-embeddings ------------------------------------------------------

int cmd_fetch_embeddings(const GlobalConfig& cfg, const std::string& bank_path,
                         const std::string& out_dir) {
    const PromptBank bank = load_bank(bank_path);
    if (bank.entries.empty()) fail("EmptyBank", "bank has no actions");
    fs::create_directories(fs::path(out_dir) / "prompts");

    EmbeddingManifest manifest;
    manifest.kind = "prompt_texts";
    for (const auto& entry : bank.entries) {
        std::vector<std::string> texts;
        for (const auto& p : entry.prompts) texts.push_back(p.final_text);
        const EmbeddingMatrix m = fetch_text_embeddings(texts, cfg.embed);
        const std::string rel = "prompts/" + sanitize_filename(entry.action) + ".apeb";
        const std::uint64_t checksum = save_matrix(m, fs::path(out_dir) / rel);
        manifest.entries.push_back({entry.action, rel, m.rows, m.dim, to_hex64(checksum)});
    }
    save_manifest(manifest, fs::path(out_dir) / kPromptManifestName);
    std::cout << "wrote " << manifest.entries.size() << " prompt matrices to " << out_dir << "\n";
    return 0;
}

// --- shared scoring helpers ------------------------------------------------

struct ScoreArgs {
    std::string embeddings_dir;
    std::string bank_path;
    std::string manifest_path;
    std::string adapter_path;
    std::string video;
    double temperature = 0.01;
    std::size_t top_k = 5;
    std::string view_policy = "concat_frames";
    std::string attributes_csv;
    std::vector<int> template_filter;
    int jobs = 0;
};

InferenceConfig make_inference_config(const ScoreArgs& args) {
    InferenceConfig config;
    config.temperature = args.temperature;
    config.top_k = args.top_k;
    config.view_policy = view_policy_from_string(args.view_policy);
    config.attribute_filter = parse_attribute_filter(args.attributes_csv);
    config.template_filter = parse_template_filter(args.template_filter);
    config.jobs = args.jobs;
    config.validate();
    return config;
}

ScoringBank load_bank_for(const ScoreArgs& args) {
    std::optional<fs::path> bank_path;
    if (!args.bank_path.empty()) bank_path = args.bank_path;
    return load_scoring_bank(args.embeddings_dir, bank_path);
}

std::optional<LinearAdapter> load_adapter_if(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return load_adapter(path);
}

// --- score -----------------------------------------------------------------

int cmd_score(const ScoreArgs& args, const std::string& out_path) {
    const InferenceConfig config = make_inference_config(args);
    const ScoringBank bank = load_bank_for(args);
    const std::optional<LinearAdapter> adapter = load_adapter_if(args.adapter_path);

    std::vector<VideoRecord> records;
    std::optional<ScoringBank> manifest_bank;
    if (!args.manifest_path.empty()) {
        const LoadedDataset data = load_dataset(args.manifest_path, args.embeddings_dir,
                                                adapter ? &*adapter : nullptr);
        manifest_bank = bank_for_classes(bank, data.manifest.classes);
        if (args.video.empty()) {
            records = data.videos;
        } else {
            for (std::size_t i = 0; i < data.videos.size(); ++i)
                if (data.manifest.videos[i].video_id == args.video) records.push_back(data.videos[i]);
            if (records.empty()) fail("UnknownLabel", "video '" + args.video + "' not in manifest");
        }
    } else {
        if (args.video.empty())
            fail("BadParams", "score needs --manifest or --video <file.apeb>");
        VideoRecord record;
        record.video_id = fs::path(args.video).stem().string();
        EmbeddingMatrix m = load_matrix_normalized(args.video);
        if (adapter) m = apply_adapter(*adapter, m);
        record.views.push_back(std::move(m));
        records.push_back(std::move(record));
    }

    const ScoringBank& use_bank = manifest_bank ? *manifest_bank : bank;
    const std::vector<Prediction> preds = predict_batch(records, use_bank, config);
    save_predictions_jsonl(preds, out_path);
    std::cout << "wrote " << preds.size() << " predictions to " << out_path << "\n";
    return 0;
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const ScoreArgs& args, const std::string& protocol, const SplitSpec& spec_in,
             const std::string& eval_split, const std::string& out_path) {
    const InferenceConfig config = make_inference_config(args);
    const ScoringBank bank = load_bank_for(args);
    const std::optional<LinearAdapter> adapter = load_adapter_if(args.adapter_path);
    const LoadedDataset data =
        load_dataset(args.manifest_path, args.embeddings_dir, adapter ? &*adapter : nullptr);

    SplitSpec spec = spec_in;
    spec.kind = protocol_from_string(protocol);

    MetricsReport report;
    switch (spec.kind) {
        case Protocol::zero_shot:
            report = run_zero_shot(data, bank, spec, config, eval_split);
            break;
        case Protocol::base_to_novel:
            report = run_base_to_novel(data, bank, spec, config, eval_split);
            break;
        case Protocol::few_shot:
            report = run_few_shot(data, bank, spec, config, eval_split);
            break;
    }
    save_report(report, out_path);
    std::cout << report.to_text();
    return 0;
}

std::vector<ClassInfo> classes_from(const DatasetManifest& manifest, const std::vector<int>& ids) {
    std::vector<ClassInfo> out;
    for (int id : ids) {
        const ClassInfo* c = manifest.find_class(id);
        if (!c) fail("UnknownLabel", "unknown class id " + std::to_string(id));
        out.push_back(*c);
    }
    return out;
}

// Scores one (video, category) pair with capture and writes the map.
int attribute_and_export(const VideoRecord& record, const CategoryEntry& cat,
                         const std::string& format, const std::string& out_path) {
    const EmbeddingMatrix frames = concat_views(record);
    RelevancyTensor tensor;
    tensor.batch = 1;
    tensor.categories = 1;
    tensor.cells.resize(1);
    score_cell(frames, cat.prompts, &tensor.cells[0]);
    const AttributionMap map = build_map(record.video_id, cat, tensor, 0, 0);
    export_map(map, format, out_path);
    std::cout << "wrote " << map.n_v << "x" << map.n_t << " map to " << out_path << "\n";
    return 0;
}

// --- train-adapter ---------------------------------------------------------

int cmd_train_adapter(const ScoreArgs& args, const TrainConfig& train_config,
                      const std::string& protocol, int shots, const std::string& out_path,
                      const std::string& loss_out) {
    const ScoringBank bank = load_bank_for(args);
    const LoadedDataset data = load_dataset(args.manifest_path, args.embeddings_dir);

    // pick training video ids per protocol
    std::vector<std::string> train_ids;
    std::optional<ScoringBank> restricted;
    if (protocol == "base2novel") {
        const BaseNovelSplit split = make_base_novel_split(data.manifest, shots, train_config.seed);
        for (const auto& w : split.warnings) std::cerr << "WARN " << w << "\n";
        train_ids = split.train_video_ids;
        restricted = bank_for_classes(
            bank, classes_from(data.manifest, split.base_class_ids));
    } else if (protocol == "fewshot") {
        std::vector<std::string> warnings;
        train_ids = sample_few_shot(data.manifest, shots, train_config.seed, "train", &warnings);
        for (const auto& w : warnings) std::cerr << "WARN " << w << "\n";
        restricted = bank_for_classes(bank, data.manifest.classes);
    } else if (protocol == "all") {
        for (const auto& v : data.manifest.videos)
            if (v.split == "train") train_ids.push_back(v.video_id);
        restricted = bank_for_classes(bank, data.manifest.classes);
    } else {
        fail("BadParams", "unknown training protocol '" + protocol + "'");
    }
    if (train_ids.empty()) fail("BadParams", "training set is empty");

    // assemble one frame matrix per training video
    std::vector<EmbeddingMatrix> assembled;
    std::vector<TrainItem> items;
    assembled.reserve(train_ids.size());
    for (const auto& id : train_ids) {
        for (std::size_t i = 0; i < data.videos.size(); ++i) {
            if (data.manifest.videos[i].video_id != id) continue;
            assembled.push_back(concat_views(data.videos[i]));
            items.push_back({&assembled.back(), data.manifest.videos[i].label});
            break;
        }
    }

    const TrainResult result = train(items, *restricted, train_config);
    save_adapter(result.adapter, out_path);
    if (!loss_out.empty()) save_loss_curve(result.epoch_loss, loss_out);
    std::cout << "trained on " << items.size() << " videos; initial loss "
              << result.epoch_loss.front() << ", final loss " << result.epoch_loss.back()
              << "; wrote " << out_path << "\n";
    return 0;
}

// --- attribute ---------------------------------------------------------------

int cmd_attribute(const ScoreArgs& args, const std::string& category,
                  const std::string& format, const std::string& out_path) {
    const ScoringBank bank = load_bank_for(args);
    const std::optional<LinearAdapter> adapter = load_adapter_if(args.adapter_path);

    VideoRecord record;
    const CategoryEntry* cat = nullptr;

    if (!args.manifest_path.empty()) {
        const LoadedDataset data = load_dataset(args.manifest_path, args.embeddings_dir,
                                                adapter ? &*adapter : nullptr);
        const ScoringBank keyed = bank_for_classes(bank, data.manifest.classes);
        for (std::size_t i = 0; i < data.videos.size(); ++i)
            if (data.manifest.videos[i].video_id == args.video) record = data.videos[i];
        if (record.views.empty()) fail("UnknownLabel", "video '" + args.video + "' not in manifest");
        cat = keyed.find(category);
        if (!cat) fail("UnknownLabel", "category '" + category + "' not found");
        return attribute_and_export(record, *cat, format, out_path);
    }

    // direct mode: --video is an .apeb file, category matched by name
    record.video_id = fs::path(args.video).stem().string();
    EmbeddingMatrix m = load_matrix_normalized(args.video);
    if (adapter) m = apply_adapter(*adapter, m);
    record.views.push_back(std::move(m));
    cat = bank.find(category);
    if (!cat) fail("UnknownLabel", "category '" + category + "' not found");
    return attribute_and_export(record, *cat, format, out_path);
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const SynthParams& params, const std::string& out_dir) {
    const SynthDataset data = synth_generate(params);
    write_synth_dataset(data, out_dir);
    std::cout << "wrote synthetic dataset (" << data.manifest.classes.size() << " classes, "
              << data.manifest.videos.size() << " videos) to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maka - late-interaction scoring over action-prompt embeddings"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "global JSON config file");

    // gen-prompts
    auto* gen = app.add_subcommand("gen-prompts", "generate a prompt bank with an LLM");
    std::string actions_path, gen_out, gen_cache, gen_endpoint, gen_model;
    std::vector<int> gen_templates;
    bool allow_partial = false, stub_llm = false;
    int gen_concurrency = 4;
    gen->add_option("--actions", actions_path, "file with one action per line")->required();
    gen->add_option("--templates", gen_templates, "template ids (default 1,3,4)")->delimiter(',');
    gen->add_option("--out", gen_out, "output bank JSON")->required();
    gen->add_option("--cache-dir", gen_cache, "LLM reply cache directory");
    gen->add_option("--endpoint", gen_endpoint, "chat-completions endpoint");
    gen->add_option("--model", gen_model, "model name");
    gen->add_option("--concurrency", gen_concurrency, "max in-flight LLM requests");
    gen->add_flag("--allow-partial", allow_partial, "persist a partial bank on failures");
    gen->add_flag("--stub-llm", stub_llm, "use the built-in deterministic stub replies");

    // fetch-embeddings
    auto* fetch = app.add_subcommand("fetch-embeddings", "embed bank prompts via the service");
    std::string fetch_bank, fetch_out, fetch_endpoint, fetch_model;
    fetch->add_option("--bank", fetch_bank, "prompt bank JSON")->required();
    fetch->add_option("--out", fetch_out, "output embeddings directory")->required();
    fetch->add_option("--endpoint", fetch_endpoint, "embeddings endpoint");
    fetch->add_option("--model", fetch_model, "model name");

    // shared scoring options
    auto add_score_options = [](CLI::App* cmd, ScoreArgs& args, bool manifest_required) {
        cmd->add_option("--embeddings", args.embeddings_dir, "embeddings directory")->required();
        auto* man = cmd->add_option("--manifest", args.manifest_path, "dataset manifest JSON");
        if (manifest_required) man->required();
        cmd->add_option("--bank", args.bank_path, "prompt bank JSON (metadata/filters)");
        cmd->add_option("--adapter", args.adapter_path, "trained adapter file");
        cmd->add_option("--temperature", args.temperature, "softmax temperature");
        cmd->add_option("--topk", args.top_k, "ranked entries per prediction");
        cmd->add_option("--view-policy", args.view_policy, "concat_frames|average_view_logits");
        cmd->add_option("--attributes", args.attributes_csv, "attribute filter (comma separated)");
        cmd->add_option("--filter-templates", args.template_filter, "template id filter")
            ->delimiter(',');
        cmd->add_option("--jobs", args.jobs, "worker count (0 = default)");
    };

    // score
    auto* score = app.add_subcommand("score", "rank categories for videos");
    ScoreArgs score_args;
    std::string score_out;
    add_score_options(score, score_args, false);
    score->add_option("--video", score_args.video, "video id (with --manifest) or .apeb path");
    score->add_option("--out", score_out, "predictions JSONL")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "run an evaluation protocol");
    ScoreArgs eval_args;
    SplitSpec eval_spec;
    std::string protocol, eval_out, eval_split = "val";
    add_score_options(eval, eval_args, true);
    eval->add_option("--protocol", protocol, "zeroshot|base2novel|fewshot")->required();
    eval->add_option("--seed", eval_spec.seed, "split seed");
    eval->add_option("--splits", eval_spec.n_splits, "number of splits");
    eval->add_option("--subset-size", eval_spec.subset_size, "classes per zero-shot subset");
    eval->add_option("--shots", eval_spec.shots, "shots per base class");
    eval->add_option("--eval-split", eval_split, "split tag to evaluate (default val)");
    eval->add_option("--out", eval_out, "report JSON")->required();

    // train-adapter
    auto* train_cmd = app.add_subcommand("train-adapter", "train a linear adapter");
    ScoreArgs train_args;
    TrainConfig train_config;
    std::string train_protocol = "all", train_out, loss_out;
    int train_shots = 16;
    add_score_options(train_cmd, train_args, true);
    train_cmd->add_option("--out", train_out, "adapter output file")->required();
    train_cmd->add_option("--loss-out", loss_out, "loss curve CSV");
    train_cmd->add_option("--lr", train_config.learning_rate, "learning rate");
    train_cmd->add_option("--epochs", train_config.epochs, "epochs");
    train_cmd->add_option("--batch-size", train_config.batch_size, "batch size");
    train_cmd->add_option("--tau", train_config.temperature, "softmax temperature");
    train_cmd->add_option("--seed", train_config.seed, "shuffle seed");
    train_cmd->add_option("--weight-decay", train_config.weight_decay, "decoupled weight decay");
    train_cmd->add_option("--protocol", train_protocol, "all|fewshot|base2novel");
    train_cmd->add_option("--shots", train_shots, "K for fewshot / base2novel");

    // attribute
    auto* attr = app.add_subcommand("attribute", "export a frame/prompt relevancy map");
    ScoreArgs attr_args;
    std::string attr_category, attr_format = "csv", attr_out;
    add_score_options(attr, attr_args, false);
    attr->add_option("--video", attr_args.video, "video id or .apeb path")->required();
    attr->add_option("--category", attr_category, "category name")->required();
    attr->add_option("--format", attr_format, "csv|json");
    attr->add_option("--out", attr_out, "output file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
    SynthParams synth_params;
    std::string synth_out;
    synth->add_option("--seed", synth_params.seed, "generator seed");
    synth->add_option("--classes", synth_params.n_classes, "number of classes");
    synth->add_option("--attributes", synth_params.n_attributes, "number of attributes");
    synth->add_option("--dim", synth_params.dim, "embedding dimension");
    synth->add_option("--frames", synth_params.frames_per_video, "frames per video");
    synth->add_option("--prompts", synth_params.prompts_per_class, "prompts per class");
    synth->add_option("--videos-per-class", synth_params.videos_per_class, "videos per class");
    synth->add_option("--attrs-per-frame", synth_params.attrs_per_frame, "attributes per frame");
    synth->add_option("--attr-scale", synth_params.attr_scale, "attribute offset scale");
    synth->add_option("--prompt-noise", synth_params.prompt_noise, "prompt noise level");
    synth->add_option("--frame-noise", synth_params.frame_noise, "frame noise level");
    synth->add_option("--distortion", synth_params.distortion, "frame distortion strength");
    synth->add_option("--out", synth_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        GlobalConfig cfg = load_config(config_path);

        if (gen->parsed()) {
            if (!gen_cache.empty()) cfg.llm.cache_dir = gen_cache;
            else if (!cfg.cache_dir.empty()) cfg.llm.cache_dir = cfg.cache_dir;
            if (!gen_endpoint.empty()) cfg.llm.endpoint = gen_endpoint;
            if (!gen_model.empty()) cfg.llm.model = gen_model;
            if (stub_llm) cfg.llm.stub = true;
            return cmd_gen_prompts(cfg, actions_path, gen_templates, gen_out, allow_partial,
                                   gen_concurrency);
        }
        if (fetch->parsed()) {
            if (!fetch_endpoint.empty()) cfg.embed.endpoint = fetch_endpoint;
            if (!fetch_model.empty()) cfg.embed.model = fetch_model;
            return cmd_fetch_embeddings(cfg, fetch_bank, fetch_out);
        }
        if (score->parsed()) {
            if (score_args.jobs == 0) score_args.jobs = cfg.jobs;
            return cmd_score(score_args, score_out);
        }
        if (eval->parsed()) {
            if (eval_args.jobs == 0) eval_args.jobs = cfg.jobs;
            return cmd_eval(eval_args, protocol, eval_spec, eval_split, eval_out);
        }
        if (train_cmd->parsed())
            return cmd_train_adapter(train_args, train_config, train_protocol, train_shots,
                                     train_out, loss_out);
        if (attr->parsed()) return cmd_attribute(attr_args, attr_category, attr_format, attr_out);
        if (synth->parsed()) return cmd_synth(synth_params, synth_out);
        return 2;
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "ERROR " << e.code() << ": " << msg << "\n";
        return e.code() == "BadConfig" ? 2 : 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "ERROR Internal: " << msg << "\n";
        return 1;
    }
}
