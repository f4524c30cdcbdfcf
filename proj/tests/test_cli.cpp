// CLI contract checks: exit codes (0 success, 1 domain error, 2 usage error)
// and the single-line "ERROR <code>: <message>" format. argv[1] = CLI path.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "maka/embedding.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"
#include "oracle.hpp"
#include "stub_server.hpp"

namespace fs = std::filesystem;
using namespace maka;

namespace {

int g_failures = 0;
std::string g_cli;
fs::path g_scratch;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const fs::path out = g_scratch / "out.txt";
    const std::string cmd = g_cli + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = read_file(out);
    return r;
}

void check(bool ok, const std::string& what, const RunResult& r) {
    if (!ok) {
        ++g_failures;
        std::printf("FAIL %s (exit %d)\n%s\n", what.c_str(), r.exit_code, r.output.c_str());
    } else {
        std::printf("ok   %s\n", what.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: test_cli <path-to-cli>\n");
        return 1;
    }
    g_cli = argv[1];
    g_scratch = fs::temp_directory_path() / "maka_cli_test";
    fs::remove_all(g_scratch);
    fs::create_directories(g_scratch);

    {
        RunResult r = run("--no-such-flag");
        check(r.exit_code == 2, "unknown flag exits 2 with usage text", r);
    }
    {
        RunResult r = run("score --out x.jsonl");
        check(r.exit_code == 2, "missing required options exit 2", r);
    }
    {
        RunResult r = run("synth --seed 3 --classes 4 --dim 24 --videos-per-class 2 --out " +
                          (g_scratch / "data").string());
        check(r.exit_code == 0, "synth succeeds", r);
    }
    {
        // video with a different dim than the prompt bank embeddings
        SplitMix64 rng(1);
        const EmbeddingMatrix wrong = oracle::random_unit_matrix(4, 16, rng);
        save_matrix(wrong, g_scratch / "wrong.apeb");
        RunResult r = run("score --embeddings " + (g_scratch / "data").string() + " --video " +
                          (g_scratch / "wrong.apeb").string() + " --out " +
                          (g_scratch / "preds.jsonl").string());
        check(r.exit_code == 1 && r.output.find("ERROR DimMismatch:") != std::string::npos,
              "dim mismatch exits 1 with ERROR DimMismatch", r);
    }
    {
        write_file_atomic(g_scratch / "bad.json", "{\"no_such_key\": 1}\n");
        RunResult r = run("--config " + (g_scratch / "bad.json").string() + " synth --out " +
                          (g_scratch / "d2").string());
        check(r.exit_code == 2 && r.output.find("ERROR BadConfig:") != std::string::npos &&
                  r.output.find("valid:") != std::string::npos,
              "unknown config key exits 2 listing valid keys", r);
    }
    {
        RunResult r = run("score --embeddings " + (g_scratch / "data").string() + " --video " +
                          (g_scratch / "data/videos/class00_v01.apeb").string() + " --out " +
                          (g_scratch / "preds.jsonl").string());
        check(r.exit_code == 0 && fs::exists(g_scratch / "preds.jsonl"),
              "direct .apeb scoring succeeds", r);
    }
    {
        RunResult r = run("eval --protocol nonsense --manifest " +
                          (g_scratch / "data/dataset.json").string() + " --embeddings " +
                          (g_scratch / "data").string() + " --out " + (g_scratch / "r.json").string());
        check(r.exit_code == 1 && r.output.find("ERROR BadParams:") != std::string::npos,
              "unknown protocol exits 1 with ERROR BadParams", r);
    }
    {
        write_file_atomic(g_scratch / "actions.txt", "Juggling\nRowing\n");
        RunResult r = run("gen-prompts --actions " + (g_scratch / "actions.txt").string() +
                          " --templates 1 --stub-llm --out " + (g_scratch / "bank.json").string());
        check(r.exit_code == 0 && fs::exists(g_scratch / "bank.json"),
              "gen-prompts with the stub succeeds", r);
    }
    {
        // embedding service stub: deterministic 8-dim vector per input string
        testing::StubServer server([](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json data = nlohmann::json::array();
            int index = 0;
            for (const auto& text : body.at("input")) {
                SplitMix64 rng(fnv1a64(text.get<std::string>()));
                std::vector<double> vec(8);
                for (auto& x : vec) x = rng.next_gaussian();
                data.push_back({{"index", index++}, {"embedding", vec}});
            }
            res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
        });
        RunResult r = run("fetch-embeddings --bank " + (g_scratch / "bank.json").string() +
                          " --endpoint " + server.url("/v1/embeddings") + " --out " +
                          (g_scratch / "fetched").string());
        const fs::path manifest = g_scratch / "fetched" / "prompts.manifest.json";
        bool ok = r.exit_code == 0 && fs::exists(manifest);
        if (ok) {
            const EmbeddingManifest m = load_manifest(manifest);
            validate_manifest(m, g_scratch / "fetched", true);
            ok = m.entries.size() == 2 && m.entries[0].id == "Juggling" &&
                 m.entries[0].rows == 12 && m.entries[0].dim == 8;
        }
        check(ok, "fetch-embeddings writes matrices and a manifest", r);
    }
    {
        RunResult r = run("train-adapter --manifest " + (g_scratch / "data/dataset.json").string() +
                          " --embeddings " + (g_scratch / "data").string() +
                          " --epochs 2 --lr 0.05 --out " + (g_scratch / "adapter.apeb").string() +
                          " --loss-out " + (g_scratch / "curve.csv").string());
        bool ok = r.exit_code == 0 && fs::exists(g_scratch / "adapter.apeb") &&
                  read_file(g_scratch / "curve.csv").starts_with("epoch,mean_loss\n");
        check(ok, "train-adapter writes an adapter and a loss curve", r);
    }
    {
        RunResult r = run("eval --protocol base2novel --manifest " +
                          (g_scratch / "data/dataset.json").string() + " --embeddings " +
                          (g_scratch / "data").string() + " --adapter " +
                          (g_scratch / "adapter.apeb").string() + " --shots 2 --seed 3 --out " +
                          (g_scratch / "b2n.json").string());
        check(r.exit_code == 0 && r.output.find("hm:") != std::string::npos,
              "eval base2novel with an adapter reports hm", r);
    }

    if (g_failures) {
        std::printf("%d CLI check(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all CLI checks passed\n");
    return 0;
}
