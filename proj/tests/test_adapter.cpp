#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "maka/adapter.hpp"
#include "maka/error.hpp"
#include "maka/eval.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"
#include "oracle.hpp"

using namespace maka;
namespace fs = std::filesystem;

namespace {

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

ScoringBank random_bank(std::size_t K, std::size_t d, SplitMix64& rng, std::size_t max_nt = 5) {
    ScoringBank bank;
    bank.dim = d;
    for (std::size_t k = 0; k < K; ++k) {
        CategoryEntry e;
        e.id = static_cast<int>(k);
        e.name = "cat" + std::to_string(k);
        e.prompts = oracle::random_unit_matrix(1 + rng.next_below(max_nt), d, rng);
        bank.categories.push_back(std::move(e));
    }
    return bank;
}

// training fixtures from the synthetic generator (distorted = linearly improvable)
struct Fixture {
    SynthDataset data;
    ScoringBank bank;
    std::vector<TrainItem> items;
};

Fixture training_fixture(double distortion, std::uint64_t seed = 11) {
    Fixture f;
    SynthParams p;
    p.seed = seed;
    p.distortion = distortion;
    f.data = synth_generate(p);
    f.bank.dim = p.dim;
    for (std::size_t k = 0; k < f.data.class_prompts.size(); ++k) {
        CategoryEntry e;
        e.id = static_cast<int>(k);
        e.name = f.data.class_prompts[k].first;
        e.prompts = f.data.class_prompts[k].second;
        f.bank.categories.push_back(std::move(e));
    }
    for (std::size_t vi = 0; vi < f.data.manifest.videos.size(); ++vi)
        if (f.data.manifest.videos[vi].split == "train")
            f.items.push_back({&f.data.video_frames[vi].second, f.data.manifest.videos[vi].label});
    return f;
}

}  // namespace

TEST_CASE("identity adapter reproduces normalized inputs") {
    SplitMix64 rng(21);
    const EmbeddingMatrix frames = oracle::random_unit_matrix(4, 8, rng);
    const EmbeddingMatrix out = apply_adapter(LinearAdapter::identity(8), frames);
    REQUIRE(out.rows == frames.rows);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(frames.data[i]).epsilon(1e-6));
    CHECK(out.normalized);
}

TEST_CASE("ce_loss on a single class is exactly zero") {
    SplitMix64 rng(22);
    const ScoringBank bank = random_bank(1, 8, rng);
    const EmbeddingMatrix frames = oracle::random_unit_matrix(3, 8, rng);
    const TrainItem item{&frames, 0};
    CHECK(ce_loss({&item, 1}, bank, LinearAdapter::identity(8), 0.07) == 0.0);
}

TEST_CASE("ce_loss matches ln(1 + e^{-0.8}) for engineered 0.9/0.1 sims") {
    EmbeddingMatrix frame(1, 4, {1, 0, 0, 0}, true);
    ScoringBank bank;
    bank.dim = 4;
    CategoryEntry c0, c1;
    c0.id = 0;
    c0.name = "a";
    c0.prompts = EmbeddingMatrix(1, 4, {0.9f, std::sqrt(1.0f - 0.81f), 0, 0}, true);
    c1.id = 1;
    c1.name = "b";
    c1.prompts = EmbeddingMatrix(1, 4, {0.1f, std::sqrt(1.0f - 0.01f), 0, 0}, true);
    bank.categories = {c0, c1};

    const TrainItem item{&frame, 0};
    const double loss = ce_loss({&item, 1}, bank, LinearAdapter::identity(4), 1.0);
    CHECK(loss == doctest::Approx(0.3711).epsilon(1e-4));
}

TEST_CASE("duplicating the batch leaves the mean loss unchanged") {
    SplitMix64 rng(23);
    const ScoringBank bank = random_bank(3, 8, rng);
    const EmbeddingMatrix f0 = oracle::random_unit_matrix(3, 8, rng);
    const EmbeddingMatrix f1 = oracle::random_unit_matrix(2, 8, rng);
    const std::vector<TrainItem> once = {{&f0, 0}, {&f1, 2}};
    const std::vector<TrainItem> twice = {{&f0, 0}, {&f1, 2}, {&f0, 0}, {&f1, 2}};
    const LinearAdapter a = LinearAdapter::identity(8);
    CHECK(ce_loss(once, bank, a, 0.1) == doctest::Approx(ce_loss(twice, bank, a, 0.1)).epsilon(1e-12));
}

TEST_CASE("ce_loss rejects labels missing from the bank") {
    SplitMix64 rng(24);
    const ScoringBank bank = random_bank(2, 8, rng);
    const EmbeddingMatrix frames = oracle::random_unit_matrix(2, 8, rng);
    const TrainItem item{&frames, 7};
    CHECK(error_code([&] {
              ce_loss({&item, 1}, bank, LinearAdapter::identity(8), 0.1);
          }) == "UnknownLabel");
}

TEST_CASE("analytic gradient matches central finite differences") {
    SplitMix64 rng(42);
    const std::size_t d = 8, K = 3;
    double max_rel = 0.0;
    for (int point = 0; point < 20; ++point) {
        EmbeddingMatrix frames = oracle::random_unit_matrix(1 + rng.next_below(4), d, rng);
        ScoringBank bank = random_bank(K, d, rng);
        LinearAdapter a = LinearAdapter::identity(d);
        for (auto& w : a.weight) w += 0.1 * rng.next_gaussian();
        for (auto& b : a.bias) b += 0.05 * rng.next_gaussian();
        const TrainItem item{&frames, static_cast<int>(rng.next_below(K))};
        const double tau = 0.5;
        const AdapterGrad g = grad({&item, 1}, bank, a, tau);

        const double h = 1e-4;
        for (int probe = 0; probe < 6; ++probe) {
            const bool bias = probe % 3 == 2;
            const std::size_t idx = bias ? rng.next_below(d) : rng.next_below(d * d);
            double* slot = bias ? &a.bias[idx] : &a.weight[idx];
            const double saved = *slot;
            *slot = saved + h;
            const double up = ce_loss({&item, 1}, bank, a, tau);
            *slot = saved - h;
            const double down = ce_loss({&item, 1}, bank, a, tau);
            *slot = saved;
            const double fd = (up - down) / (2 * h);
            const double an = bias ? g.bias[idx] : g.weight[idx];
            const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("single-class gradient is exactly zero") {
    SplitMix64 rng(25);
    const ScoringBank bank = random_bank(1, 8, rng);
    const EmbeddingMatrix frames = oracle::random_unit_matrix(3, 8, rng);
    const TrainItem item{&frames, 0};
    const AdapterGrad g = grad({&item, 1}, bank, LinearAdapter::identity(8), 0.07);
    for (double w : g.weight) CHECK(w == 0.0);
    for (double b : g.bias) CHECK(b == 0.0);
}

TEST_CASE("batch gradient equals the mean of per-sample gradients") {
    SplitMix64 rng(26);
    const ScoringBank bank = random_bank(3, 8, rng);
    const EmbeddingMatrix f0 = oracle::random_unit_matrix(3, 8, rng);
    const EmbeddingMatrix f1 = oracle::random_unit_matrix(4, 8, rng);
    LinearAdapter a = LinearAdapter::identity(8);
    for (auto& w : a.weight) w += 0.05 * rng.next_gaussian();

    const std::vector<TrainItem> batch = {{&f0, 1}, {&f1, 2}};
    const AdapterGrad gb = grad(batch, bank, a, 0.2);
    const AdapterGrad g0 = grad({&batch[0], 1}, bank, a, 0.2);
    const AdapterGrad g1 = grad({&batch[1], 1}, bank, a, 0.2);
    for (std::size_t i = 0; i < gb.weight.size(); ++i)
        CHECK(gb.weight[i] == doctest::Approx(0.5 * (g0.weight[i] + g1.weight[i])).epsilon(1e-7));
    for (std::size_t i = 0; i < gb.bias.size(); ++i)
        CHECK(gb.bias[i] == doctest::Approx(0.5 * (g0.bias[i] + g1.bias[i])).epsilon(1e-7));
}

TEST_CASE("train with lr=0 leaves the adapter at identity with a flat curve") {
    Fixture f = training_fixture(0.8);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.temperature = 0.07;
    cfg.seed = 5;
    const TrainResult r = train(f.items, f.bank, cfg);
    const LinearAdapter id = LinearAdapter::identity(f.bank.dim);
    CHECK(r.adapter.weight == id.weight);
    CHECK(r.adapter.bias == id.bias);
    REQUIRE(r.epoch_loss.size() == 4);
    for (double l : r.epoch_loss) CHECK(l == r.epoch_loss.front());
}

TEST_CASE("epoch zero loss equals the frozen-baseline ce_loss exactly") {
    Fixture f = training_fixture(0.8);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.temperature = 0.07;
    cfg.seed = 5;
    const TrainResult r = train(f.items, f.bank, cfg);
    CHECK(r.epoch_loss[0] ==
          ce_loss(f.items, f.bank, LinearAdapter::identity(f.bank.dim), cfg.temperature));
}

TEST_CASE("training is monotone for small lr on the separable set") {
    Fixture f = training_fixture(0.8);
    TrainConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.temperature = 0.07;
    cfg.seed = 3;
    const TrainResult r = train(f.items, f.bank, cfg);
    for (std::size_t e = 1; e < r.epoch_loss.size(); ++e)
        CHECK(r.epoch_loss[e] <= r.epoch_loss[e - 1]);
}

TEST_CASE("same seed trains to bitwise-identical adapters") {
    Fixture f = training_fixture(0.8);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.temperature = 0.07;
    cfg.seed = 9;
    const TrainResult a = train(f.items, f.bank, cfg);
    const TrainResult b = train(f.items, f.bank, cfg);
    CHECK(a.adapter.weight == b.adapter.weight);
    CHECK(a.adapter.bias == b.adapter.bias);
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("adapter files round-trip through the binary container") {
    const fs::path dir = fs::temp_directory_path() / "maka_test_adapter";
    fs::create_directories(dir);
    SplitMix64 rng(27);
    LinearAdapter a = LinearAdapter::identity(6);
    for (auto& w : a.weight) w += 0.25 * rng.next_gaussian();
    for (auto& b : a.bias) b += 0.25 * rng.next_gaussian();

    save_adapter(a, dir / "a.apeb");
    const LinearAdapter back = load_adapter(dir / "a.apeb");
    REQUIRE(back.dim == 6);
    REQUIRE(back.has_bias);
    for (std::size_t i = 0; i < a.weight.size(); ++i)
        CHECK(back.weight[i] == static_cast<double>(static_cast<float>(a.weight[i])));
    for (std::size_t i = 0; i < a.bias.size(); ++i)
        CHECK(back.bias[i] == static_cast<double>(static_cast<float>(a.bias[i])));

    SUBCASE("plain matrices are rejected") {
        save_matrix(EmbeddingMatrix(2, 2, {1, 0, 0, 1}), dir / "plain.apeb");
        CHECK(error_code([&] { load_adapter(dir / "plain.apeb"); }) == "SchemaError");
    }
    SUBCASE("bias-free adapters round-trip too") {
        LinearAdapter nb = LinearAdapter::identity(3, false);
        save_adapter(nb, dir / "nb.apeb");
        const LinearAdapter nb_back = load_adapter(dir / "nb.apeb");
        CHECK_FALSE(nb_back.has_bias);
        CHECK(nb_back.weight == nb.weight);
    }
}

TEST_CASE("loss curve CSV") {
    const fs::path dir = fs::temp_directory_path() / "maka_test_curve";
    fs::create_directories(dir);
    save_loss_curve(std::vector<double>{2.0, 1.5, 1.25}, dir / "c.csv");
    const std::string csv = read_file(dir / "c.csv");
    CHECK(csv.starts_with("epoch,mean_loss\n0,2\n1,1.5\n2,1.25\n"));
}
