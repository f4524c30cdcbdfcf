#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "maka/error.hpp"
#include "maka/rng.hpp"
#include "maka/scoring.hpp"
#include "oracle.hpp"

using namespace maka;

namespace {

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

EmbeddingMatrix rows2(std::vector<float> a, std::vector<float> b) {
    const std::size_t d = a.size();
    std::vector<float> data = a;
    data.insert(data.end(), b.begin(), b.end());
    EmbeddingMatrix m(2, d, std::move(data));
    m.normalized = true;
    return m;
}

EmbeddingMatrix permuted_rows(const EmbeddingMatrix& m, SplitMix64& rng) {
    std::vector<std::size_t> order(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) order[i] = i;
    shuffle(order, rng);
    EmbeddingMatrix out(m.rows, m.dim);
    out.normalized = m.normalized;
    for (std::size_t i = 0; i < m.rows; ++i)
        std::memcpy(out.row(i), m.row(order[i]), m.dim * sizeof(float));
    return out;
}

}  // namespace

TEST_CASE("cosine_sim basics") {
    const std::vector<float> ex = {1, 0}, ey = {0, 1}, a = {3, 4}, b = {4, 3};
    CHECK(cosine_sim(ex, ex) == 1.0);
    CHECK(cosine_sim(ex, ey) == 0.0);
    CHECK(cosine_sim(a, b) == doctest::Approx(0.96).epsilon(1e-12));  // 24/25
    const std::vector<float> zero = {0, 0};
    CHECK(error_code([&] { cosine_sim(ex, zero); }) == "ZeroNorm");
    const std::vector<float> three = {1, 0, 0};
    CHECK(error_code([&] { cosine_sim(ex, three); }) == "DimMismatch");
}

TEST_CASE("sim_v2t and sim_t2v on the 2x2 running example") {
    const EmbeddingMatrix v = rows2({1, 0}, {0, 1});
    const EmbeddingMatrix c = rows2({1, 0}, {0.6f, 0.8f});

    const DirectionalSim v2t = sim_v2t(v, c);
    CHECK(v2t.value == doctest::Approx(0.9).epsilon(1e-7));
    REQUIRE(v2t.argmax.size() == 2);
    CHECK(v2t.argmax[0] == 0);
    CHECK(v2t.argmax[1] == 1);

    const DirectionalSim t2v = sim_t2v(v, c);
    CHECK(t2v.value == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(t2v.argmax[0] == 0);
    CHECK(t2v.argmax[1] == 1);

    CHECK(maka_sim(v, c) == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("sim_t2v degenerate single prompt is the max over frames") {
    const EmbeddingMatrix v = rows2({1, 0}, {0, 1});
    EmbeddingMatrix c(1, 2, {0.6f, 0.8f}, true);
    const DirectionalSim t2v = sim_t2v(v, c);
    CHECK(t2v.value == doctest::Approx(0.8).epsilon(1e-7));
    CHECK(t2v.argmax[0] == 1);
}

TEST_CASE("duplicate prompt rows leave sim_v2t unchanged") {
    SplitMix64 rng(11);
    const EmbeddingMatrix v = oracle::random_unit_matrix(3, 8, rng);
    const EmbeddingMatrix c = oracle::random_unit_matrix(4, 8, rng);
    EmbeddingMatrix c_dup(5, 8);
    c_dup.normalized = true;
    std::memcpy(c_dup.row(0), c.data.data(), c.data.size() * sizeof(float));
    std::memcpy(c_dup.row(4), c.row(1), 8 * sizeof(float));
    CHECK(sim_v2t(v, c).value == sim_v2t(v, c_dup).value);
}

TEST_CASE("appending a prompt row never decreases sim_v2t") {
    SplitMix64 rng(12);
    for (int it = 0; it < 40; ++it) {
        const std::size_t d = 2 + rng.next_below(14);
        const EmbeddingMatrix v = oracle::random_unit_matrix(1 + rng.next_below(5), d, rng);
        const EmbeddingMatrix c = oracle::random_unit_matrix(1 + rng.next_below(5), d, rng);
        EmbeddingMatrix grown(c.rows + 1, d);
        grown.normalized = true;
        std::memcpy(grown.data.data(), c.data.data(), c.data.size() * sizeof(float));
        const EmbeddingMatrix extra = oracle::random_unit_matrix(1, d, rng);
        std::memcpy(grown.row(c.rows), extra.data.data(), d * sizeof(float));
        CHECK(sim_v2t(v, grown).value >= sim_v2t(v, c).value);
    }
}

TEST_CASE("reduction identity: 1x1 maka equals cosine bitwise") {
    SplitMix64 rng(13);
    for (int it = 0; it < 200; ++it) {
        const std::size_t d = 1 + rng.next_below(32);
        const EmbeddingMatrix a = oracle::random_unit_matrix(1, d, rng);
        const EmbeddingMatrix b = oracle::random_unit_matrix(1, d, rng);
        const double cos = cosine_sim({a.data.data(), d}, {b.data.data(), d});
        CHECK(maka_sim(a, b) == cos);
    }
}

TEST_CASE("maka_sim is symmetric and bounded") {
    SplitMix64 rng(14);
    for (int it = 0; it < 60; ++it) {
        const std::size_t d = 2 + rng.next_below(14);
        const EmbeddingMatrix v = oracle::random_unit_matrix(1 + rng.next_below(6), d, rng);
        const EmbeddingMatrix c = oracle::random_unit_matrix(1 + rng.next_below(6), d, rng);
        const double s = maka_sim(v, c);
        CHECK(s == maka_sim(c, v));
        CHECK(s >= -1.0 - 1e-12);
        CHECK(s <= 1.0 + 1e-12);
        CHECK(sim_v2t(v, c).value <= 1.0 + 1e-12);
        CHECK(sim_t2v(v, c).value >= -1.0 - 1e-12);
    }
}

TEST_CASE("permuting rows of either side leaves scores exactly unchanged") {
    SplitMix64 rng(15);
    for (int it = 0; it < 60; ++it) {
        const std::size_t d = 2 + rng.next_below(14);
        const EmbeddingMatrix v = oracle::random_unit_matrix(2 + rng.next_below(5), d, rng);
        const EmbeddingMatrix c = oracle::random_unit_matrix(2 + rng.next_below(5), d, rng);
        const EmbeddingMatrix vp = permuted_rows(v, rng);
        const EmbeddingMatrix cp = permuted_rows(c, rng);
        CHECK(maka_sim(v, c) == maka_sim(vp, c));
        CHECK(maka_sim(v, c) == maka_sim(v, cp));
        CHECK(maka_sim(v, c) == maka_sim(vp, cp));
        CHECK(sim_v2t(v, c).value == sim_v2t(vp, cp).value);
        CHECK(sim_t2v(v, c).value == sim_t2v(vp, cp).value);
    }
}

TEST_CASE("mean_pool_sim") {
    EmbeddingMatrix a(1, 2, {1, 0}, true);
    EmbeddingMatrix b(1, 2, {0.6f, 0.8f}, true);
    CHECK(mean_pool_sim(a, b) == cosine_sim({a.data.data(), 2}, {b.data.data(), 2}));

    const EmbeddingMatrix v = rows2({1, 0}, {0, 1});
    CHECK(mean_pool_sim(v, v) == doctest::Approx(1.0).epsilon(1e-12));

    const EmbeddingMatrix opposite = rows2({1, 0}, {-1, 0});
    CHECK(error_code([&] { mean_pool_sim(opposite, v); }) == "ZeroNorm");
}

TEST_CASE("batched_scores matches maka_sim at B=1, K=1") {
    SplitMix64 rng(16);
    const EmbeddingMatrix v = oracle::random_unit_matrix(4, 12, rng);
    const EmbeddingMatrix c = oracle::random_unit_matrix(3, 12, rng);
    const BatchedScores s = batched_scores({&v, 1}, {&c, 1});
    CHECK(s.at(0, 0).score == doctest::Approx(maka_sim(v, c)).epsilon(1e-6));
    CHECK(s.at(0, 0).score == doctest::Approx(0.5 * (s.at(0, 0).v2t + s.at(0, 0).t2v)).epsilon(1e-12));
}

TEST_CASE("batched_scores equals the brute-force oracle on ragged batches") {
    SplitMix64 rng(17);
    for (int it = 0; it < 50; ++it) {
        const std::size_t d = 2 + rng.next_below(15);
        const std::size_t B = 1 + rng.next_below(3), K = 1 + rng.next_below(4);
        std::vector<EmbeddingMatrix> videos, cats;
        for (std::size_t b = 0; b < B; ++b)
            videos.push_back(oracle::random_unit_matrix(1 + rng.next_below(6), d, rng));
        for (std::size_t k = 0; k < K; ++k)
            cats.push_back(oracle::random_unit_matrix(1 + rng.next_below(6), d, rng));
        const BatchedScores s = batched_scores(videos, cats);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
                const oracle::Scores expect = oracle::maka(videos[b], cats[k]);
                CHECK(std::fabs(s.at(b, k).score - expect.score) < 1e-6);
                CHECK(std::fabs(s.at(b, k).v2t - expect.v2t) < 1e-6);
                CHECK(std::fabs(s.at(b, k).t2v - expect.t2v) < 1e-6);
                // scalar path agreement
                CHECK(std::fabs(s.at(b, k).score - maka_sim(videos[b], cats[k])) < 1e-6);
            }
        }
    }
}

TEST_CASE("batched_scores input validation") {
    SplitMix64 rng(18);
    const EmbeddingMatrix v = oracle::random_unit_matrix(2, 4, rng);
    const EmbeddingMatrix c = oracle::random_unit_matrix(2, 4, rng);
    const EmbeddingMatrix wrong_dim = oracle::random_unit_matrix(2, 5, rng);
    EmbeddingMatrix not_norm = v;
    not_norm.normalized = false;

    CHECK(error_code([&] { batched_scores({}, {&c, 1}); }) == "EmptyMatrix");
    CHECK(error_code([&] { batched_scores({&v, 1}, {}); }) == "EmptyBank");
    CHECK(error_code([&] { batched_scores({&v, 1}, {&wrong_dim, 1}); }) == "DimMismatch");
    CHECK(error_code([&] { batched_scores({&not_norm, 1}, {&c, 1}); }) == "NotNormalized");

    std::vector<EmbeddingMatrix> cats = {c, EmbeddingMatrix()};
    cats[1].dim = 4;  // zero prompt rows
    CHECK(error_code([&] { batched_scores({&v, 1}, cats); }) == "EmptyCategory");
}

TEST_CASE("captured relevancy tensor is consistent with scores and argmaxes") {
    SplitMix64 rng(19);
    std::vector<EmbeddingMatrix> videos, cats;
    for (int b = 0; b < 3; ++b) videos.push_back(oracle::random_unit_matrix(2 + b, 9, rng));
    for (int k = 0; k < 4; ++k) cats.push_back(oracle::random_unit_matrix(1 + k, 9, rng));

    RelevancyTensor tensor;
    const BatchedScores s = batched_scores(videos, cats, &tensor);
    REQUIRE(tensor.cells.size() == 12);

    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t k = 0; k < 4; ++k) {
            const RelevancyCell& cell = tensor.cell(b, k);
            REQUIRE(cell.n_t == cats[k].rows);
            REQUIRE(cell.n_v == videos[b].rows);

            double v2t = 0, t2v = 0;
            for (std::size_t t = 0; t < cell.n_t; ++t) {
                float best = cell.at(t, 0);
                std::uint32_t arg = 0;
                for (std::size_t v = 0; v < cell.n_v; ++v) {
                    CHECK(cell.at(t, v) >= -1.0f - 1e-5f);
                    CHECK(cell.at(t, v) <= 1.0f + 1e-5f);
                    if (cell.at(t, v) > best) {
                        best = cell.at(t, v);
                        arg = static_cast<std::uint32_t>(v);
                    }
                }
                CHECK(cell.t2v_argmax[t] == arg);
                CHECK(cell.at(t, cell.t2v_argmax[t]) == best);
                t2v += best;
            }
            for (std::size_t v = 0; v < cell.n_v; ++v) {
                float best = cell.at(0, v);
                std::uint32_t arg = 0;
                for (std::size_t t = 0; t < cell.n_t; ++t) {
                    if (cell.at(t, v) > best) {
                        best = cell.at(t, v);
                        arg = static_cast<std::uint32_t>(t);
                    }
                }
                CHECK(cell.v2t_argmax[v] == arg);
                v2t += best;
            }
            CHECK(s.at(b, k).t2v == doctest::Approx(t2v / cell.n_t).epsilon(1e-9));
            CHECK(s.at(b, k).v2t == doctest::Approx(v2t / cell.n_v).epsilon(1e-9));
        }
    }
}

TEST_CASE("argmax ties resolve to the lowest index") {
    // two identical prompts: frame argmax must stay at column 0
    EmbeddingMatrix v(1, 2, {1, 0}, true);
    EmbeddingMatrix c = rows2({0.6f, 0.8f}, {0.6f, 0.8f});
    const DirectionalSim v2t = sim_v2t(v, c);
    CHECK(v2t.argmax[0] == 0);

    RelevancyTensor tensor;
    batched_scores({&v, 1}, {&c, 1}, &tensor);
    CHECK(tensor.cell(0, 0).v2t_argmax[0] == 0);
}

TEST_CASE("serial reference and OpenMP kernel agree bitwise for any worker count") {
    SplitMix64 rng(20);
    std::vector<EmbeddingMatrix> videos, cats;
    for (int b = 0; b < 5; ++b) videos.push_back(oracle::random_unit_matrix(3 + b % 3, 16, rng));
    for (int k = 0; k < 7; ++k) cats.push_back(oracle::random_unit_matrix(2 + k % 4, 16, rng));

    const BatchedScores serial = batched_scores_serial(videos, cats);
    for (int jobs : {1, 2, 4, 8}) {
        const BatchedScores par = batched_scores(videos, cats, nullptr, jobs);
        REQUIRE(par.cells.size() == serial.cells.size());
        for (std::size_t i = 0; i < par.cells.size(); ++i) {
            CHECK(par.cells[i].score == serial.cells[i].score);
            CHECK(par.cells[i].v2t == serial.cells[i].v2t);
            CHECK(par.cells[i].t2v == serial.cells[i].t2v);
        }
    }
}
