// Benchmark: serial reference vs OpenMP kernel on the late-interaction grid.
//
//   bench_scores [B] [K] [n_v] [n_t] [d]     (default 64 400 32 36 512)

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "maka/embedding.hpp"
#include "maka/rng.hpp"
#include "maka/scoring.hpp"

using namespace maka;

namespace {

EmbeddingMatrix random_unit(std::size_t rows, std::size_t dim, SplitMix64& rng) {
    EmbeddingMatrix m(rows, dim);
    for (auto& x : m.data) x = static_cast<float>(rng.next_gaussian());
    l2_normalize_in_place(m);
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t B = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 64;
    const std::size_t K = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 400;
    const std::size_t n_v = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 32;
    const std::size_t n_t = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 36;
    const std::size_t d = argc > 5 ? std::strtoull(argv[5], nullptr, 10) : 512;

    std::printf("B=%zu K=%zu n_v=%zu n_t=%zu d=%zu (%.2f GFLOP)\n", B, K, n_v, n_t, d,
                2.0 * B * K * n_v * n_t * d / 1e9);

    SplitMix64 rng(99);
    std::vector<EmbeddingMatrix> videos, cats;
    for (std::size_t b = 0; b < B; ++b) videos.push_back(random_unit(n_v, d, rng));
    for (std::size_t k = 0; k < K; ++k) cats.push_back(random_unit(n_t, d, rng));

    double t = omp_get_wtime();
    const BatchedScores serial = batched_scores_serial(videos, cats);
    const double dt_serial = omp_get_wtime() - t;
    std::printf("serial reference : %7.3f s  (%.2f GFLOP/s)\n", dt_serial,
                2.0 * B * K * n_v * n_t * d / dt_serial / 1e9);

    for (int jobs : {1, 2, 4, 8}) {
        t = omp_get_wtime();
        const BatchedScores par = batched_scores(videos, cats, nullptr, jobs);
        const double dt = omp_get_wtime() - t;

        bool identical = true;
        double max_diff = 0.0;
        for (std::size_t i = 0; i < par.cells.size(); ++i) {
            identical = identical && par.cells[i].score == serial.cells[i].score;
            max_diff = std::max(max_diff, std::fabs(par.cells[i].score - serial.cells[i].score));
        }
        std::printf("openmp %d worker%s: %7.3f s  (%.2f GFLOP/s)  speedup %5.2fx  %s\n", jobs,
                    jobs == 1 ? " " : "s", dt, 2.0 * B * K * n_v * n_t * d / dt / 1e9,
                    dt_serial / dt,
                    identical ? "bitwise == serial" : "MISMATCH vs serial");
        if (!identical) {
            std::printf("max diff %.3e\n", max_diff);
            return 1;
        }
    }
    return 0;
}
