#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maka/embedding.hpp"

namespace maka {

// Late-interaction similarity between a set of frame embeddings v (n_v x d)
// and a set of prompt embeddings c (n_t x d):
//
//   sim_v2t(v,c) = mean_i max_j  <v_i, c_j>     (frame -> best prompt)
//   sim_t2v(v,c) = mean_j max_i  <v_i, c_j>     (prompt -> best frame)
//   sim(v,c)     = (sim_v2t + sim_t2v) / 2
//
// plus the mean-pool baseline (cosine of the renormalized row means).
//
// Determinism contract: ties in a max resolve to the lowest index, and every
// mean accumulates its per-row maxima in ascending value order, so permuting
// the rows of either input leaves all scores bit-for-bit unchanged.

// Cosine similarity of two vectors (double accumulation, index order).
// Throws ZeroNorm if either norm is <= 1e-12, DimMismatch on length mismatch.
double cosine_sim(std::span<const float> a, std::span<const float> b);

struct DirectionalSim {
    double value = 0.0;
    std::vector<std::uint32_t> argmax;  // one entry per averaged row
};

// Scalar reference path. Each pair is scored with full cosine similarity, so
// these are exact on any input; the batched kernel assumes unit rows instead.
DirectionalSim sim_v2t(const EmbeddingMatrix& v, const EmbeddingMatrix& c);
DirectionalSim sim_t2v(const EmbeddingMatrix& v, const EmbeddingMatrix& c);
double maka_sim(const EmbeddingMatrix& v, const EmbeddingMatrix& c);

// Cosine between the renormalized means of the two row sets.
double mean_pool_sim(const EmbeddingMatrix& v, const EmbeddingMatrix& c);

struct CategoryScores {
    double score = 0.0;  // (v2t + t2v) / 2
    double v2t = 0.0;
    double t2v = 0.0;
};

// Captured pairwise similarities for one (video, category) cell, prompt-major:
// scores[t * n_v + v]. Argmax conventions mirror the batched reductions:
// t2v_argmax[t] = best frame for prompt t, v2t_argmax[v] = best prompt for
// frame v (lowest index on ties).
struct RelevancyCell {
    std::uint32_t n_t = 0;
    std::uint32_t n_v = 0;
    std::vector<float> scores;
    std::vector<std::uint32_t> t2v_argmax;
    std::vector<std::uint32_t> v2t_argmax;

    float at(std::size_t t, std::size_t v) const { return scores[t * n_v + v]; }
};

struct RelevancyTensor {
    std::size_t batch = 0;
    std::size_t categories = 0;
    std::vector<RelevancyCell> cells;  // batch * categories, b-major

    const RelevancyCell& cell(std::size_t b, std::size_t k) const {
        return cells[b * categories + k];
    }
};

struct BatchedScores {
    std::size_t batch = 0;
    std::size_t categories = 0;
    std::vector<CategoryScores> cells;  // b-major

    const CategoryScores& at(std::size_t b, std::size_t k) const {
        return cells[b * categories + k];
    }
};

// Batched kernel over every (video, category) pair. Inputs must be normalized
// (rows are used as-is in raw dot products); ragged n_v / n_t are fine. Cells
// are independent, so the OpenMP variant writes disjoint slots and its output
// does not depend on the worker count. Pass capture to retain the full
// relevancy tensor with argmax indices.
//
// jobs: 0 = OpenMP default, 1 = serial, n = exactly n workers.
BatchedScores batched_scores(std::span<const EmbeddingMatrix> videos,
                             std::span<const EmbeddingMatrix> categories,
                             RelevancyTensor* capture = nullptr, int jobs = 0);

// Serial reference: the same per-cell kernel in a plain loop. Kept for tests
// and the benchmark; bitwise-identical to the OpenMP path by construction.
BatchedScores batched_scores_serial(std::span<const EmbeddingMatrix> videos,
                                    std::span<const EmbeddingMatrix> categories,
                                    RelevancyTensor* capture = nullptr);

// Single (video, category) cell via the batched kernel (shared by inference
// and attribution so CLI outputs are independent of --jobs).
CategoryScores score_cell(const EmbeddingMatrix& video, const EmbeddingMatrix& category,
                          RelevancyCell* capture = nullptr);

}  // namespace maka
