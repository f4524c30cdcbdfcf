#pragma once

// Brute-force reference scorer for tests. Independent of the library path on
// purpose: plain index-ordered loops, one accumulator, no blocking, no sorted
// reductions. Inputs are assumed row-normalized (raw dot products).

#include <cstddef>
#include <vector>

#include "maka/embedding.hpp"
#include "maka/rng.hpp"

namespace oracle {

inline double dot(const float* a, const float* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

struct Scores {
    double v2t = 0.0;
    double t2v = 0.0;
    double score = 0.0;
};

inline Scores maka(const maka::EmbeddingMatrix& v, const maka::EmbeddingMatrix& c) {
    Scores out;
    for (std::size_t i = 0; i < v.rows; ++i) {
        double best = dot(v.row(i), c.row(0), v.dim);
        for (std::size_t j = 1; j < c.rows; ++j)
            best = std::max(best, dot(v.row(i), c.row(j), v.dim));
        out.v2t += best;
    }
    out.v2t /= static_cast<double>(v.rows);
    for (std::size_t j = 0; j < c.rows; ++j) {
        double best = dot(v.row(0), c.row(j), v.dim);
        for (std::size_t i = 1; i < v.rows; ++i)
            best = std::max(best, dot(v.row(i), c.row(j), v.dim));
        out.t2v += best;
    }
    out.t2v /= static_cast<double>(c.rows);
    out.score = 0.5 * (out.v2t + out.t2v);
    return out;
}

inline maka::EmbeddingMatrix random_unit_matrix(std::size_t rows, std::size_t dim,
                                                maka::SplitMix64& rng) {
    maka::EmbeddingMatrix m(rows, dim);
    for (auto& x : m.data) x = static_cast<float>(rng.next_gaussian());
    maka::l2_normalize_in_place(m);
    return m;
}

}  // namespace oracle
