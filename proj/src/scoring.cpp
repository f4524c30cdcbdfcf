#include "maka/scoring.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "maka/error.hpp"

namespace maka {

namespace {

void check_pair(const EmbeddingMatrix& v, const EmbeddingMatrix& c) {
    if (v.rows == 0 || c.rows == 0) fail("EmptyMatrix", "similarity of an empty matrix");
    if (v.dim != c.dim)
        fail("DimMismatch", "frame dim " + std::to_string(v.dim) + " vs prompt dim " +
                                std::to_string(c.dim));
}

// Mean with a permutation-invariant reduction: summing the maxima in sorted
// order makes the result independent of the order rows arrived in.
double mean_sorted(std::vector<double>& vals) {
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (double x : vals) s += x;
    return s / static_cast<double>(vals.size());
}

double mean_sorted_f32(std::vector<float>& vals) {
    std::sort(vals.begin(), vals.end());
    double s = 0.0;
    for (float x : vals) s += x;
    return s / static_cast<double>(vals.size());
}

double dot_f64(const float* a, const float* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double norm_f64(const float* a, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(a[i]) * a[i];
    return std::sqrt(s);
}

}  // namespace

double cosine_sim(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        fail("DimMismatch", "cosine_sim: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    if (a.empty()) fail("EmptyMatrix", "cosine_sim of empty vectors");
    const double na = norm_f64(a.data(), a.size());
    const double nb = norm_f64(b.data(), b.size());
    if (na <= 1e-12 || nb <= 1e-12) fail("ZeroNorm", "cosine_sim of a zero vector");
    return dot_f64(a.data(), b.data(), a.size()) / (na * nb);
}

DirectionalSim sim_v2t(const EmbeddingMatrix& v, const EmbeddingMatrix& c) {
    check_pair(v, c);
    DirectionalSim out;
    out.argmax.resize(v.rows);
    std::vector<double> maxima(v.rows);
    for (std::size_t i = 0; i < v.rows; ++i) {
        double best = -HUGE_VAL;
        std::uint32_t best_j = 0;
        for (std::size_t j = 0; j < c.rows; ++j) {
            const double s = cosine_sim({v.row(i), v.dim}, {c.row(j), c.dim});
            if (s > best) {
                best = s;
                best_j = static_cast<std::uint32_t>(j);
            }
        }
        maxima[i] = best;
        out.argmax[i] = best_j;
    }
    out.value = mean_sorted(maxima);
    return out;
}

DirectionalSim sim_t2v(const EmbeddingMatrix& v, const EmbeddingMatrix& c) {
    check_pair(v, c);
    DirectionalSim out;
    out.argmax.resize(c.rows);
    std::vector<double> maxima(c.rows);
    for (std::size_t j = 0; j < c.rows; ++j) {
        double best = -HUGE_VAL;
        std::uint32_t best_i = 0;
        for (std::size_t i = 0; i < v.rows; ++i) {
            const double s = cosine_sim({v.row(i), v.dim}, {c.row(j), c.dim});
            if (s > best) {
                best = s;
                best_i = static_cast<std::uint32_t>(i);
            }
        }
        maxima[j] = best;
        out.argmax[j] = best_i;
    }
    out.value = mean_sorted(maxima);
    return out;
}

double maka_sim(const EmbeddingMatrix& v, const EmbeddingMatrix& c) {
    return 0.5 * (sim_v2t(v, c).value + sim_t2v(v, c).value);
}

double mean_pool_sim(const EmbeddingMatrix& v, const EmbeddingMatrix& c) {
    check_pair(v, c);
    std::vector<float> mv(v.dim, 0.0f), mc(c.dim, 0.0f);
    for (std::size_t j = 0; j < v.dim; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.rows; ++i) s += v.row(i)[j];
        mv[j] = static_cast<float>(s / static_cast<double>(v.rows));
    }
    for (std::size_t j = 0; j < c.dim; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.rows; ++i) s += c.row(i)[j];
        mc[j] = static_cast<float>(s / static_cast<double>(c.rows));
    }
    return cosine_sim(mv, mc);  // cosine renormalizes; ZeroNorm if a mean collapses
}

// ---------------------------------------------------------------------------
// Batched kernel
// ---------------------------------------------------------------------------

namespace {

#if defined(__GNUC__) || defined(__clang__)
#define MAKA_VEC_KERNEL 1
typedef double v4df __attribute__((vector_size(32)));

inline v4df load4(const float* p) {
    return v4df{static_cast<double>(p[0]), static_cast<double>(p[1]),
                static_cast<double>(p[2]), static_cast<double>(p[3])};
}

inline double hsum(v4df x) { return (x[0] + x[1]) + (x[2] + x[3]); }
#endif

// Pairwise dots of a 4-prompt x 2-frame register block. Each dot owns one
// vector accumulator with a fixed lane->tree reduction, so a dot's value is
// the same whether it was computed inside a block or by dot_one.
#ifdef MAKA_VEC_KERNEL

inline void dot_block_4x2(const float* a0, const float* a1, const float* a2, const float* a3,
                          const float* b0, const float* b1, std::size_t d, double out[4][2]) {
    v4df s00{}, s01{}, s10{}, s11{}, s20{}, s21{}, s30{}, s31{};
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
        const v4df x0 = load4(b0 + i);
        const v4df x1 = load4(b1 + i);
        const v4df y0 = load4(a0 + i);
        const v4df y1 = load4(a1 + i);
        const v4df y2 = load4(a2 + i);
        const v4df y3 = load4(a3 + i);
        s00 += y0 * x0; s01 += y0 * x1;
        s10 += y1 * x0; s11 += y1 * x1;
        s20 += y2 * x0; s21 += y2 * x1;
        s30 += y3 * x0; s31 += y3 * x1;
    }
    out[0][0] = hsum(s00); out[0][1] = hsum(s01);
    out[1][0] = hsum(s10); out[1][1] = hsum(s11);
    out[2][0] = hsum(s20); out[2][1] = hsum(s21);
    out[3][0] = hsum(s30); out[3][1] = hsum(s31);
    for (; i < d; ++i) {
        const double x0 = b0[i], x1 = b1[i];
        out[0][0] += a0[i] * x0; out[0][1] += a0[i] * x1;
        out[1][0] += a1[i] * x0; out[1][1] += a1[i] * x1;
        out[2][0] += a2[i] * x0; out[2][1] += a2[i] * x1;
        out[3][0] += a3[i] * x0; out[3][1] += a3[i] * x1;
    }
}

inline double dot_one(const float* a, const float* b, std::size_t d) {
    v4df s{};
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) s += load4(a + i) * load4(b + i);
    double r = hsum(s);
    for (; i < d; ++i) r += a[i] * static_cast<double>(b[i]);
    return r;
}

#else

inline double dot_one(const float* a, const float* b, std::size_t d) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    double r = (s0 + s1) + (s2 + s3);
    for (; i < d; ++i) r += static_cast<double>(a[i]) * b[i];
    return r;
}

#endif

// Raw-dot logits of one (video, category) cell, prompt-major into `logits`.
void cell_logits(const EmbeddingMatrix& video, const EmbeddingMatrix& cat, float* logits) {
    const std::size_t nt = cat.rows, nv = video.rows, d = video.dim;
    std::size_t t = 0;
#ifdef MAKA_VEC_KERNEL
    for (; t + 4 <= nt; t += 4) {
        const float* a0 = cat.row(t);
        const float* a1 = cat.row(t + 1);
        const float* a2 = cat.row(t + 2);
        const float* a3 = cat.row(t + 3);
        std::size_t v = 0;
        for (; v + 2 <= nv; v += 2) {
            double r[4][2];
            dot_block_4x2(a0, a1, a2, a3, video.row(v), video.row(v + 1), d, r);
            for (std::size_t dt = 0; dt < 4; ++dt) {
                logits[(t + dt) * nv + v] = static_cast<float>(r[dt][0]);
                logits[(t + dt) * nv + v + 1] = static_cast<float>(r[dt][1]);
            }
        }
        for (; v < nv; ++v) {
            const float* b = video.row(v);
            logits[(t + 0) * nv + v] = static_cast<float>(dot_one(a0, b, d));
            logits[(t + 1) * nv + v] = static_cast<float>(dot_one(a1, b, d));
            logits[(t + 2) * nv + v] = static_cast<float>(dot_one(a2, b, d));
            logits[(t + 3) * nv + v] = static_cast<float>(dot_one(a3, b, d));
        }
    }
#endif
    for (; t < nt; ++t) {
        const float* a = cat.row(t);
        for (std::size_t v = 0; v < nv; ++v)
            logits[t * nv + v] = static_cast<float>(dot_one(a, video.row(v), d));
    }
}

CategoryScores reduce_cell(const float* logits, std::size_t nt, std::size_t nv,
                           RelevancyCell* capture, std::vector<float>& scratch_t,
                           std::vector<float>& scratch_v) {
    scratch_t.resize(nt);
    scratch_v.assign(nv, -HUGE_VALF);
    std::vector<std::uint32_t> arg_t(capture ? nt : 0), arg_v(capture ? nv : 0);

    for (std::size_t t = 0; t < nt; ++t) {
        const float* row = logits + t * nv;
        float best = row[0];
        std::uint32_t best_v = 0;
        for (std::size_t v = 0; v < nv; ++v) {
            if (row[v] > best) {
                best = row[v];
                best_v = static_cast<std::uint32_t>(v);
            }
            if (row[v] > scratch_v[v]) {
                scratch_v[v] = row[v];
                if (capture) arg_v[v] = static_cast<std::uint32_t>(t);
            }
        }
        scratch_t[t] = best;
        if (capture) arg_t[t] = best_v;
    }

    CategoryScores out;
    if (capture) {
        capture->n_t = static_cast<std::uint32_t>(nt);
        capture->n_v = static_cast<std::uint32_t>(nv);
        capture->scores.assign(logits, logits + nt * nv);
        capture->t2v_argmax = std::move(arg_t);
        capture->v2t_argmax = std::move(arg_v);
    }
    out.t2v = mean_sorted_f32(scratch_t);
    out.v2t = mean_sorted_f32(scratch_v);
    out.score = 0.5 * (out.v2t + out.t2v);
    return out;
}

void check_batch(std::span<const EmbeddingMatrix> videos,
                 std::span<const EmbeddingMatrix> categories) {
    if (videos.empty()) fail("EmptyMatrix", "batched_scores: no videos");
    if (categories.empty()) fail("EmptyBank", "batched_scores: no categories");
    const std::size_t d = videos.front().dim;
    for (std::size_t b = 0; b < videos.size(); ++b) {
        if (videos[b].rows == 0) fail("EmptyMatrix", "video " + std::to_string(b) + " has no frames");
        if (videos[b].dim != d)
            fail("DimMismatch", "video " + std::to_string(b) + " has dim " +
                                    std::to_string(videos[b].dim) + ", expected " + std::to_string(d));
        if (!videos[b].normalized)
            fail("NotNormalized", "video " + std::to_string(b) + " is not normalized");
    }
    for (std::size_t k = 0; k < categories.size(); ++k) {
        if (categories[k].rows == 0) fail("EmptyCategory", "category " + std::to_string(k) + " has no prompts");
        if (categories[k].dim != d)
            fail("DimMismatch", "category " + std::to_string(k) + " has dim " +
                                    std::to_string(categories[k].dim) + ", expected " + std::to_string(d));
        if (!categories[k].normalized)
            fail("NotNormalized", "category " + std::to_string(k) + " is not normalized");
    }
}

}  // namespace

BatchedScores batched_scores(std::span<const EmbeddingMatrix> videos,
                             std::span<const EmbeddingMatrix> categories,
                             RelevancyTensor* capture, int jobs) {
    check_batch(videos, categories);
    const std::size_t B = videos.size(), K = categories.size();

    BatchedScores out;
    out.batch = B;
    out.categories = K;
    out.cells.resize(B * K);
    if (capture) {
        capture->batch = B;
        capture->categories = K;
        capture->cells.assign(B * K, RelevancyCell{});
    }

    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
    const std::int64_t n_cells = static_cast<std::int64_t>(B * K);

#pragma omp parallel num_threads(threads)
    {
        std::vector<float> logits, scratch_t, scratch_v;
#pragma omp for schedule(static)
        for (std::int64_t cell = 0; cell < n_cells; ++cell) {
            const std::size_t b = static_cast<std::size_t>(cell) / K;
            const std::size_t k = static_cast<std::size_t>(cell) % K;
            const EmbeddingMatrix& video = videos[b];
            const EmbeddingMatrix& cat = categories[k];
            logits.resize(cat.rows * video.rows);
            cell_logits(video, cat, logits.data());
            RelevancyCell* cap = capture ? &capture->cells[cell] : nullptr;
            out.cells[cell] = reduce_cell(logits.data(), cat.rows, video.rows, cap,
                                          scratch_t, scratch_v);
        }
    }
    return out;
}

BatchedScores batched_scores_serial(std::span<const EmbeddingMatrix> videos,
                                    std::span<const EmbeddingMatrix> categories,
                                    RelevancyTensor* capture) {
    check_batch(videos, categories);
    const std::size_t B = videos.size(), K = categories.size();

    BatchedScores out;
    out.batch = B;
    out.categories = K;
    out.cells.resize(B * K);
    if (capture) {
        capture->batch = B;
        capture->categories = K;
        capture->cells.assign(B * K, RelevancyCell{});
    }

    std::vector<float> logits, scratch_t, scratch_v;
    for (std::size_t cell = 0; cell < B * K; ++cell) {
        const EmbeddingMatrix& video = videos[cell / K];
        const EmbeddingMatrix& cat = categories[cell % K];
        logits.resize(cat.rows * video.rows);
        cell_logits(video, cat, logits.data());
        RelevancyCell* cap = capture ? &capture->cells[cell] : nullptr;
        out.cells[cell] = reduce_cell(logits.data(), cat.rows, video.rows, cap,
                                      scratch_t, scratch_v);
    }
    return out;
}

CategoryScores score_cell(const EmbeddingMatrix& video, const EmbeddingMatrix& category,
                          RelevancyCell* capture) {
    check_batch({&video, 1}, {&category, 1});
    std::vector<float> logits(category.rows * video.rows), scratch_t, scratch_v;
    cell_logits(video, category, logits.data());
    return reduce_cell(logits.data(), category.rows, video.rows, capture, scratch_t, scratch_v);
}

}  // namespace maka
