#include "maka/embedding.hpp"

#include <cmath>
#include <string>

#include "maka/error.hpp"

namespace maka {

void validate_matrix(const EmbeddingMatrix& m) {
    if (m.rows < 1 || m.dim < 1)
        fail("ShapeMismatch", "matrix must have rows >= 1 and dim >= 1, got " +
                                  std::to_string(m.rows) + "x" + std::to_string(m.dim));
    if (m.data.size() != m.rows * m.dim)
        fail("ShapeMismatch", "matrix buffer holds " + std::to_string(m.data.size()) +
                                  " values, expected " + std::to_string(m.rows * m.dim));
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i]))
            fail("NonFiniteValue", "non-finite value at flat index " + std::to_string(i));
    }
}

double row_norm(const EmbeddingMatrix& m, std::size_t i) {
    const float* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.dim; ++j) s += static_cast<double>(r[j]) * r[j];
    return std::sqrt(s);
}

void l2_normalize_in_place(EmbeddingMatrix& m) {
    validate_matrix(m);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double norm = row_norm(m, i);
        if (norm <= 1e-12)
            fail("ZeroNormRow", "row " + std::to_string(i) + " has zero norm");
        float* r = m.row(i);
        for (std::size_t j = 0; j < m.dim; ++j)
            r[j] = static_cast<float>(r[j] / norm);
    }
    m.normalized = true;
}

EmbeddingMatrix l2_normalize(EmbeddingMatrix m) {
    l2_normalize_in_place(m);
    return m;
}

void VideoRecord::validate() const {
    if (views.empty()) fail("ShapeMismatch", "video '" + video_id + "' has no views");
    const std::size_t d = views.front().dim;
    for (const auto& v : views) {
        if (v.dim != d)
            fail("DimMismatch", "video '" + video_id + "' mixes view dims " +
                                    std::to_string(d) + " and " + std::to_string(v.dim));
    }
}

}  // namespace maka
