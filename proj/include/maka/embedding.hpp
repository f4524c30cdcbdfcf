#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace maka {

// Dense row-major matrix of 32-bit float embeddings. Rows are frames of one
// video or the prompt vectors of one category; `normalized` records whether
// every row is unit length. Immutable after construction in all scoring paths.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;  // rows * dim, row-major
    bool normalized = false;

    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t r, std::size_t d)
        : rows(r), dim(d), data(r * d, 0.0f) {}
    EmbeddingMatrix(std::size_t r, std::size_t d, std::vector<float> values, bool norm = false)
        : rows(r), dim(d), data(std::move(values)), normalized(norm) {}

    const float* row(std::size_t i) const { return data.data() + i * dim; }
    float* row(std::size_t i) { return data.data() + i * dim; }

    bool empty() const { return rows == 0 || dim == 0; }
};

// Throws ShapeMismatch / NonFiniteValue when the matrix violates its
// invariants (consistent buffer size, finite entries, rows/dim >= 1).
void validate_matrix(const EmbeddingMatrix& m);

// Row-wise L2 norm in double precision.
double row_norm(const EmbeddingMatrix& m, std::size_t i);

// Divides every row by its L2 norm. Throws ZeroNormRow when a row's norm is
// <= 1e-12. Idempotent on already-normalized input (within float rounding).
void l2_normalize_in_place(EmbeddingMatrix& m);
EmbeddingMatrix l2_normalize(EmbeddingMatrix m);

// One video: any number of views (spatial crop x temporal clip), each a frame
// matrix with a shared dim.
struct VideoRecord {
    std::string video_id;
    std::optional<int> label;
    std::vector<EmbeddingMatrix> views;

    void validate() const;  // >=1 view, uniform dim
};

}  // namespace maka
