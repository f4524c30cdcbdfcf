#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maka/embedding.hpp"
#include "maka/scoring_bank.hpp"

namespace maka {

// Trainable linear map over frozen frame embeddings: each frame row x becomes
// normalize(W x + b). Initialized to identity / zero so training starts at
// the frozen-embedding baseline. All training math runs in double precision
// (the gradient check needs clean finite differences).
struct LinearAdapter {
    std::size_t dim = 0;
    std::vector<double> weight;  // dim x dim, row-major
    std::vector<double> bias;    // dim, empty when has_bias is false
    bool has_bias = true;

    static LinearAdapter identity(std::size_t dim, bool with_bias = true);

    double w(std::size_t r, std::size_t c) const { return weight[r * dim + c]; }
    double& w(std::size_t r, std::size_t c) { return weight[r * dim + c]; }
};

// Adapted frames as a normalized f32 matrix (inference path).
EmbeddingMatrix apply_adapter(const LinearAdapter& adapter, const EmbeddingMatrix& frames);

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 30;
    std::size_t batch_size = 8;
    double temperature = 0.07;
    std::uint64_t seed = 1;
    double weight_decay = 0.0;

    void validate() const;
};

struct TrainItem {
    const EmbeddingMatrix* frames = nullptr;  // assembled (single-view) frame set
    int label = 0;                            // category id in the bank
};

// Cross-entropy over late-interaction similarities:
//   mean over the batch of -log softmax_k(sim(adapted v, c_k) / tau)[label]
// Errors: UnknownLabel, NonFiniteLoss.
double ce_loss(std::span<const TrainItem> batch, const ScoringBank& bank,
               const LinearAdapter& adapter, double temperature);

struct AdapterGrad {
    std::vector<double> weight;
    std::vector<double> bias;
};

// Analytic gradient of ce_loss w.r.t. (weight, bias). Max nodes route their
// subgradient through the lowest-index maximizer (the kernel's tie rule); the
// per-row normalization Jacobian is included.
AdapterGrad grad(std::span<const TrainItem> batch, const ScoringBank& bank,
                 const LinearAdapter& adapter, double temperature);

struct TrainResult {
    LinearAdapter adapter;
    // [0] = loss over the full dataset at initialization, [e] = after epoch e
    std::vector<double> epoch_loss;
};

// Mini-batch SGD with decoupled weight decay (decay on the weight only).
// Deterministic for a given seed: fixed shuffle stream and summation order.
TrainResult train(std::span<const TrainItem> dataset, const ScoringBank& bank,
                  const TrainConfig& config);

// Adapter files reuse the APEB container: flags bit 0 marks an adapter, bit 1
// a trailing bias row (payload is d (+1) rows by d columns, f32).
void save_adapter(const LinearAdapter& adapter, const std::filesystem::path& path);
LinearAdapter load_adapter(const std::filesystem::path& path);

// "epoch,mean_loss" CSV of a training curve.
void save_loss_curve(std::span<const double> losses, const std::filesystem::path& path);

}  // namespace maka
