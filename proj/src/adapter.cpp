#include "maka/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "maka/error.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"

namespace maka {

LinearAdapter LinearAdapter::identity(std::size_t dim, bool with_bias) {
    LinearAdapter a;
    a.dim = dim;
    a.has_bias = with_bias;
    a.weight.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) a.w(i, i) = 1.0;
    if (with_bias) a.bias.assign(dim, 0.0);
    return a;
}

void TrainConfig::validate() const {
    if (learning_rate < 0) fail("BadParams", "learning_rate must be >= 0");
    if (epochs < 1) fail("BadParams", "epochs must be >= 1");
    if (batch_size < 1) fail("BadParams", "batch_size must be >= 1");
    if (!(temperature > 0)) fail("BadParams", "temperature must be > 0");
    if (weight_decay < 0) fail("BadParams", "weight_decay must be >= 0");
}

namespace {

// W x + b for one f32 frame row, in double.
void affine_row(const LinearAdapter& a, const float* x, std::vector<double>& u) {
    u.assign(a.dim, 0.0);
    for (std::size_t r = 0; r < a.dim; ++r) {
        double s = 0.0;
        const double* wr = a.weight.data() + r * a.dim;
        for (std::size_t c = 0; c < a.dim; ++c) s += wr[c] * x[c];
        if (a.has_bias) s += a.bias[r];
        u[r] = s;
    }
}

struct AdaptedFrames {
    std::vector<double> rows;   // n_v * d, normalized
    std::vector<double> norms;  // pre-normalization norms
    std::size_t n_v = 0, dim = 0;

    const double* row(std::size_t i) const { return rows.data() + i * dim; }
};

AdaptedFrames adapt_frames(const LinearAdapter& a, const EmbeddingMatrix& frames) {
    if (frames.dim != a.dim)
        fail("DimMismatch", "adapter dim " + std::to_string(a.dim) + " vs frame dim " +
                                std::to_string(frames.dim));
    AdaptedFrames out;
    out.n_v = frames.rows;
    out.dim = a.dim;
    out.rows.resize(frames.rows * a.dim);
    out.norms.resize(frames.rows);
    std::vector<double> u;
    for (std::size_t i = 0; i < frames.rows; ++i) {
        affine_row(a, frames.row(i), u);
        double n2 = 0.0;
        for (double v : u) n2 += v * v;
        const double n = std::sqrt(n2);
        if (n <= 1e-12)
            fail("ZeroNormRow", "adapter maps frame " + std::to_string(i) + " to a zero vector");
        out.norms[i] = n;
        for (std::size_t j = 0; j < a.dim; ++j) out.rows[i * a.dim + j] = u[j] / n;
    }
    return out;
}

// Late-interaction similarity of adapted f64 frames against one f32 prompt
// matrix, with both argmax index sets (lowest index on ties).
struct CellSim {
    double sim = 0.0;
    std::vector<std::uint32_t> best_prompt_for_frame;  // size n_v
    std::vector<std::uint32_t> best_frame_for_prompt;  // size n_t
    std::vector<double> s;                             // n_v * n_t, frame-major

    double at(std::size_t i, std::size_t j, std::size_t n_t) const { return s[i * n_t + j]; }
};

CellSim cell_sim(const AdaptedFrames& frames, const EmbeddingMatrix& prompts) {
    if (prompts.dim != frames.dim)
        fail("DimMismatch", "prompt dim " + std::to_string(prompts.dim) + " vs adapted dim " +
                                std::to_string(frames.dim));
    const std::size_t n_v = frames.n_v, n_t = prompts.rows, d = frames.dim;
    CellSim out;
    out.s.resize(n_v * n_t);
    out.best_prompt_for_frame.assign(n_v, 0);
    out.best_frame_for_prompt.assign(n_t, 0);

    for (std::size_t i = 0; i < n_v; ++i) {
        const double* f = frames.row(i);
        for (std::size_t j = 0; j < n_t; ++j) {
            const float* c = prompts.row(j);
            double s = 0.0;
            for (std::size_t x = 0; x < d; ++x) s += f[x] * c[x];
            out.s[i * n_t + j] = s;
        }
    }

    double v2t = 0.0;
    for (std::size_t i = 0; i < n_v; ++i) {
        double best = out.s[i * n_t];
        std::uint32_t arg = 0;
        for (std::size_t j = 1; j < n_t; ++j) {
            if (out.s[i * n_t + j] > best) {
                best = out.s[i * n_t + j];
                arg = static_cast<std::uint32_t>(j);
            }
        }
        out.best_prompt_for_frame[i] = arg;
        v2t += best;
    }
    v2t /= static_cast<double>(n_v);

    double t2v = 0.0;
    for (std::size_t j = 0; j < n_t; ++j) {
        double best = out.s[j];
        std::uint32_t arg = 0;
        for (std::size_t i = 1; i < n_v; ++i) {
            if (out.s[i * n_t + j] > best) {
                best = out.s[i * n_t + j];
                arg = static_cast<std::uint32_t>(i);
            }
        }
        out.best_frame_for_prompt[j] = arg;
        t2v += best;
    }
    t2v /= static_cast<double>(n_t);

    out.sim = 0.5 * (v2t + t2v);
    return out;
}

std::size_t label_index(const ScoringBank& bank, int label) {
    for (std::size_t k = 0; k < bank.categories.size(); ++k)
        if (bank.categories[k].id == label) return k;
    fail("UnknownLabel", "label " + std::to_string(label) + " not present in the bank");
}

std::vector<double> stable_softmax(const std::vector<double>& scores, double tau) {
    double m = scores[0];
    for (double s : scores) m = std::max(m, s);
    std::vector<double> p(scores.size());
    double denom = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        p[k] = std::exp((scores[k] - m) / tau);
        denom += p[k];
    }
    for (double& x : p) x /= denom;
    return p;
}

}  // namespace

EmbeddingMatrix apply_adapter(const LinearAdapter& adapter, const EmbeddingMatrix& frames) {
    const AdaptedFrames adapted = adapt_frames(adapter, frames);
    EmbeddingMatrix out(frames.rows, frames.dim);
    out.normalized = true;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(adapted.rows[i]);
    return out;
}

double ce_loss(std::span<const TrainItem> batch, const ScoringBank& bank,
               const LinearAdapter& adapter, double temperature) {
    if (batch.empty()) fail("BadParams", "ce_loss of an empty batch");
    if (!(temperature > 0)) fail("BadParams", "temperature must be > 0");
    const std::size_t K = bank.categories.size();
    if (K == 0) fail("EmptyBank", "ce_loss needs a non-empty bank");

    double total = 0.0;
    for (const TrainItem& item : batch) {
        const std::size_t y = label_index(bank, item.label);
        const AdaptedFrames frames = adapt_frames(adapter, *item.frames);
        std::vector<double> sims(K);
        for (std::size_t k = 0; k < K; ++k)
            sims[k] = cell_sim(frames, bank.categories[k].prompts).sim;
        const std::vector<double> p = stable_softmax(sims, temperature);
        total += -std::log(p[y]);
    }
    const double loss = total / static_cast<double>(batch.size());
    if (!std::isfinite(loss)) fail("NonFiniteLoss", "ce_loss is not finite");
    return loss;
}

AdapterGrad grad(std::span<const TrainItem> batch, const ScoringBank& bank,
                 const LinearAdapter& adapter, double temperature) {
    if (batch.empty()) fail("BadParams", "grad of an empty batch");
    if (!(temperature > 0)) fail("BadParams", "temperature must be > 0");
    const std::size_t K = bank.categories.size();
    const std::size_t d = adapter.dim;

    AdapterGrad g;
    g.weight.assign(d * d, 0.0);
    g.bias.assign(adapter.has_bias ? d : 0, 0.0);

    const double inv_items = 1.0 / static_cast<double>(batch.size());
    std::vector<double> g_f(d);

    for (const TrainItem& item : batch) {
        const std::size_t y = label_index(bank, item.label);
        const AdaptedFrames frames = adapt_frames(adapter, *item.frames);
        const std::size_t n_v = frames.n_v;

        std::vector<CellSim> cells(K);
        std::vector<double> sims(K);
        for (std::size_t k = 0; k < K; ++k) {
            cells[k] = cell_sim(frames, bank.categories[k].prompts);
            sims[k] = cells[k].sim;
        }
        const std::vector<double> p = stable_softmax(sims, temperature);

        // dL/d f_i accumulated over categories and both max directions
        for (std::size_t i = 0; i < n_v; ++i) {
            std::fill(g_f.begin(), g_f.end(), 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                const double coef =
                    (p[k] - (k == y ? 1.0 : 0.0)) / temperature * inv_items * 0.5;
                if (coef == 0.0) continue;
                const EmbeddingMatrix& prompts = bank.categories[k].prompts;
                const std::size_t n_t = prompts.rows;

                // frame -> best prompt term
                {
                    const std::uint32_t j = cells[k].best_prompt_for_frame[i];
                    const double w = coef / static_cast<double>(n_v);
                    const float* c = prompts.row(j);
                    for (std::size_t x = 0; x < d; ++x) g_f[x] += w * c[x];
                }
                // prompt -> best frame terms landing on this frame
                for (std::size_t j = 0; j < n_t; ++j) {
                    if (cells[k].best_frame_for_prompt[j] != i) continue;
                    const double w = coef / static_cast<double>(n_t);
                    const float* c = prompts.row(j);
                    for (std::size_t x = 0; x < d; ++x) g_f[x] += w * c[x];
                }
            }

            // through the normalization: g_u = (g_f - (f . g_f) f) / ||u||
            const double* f = frames.row(i);
            double fg = 0.0;
            for (std::size_t x = 0; x < d; ++x) fg += f[x] * g_f[x];
            const double inv_norm = 1.0 / frames.norms[i];
            const float* x_row = item.frames->row(i);
            for (std::size_t r = 0; r < d; ++r) {
                const double gu = (g_f[r] - fg * f[r]) * inv_norm;
                if (gu == 0.0) continue;
                double* gw = g.weight.data() + r * d;
                for (std::size_t c = 0; c < d; ++c) gw[c] += gu * x_row[c];
                if (adapter.has_bias) g.bias[r] += gu;
            }
        }
    }
    return g;
}

TrainResult train(std::span<const TrainItem> dataset, const ScoringBank& bank,
                  const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) fail("BadParams", "train: empty dataset");
    const std::size_t d = dataset.front().frames->dim;

    TrainResult result;
    result.adapter = LinearAdapter::identity(d);
    result.epoch_loss.push_back(ce_loss(dataset, bank, result.adapter, config.temperature));

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(config.seed);
    std::vector<TrainItem> batch;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);

            const AdapterGrad g = grad(batch, bank, result.adapter, config.temperature);
            const double lr = config.learning_rate;
            for (std::size_t i = 0; i < result.adapter.weight.size(); ++i)
                result.adapter.weight[i] -=
                    lr * (g.weight[i] + config.weight_decay * result.adapter.weight[i]);
            if (result.adapter.has_bias)
                for (std::size_t i = 0; i < d; ++i) result.adapter.bias[i] -= lr * g.bias[i];
        }

        const double loss = ce_loss(dataset, bank, result.adapter, config.temperature);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "loss became non-finite after epoch " << (epoch + 1) << " (lr "
                << config.learning_rate << ", tau " << config.temperature << ")";
            fail("NonFiniteLoss", msg.str());
        }
        result.epoch_loss.push_back(loss);
    }
    return result;
}

void save_adapter(const LinearAdapter& adapter, const std::filesystem::path& path) {
    const std::size_t d = adapter.dim;
    EmbeddingMatrix m(adapter.has_bias ? d + 1 : d, d);
    for (std::size_t i = 0; i < d * d; ++i) m.data[i] = static_cast<float>(adapter.weight[i]);
    if (adapter.has_bias)
        for (std::size_t j = 0; j < d; ++j) m.data[d * d + j] = static_cast<float>(adapter.bias[j]);
    const std::uint16_t flags =
        kFlagAdapter | (adapter.has_bias ? kFlagAdapterBias : std::uint16_t{0});
    save_matrix(m, path, flags);
}

LinearAdapter load_adapter(const std::filesystem::path& path) {
    ApebHeader header;
    const EmbeddingMatrix m = load_matrix(path, &header);
    if (!(header.flags & kFlagAdapter))
        fail("SchemaError", "'" + path.string() + "' is not an adapter file");
    const bool has_bias = (header.flags & kFlagAdapterBias) != 0;
    const std::size_t d = m.dim;
    if (m.rows != d + (has_bias ? 1 : 0))
        fail("ShapeMismatch", "adapter '" + path.string() + "' has " + std::to_string(m.rows) +
                                  " rows for dim " + std::to_string(d));
    LinearAdapter a;
    a.dim = d;
    a.has_bias = has_bias;
    a.weight.resize(d * d);
    for (std::size_t i = 0; i < d * d; ++i) a.weight[i] = m.data[i];
    if (has_bias) {
        a.bias.resize(d);
        for (std::size_t j = 0; j < d; ++j) a.bias[j] = m.data[d * d + j];
    }
    return a;
}

void save_loss_curve(std::span<const double> losses, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "epoch,mean_loss\n";
    out.precision(12);
    for (std::size_t i = 0; i < losses.size(); ++i) out << i << "," << losses[i] << "\n";
    write_file_atomic(path, out.str());
}

}  // namespace maka
