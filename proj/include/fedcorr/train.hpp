#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcorr/dataset.hpp"
#include "fedcorr/model.hpp"
#include "fedcorr/rng.hpp"

namespace fedcorr {

inline std::vector<double> one_hot(int label, std::size_t n_classes)
{
    std::vector<double> y(n_classes, 0.0);
    y[static_cast<std::size_t>(label)] = 1.0;
    return y;
}

// Deterministic mixup core: pairs sample i with partner[i] at weight lam[i].
inline Batch mixup_batch_with(const Batch& b, std::span<const std::size_t> partner,
                              std::span<const double> lam)
{
    Batch out;
    out.x.resize(b.size());
    out.y.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        const std::size_t j = partner[i];
        const double l = lam[i];
        out.x[i].resize(b.x[i].size());
        out.y[i].resize(b.y[i].size());
        for (std::size_t t = 0; t < b.x[i].size(); ++t)
            out.x[i][t] = l * b.x[i][t] + (1.0 - l) * b.x[j][t];
        for (std::size_t t = 0; t < b.y[i].size(); ++t)
            out.y[i][t] = l * b.y[i][t] + (1.0 - l) * b.y[j][t];
    }
    return out;
}

// Mixup augmentation: partners are a uniform random permutation of the batch
// and each pair draws its own lambda ~ Beta(alpha, alpha). Alpha = 1 reduces
// to uniform lambdas.
inline Batch mixup_batch(const Batch& b, double alpha, std::uint64_t seed)
{
    if (b.size() == 0)
        throw ParameterError("mixup_batch: empty batch");
    if (!(alpha > 0.0))
        throw ParameterError("mixup_batch: alpha must be positive");
    Rng rng = make_rng(seed);
    std::vector<std::size_t> partner(b.size());
    std::iota(partner.begin(), partner.end(), 0);
    std::shuffle(partner.begin(), partner.end(), rng);
    // Beta(a, a) = G1 / (G1 + G2) for independent Gamma(a, 1) draws
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> lam(b.size());
    for (auto& l : lam) {
        const double g1 = gamma(rng), g2 = gamma(rng);
        l = (g1 + g2) > 0.0 ? g1 / (g1 + g2) : 0.5;
    }
    return mixup_batch_with(b, partner, lam);
}

// Plain per-sample cross-entropy -log p(given label), computed from logits
// so confidently-wrong predictions stay finite.
inline std::vector<double> per_sample_loss(const Model& model, const WeightVector& w,
                                           const Dataset& ds, std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw ParameterError("per_sample_loss: empty index set");
    std::vector<double> z(model.n_classes());
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t row : indices) {
        model.logits(w, ds.features[row], z);
        out.push_back(logsumexp(z) - z[static_cast<std::size_t>(ds.given_labels[row])]);
    }
    return out;
}

// Fraction of indices whose argmax prediction matches the true label;
// argmax ties break toward the smallest class index.
inline double evaluate(const Model& model, const WeightVector& w, const Dataset& ds,
                       std::span<const std::size_t> indices)
{
    if (indices.empty())
        throw ParameterError("evaluate: empty index set");
    std::vector<double> z(model.n_classes());
    std::size_t correct = 0;
    for (std::size_t row : indices) {
        model.logits(w, ds.features[row], z);
        std::size_t best = 0;
        for (std::size_t c = 1; c < z.size(); ++c)
            if (z[c] > z[best])
                best = c;
        if (static_cast<int>(best) == ds.true_labels[row])
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

inline double evaluate_all(const Model& model, const WeightVector& w, const Dataset& ds)
{
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    return evaluate(model, w, ds, idx);
}

inline std::vector<std::vector<double>> predict_all(const Model& model, const WeightVector& w,
                                                    const Dataset& ds,
                                                    std::span<const std::size_t> indices)
{
    std::vector<std::vector<double>> preds;
    preds.reserve(indices.size());
    for (std::size_t row : indices)
        preds.push_back(model.forward(w, ds.features[row]));
    return preds;
}

struct LocalTrainConfig {
    int epochs = 5;
    int batch_size = 10;
    double learning_rate = 0.025;
    double momentum = 0.5;
    double mixup_alpha = 0.0; // 0 disables mixup
    double prox_beta = 0.0;
    double prox_mu_hat = 0.0;
    WeightVector anchor_weights; // reference for the proximal pull
    std::uint64_t seed = 0;
};

// Batch objective used during local training: mean mixup-CE plus the
// noise-scaled proximal pull beta * mu_hat * ||w - anchor||^2.
inline double batch_loss(const Model& model, const WeightVector& w, const Batch& batch,
                         double prox_coeff, const WeightVector& anchor)
{
    WeightVector scratch = model.zeros_like();
    double loss = model.ce_loss_grad(w, batch, scratch);
    if (prox_coeff > 0.0)
        loss += prox_coeff * weight_distance_sq(w, anchor);
    return loss;
}

inline double batch_loss_grad(const Model& model, const WeightVector& w, const Batch& batch,
                              double prox_coeff, const WeightVector& anchor, WeightVector& grad)
{
    std::fill(grad.params.begin(), grad.params.end(), 0.0);
    double loss = model.ce_loss_grad(w, batch, grad);
    if (prox_coeff > 0.0) {
        loss += prox_coeff * weight_distance_sq(w, anchor);
        for (std::size_t i = 0; i < w.params.size(); ++i)
            grad.params[i] += 2.0 * prox_coeff * (w.params[i] - anchor.params[i]);
    }
    return loss;
}

// SGD with momentum over shuffled mini-batches. Pure function of its inputs
// and seed.
inline WeightVector local_train(const Model& model, WeightVector w, const Dataset& ds,
                                std::span<const std::size_t> indices, const LocalTrainConfig& cfg)
{
    if (indices.empty())
        throw ParameterError("local_train: empty index set");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw ParameterError("local_train: epochs and batch_size must be >= 1");

    const double prox_coeff = cfg.prox_beta * cfg.prox_mu_hat;
    const WeightVector& anchor = cfg.anchor_weights;
    if (prox_coeff > 0.0 && (!anchor.layout || !anchor.layout->same_shape(*w.layout)))
        throw ParameterError("local_train: anchor layout mismatch");

    Rng shuffle_rng = make_rng(derive_seed(cfg.seed, "local_train.shuffle"));
    WeightVector grad = model.zeros_like();
    std::vector<double> velocity(w.params.size(), 0.0);
    std::vector<std::size_t> order(indices.begin(), indices.end());
    const std::size_t m = model.n_classes();

    std::uint64_t batch_counter = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            Batch batch;
            batch.x.reserve(stop - start);
            batch.y.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                batch.x.push_back(ds.features[order[i]]);
                batch.y.push_back(one_hot(ds.given_labels[order[i]], m));
            }
            if (cfg.mixup_alpha > 0.0)
                batch = mixup_batch(batch, cfg.mixup_alpha,
                                    derive_seed(cfg.seed, "local_train.mixup", batch_counter));
            const double loss = batch_loss_grad(model, w, batch, prox_coeff, anchor, grad);
            if (!std::isfinite(loss))
                throw DivergenceError("local_train: non-finite loss at epoch " +
                                      std::to_string(epoch) + " batch " +
                                      std::to_string(start / cfg.batch_size));
            for (std::size_t i = 0; i < w.params.size(); ++i) {
                velocity[i] = cfg.momentum * velocity[i] + grad.params[i];
                w.params[i] -= cfg.learning_rate * velocity[i];
            }
            ++batch_counter;
        }
    }
    return w;
}

} // namespace fedcorr
