#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fedcorr/common.hpp"
#include "fedcorr/rng.hpp"

namespace fedcorr {

// Named slice of a flat parameter vector.
struct LayoutBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0; // 1 for bias vectors
    std::size_t fan_in = 0;

    std::size_t count() const { return rows * cols; }
};

struct Layout {
    std::vector<LayoutBlock> blocks;
    std::size_t total = 0;

    bool same_shape(const Layout& other) const
    {
        if (total != other.total || blocks.size() != other.blocks.size())
            return false;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            if (blocks[i].rows != other.blocks[i].rows || blocks[i].cols != other.blocks[i].cols)
                return false;
        return true;
    }
};

// Flat real parameter vector of a classifier; the unit of aggregation.
struct WeightVector {
    std::vector<double> params;
    std::shared_ptr<const Layout> layout;

    std::size_t size() const { return params.size(); }
    std::span<double> block(const LayoutBlock& b)
    {
        return {params.data() + b.offset, b.count()};
    }
    std::span<const double> block(const LayoutBlock& b) const
    {
        return {params.data() + b.offset, b.count()};
    }
};

inline double weight_distance_sq(const WeightVector& a, const WeightVector& b)
{
    if (!a.layout || !b.layout || !a.layout->same_shape(*b.layout) ||
        a.params.size() != b.params.size())
        throw ParameterError("weight_distance_sq: layout mismatch");
    return squared_distance(a.params, b.params);
}

// Training batch: feature rows plus soft label vectors (one-hot or mixed).
struct Batch {
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> y;

    std::size_t size() const { return x.size(); }
};

inline void softmax_inplace(std::span<double> logits)
{
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (auto& v : logits)
        v /= sum;
}

inline double logsumexp(std::span<const double> v)
{
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v)
        sum += std::exp(x - m);
    return m + std::log(sum);
}

// Classifier contract: a stateless architecture evaluated at an explicit
// weight vector. Outputs are softmax probabilities.
class Model {
public:
    virtual ~Model() = default;

    virtual std::size_t input_dim() const = 0;
    virtual std::size_t n_classes() const = 0;
    virtual std::shared_ptr<const Layout> layout() const = 0;

    virtual void logits(const WeightVector& w, std::span<const double> x,
                        std::span<double> out) const = 0;

    // Mean cross-entropy over the batch with soft labels; accumulates the
    // mean-loss gradient into grad (caller zeroes it).
    virtual double ce_loss_grad(const WeightVector& w, const Batch& batch,
                                WeightVector& grad) const = 0;

    std::vector<double> forward(const WeightVector& w, std::span<const double> x) const
    {
        if (x.size() != input_dim())
            throw ParameterError("forward: input dimension mismatch");
        std::vector<double> out(n_classes());
        logits(w, x, out);
        softmax_inplace(out);
        return out;
    }

    // Seeded uniform init in +-1/sqrt(fan_in) for every block.
    WeightVector init_weights(std::uint64_t seed) const
    {
        auto lay = layout();
        WeightVector w{std::vector<double>(lay->total, 0.0), lay};
        Rng rng = make_rng(seed);
        for (const auto& b : lay->blocks) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
            std::uniform_real_distribution<double> unif(-bound, bound);
            for (auto& v : w.block(b))
                v = unif(rng);
        }
        return w;
    }

    WeightVector zeros_like() const
    {
        auto lay = layout();
        return WeightVector{std::vector<double>(lay->total, 0.0), lay};
    }
};

// Multinomial logistic regression: logits = W x + b.
class SoftmaxRegression final : public Model {
public:
    SoftmaxRegression(std::size_t input_dim, std::size_t n_classes)
        : d_(input_dim), m_(n_classes)
    {
        if (d_ < 1 || m_ < 2)
            throw ParameterError("softmax model: need input_dim >= 1, n_classes >= 2");
        auto lay = std::make_shared<Layout>();
        lay->blocks = {
            {"W", 0, m_, d_, d_},
            {"b", m_ * d_, m_, 1, d_},
        };
        lay->total = m_ * d_ + m_;
        layout_ = std::move(lay);
    }

    std::size_t input_dim() const override { return d_; }
    std::size_t n_classes() const override { return m_; }
    std::shared_ptr<const Layout> layout() const override { return layout_; }

    void logits(const WeightVector& w, std::span<const double> x,
                std::span<double> out) const override
    {
        const double* W = w.params.data();
        const double* b = w.params.data() + m_ * d_;
        for (std::size_t c = 0; c < m_; ++c)
            out[c] = b[c] + dot({W + c * d_, d_}, x);
    }

    double ce_loss_grad(const WeightVector& w, const Batch& batch,
                        WeightVector& grad) const override
    {
        const std::size_t nb = batch.size();
        if (nb == 0)
            throw ParameterError("ce_loss_grad: empty batch");
        const double inv = 1.0 / static_cast<double>(nb);
        double* gW = grad.params.data();
        double* gb = grad.params.data() + m_ * d_;
        std::vector<double> z(m_);
        double loss = 0.0;
        for (std::size_t s = 0; s < nb; ++s) {
            const auto& x = batch.x[s];
            const auto& y = batch.y[s];
            logits(w, x, z);
            const double lse = logsumexp(z);
            for (std::size_t c = 0; c < m_; ++c)
                loss += y[c] * (lse - z[c]);
            // d loss / d z_c = p_c - y_c
            for (std::size_t c = 0; c < m_; ++c) {
                const double dz = (std::exp(z[c] - lse) - y[c]) * inv;
                gb[c] += dz;
                double* gWc = gW + c * d_;
                for (std::size_t j = 0; j < d_; ++j)
                    gWc[j] += dz * x[j];
            }
        }
        return loss * inv;
    }

private:
    std::size_t d_, m_;
    std::shared_ptr<const Layout> layout_;
};

// One-hidden-layer ReLU perceptron: logits = W2 relu(W1 x + b1) + b2.
class Mlp final : public Model {
public:
    Mlp(std::size_t input_dim, std::size_t hidden, std::size_t n_classes)
        : d_(input_dim), h_(hidden), m_(n_classes)
    {
        if (d_ < 1 || h_ < 1 || m_ < 2)
            throw ParameterError("mlp model: need input_dim, hidden >= 1 and n_classes >= 2");
        auto lay = std::make_shared<Layout>();
        std::size_t off = 0;
        lay->blocks.push_back({"W1", off, h_, d_, d_});
        off += h_ * d_;
        lay->blocks.push_back({"b1", off, h_, 1, d_});
        off += h_;
        lay->blocks.push_back({"W2", off, m_, h_, h_});
        off += m_ * h_;
        lay->blocks.push_back({"b2", off, m_, 1, h_});
        off += m_;
        lay->total = off;
        layout_ = std::move(lay);
    }

    std::size_t input_dim() const override { return d_; }
    std::size_t n_classes() const override { return m_; }
    std::size_t hidden() const { return h_; }
    std::shared_ptr<const Layout> layout() const override { return layout_; }

    void logits(const WeightVector& w, std::span<const double> x,
                std::span<double> out) const override
    {
        std::vector<double> h(h_);
        hidden_act(w, x, h);
        output_logits(w, h, out);
    }

    double ce_loss_grad(const WeightVector& w, const Batch& batch,
                        WeightVector& grad) const override
    {
        const std::size_t nb = batch.size();
        if (nb == 0)
            throw ParameterError("ce_loss_grad: empty batch");
        const double inv = 1.0 / static_cast<double>(nb);
        const double* W2 = w.params.data() + h_ * d_ + h_;
        double* gW1 = grad.params.data();
        double* gb1 = grad.params.data() + h_ * d_;
        double* gW2 = grad.params.data() + h_ * d_ + h_;
        double* gb2 = grad.params.data() + h_ * d_ + h_ + m_ * h_;

        std::vector<double> h(h_), z(m_), dz(m_), dh(h_);
        double loss = 0.0;
        for (std::size_t s = 0; s < nb; ++s) {
            const auto& x = batch.x[s];
            const auto& y = batch.y[s];
            hidden_act(w, x, h);
            output_logits(w, h, z);
            const double lse = logsumexp(z);
            for (std::size_t c = 0; c < m_; ++c) {
                loss += y[c] * (lse - z[c]);
                dz[c] = (std::exp(z[c] - lse) - y[c]) * inv;
            }
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t c = 0; c < m_; ++c) {
                gb2[c] += dz[c];
                const double* W2c = W2 + c * h_;
                double* gW2c = gW2 + c * h_;
                for (std::size_t j = 0; j < h_; ++j) {
                    gW2c[j] += dz[c] * h[j];
                    dh[j] += dz[c] * W2c[j];
                }
            }
            for (std::size_t j = 0; j < h_; ++j) {
                if (h[j] <= 0.0)
                    continue; // ReLU gate
                gb1[j] += dh[j];
                double* gW1j = gW1 + j * d_;
                for (std::size_t i = 0; i < d_; ++i)
                    gW1j[i] += dh[j] * x[i];
            }
        }
        return loss * inv;
    }

private:
    void hidden_act(const WeightVector& w, std::span<const double> x, std::span<double> h) const
    {
        const double* W1 = w.params.data();
        const double* b1 = w.params.data() + h_ * d_;
        for (std::size_t j = 0; j < h_; ++j)
            h[j] = std::max(0.0, b1[j] + dot({W1 + j * d_, d_}, x));
    }
    void output_logits(const WeightVector& w, std::span<const double> h, std::span<double> z) const
    {
        const double* W2 = w.params.data() + h_ * d_ + h_;
        const double* b2 = w.params.data() + h_ * d_ + h_ + m_ * h_;
        for (std::size_t c = 0; c < m_; ++c)
            z[c] = b2[c] + dot({W2 + c * h_, h_}, h);
    }

    std::size_t d_, h_, m_;
    std::shared_ptr<const Layout> layout_;
};

} // namespace fedcorr
