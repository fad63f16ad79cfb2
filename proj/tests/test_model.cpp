#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fedcorr/datagen.hpp"
#include "fedcorr/model.hpp"
#include "fedcorr/train.hpp"

using namespace fedcorr;

namespace {

Batch random_batch(const Model& model, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    std::uniform_int_distribution<int> lab(0, static_cast<int>(model.n_classes()) - 1);
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(model.input_dim());
        for (auto& v : x)
            v = g(rng);
        b.x.push_back(std::move(x));
        b.y.push_back(one_hot(lab(rng), model.n_classes()));
    }
    return b;
}

// Independently coded MLP forward pass (plain loops, no shared code path).
std::vector<double> naive_mlp_forward(const WeightVector& w, std::size_t d, std::size_t h,
                                      std::size_t m, const std::vector<double>& x)
{
    std::vector<double> hid(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        double acc = w.params[h * d + j];
        for (std::size_t i = 0; i < d; ++i)
            acc += w.params[j * d + i] * x[i];
        hid[j] = acc > 0 ? acc : 0.0;
    }
    std::vector<double> z(m, 0.0);
    const std::size_t w2 = h * d + h;
    for (std::size_t c = 0; c < m; ++c) {
        double acc = w.params[w2 + m * h + c];
        for (std::size_t j = 0; j < h; ++j)
            acc += w.params[w2 + c * h + j] * hid[j];
        z[c] = acc;
    }
    double mx = z[0];
    for (double v : z)
        mx = std::max(mx, v);
    double sum = 0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z)
        v /= sum;
    return z;
}

void gradient_check(const Model& model, double prox_coeff, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    WeightVector w = model.init_weights(seed);
    WeightVector anchor = model.init_weights(seed + 1);
    for (int batch_i = 0; batch_i < 5; ++batch_i) {
        Batch b = random_batch(model, 8, seed * 100 + batch_i);
        WeightVector grad = model.zeros_like();
        batch_loss_grad(model, w, b, prox_coeff, anchor, grad);
        std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
        for (int c = 0; c < 10; ++c) {
            const std::size_t i = pick(rng);
            const double h = 1e-5;
            WeightVector wp = w, wm = w;
            wp.params[i] += h;
            wm.params[i] -= h;
            const double fp = batch_loss(model, wp, b, prox_coeff, anchor);
            const double fm = batch_loss(model, wm, b, prox_coeff, anchor);
            const double numeric = (fp - fm) / (2 * h);
            const double analytic = grad.params[i];
            const double rel =
                std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
            EXPECT_LE(rel, 1e-4) << "coord " << i << " analytic " << analytic << " numeric "
                                 << numeric;
        }
    }
}

} // namespace

TEST(Forward, ZeroWeightsSoftmaxIsUniform)
{
    SoftmaxRegression model(4, 5);
    WeightVector w = model.zeros_like();
    auto p = model.forward(w, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    for (double v : p)
        EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(Forward, SumsToOneAndShiftInvariant)
{
    SoftmaxRegression model(3, 4);
    WeightVector w = model.init_weights(2);
    std::vector<double> x{0.3, -1.0, 2.0};
    auto p = model.forward(w, x);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);

    // adding a constant to every bias entry shifts all logits equally
    WeightVector w2 = w;
    for (std::size_t c = 0; c < 4; ++c)
        w2.params[4 * 3 + c] += 17.0;
    auto p2 = model.forward(w2, x);
    for (std::size_t c = 0; c < 4; ++c)
        EXPECT_NEAR(p[c], p2[c], 1e-9);
}

TEST(Forward, DimensionMismatchRejected)
{
    SoftmaxRegression model(3, 4);
    WeightVector w = model.zeros_like();
    EXPECT_THROW(model.forward(w, std::vector<double>{1.0}), ParameterError);
}

TEST(Forward, MlpMatchesIndependentImplementation)
{
    Mlp model(6, 9, 4);
    WeightVector w = model.init_weights(0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(6);
        for (auto& v : x)
            v = g(rng);
        auto a = model.forward(w, x);
        auto b = naive_mlp_forward(w, 6, 9, 4, x);
        for (std::size_t c = 0; c < 4; ++c)
            EXPECT_NEAR(a[c], b[c], 1e-12);
    }
}

TEST(PerSampleLoss, OneHotAndUniformValues)
{
    SoftmaxRegression model(2, 10);
    Dataset ds;
    ds.n_classes = 10;
    ds.features = {{1.0, 0.0}};
    ds.true_labels = {3};
    ds.given_labels = {3};
    std::vector<std::size_t> idx{0};

    WeightVector w = model.zeros_like();
    auto uniform_loss = per_sample_loss(model, w, ds, idx);
    EXPECT_NEAR(uniform_loss[0], std::log(10.0), 1e-12);

    // saturate the correct logit: prediction is one-hot at the given label
    w.params[3 * 2 + 0] = 500.0;
    auto hot = per_sample_loss(model, w, ds, idx);
    EXPECT_NEAR(hot[0], 0.0, 1e-12);
}

TEST(PerSampleLoss, BatchMatchesOneAtATime)
{
    Mlp model(5, 8, 3);
    WeightVector w = model.init_weights(4);
    BlobParams bp{30, 3, 5, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 7);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    auto batch = per_sample_loss(model, w, ds, all);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<std::size_t> one{i};
        EXPECT_NEAR(per_sample_loss(model, w, ds, one)[0], batch[i], 1e-12);
    }
}

TEST(Mixup, ConvexEndpointsAndMidpoint)
{
    Batch b;
    b.x = {{0.0, 0.0}, {2.0, 2.0}};
    b.y = {one_hot(0, 3), one_hot(1, 3)};

    std::vector<std::size_t> ident{0, 1};
    std::vector<double> lam1{1.0, 1.0};
    auto same = mixup_batch_with(b, ident, lam1);
    EXPECT_EQ(same.x, b.x);
    EXPECT_EQ(same.y, b.y);

    std::vector<std::size_t> swap{1, 0};
    std::vector<double> lam05{0.5, 0.5};
    auto mid = mixup_batch_with(b, swap, lam05);
    EXPECT_EQ(mid.x[0], (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(mid.y[0], (std::vector<double>{0.5, 0.5, 0.0}));
}

TEST(Mixup, UniformMomentsAtAlphaOne)
{
    // Beta(1,1) = U(0,1): mean 1/2, variance 1/12
    Batch b;
    b.x = {{0.0}, {1.0}};
    b.y = {one_hot(0, 2), one_hot(1, 2)};
    double sum = 0, sumsq = 0;
    const int n = 100000;
    std::mt19937_64 rng(1);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        const double g1 = gamma(rng), g2 = gamma(rng);
        const double l = g1 / (g1 + g2);
        sum += l;
        sumsq += l * l;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 0.5, 0.01);
    EXPECT_NEAR(sumsq / n - mean * mean, 1.0 / 12.0, 0.01);
}

TEST(Mixup, LabelsStayValidDistributions)
{
    Mlp model(4, 6, 3);
    Batch b = random_batch(model, 32, 12);
    auto mixed = mixup_batch(b, 1.0, 99);
    for (const auto& y : mixed.y) {
        double s = 0;
        for (double v : y) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
    EXPECT_THROW(mixup_batch(b, 0.0, 1), ParameterError);
}

TEST(Gradients, SoftmaxFiniteDifferences)
{
    SoftmaxRegression model(7, 4);
    gradient_check(model, 0.0, 21);
}

TEST(Gradients, MlpFiniteDifferences)
{
    Mlp model(6, 10, 3);
    gradient_check(model, 0.0, 22);
}

TEST(Gradients, ProximalTermIncluded)
{
    // beta * mu = 5 * 0.8
    SoftmaxRegression sm(5, 3);
    gradient_check(sm, 5.0 * 0.8, 23);
    Mlp mlp(5, 8, 3);
    gradient_check(mlp, 5.0 * 0.8, 24);
}

TEST(LocalTrain, LossDecreasesOnSeparableBlobs)
{
    BlobParams bp{200, 3, 5, 1.0, 10.0};
    Dataset ds = generate_blobs(bp, 31);
    Mlp model(5, 16, 3);
    WeightVector w0 = model.init_weights(2);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);

    auto mean_loss = [&](const WeightVector& w) {
        auto losses = per_sample_loss(model, w, ds, all);
        return std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
    };
    LocalTrainConfig ltc;
    ltc.epochs = 5;
    ltc.seed = 3;
    WeightVector w1 = local_train(model, w0, ds, all, ltc);
    EXPECT_LT(mean_loss(w1), mean_loss(w0));
}

TEST(LocalTrain, BitwiseDeterministicAndProxZeroMatchesPlain)
{
    BlobParams bp{100, 3, 4, 1.0, 8.0};
    Dataset ds = generate_blobs(bp, 5);
    Mlp model(4, 8, 3);
    WeightVector w0 = model.init_weights(7);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);

    LocalTrainConfig a;
    a.epochs = 3;
    a.mixup_alpha = 1.0;
    a.seed = 11;
    auto w1 = local_train(model, w0, ds, all, a);
    auto w2 = local_train(model, w0, ds, all, a);
    EXPECT_EQ(w1.params, w2.params);

    // beta*mu = 0 leaves the trajectory identical to the plain run
    LocalTrainConfig b = a;
    b.prox_beta = 5.0;
    b.prox_mu_hat = 0.0;
    b.anchor_weights = model.init_weights(99);
    auto w3 = local_train(model, w0, ds, all, b);
    EXPECT_EQ(w1.params, w3.params);
}

TEST(LocalTrain, ProximalPullKeepsWeightsNearAnchor)
{
    BlobParams bp{150, 3, 4, 1.0, 8.0};
    Dataset ds = generate_blobs(bp, 6);
    Mlp model(4, 8, 3);
    WeightVector anchor = model.init_weights(1);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);

    LocalTrainConfig plain;
    plain.epochs = 5;
    plain.learning_rate = 0.01;
    plain.seed = 13;
    plain.anchor_weights = anchor;
    LocalTrainConfig pulled = plain;
    pulled.prox_beta = 5.0;
    pulled.prox_mu_hat = 0.8;

    auto wp = local_train(model, anchor, ds, all, plain);
    auto wr = local_train(model, anchor, ds, all, pulled);
    EXPECT_LE(weight_distance_sq(wr, anchor), weight_distance_sq(wp, anchor));
}

TEST(LocalTrain, AnchorStartContributesZeroProxLoss)
{
    Mlp model(3, 4, 3);
    WeightVector w = model.init_weights(8);
    Batch b = random_batch(model, 4, 2);
    const double with_prox = batch_loss(model, w, b, 4.0, w);
    const double without = batch_loss(model, w, b, 0.0, w);
    EXPECT_NEAR(with_prox, without, 1e-12);
}

TEST(LocalTrain, DivergenceReported)
{
    BlobParams bp{50, 3, 4, 1.0, 8.0};
    Dataset ds = generate_blobs(bp, 2);
    Mlp model(4, 8, 3);
    WeightVector w = model.init_weights(3);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    LocalTrainConfig ltc;
    ltc.learning_rate = 1e12;
    ltc.epochs = 3;
    EXPECT_THROW(local_train(model, w, ds, all, ltc), DivergenceError);
}

TEST(Evaluate, PerfectWrongAndTieBreak)
{
    SoftmaxRegression model(2, 5);
    BlobParams bp{50, 5, 2, 1.0, 10.0};
    Dataset ds = generate_blobs(bp, 17);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);

    // uniform predictions, balanced labels, argmax ties to class 0 -> 1/M
    WeightVector w = model.zeros_like();
    EXPECT_DOUBLE_EQ(evaluate(model, w, ds, all), 0.2);

    // saturated correct logits -> 1.0; rotated-by-one labels -> 0.0
    std::vector<std::size_t> idx{0, 1, 2, 3, 4};
    Dataset onehot;
    onehot.n_classes = 5;
    for (int c = 0; c < 5; ++c) {
        std::vector<double> x(5, 0.0);
        x[static_cast<std::size_t>(c)] = 1.0;
        onehot.features.push_back(x);
        onehot.true_labels.push_back(c);
        onehot.given_labels.push_back(c);
    }
    SoftmaxRegression sm5(5, 5);
    WeightVector ws = sm5.zeros_like();
    for (int c = 0; c < 5; ++c)
        ws.params[static_cast<std::size_t>(c) * 5 + static_cast<std::size_t>(c)] = 1000.0;
    EXPECT_DOUBLE_EQ(evaluate(sm5, ws, onehot, idx), 1.0);

    Dataset rotated = onehot;
    for (int c = 0; c < 5; ++c)
        rotated.true_labels[static_cast<std::size_t>(c)] = (c + 1) % 5;
    EXPECT_DOUBLE_EQ(evaluate(sm5, ws, rotated, idx), 0.0);
}

TEST(WeightDistance, BasicsAndBlockDecomposition)
{
    Mlp model(3, 4, 3);
    WeightVector a = model.init_weights(1);
    EXPECT_DOUBLE_EQ(weight_distance_sq(a, a), 0.0);

    WeightVector b = a;
    b.params[0] += 3.0;
    b.params[1] += 4.0;
    EXPECT_DOUBLE_EQ(weight_distance_sq(a, b), 25.0);

    // random pair: total equals the sum of per-block squared norms
    WeightVector c = model.init_weights(2);
    double per_block = 0.0;
    for (const auto& blk : a.layout->blocks) {
        auto sa = a.block(blk);
        auto sc = c.block(blk);
        for (std::size_t i = 0; i < sa.size(); ++i)
            per_block += (sa[i] - sc[i]) * (sa[i] - sc[i]);
    }
    EXPECT_NEAR(weight_distance_sq(a, c), per_block, 1e-12);

    SoftmaxRegression other(3, 3);
    WeightVector w_other = other.zeros_like();
    EXPECT_THROW(weight_distance_sq(a, w_other), ParameterError);
}

TEST(InitWeights, WithinFanInBoundsAndSeeded)
{
    Mlp model(10, 16, 4);
    WeightVector a = model.init_weights(5);
    WeightVector b = model.init_weights(5);
    WeightVector c = model.init_weights(6);
    EXPECT_EQ(a.params, b.params);
    EXPECT_NE(a.params, c.params);
    for (const auto& blk : a.layout->blocks) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(blk.fan_in));
        for (double v : a.block(blk)) {
            EXPECT_GE(v, -bound);
            EXPECT_LE(v, bound);
        }
    }
}
