#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "fedcorr/datagen.hpp"
#include "fedcorr/model.hpp"
#include "fedcorr/train.hpp"

using namespace fedcorr;

TEST(GenerateBlobs, ZeroVarianceCollapsesOntoCenters)
{
    BlobParams bp{4, 2, 1, 0.0, 1.0};
    Dataset ds = generate_blobs(bp, 0);
    ASSERT_EQ(ds.size(), 4u);
    std::set<double> values;
    for (const auto& f : ds.features)
        values.insert(f[0]);
    EXPECT_EQ(values.size(), 2u); // two distinct centers, two samples on each
    std::array<int, 2> counts{0, 0};
    for (int y : ds.true_labels)
        ++counts[static_cast<std::size_t>(y)];
    EXPECT_EQ(counts[0], 2);
    EXPECT_EQ(counts[1], 2);
    EXPECT_EQ(ds.given_labels, ds.true_labels);
}

TEST(GenerateBlobs, BalancedToWithinOne)
{
    BlobParams bp{10, 10, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 3);
    std::vector<int> counts(10, 0);
    for (int y : ds.true_labels)
        ++counts[static_cast<std::size_t>(y)];
    for (int c : counts)
        EXPECT_EQ(c, 1);

    BlobParams bp2{103, 5, 2, 1.0, 5.0};
    Dataset ds2 = generate_blobs(bp2, 3);
    std::vector<int> counts2(5, 0);
    for (int y : ds2.true_labels)
        ++counts2[static_cast<std::size_t>(y)];
    const auto [mn, mx] = std::minmax_element(counts2.begin(), counts2.end());
    EXPECT_LE(*mx - *mn, 1);
}

TEST(GenerateBlobs, InvalidSizesRejected)
{
    EXPECT_THROW(generate_blobs({1, 2, 3, 1.0, 1.0}, 0), ParameterError);
    EXPECT_THROW(generate_blobs({10, 2, 0, 1.0, 1.0}, 0), ParameterError);
    EXPECT_THROW(generate_blobs({10, 2, 3, 1.0, 0.0}, 0), ParameterError);
}

TEST(GenerateBlobs, SoftmaxOracleReachesHeldoutAccuracy)
{
    // reference-model oracle: the generated task is learnable to >= 95%
    BlobParams bp{1000, 5, 20, 1.0, 10.0};
    Dataset train = generate_blobs(bp, 7);
    Dataset test = generate_blobs_heldout(bp, 2000, 7);

    SoftmaxRegression model(20, 5);
    WeightVector w = model.init_weights(1);
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);
    LocalTrainConfig ltc;
    ltc.epochs = 60;
    ltc.batch_size = 32;
    ltc.learning_rate = 0.1;
    ltc.momentum = 0.9;
    ltc.seed = 5;
    w = local_train(model, w, train, all, ltc);
    EXPECT_GE(evaluate_all(model, w, test), 0.95);
}

TEST(PartitionIid, ForcedSizes)
{
    BlobParams bp{10, 2, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 1);
    auto pa = partition_iid(ds, 10, 4);
    for (const auto& c : pa.client_indices)
        EXPECT_EQ(c.size(), 1u);

    BlobParams bp2{100, 2, 2, 1.0, 5.0};
    Dataset ds2 = generate_blobs(bp2, 1);
    auto pa2 = partition_iid(ds2, 4, 4);
    std::set<std::size_t> seen;
    for (const auto& c : pa2.client_indices) {
        EXPECT_EQ(c.size(), 25u);
        seen.insert(c.begin(), c.end());
    }
    EXPECT_EQ(seen.size(), 100u);
}

TEST(PartitionIid, DeterministicAndValidates)
{
    BlobParams bp{57, 3, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 2);
    auto a = partition_iid(ds, 7, 99);
    auto b = partition_iid(ds, 7, 99);
    EXPECT_EQ(a.client_indices, b.client_indices);
    EXPECT_THROW(partition_iid(ds, 58, 1), ParameterError);
}

TEST(IndicatorMatrix, BernoulliOneIsAllOnes)
{
    auto phi = sample_indicator_matrix(6, 4, 1.0, 5);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            EXPECT_EQ(phi.at(i, j), 1);
}

TEST(IndicatorMatrix, MonteCarloMean)
{
    // binomial-mean oracle over 100 seeds
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto phi = sample_indicator_matrix(100, 10, 0.7, seed);
        total += std::accumulate(phi.entries.begin(), phi.entries.end(), 0.0) /
                 static_cast<double>(phi.entries.size());
    }
    EXPECT_NEAR(total / 100.0, 0.7, 0.03);
}

TEST(IndicatorMatrix, ZeroColumnRepairedToExactlyOneOne)
{
    // seed search at small N for a raw all-zero column
    bool found = false;
    for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
        auto raw = bernoulli_indicator_matrix(3, 3, 0.3, derive_seed(seed, "indicator.entries"));
        for (std::size_t j = 0; j < 3; ++j) {
            if (raw.column_sum(j) != 0)
                continue;
            found = true;
            auto repaired = sample_indicator_matrix(3, 3, 0.3, seed);
            EXPECT_EQ(repaired.column_sum(j), 1u);
        }
    }
    ASSERT_TRUE(found) << "no all-zero column found in seed range";
}

TEST(IndicatorMatrix, RepairLeavesNoEmptyRowOrColumn)
{
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto phi = sample_indicator_matrix(5, 4, 0.2, seed);
        for (std::size_t j = 0; j < 4; ++j)
            EXPECT_GE(phi.column_sum(j), 1u);
        for (std::size_t i = 0; i < 5; ++i)
            EXPECT_GE(phi.row_sum(i), 1u);
    }
    EXPECT_THROW(sample_indicator_matrix(5, 4, 0.0, 1), ParameterError);
}

TEST(PartitionNoniid, SingleClientGetsEverything)
{
    BlobParams bp{50, 5, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 3);
    auto pa = partition_noniid(ds, 1, 1.0, 10.0, 7);
    ASSERT_EQ(pa.n_clients(), 1u);
    EXPECT_EQ(pa.client_indices[0].size(), 50u);
}

TEST(PartitionNoniid, LargeAlphaApproachesGlobalProportions)
{
    // Dirichlet(1e6) concentrates on the uniform vector; with p=1 every
    // client's class mix approaches the global mix (statistical oracle)
    BlobParams bp{20000, 5, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto pa = partition_noniid(ds, 5, 1.0, 1e6, seed);
        for (const auto& rows : pa.client_indices) {
            std::vector<double> prop(5, 0.0);
            for (std::size_t r : rows)
                prop[static_cast<std::size_t>(ds.true_labels[r])] += 1.0;
            for (auto& v : prop)
                v /= static_cast<double>(rows.size());
            for (double v : prop)
                EXPECT_NEAR(v, 0.2, 0.02);
        }
    }
}

TEST(PartitionNoniid, LongTailedSizesAtSmallP)
{
    BlobParams bp{10000, 10, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 4);
    double best_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto pa = partition_noniid(ds, 100, 0.3, 10.0, seed);
        std::vector<std::size_t> sizes;
        for (const auto& rows : pa.client_indices)
            sizes.push_back(rows.size());
        std::sort(sizes.begin(), sizes.end());
        const double ratio = static_cast<double>(sizes.back()) /
                             static_cast<double>(sizes[sizes.size() / 2]);
        EXPECT_GE(ratio, 2.0); // clearly long-tailed in every seed
        best_ratio = std::max(best_ratio, ratio);
    }
    EXPECT_GT(best_ratio, 3.0);
}

TEST(PartitionNoniid, DisjointCoveringAndNonEmpty)
{
    BlobParams bp{500, 4, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 12);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto pa = partition_noniid(ds, 20, 0.3, 1.0, seed);
        std::set<std::size_t> seen;
        for (const auto& rows : pa.client_indices) {
            EXPECT_FALSE(rows.empty());
            for (std::size_t r : rows) {
                EXPECT_LT(r, ds.size());
                EXPECT_TRUE(seen.insert(r).second) << "duplicated index";
            }
        }
        EXPECT_EQ(seen.size(), ds.size());
    }
}

TEST(PartitionNoniid, Deterministic)
{
    BlobParams bp{300, 3, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 5);
    auto a = partition_noniid(ds, 10, 0.5, 2.0, 42);
    auto b = partition_noniid(ds, 10, 0.5, 2.0, 42);
    EXPECT_EQ(a.client_indices, b.client_indices);
}

TEST(NoiseModel, RhoZeroChangesNothing)
{
    BlobParams bp{200, 4, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 8);
    const auto before = ds.given_labels;
    auto pa = partition_iid(ds, 10, 1);
    auto na = apply_noise_model(ds, pa, 0.0, 0.0, 2);
    EXPECT_EQ(ds.given_labels, before);
    for (std::size_t k = 0; k < 10; ++k) {
        EXPECT_DOUBLE_EQ(na.noise_levels[k], 0.0);
        EXPECT_TRUE(na.flipped[k].empty());
    }
}

TEST(NoiseModel, RhoOneLevelsInTauRange)
{
    BlobParams bp{400, 4, 2, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 8);
    auto pa = partition_iid(ds, 8, 1);
    auto na = apply_noise_model(ds, pa, 1.0, 0.5, 3);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_GE(na.noise_levels[k], 0.5);
        EXPECT_LT(na.noise_levels[k], 1.0);
        EXPECT_EQ(na.flipped[k].size(),
                  static_cast<std::size_t>(std::llround(na.noise_levels[k] *
                                                        pa.client_indices[k].size())));
    }
}

TEST(NoiseModel, TouchesOnlyFlippedGivenLabels)
{
    BlobParams bp{300, 5, 3, 1.0, 5.0};
    Dataset ds = generate_blobs(bp, 6);
    Dataset before = ds;
    auto pa = partition_iid(ds, 6, 2);
    auto na = apply_noise_model(ds, pa, 0.7, 0.2, 11);
    EXPECT_EQ(ds.true_labels, before.true_labels);
    EXPECT_EQ(ds.features, before.features);
    std::set<std::size_t> flipped;
    for (const auto& rows : na.flipped)
        flipped.insert(rows.begin(), rows.end());
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (!flipped.count(i))
            EXPECT_EQ(ds.given_labels[i], before.given_labels[i]);
    EXPECT_THROW(apply_noise_model(ds, pa, 0.5, 1.0, 1), ParameterError);
    EXPECT_THROW(apply_noise_model(ds, pa, 1.5, 0.0, 1), ParameterError);
}

TEST(NoiseModel, NoisyClientFractionMatchesRho)
{
    // pooled over 200 seeds with N=50
    BlobParams bp{500, 5, 2, 1.0, 5.0};
    Dataset base = generate_blobs(bp, 21);
    auto pa = partition_iid(base, 50, 3);
    for (double rho : {0.4, 0.6, 0.8}) {
        double noisy = 0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            Dataset ds = base;
            auto na = apply_noise_model(ds, pa, rho, 0.0, seed);
            for (double mu : na.noise_levels)
                noisy += mu > 0.0;
        }
        EXPECT_NEAR(noisy / (200.0 * 50.0), rho, 0.1);
    }
}

TEST(NoiseModel, Deterministic)
{
    BlobParams bp{200, 4, 2, 1.0, 5.0};
    Dataset d1 = generate_blobs(bp, 8);
    Dataset d2 = generate_blobs(bp, 8);
    auto pa = partition_iid(d1, 10, 1);
    auto n1 = apply_noise_model(d1, pa, 0.6, 0.5, 17);
    auto n2 = apply_noise_model(d2, pa, 0.6, 0.5, 17);
    EXPECT_EQ(d1.given_labels, d2.given_labels);
    EXPECT_EQ(n1.noise_levels, n2.noise_levels);
    EXPECT_EQ(n1.flipped, n2.flipped);
}
