#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedcorr/dataset.hpp"
#include "fedcorr/rng.hpp"

namespace fedcorr {

struct BlobParams {
    std::size_t n_samples = 0;
    int n_classes = 0;
    std::size_t dim = 0;
    double cluster_std = 1.0;
    double class_center_scale = 1.0;
};

// Class centers drawn uniformly in a hypercube whose side shrinks with
// 1/sqrt(dim), so the typical inter-center distance is about 0.65 * scale in
// feature units regardless of dimension and "scale vs cluster_std" keeps one
// meaning across dimensions.
inline std::vector<std::vector<double>> make_blob_centers(int n_classes, std::size_t dim,
                                                          double scale, std::uint64_t seed)
{
    if (n_classes < 1 || dim < 1)
        throw ParameterError("blobs: n_classes and dim must be >= 1");
    if (scale <= 0.0)
        throw ParameterError("blobs: class_center_scale must be positive");
    Rng rng = make_rng(seed);
    const double half_side = 0.8 * scale / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> unif(-half_side, half_side);
    std::vector<std::vector<double>> centers(n_classes, std::vector<double>(dim));
    for (auto& c : centers)
        for (auto& v : c)
            v = unif(rng);
    return centers;
}

// Samples around fixed centers: class counts balanced to within one, lower
// class indices taking the remainder. Rows come out grouped by class.
inline Dataset sample_blobs(const std::vector<std::vector<double>>& centers,
                            std::size_t n_samples, double cluster_std, std::uint64_t seed)
{
    const int m = static_cast<int>(centers.size());
    if (m < 1 || n_samples < static_cast<std::size_t>(m))
        throw ParameterError("blobs: need n_samples >= n_classes");
    if (cluster_std < 0.0)
        throw ParameterError("blobs: cluster_std must be non-negative");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.n_classes = m;
    ds.features.reserve(n_samples);
    ds.true_labels.reserve(n_samples);
    const std::size_t base = n_samples / m, rem = n_samples % m;
    for (int c = 0; c < m; ++c) {
        const std::size_t count = base + (static_cast<std::size_t>(c) < rem ? 1 : 0);
        for (std::size_t s = 0; s < count; ++s) {
            std::vector<double> x = centers[c];
            for (auto& v : x)
                v += cluster_std * gauss(rng);
            ds.features.push_back(std::move(x));
            ds.true_labels.push_back(c);
        }
    }
    ds.given_labels = ds.true_labels;
    return ds;
}

// Synthetic M-class Gaussian-blob dataset; given labels start clean.
inline Dataset generate_blobs(const BlobParams& p, std::uint64_t seed)
{
    auto centers = make_blob_centers(p.n_classes, p.dim, p.class_center_scale,
                                     derive_seed(seed, "blobs.centers"));
    return sample_blobs(centers, p.n_samples, p.cluster_std, derive_seed(seed, "blobs.samples"));
}

// Fresh draws from the same centers as generate_blobs(p, seed) — the held-out
// evaluation set of a run.
inline Dataset generate_blobs_heldout(const BlobParams& p, std::size_t n_test, std::uint64_t seed)
{
    auto centers = make_blob_centers(p.n_classes, p.dim, p.class_center_scale,
                                     derive_seed(seed, "blobs.centers"));
    return sample_blobs(centers, n_test, p.cluster_std, derive_seed(seed, "blobs.test_samples"));
}

// Uniformly random partition into n_clients sets with sizes differing by at
// most one.
inline PartitionAssignment partition_iid(const Dataset& ds, std::size_t n_clients, std::uint64_t seed)
{
    const std::size_t n = ds.size();
    if (n_clients < 1 || n_clients > n)
        throw ParameterError("partition_iid: need 1 <= n_clients <= n_samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    PartitionAssignment pa;
    pa.client_indices.resize(n_clients);
    const std::size_t base = n / n_clients, rem = n % n_clients;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n_clients; ++k) {
        const std::size_t count = base + (k < rem ? 1 : 0);
        pa.client_indices[k].assign(idx.begin() + pos, idx.begin() + pos + count);
        pos += count;
    }
    return pa;
}

// Raw Bernoulli(p) ownership matrix, no repair.
inline IndicatorMatrix bernoulli_indicator_matrix(std::size_t n_clients, std::size_t n_classes,
                                                  double p, std::uint64_t seed)
{
    if (n_clients < 1 || n_classes < 1)
        throw ParameterError("indicator: n_clients and n_classes must be >= 1");
    if (!(p > 0.0) || p > 1.0)
        throw ParameterError("indicator: p must be in (0, 1]");
    Rng rng = make_rng(seed);
    std::bernoulli_distribution bern(p);
    IndicatorMatrix phi;
    phi.n_clients = n_clients;
    phi.n_classes = n_classes;
    phi.entries.resize(n_clients * n_classes);
    for (auto& e : phi.entries)
        e = bern(rng) ? 1 : 0;
    return phi;
}

// Repairs all-zero columns (a class nobody holds) by granting it to one
// uniformly chosen client, then all-zero rows likewise. Both steps only add
// ones, so neither can undo the other.
inline void repair_indicator_matrix(IndicatorMatrix& phi, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    for (std::size_t j = 0; j < phi.n_classes; ++j) {
        if (phi.column_sum(j) == 0) {
            std::uniform_int_distribution<std::size_t> pick(0, phi.n_clients - 1);
            phi.at(pick(rng), j) = 1;
        }
    }
    for (std::size_t i = 0; i < phi.n_clients; ++i) {
        if (phi.row_sum(i) == 0) {
            std::uniform_int_distribution<std::size_t> pick(0, phi.n_classes - 1);
            phi.at(i, pick(rng)) = 1;
        }
    }
}

inline IndicatorMatrix sample_indicator_matrix(std::size_t n_clients, std::size_t n_classes,
                                               double p, std::uint64_t seed)
{
    IndicatorMatrix phi = bernoulli_indicator_matrix(n_clients, n_classes, p,
                                                     derive_seed(seed, "indicator.entries"));
    repair_indicator_matrix(phi, derive_seed(seed, "indicator.repair"));
    return phi;
}

// Non-IID partition: class j's samples are split among its owners with a
// symmetric-Dirichlet probability vector, one multinomial draw per sample.
// Clients left empty are repaired by taking one sample of a class they own
// from the largest holder of that class.
inline PartitionAssignment partition_noniid(const Dataset& ds, std::size_t n_clients,
                                            double p, double alpha_dir, std::uint64_t seed)
{
    const std::size_t n = ds.size();
    const std::size_t m = static_cast<std::size_t>(ds.n_classes);
    if (n_clients < 1 || n_clients > n)
        throw ParameterError("partition_noniid: need 1 <= n_clients <= n_samples");
    if (!(alpha_dir > 0.0))
        throw ParameterError("partition_noniid: alpha_dir must be positive");

    std::vector<std::vector<std::size_t>> by_class(m);
    for (std::size_t i = 0; i < n; ++i)
        by_class[static_cast<std::size_t>(ds.true_labels[i])].push_back(i);
    for (std::size_t j = 0; j < m; ++j)
        if (by_class[j].empty())
            throw ParameterError("partition_noniid: class " + std::to_string(j) + " has no samples");

    IndicatorMatrix phi = sample_indicator_matrix(n_clients, m, p, derive_seed(seed, "noniid.phi"));
    Rng rng = make_rng(derive_seed(seed, "noniid.alloc"));

    PartitionAssignment pa;
    pa.client_indices.resize(n_clients);
    // class_counts[k][j]: how many class-j samples client k currently holds
    std::vector<std::vector<std::size_t>> class_counts(n_clients, std::vector<std::size_t>(m, 0));
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::size_t> owners;
        for (std::size_t i = 0; i < n_clients; ++i)
            if (phi.at(i, j))
                owners.push_back(i);
        // symmetric Dirichlet via normalized gammas
        std::gamma_distribution<double> gamma(alpha_dir, 1.0);
        std::vector<double> q(owners.size());
        double total = 0.0;
        for (auto& v : q) {
            v = gamma(rng);
            total += v;
        }
        if (total <= 0.0)
            std::fill(q.begin(), q.end(), 1.0); // gamma underflow at tiny alpha
        std::discrete_distribution<std::size_t> pick(q.begin(), q.end());
        for (std::size_t row : by_class[j]) {
            const std::size_t k = owners[pick(rng)];
            pa.client_indices[k].push_back(row);
            ++class_counts[k][j];
        }
    }

    // Empty-client repair. Donor = largest holder of a class the empty client
    // owns; re-scan until stable (a size-one donor can go empty in turn).
    for (std::size_t pass = 0; pass < 2 * n_clients + 2; ++pass) {
        bool any_empty = false;
        for (std::size_t k = 0; k < n_clients; ++k) {
            if (!pa.client_indices[k].empty())
                continue;
            any_empty = true;
            std::size_t best_donor = n_clients, best_class = m, best_count = 0;
            for (std::size_t j = 0; j < m; ++j) {
                if (!phi.at(k, j))
                    continue;
                for (std::size_t c = 0; c < n_clients; ++c) {
                    if (c == k || class_counts[c][j] == 0)
                        continue;
                    if (class_counts[c][j] > best_count ||
                        (class_counts[c][j] == best_count && c < best_donor)) {
                        best_count = class_counts[c][j];
                        best_donor = c;
                        best_class = j;
                    }
                }
            }
            if (best_donor == n_clients)
                throw ParameterError("partition_noniid: cannot repair empty client " + std::to_string(k));
            auto& donor = pa.client_indices[best_donor];
            for (std::size_t pos = donor.size(); pos-- > 0;) {
                const std::size_t row = donor[pos];
                if (static_cast<std::size_t>(ds.true_labels[row]) == best_class) {
                    donor.erase(donor.begin() + static_cast<std::ptrdiff_t>(pos));
                    pa.client_indices[k].push_back(row);
                    --class_counts[best_donor][best_class];
                    ++class_counts[k][best_class];
                    break;
                }
            }
        }
        if (!any_empty)
            return pa;
    }
    throw ParameterError("partition_noniid: empty-client repair did not converge");
}

// Federated label-noise model: each client is noisy with probability rho, a
// noisy client draws mu ~ U(tau, 1) and has round(mu * |D_k|) of its samples'
// given labels resampled uniformly over all classes (the true label may be
// redrawn, so the effective wrong-label rate is mu * (M-1) / M).
inline NoiseAssignment apply_noise_model(Dataset& ds, const PartitionAssignment& pa,
                                         double rho, double tau, std::uint64_t seed)
{
    if (rho < 0.0 || rho > 1.0)
        throw ParameterError("noise: rho must be in [0, 1]");
    if (tau < 0.0 || tau >= 1.0)
        throw ParameterError("noise: tau must be in [0, 1)");

    const std::size_t n_clients = pa.n_clients();
    NoiseAssignment na;
    na.noise_levels.assign(n_clients, 0.0);
    na.flipped.resize(n_clients);

    Rng rng = make_rng(derive_seed(seed, "noise.model"));
    std::bernoulli_distribution is_noisy(rho);
    std::uniform_real_distribution<double> level(tau, 1.0);
    std::uniform_int_distribution<int> any_label(0, ds.n_classes - 1);

    for (std::size_t k = 0; k < n_clients; ++k) {
        if (!is_noisy(rng))
            continue;
        const double mu = level(rng);
        na.noise_levels[k] = mu;
        const auto& rows = pa.client_indices[k];
        const std::size_t count =
            static_cast<std::size_t>(std::llround(mu * static_cast<double>(rows.size())));
        std::vector<std::size_t> local(rows.size());
        std::iota(local.begin(), local.end(), 0);
        std::shuffle(local.begin(), local.end(), rng);
        local.resize(count);
        std::sort(local.begin(), local.end());
        for (std::size_t pos : local) {
            const std::size_t row = rows[pos];
            ds.given_labels[row] = any_label(rng);
            na.flipped[k].push_back(row);
        }
    }
    return na;
}

} // namespace fedcorr
