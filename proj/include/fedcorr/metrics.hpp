#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedcorr/dataset.hpp"

namespace fedcorr {

// Fraction of each client's samples whose given label disagrees with the
// true label.
inline std::vector<double> ground_truth_noise(const Dataset& ds, const PartitionAssignment& pa)
{
    std::vector<double> out(pa.n_clients(), 0.0);
    for (std::size_t k = 0; k < pa.n_clients(); ++k) {
        const auto& rows = pa.client_indices[k];
        if (rows.empty())
            throw ParameterError("ground_truth_noise: empty client " + std::to_string(k));
        std::size_t wrong = 0;
        for (std::size_t row : rows)
            wrong += ds.given_labels[row] != ds.true_labels[row];
        out[k] = static_cast<double>(wrong) / static_cast<double>(rows.size());
    }
    return out;
}

// Same quantity against an explicit label snapshot instead of the live
// dataset, for checkpoint comparisons.
inline std::vector<double> ground_truth_noise_snapshot(const Dataset& ds,
                                                       const PartitionAssignment& pa,
                                                       std::span<const int> given_snapshot)
{
    std::vector<double> out(pa.n_clients(), 0.0);
    for (std::size_t k = 0; k < pa.n_clients(); ++k) {
        const auto& rows = pa.client_indices[k];
        std::size_t wrong = 0;
        for (std::size_t row : rows)
            wrong += given_snapshot[row] != ds.true_labels[row];
        out[k] = rows.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(rows.size());
    }
    return out;
}

// Incremental counterpart: adjusts one client's wrong-label count when a
// single row's given label changes.
inline std::size_t update_wrong_count(std::size_t wrong, int true_label, int old_given, int new_given)
{
    wrong -= old_given != true_label;
    wrong += new_given != true_label;
    return wrong;
}

inline double noise_estimation_error(std::span<const double> true_levels,
                                     std::span<const double> estimated_levels)
{
    if (true_levels.size() != estimated_levels.size())
        throw ParameterError("noise_estimation_error: length mismatch");
    if (true_levels.empty())
        throw ParameterError("noise_estimation_error: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < true_levels.size(); ++i)
        s += std::abs(true_levels[i] - estimated_levels[i]);
    return s / static_cast<double>(true_levels.size());
}

struct ClientConfusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 1.0;
    double recall = 1.0;
    bool precision_defined = true;
    bool recall_defined = true;
};

struct RelabelReport {
    std::vector<ClientConfusion> per_client;
    ClientConfusion pooled;
};

namespace detail {

inline void finish_confusion(ClientConfusion& c)
{
    // Empty detected/flipped sets give an undefined ratio; reported as 1
    // with the flag cleared so pooled statistics stay comparable.
    c.precision_defined = (c.tp + c.fp) > 0;
    c.recall_defined = (c.tp + c.fn) > 0;
    c.precision = c.precision_defined
                      ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                      : 1.0;
    c.recall = c.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                                : 1.0;
}

} // namespace detail

// Sample-level identification quality: flipped ground truth vs detected
// noisy rows, per client and pooled. Index sets hold dataset rows.
inline RelabelReport sample_identification_confusion(
    const PartitionAssignment& pa,
    const std::vector<std::vector<std::size_t>>& flipped_truth,
    const std::vector<std::vector<std::size_t>>& detected_noisy)
{
    if (flipped_truth.size() != pa.n_clients() || detected_noisy.size() != pa.n_clients())
        throw ParameterError("sample_identification_confusion: per-client set count mismatch");
    RelabelReport report;
    report.per_client.resize(pa.n_clients());
    for (std::size_t k = 0; k < pa.n_clients(); ++k) {
        const auto& rows = pa.client_indices[k];
        // membership via sorted lookup keeps this O(n log n)
        std::vector<std::size_t> f = flipped_truth[k], d = detected_noisy[k];
        std::sort(f.begin(), f.end());
        std::sort(d.begin(), d.end());
        auto contains = [](const std::vector<std::size_t>& v, std::size_t x) {
            return std::binary_search(v.begin(), v.end(), x);
        };
        auto& c = report.per_client[k];
        for (std::size_t row : rows) {
            const bool fl = contains(f, row);
            const bool de = contains(d, row);
            c.tp += fl && de;
            c.fp += !fl && de;
            c.fn += fl && !de;
            c.tn += !fl && !de;
        }
        detail::finish_confusion(c);
        report.pooled.tp += c.tp;
        report.pooled.fp += c.fp;
        report.pooled.tn += c.tn;
        report.pooled.fn += c.fn;
    }
    detail::finish_confusion(report.pooled);
    return report;
}

// M x M counts, rows = true class, columns = observed label.
inline std::vector<std::vector<long long>> confusion_matrix(const Dataset& ds,
                                                            std::span<const std::size_t> indices,
                                                            std::span<const int> given_snapshot)
{
    const std::size_t m = static_cast<std::size_t>(ds.n_classes);
    std::vector<std::vector<long long>> counts(m, std::vector<long long>(m, 0));
    for (std::size_t row : indices)
        ++counts[static_cast<std::size_t>(ds.true_labels[row])]
                [static_cast<std::size_t>(given_snapshot[row])];
    return counts;
}

} // namespace fedcorr
