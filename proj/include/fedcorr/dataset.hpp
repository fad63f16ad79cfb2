#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedcorr/common.hpp"

namespace fedcorr {

// A labeled feature-vector dataset. true_labels are immutable ground truth;
// given_labels are what training sees and may be corrupted / relabeled.
struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> true_labels;
    std::vector<int> given_labels;
    int n_classes = 0;

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }

    void validate() const
    {
        if (n_classes < 1)
            throw ParameterError("dataset: n_classes must be >= 1");
        if (features.empty())
            throw ParameterError("dataset: empty");
        if (true_labels.size() != features.size() || given_labels.size() != features.size())
            throw ParameterError("dataset: label/feature length mismatch");
        const std::size_t d = features.front().size();
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (features[i].size() != d)
                throw ParameterError("dataset: ragged feature row " + std::to_string(i));
            if (true_labels[i] < 0 || true_labels[i] >= n_classes ||
                given_labels[i] < 0 || given_labels[i] >= n_classes)
                throw ParameterError("dataset: label out of range at row " + std::to_string(i));
        }
    }
};

// Disjoint per-client index sets into a Dataset.
struct PartitionAssignment {
    std::vector<std::vector<std::size_t>> client_indices;

    std::size_t n_clients() const { return client_indices.size(); }
};

// N x M binary ownership matrix: entry (i, j) says client i holds class j.
struct IndicatorMatrix {
    std::size_t n_clients = 0;
    std::size_t n_classes = 0;
    std::vector<std::uint8_t> entries; // row-major

    std::uint8_t& at(std::size_t i, std::size_t j) { return entries[i * n_classes + j]; }
    std::uint8_t at(std::size_t i, std::size_t j) const { return entries[i * n_classes + j]; }

    std::size_t column_sum(std::size_t j) const
    {
        std::size_t s = 0;
        for (std::size_t i = 0; i < n_clients; ++i)
            s += at(i, j);
        return s;
    }
    std::size_t row_sum(std::size_t i) const
    {
        std::size_t s = 0;
        for (std::size_t j = 0; j < n_classes; ++j)
            s += at(i, j);
        return s;
    }
};

// Ground-truth noise bookkeeping: per-client noise level and the dataset rows
// whose given label was resampled.
struct NoiseAssignment {
    std::vector<double> noise_levels;               // mu_k per client
    std::vector<std::vector<std::size_t>> flipped;  // dataset rows, per client
};

} // namespace fedcorr
