#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedcorr/common.hpp"

namespace fedcorr {

// Ascending distances from a reference point to its k nearest neighbors,
// zero distances (duplicate points) excluded.
struct NeighborDistances {
    std::vector<double> distances;

    std::size_t k() const { return distances.size(); }
    double r_max() const { return distances.back(); }
};

// All strictly positive distances from points[ref] to the other points,
// sorted ascending.
inline std::vector<double> positive_distances_sorted(
    const std::vector<std::vector<double>>& points, std::size_t ref)
{
    std::vector<double> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == ref)
            continue;
        const double d = euclidean_distance(points[i], points[ref]);
        if (d > 0.0)
            out.push_back(d);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// k smallest positive distances from the reference point. Duplicates of the
// reference are skipped and backfilled by the next-nearest neighbors.
inline NeighborDistances knn_distances(const std::vector<std::vector<double>>& points,
                                       std::size_t ref, std::size_t k)
{
    if (k < 1)
        throw ParameterError("knn_distances: k must be >= 1");
    if (points.size() < k + 1)
        throw ParameterError("knn_distances: need at least k+1 points");
    if (ref >= points.size())
        throw ParameterError("knn_distances: reference index out of range");
    std::vector<double> d = positive_distances_sorted(points, ref);
    if (d.size() < k)
        throw DegenerateGeometryError("knn_distances: only " + std::to_string(d.size()) +
                                      " positive-distance neighbors for k=" + std::to_string(k));
    d.resize(k);
    return NeighborDistances{std::move(d)};
}

// Maximum-likelihood local-intrinsic-dimensionality estimate from neighbor
// distances: -(mean of log(r_i / r_max))^-1. When every neighbor sits at
// r_max the estimate degenerates; degenerate_cap is returned instead.
inline double lid_mle(const NeighborDistances& nd, double degenerate_cap)
{
    const std::size_t k = nd.k();
    if (k == 0)
        throw ParameterError("lid_mle: no neighbor distances");
    const double rmax = nd.r_max();
    if (!(rmax > 0.0))
        throw ParameterError("lid_mle: distances must be positive");
    double sum = 0.0;
    for (double r : nd.distances)
        sum += std::log(r / rmax);
    if (sum == 0.0)
        return degenerate_cap;
    return -static_cast<double>(k) / sum;
}

struct LidScore {
    double score = 0.0;
    std::size_t skipped = 0; // points with no positive-distance neighbor at all
};

inline double default_lid_cap(std::size_t dim)
{
    return 10.0 * static_cast<double>(dim);
}

// Mean LID estimate over a set of prediction vectors, each point measured
// against its k nearest neighbors within the set. Points with fewer than k
// positive-distance neighbors use what is available; points with none are
// skipped and counted. Fully collapsed sets score the cap.
inline LidScore lid_score(const std::vector<std::vector<double>>& predictions, std::size_t k)
{
    if (k < 1)
        throw ParameterError("lid_score: k must be >= 1");
    if (predictions.size() < k + 1)
        throw ParameterError("lid_score: need at least k+1 prediction vectors");
    const double cap = default_lid_cap(predictions.front().size());

    LidScore out;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        std::vector<double> d = positive_distances_sorted(predictions, i);
        if (d.empty()) {
            ++out.skipped;
            continue;
        }
        if (d.size() > k)
            d.resize(k);
        sum += std::min(lid_mle(NeighborDistances{std::move(d)}, cap), cap);
        ++used;
    }
    out.score = used == 0 ? cap : sum / static_cast<double>(used);
    return out;
}

} // namespace fedcorr
