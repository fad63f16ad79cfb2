#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fedcorr/common.hpp"

namespace fedcorr {

// Converged two-component 1-D Gaussian mixture.
struct GmmFit {
    std::array<double, 2> weights{};
    std::array<double, 2> means{};
    std::array<double, 2> variances{};
    double log_likelihood = 0.0;
    int n_iters = 0;
    std::vector<double> ll_history; // log-likelihood after each EM iteration

    std::size_t high_component() const { return means[1] >= means[0] ? 1 : 0; }
};

namespace detail {

inline double percentile(std::vector<double> sorted, double q)
{
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline double log_normal_pdf(double x, double mean, double var)
{
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double d = x - mean;
    return -0.5 * (std::log(two_pi * var) + d * d / var);
}

inline double logsumexp2(double a, double b)
{
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace detail

// Posterior responsibilities of the two components for one value.
inline std::array<double, 2> gmm_posterior(const GmmFit& fit, double x)
{
    const double la = std::log(fit.weights[0]) + detail::log_normal_pdf(x, fit.means[0], fit.variances[0]);
    const double lb = std::log(fit.weights[1]) + detail::log_normal_pdf(x, fit.means[1], fit.variances[1]);
    const double lse = detail::logsumexp2(la, lb);
    return {std::exp(la - lse), std::exp(lb - lse)};
}

// EM fit of a two-component mixture. Initialization is deterministic (means
// at the 10th/90th percentiles, equal weights, variances at the sample
// variance), so the seed parameter is reserved and currently unused.
// Returns nullopt when the values carry no spread to separate.
inline std::optional<GmmFit> fit_gmm2(std::span<const double> values, int max_iters = 500,
                                      double tol = 1e-6, [[maybe_unused]] std::uint64_t seed = 0)
{
    const std::size_t n = values.size();
    if (n < 2)
        return std::nullopt;
    const double vmin = *std::min_element(values.begin(), values.end());
    const double vmax = *std::max_element(values.begin(), values.end());
    if (vmin == vmax)
        return std::nullopt;

    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= static_cast<double>(n);
    double sample_var = 0.0;
    for (double v : values)
        sample_var += (v - mean) * (v - mean);
    sample_var /= static_cast<double>(n);
    const double var_floor = 1e-6 * (sample_var + 1e-12);

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    GmmFit fit;
    fit.weights = {0.5, 0.5};
    fit.means = {detail::percentile(sorted, 0.1), detail::percentile(sorted, 0.9)};
    if (fit.means[0] == fit.means[1])
        fit.means = {vmin, vmax};
    fit.variances = {std::max(sample_var, var_floor), std::max(sample_var, var_floor)};

    std::vector<double> resp(n); // responsibility of component 1
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        // E-step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double la = std::log(fit.weights[0]) +
                              detail::log_normal_pdf(values[i], fit.means[0], fit.variances[0]);
            const double lb = std::log(fit.weights[1]) +
                              detail::log_normal_pdf(values[i], fit.means[1], fit.variances[1]);
            const double lse = detail::logsumexp2(la, lb);
            resp[i] = std::exp(lb - lse);
            ll += lse;
        }
        fit.ll_history.push_back(ll);
        fit.log_likelihood = ll;
        fit.n_iters = it + 1;
        if (std::abs(ll - prev_ll) < tol)
            break;
        prev_ll = ll;

        // M-step
        double n1 = 0.0;
        for (double r : resp)
            n1 += r;
        const double n0 = static_cast<double>(n) - n1;
        const double eps = 1e-12;
        fit.weights[1] = std::clamp(n1 / static_cast<double>(n), eps, 1.0 - eps);
        fit.weights[0] = 1.0 - fit.weights[1];
        if (n0 > eps) {
            double m0 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                m0 += (1.0 - resp[i]) * values[i];
            fit.means[0] = m0 / n0;
            double v0 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                v0 += (1.0 - resp[i]) * (values[i] - fit.means[0]) * (values[i] - fit.means[0]);
            fit.variances[0] = std::max(v0 / n0, var_floor);
        }
        if (n1 > eps) {
            double m1 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                m1 += resp[i] * values[i];
            fit.means[1] = m1 / n1;
            double v1 = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                v1 += resp[i] * (values[i] - fit.means[1]) * (values[i] - fit.means[1]);
            fit.variances[1] = std::max(v1 / n1, var_floor);
        }
    }
    return fit;
}

struct GmmSplit {
    std::vector<std::size_t> low;  // clean side
    std::vector<std::size_t> high; // noisy side (larger-mean component)
};

// Assigns each value to the component of higher posterior responsibility.
// The larger-mean component is "high"; ties and degenerate fits go "low".
inline GmmSplit split_by_gmm(std::span<const double> values, const std::optional<GmmFit>& fit)
{
    GmmSplit split;
    if (!fit) {
        split.low.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            split.low[i] = i;
        return split;
    }
    const std::size_t hi = fit->high_component();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto post = gmm_posterior(*fit, values[i]);
        if (post[hi] > 0.5)
            split.high.push_back(i);
        else
            split.low.push_back(i);
    }
    return split;
}

} // namespace fedcorr
