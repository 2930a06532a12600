#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "focusmr/delta.hpp"
#include "focusmr/errors.hpp"
#include "focusmr/lambda.hpp"
#include "focusmr/stats.hpp"

namespace focusmr {

struct IntervalResult {
    double lower = 0.0;
    double upper = 0.0;
    std::string method;
    double alpha = 0.0;
    double gamma = std::numeric_limits<double>::quiet_NaN();  // focused only
    double alpha1 = std::numeric_limits<double>::quiet_NaN(); // split methods
    double alpha2 = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> b_star; // focused only: the bias the interval was tuned at
    bool degraded = false;      // focused fell back to the two-step envelope

    double length() const { return upper - lower; }
};

namespace detail {

inline IntervalResult normal_interval(double theta, double variance, double alpha,
                                      const std::string& method) {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double half = z * std::sqrt(variance);
    IntervalResult r;
    r.lower = theta - half;
    r.upper = theta + half;
    r.method = method;
    r.alpha = alpha;
    return r;
}

// Correlated noise for the law simulation; one matrix is shared by every
// bias value a method evaluates, so the map from bias to draws is
// deterministic and interval comparisons across methods see identical noise.
inline Eigen::MatrixXd build_kappa(const DeltaMatrix& delta, std::size_t M, std::uint64_t seed) {
    if (M < 1000)
        throw ValidationError("law simulation needs at least 1000 draws");
    const Eigen::MatrixXd factor = covariance_factor(delta);
    return standard_normal_matrix(M, delta.dim(), seed) * factor.transpose();
}

// Candidate bias values: a per-coordinate grid over the bounding box of the
// confidence ellipsoid (b - b_hat)' DeltaB^-1 (b - b_hat) <= chi2_K(1-alpha1),
// keeping only points inside the ellipsoid. For K = 1 the box is the
// ellipsoid, gridded with grid_size points; for K > 1 the per-coordinate
// count is the largest odd m with m^K <= grid_size (at least 3) so the
// total stays near the K = 1 budget and b_hat itself is always a grid point.
inline std::vector<std::vector<double>> bias_grid(const DeltaMatrix& delta,
                                                  const std::vector<double>& b_hat,
                                                  double alpha1, std::size_t grid_size) {
    const std::size_t K = delta.K;
    if (b_hat.size() != K)
        throw std::invalid_argument("bias_grid: bias vector length must equal K");
    if (grid_size < 1)
        throw std::invalid_argument("bias_grid: grid_size must be >= 1");

    const double q = chi2_quantile(1.0 - alpha1, static_cast<double>(K));

    std::size_t m = grid_size;
    if (K > 1) {
        m = 3;
        for (std::size_t cand = 3;; cand += 2) {
            double total = 1.0;
            for (std::size_t k = 0; k < K; ++k) total *= static_cast<double>(cand);
            if (total <= static_cast<double>(grid_size))
                m = cand;
            else
                break;
        }
    }

    std::vector<double> radius(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double v = delta.delta_b(k);
        if (!(v > 0.0))
            throw EstimationError("bias grid requires positive bias variances");
        radius[k] = std::sqrt(q * v);
    }

    Eigen::LDLT<Eigen::MatrixXd> bias_block;
    if (K > 1)
        bias_block.compute(delta.m.block(K + 1, K + 1, K, K));

    std::vector<std::vector<double>> grid;
    std::vector<std::size_t> ix(K, 0);
    for (;;) {
        std::vector<double> pt(K);
        for (std::size_t k = 0; k < K; ++k) {
            pt[k] = (m == 1) ? b_hat[k]
                             : b_hat[k] - radius[k] +
                                   2.0 * radius[k] * static_cast<double>(ix[k]) /
                                       static_cast<double>(m - 1);
        }
        bool keep = true;
        if (K > 1) {
            Eigen::VectorXd d(K);
            for (std::size_t k = 0; k < K; ++k) d(k) = pt[k] - b_hat[k];
            keep = d.dot(bias_block.solve(d)) <= q * (1.0 + 1e-12);
        }
        if (keep) grid.push_back(std::move(pt));

        // advance the multi-index, last coordinate fastest
        std::size_t k = K;
        while (k > 0) {
            --k;
            if (++ix[k] < m) break;
            ix[k] = 0;
            if (k == 0) return grid;
        }
    }
}

// Sorted law draws at every grid point, all on the shared noise.
inline std::vector<std::vector<double>> sorted_lambda_grid(
    const DeltaMatrix& delta, const Eigen::MatrixXd& kappa,
    const std::vector<std::vector<double>>& grid, std::uint64_t seed) {
    std::vector<std::vector<double>> out;
    out.reserve(grid.size());
    for (const auto& b : grid) {
        auto ld = lambda_at(delta, kappa, b, seed, true);
        std::sort(ld.draws.begin(), ld.draws.end());
        out.push_back(std::move(ld.draws));
    }
    return out;
}

// Fraction of a sorted sample inside [lo, hi].
inline double fraction_within(const std::vector<double>& sorted, double lo, double hi) {
    const auto a = std::lower_bound(sorted.begin(), sorted.end(), lo);
    const auto b = std::upper_bound(sorted.begin(), sorted.end(), hi);
    return static_cast<double>(b - a) / static_cast<double>(sorted.size());
}

} // namespace detail

// Plain normal interval around the selected estimate with its own variance.
inline IntervalResult interval_naive(double theta_hat, double variance, double alpha) {
    return detail::normal_interval(theta_hat, variance, alpha, "naive");
}

// Normal interval around the core-only estimate.
inline IntervalResult interval_core(double theta_core, double variance_core, double alpha) {
    return detail::normal_interval(theta_core, variance_core, alpha, "core");
}

// Equal-tailed interval from law draws taken at the estimated bias itself:
// [theta - q_{1-a/2}, theta - q_{a/2}] of the draws.
inline IntervalResult interval_onestep(double theta_hat, const DeltaMatrix& delta,
                                       const std::vector<double>& b_hat, double alpha,
                                       std::size_t M, std::uint64_t seed) {
    auto ld = simulate_lambda(delta, b_hat, M, seed);
    std::sort(ld.draws.begin(), ld.draws.end());
    IntervalResult r;
    r.method = "one_step";
    r.alpha = alpha;
    r.lower = theta_hat - quantile_sorted(ld.draws, 1.0 - alpha / 2.0);
    r.upper = theta_hat - quantile_sorted(ld.draws, alpha / 2.0);
    return r;
}

// Worst-case construction: spend alpha1 on a confidence region for the bias,
// take the equal-tailed (1-alpha2) interval of the law draws at every grid
// point of that region, and envelope them. alpha1 defaults to alpha/2.
inline IntervalResult interval_twostep(double theta_hat, const DeltaMatrix& delta,
                                       const std::vector<double>& b_hat, double alpha,
                                       std::size_t M, std::uint64_t seed,
                                       std::size_t grid_size = 41,
                                       std::optional<double> alpha1_override = std::nullopt) {
    const double alpha1 = alpha1_override.value_or(alpha / 2.0);
    const double alpha2 = alpha - alpha1;
    if (!(alpha1 > 0.0) || !(alpha2 > 0.0))
        throw std::invalid_argument("interval_twostep: alpha split must be interior");

    const Eigen::MatrixXd kappa = detail::build_kappa(delta, M, seed);
    const auto grid = detail::bias_grid(delta, b_hat, alpha1, grid_size);
    const auto sorted = detail::sorted_lambda_grid(delta, kappa, grid, seed);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : sorted) {
        lo = std::min(lo, quantile_sorted(s, alpha2 / 2.0));
        hi = std::max(hi, quantile_sorted(s, 1.0 - alpha2 / 2.0));
    }

    IntervalResult r;
    r.method = "two_step";
    r.alpha = alpha;
    r.alpha1 = alpha1;
    r.alpha2 = alpha2;
    r.lower = theta_hat - hi;
    r.upper = theta_hat - lo;
    return r;
}

// Searches over alpha splits, bias values in the confidence region, and tail
// splits for the shortest interval that still covers the law at every bias
// value in the region at rate 1 - alpha2 - gamma. Falls back to the default
// two-step envelope (flagged degraded) when no candidate passes.
inline IntervalResult interval_focused(double theta_hat, const DeltaMatrix& delta,
                                       const std::vector<double>& b_hat, double alpha,
                                       double gamma, std::size_t M, std::uint64_t seed,
                                       std::size_t grid_size = 41,
                                       std::vector<double> alpha1_grid = {}) {
    if (alpha1_grid.empty())
        for (int i = 1; i <= 9; ++i) alpha1_grid.push_back(alpha * 0.1 * i);

    const Eigen::MatrixXd kappa = detail::build_kappa(delta, M, seed);

    IntervalResult best;
    best.method = "focused";
    best.alpha = alpha;
    best.gamma = gamma;
    double best_len = std::numeric_limits<double>::infinity();
    bool found = false;

    const int n_splits = 21; // tail splits s = t * alpha2 / 20, t = 0..20

    for (double alpha1 : alpha1_grid) {
        const double alpha2 = alpha - alpha1;
        if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) continue;
        const double target = 1.0 - alpha2 - gamma;

        const auto grid = detail::bias_grid(delta, b_hat, alpha1, grid_size);
        const auto sorted = detail::sorted_lambda_grid(delta, kappa, grid, seed);

        // best passing candidate for this alpha1 over (grid point, tail split)
        double a1_len = std::numeric_limits<double>::infinity();
        double a1_lo = 0.0, a1_hi = 0.0;
        std::size_t a1_b = 0;
        bool a1_found = false;

        for (std::size_t g = 0; g < grid.size(); ++g) {
            double g_len = std::numeric_limits<double>::infinity();
            double g_lo = 0.0, g_hi = 0.0;
            bool g_found = false;
            for (int t = 0; t < n_splits; ++t) {
                const double s = alpha2 * static_cast<double>(t) / (n_splits - 1);
                const double lo = quantile_sorted(sorted[g], s);
                const double hi = quantile_sorted(sorted[g], s + 1.0 - alpha2);
                if (hi - lo >= g_len) continue; // cannot improve; skip the scan
                bool pass = true;
                for (std::size_t h = 0; h < sorted.size(); ++h) {
                    if (detail::fraction_within(sorted[h], lo, hi) < target) {
                        pass = false;
                        break;
                    }
                }
                if (pass) {
                    g_len = hi - lo;
                    g_lo = lo;
                    g_hi = hi;
                    g_found = true;
                }
            }
            if (g_found && g_len < a1_len) {
                a1_len = g_len;
                a1_lo = g_lo;
                a1_hi = g_hi;
                a1_b = g;
                a1_found = true;
            }
        }

        if (a1_found && a1_len < best_len) {
            best_len = a1_len;
            best.lower = theta_hat - a1_hi;
            best.upper = theta_hat - a1_lo;
            best.alpha1 = alpha1;
            best.alpha2 = alpha2;
            best.b_star = grid[a1_b];
            found = true;
        }
    }

    if (!found) {
        IntervalResult fb = interval_twostep(theta_hat, delta, b_hat, alpha, M, seed, grid_size);
        fb.method = "focused";
        fb.gamma = gamma;
        fb.degraded = true;
        return fb;
    }
    return best;
}

} // namespace focusmr
