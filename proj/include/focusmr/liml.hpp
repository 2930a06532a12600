#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "focusmr/errors.hpp"
#include "focusmr/summary_data.hpp"

namespace focusmr {

// Limited-information objective over an instrument set:
//   Q(th) = sum_j (bY_j - bX_j th)^2 / (sY_j^2 + sX_j^2 th^2)
// Summed left to right over the sorted set so results are bit-reproducible.
inline double objective(const Dataset& ds, const InstrumentSet& set, double theta) {
    double q = 0.0;
    for (std::size_t j : set.indices) {
        const auto& v = ds.variants[j];
        const double r = v.beta_y - v.beta_x * theta;
        const double om = v.se_y * v.se_y + v.se_x * v.se_x * theta * theta;
        q += r * r / om;
    }
    return q;
}

// Score at theta: sum_j psi_j with
//   psi_j = Om_j^-2 (bY_j - th bX_j)(bX_j sY_j^2 + th bY_j sX_j^2),
// which equals -dQ/dth / 2 exactly.
inline double score(const Dataset& ds, const InstrumentSet& set, double theta) {
    double s = 0.0;
    for (std::size_t j : set.indices) {
        const auto& v = ds.variants[j];
        const double om = v.se_y * v.se_y + v.se_x * v.se_x * theta * theta;
        const double r = v.beta_y - theta * v.beta_x;
        s += r * (v.beta_x * v.se_y * v.se_y + theta * v.beta_y * v.se_x * v.se_x) / (om * om);
    }
    return s;
}

// Plug-in variance pieces for one index set, all weighted by
// Om_j = sY_j^2 + theta_ref^2 sX_j^2 evaluated at a fixed reference theta:
//   eta        = sum Om^-1 (bX^2 - sX^2)   (noise-corrected signal strength)
//   sigma_term = sum Om^-2 sX^2 sY^2
//   xi         = 2 theta_ref^2 sum Om^-2 sX^4
struct VarianceComponents {
    double eta = 0.0;
    double sigma_term = 0.0;
    double xi = 0.0;
    std::vector<double> omega; // per-variant Om_j, aligned with the index set
    double theta_ref = 0.0;
};

inline VarianceComponents components(const Dataset& ds, const std::vector<std::size_t>& indices,
                                     double theta_ref) {
    VarianceComponents c;
    c.theta_ref = theta_ref;
    c.omega.reserve(indices.size());
    for (std::size_t j : indices) {
        const auto& v = ds.variants[j];
        const double om = v.se_y * v.se_y + theta_ref * theta_ref * v.se_x * v.se_x;
        c.omega.push_back(om);
        c.eta += (v.beta_x * v.beta_x - v.se_x * v.se_x) / om;
        c.sigma_term += v.se_x * v.se_x * v.se_y * v.se_y / (om * om);
        c.xi += 2.0 * theta_ref * theta_ref * std::pow(v.se_x, 4) / (om * om);
    }
    return c;
}

inline VarianceComponents components(const Dataset& ds, const InstrumentSet& set,
                                     double theta_ref) {
    return components(ds, set.indices, theta_ref);
}

// Asymptotic variance of a fit from its components: (eta + sigma) / eta^2,
// where eta and sigma combine the core part with the optional additional
// part. Both parts must share the same reference theta.
inline double variance_of_fit(const VarianceComponents& core,
                              const std::optional<VarianceComponents>& add = std::nullopt) {
    double eta = core.eta;
    double sig = core.sigma_term;
    if (add) {
        if (add->theta_ref != core.theta_ref)
            throw std::invalid_argument("variance_of_fit: component theta_ref mismatch");
        eta += add->eta;
        sig += add->sigma_term;
    }
    if (!(eta > 0.0))
        throw EstimationError("core instruments too weak for variance estimation (eta <= 0)");
    return (eta + sig) / (eta * eta);
}

struct LimlFit {
    double theta_hat = 0.0;
    double objective_at_min = 0.0;
    double score_at_min = 0.0;
    InstrumentSet set;
    // Filled by fit_core / fit_candidate; raw minimize() leaves it NaN because
    // the variance depends on a reference theta the optimizer does not know.
    double variance = std::numeric_limits<double>::quiet_NaN();
};

// Grid-then-golden-section minimizer of the objective. The search bracket is
// +-B with B = 10 * max |bY/bX| over variants whose exposure signal clears
// its own standard error; B = 100 when no variant does.
inline LimlFit minimize(const Dataset& ds, const InstrumentSet& set) {
    if (set.indices.empty())
        throw EstimationError("cannot fit an empty instrument set");

    bool any_signal = false;
    double max_ratio = 0.0;
    bool any_relevant = false;
    for (std::size_t j : set.indices) {
        const auto& v = ds.variants[j];
        if (v.beta_x != 0.0) any_signal = true;
        if (std::fabs(v.beta_x) / v.se_x > 1.0) {
            any_relevant = true;
            max_ratio = std::max(max_ratio, std::fabs(v.beta_y / v.beta_x));
        }
    }
    if (!any_signal)
        throw EstimationError("no relevant instruments");

    double B = any_relevant ? 10.0 * max_ratio : 100.0;
    if (!(B > 0.0)) B = 1.0; // all relevant outcome associations exactly zero

    // 512-point scan to locate the basin, then golden-section refinement.
    const int grid_n = 512;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_n; ++i) {
        const double th = -B + 2.0 * B * static_cast<double>(i) / (grid_n - 1);
        const double q = objective(ds, set, th);
        if (q < best_val) {
            best_val = q;
            best = i;
        }
    }
    const double step = 2.0 * B / (grid_n - 1);
    double a = -B + step * static_cast<double>(best > 0 ? best - 1 : 0);
    double b = -B + step * static_cast<double>(best < grid_n - 1 ? best + 1 : grid_n - 1);

    const double gr = 0.6180339887498949; // (sqrt(5)-1)/2
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = objective(ds, set, c);
    double fd = objective(ds, set, d);
    while (b - a > 1e-10) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = objective(ds, set, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = objective(ds, set, d);
        }
    }

    LimlFit fit;
    fit.theta_hat = 0.5 * (a + b);
    fit.objective_at_min = objective(ds, set, fit.theta_hat);
    fit.score_at_min = score(ds, set, fit.theta_hat);
    fit.set = set;
    return fit;
}

// Core-set fit; its variance references its own theta.
inline LimlFit fit_core(const Dataset& ds) {
    LimlFit fit = minimize(ds, core_set(ds));
    const auto comp = components(ds, fit.set, fit.theta_hat);
    fit.variance = variance_of_fit(comp);
    return fit;
}

// Candidate (core-union) fit; every weight references the core theta.
inline LimlFit fit_candidate(const Dataset& ds, const InstrumentSet& set, double theta_core) {
    LimlFit fit = minimize(ds, set);
    const auto comp_core = components(ds, ds.core_indices(), theta_core);
    const auto comp_add = components(ds, additional_part(ds, set), theta_core);
    fit.variance = variance_of_fit(comp_core, comp_add);
    return fit;
}

} // namespace focusmr
