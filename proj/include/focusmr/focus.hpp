#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "focusmr/errors.hpp"
#include "focusmr/liml.hpp"
#include "focusmr/stats.hpp"
#include "focusmr/summary_data.hpp"

namespace focusmr {

// Estimated bias of a candidate (core-union) estimator relative to the core
// one, with its variance. All weights reference the core theta.
struct BiasEstimate {
    double b_hat = 0.0;   // bias on the theta scale
    double b_s_hat = 0.0; // unnormalized weighted bias over the additional set
    double var_b = 0.0;   // variance of b_hat, > 0
    InstrumentSet set;    // the candidate set this belongs to
};

// b_s = sum_{j in add} Om_j^-1 bX_j bY_j - theta_core * eta_add
// b   = b_s / (eta_core + eta_add)
// var = (eta_add + sigma_add + xi_add + eta_add^2 (eta_core + sigma_core) / eta_core^2)
//       / (eta_core + eta_add)^2
inline BiasEstimate estimate_bias(const Dataset& ds, const InstrumentSet& candidate,
                                  double theta_core, const VarianceComponents& comp_core,
                                  const VarianceComponents& comp_add) {
    if (!(comp_core.eta > 0.0))
        throw EstimationError("weak-set AMSE undefined (core eta <= 0)");
    const double eta_sum = comp_core.eta + comp_add.eta;
    if (!(eta_sum > 0.0))
        throw EstimationError("weak-set AMSE undefined (combined eta <= 0)");

    const auto add = additional_part(ds, candidate);
    double cross = 0.0;
    for (std::size_t i = 0; i < add.size(); ++i) {
        const auto& v = ds.variants[add[i]];
        cross += v.beta_x * v.beta_y / comp_add.omega[i];
    }

    BiasEstimate be;
    be.set = candidate;
    be.b_s_hat = cross - theta_core * comp_add.eta;
    be.b_hat = be.b_s_hat / eta_sum;
    be.var_b = (comp_add.eta + comp_add.sigma_term + comp_add.xi +
                comp_add.eta * comp_add.eta * (comp_core.eta + comp_core.sigma_term) /
                    (comp_core.eta * comp_core.eta)) /
               (eta_sum * eta_sum);
    if (!(be.var_b > 0.0))
        throw EstimationError("weak-set AMSE undefined (bias variance <= 0)");
    return be;
}

// Estimated excess risk of using the candidate set instead of the core set.
// Negative or zero favors the candidate.
inline double w_statistic(double b_hat, double var_b, double delta_f, double delta_c) {
    return std::max(b_hat * b_hat - var_b, 0.0) + delta_f - delta_c;
}

// Result of risk-based selection among candidate sets.
struct SelectionResult {
    std::vector<InstrumentSet> candidates;
    std::vector<double> w_stats;       // NaN where a candidate was excluded
    std::vector<LimlFit> fits;         // candidate fits; excluded slots hold NaN thetas
    std::vector<BiasEstimate> biases;  // excluded slots hold NaN entries
    std::vector<bool> usable;          // candidate survived its preconditions
    LimlFit core_fit;
    static constexpr std::size_t core_chosen = static_cast<std::size_t>(-1);
    std::size_t chosen = core_chosen;  // candidate index, or core_chosen
    double theta_hat = 0.0;
    double variance = 0.0;
    bool degraded = false;             // every candidate failed; fell back to core
    std::vector<std::string> warnings;

    bool core_selected() const { return chosen == core_chosen; }
};

// Fits the core set and every candidate, estimates each candidate's bias and
// W statistic, and picks the candidate with the smallest W when that W is
// <= 0 (ties to the smallest index); otherwise keeps the core fit.
inline SelectionResult focused_estimate(const Dataset& ds,
                                        const std::vector<InstrumentSet>& candidates) {
    check_dataset(ds);
    if (candidates.empty())
        throw ValidationError("selection requires at least one candidate set");
    if (ds.core_count() == ds.total_count())
        throw ValidationError("selection requires at least one non-core variant");
    const auto core_idx = ds.core_indices();
    for (const auto& c : candidates) {
        if (c.kind != InstrumentSet::Kind::CoreUnion)
            throw ValidationError("candidates must be core-union sets");
        if (!std::includes(c.indices.begin(), c.indices.end(), core_idx.begin(), core_idx.end()))
            throw ValidationError("every candidate must contain the core set");
        if (c.indices.size() <= core_idx.size())
            throw ValidationError("every candidate must strictly extend the core set");
    }

    SelectionResult res;
    res.candidates = candidates;
    res.core_fit = fit_core(ds);
    const double theta_c = res.core_fit.theta_hat;
    const double delta_c = res.core_fit.variance;
    const auto comp_core = components(ds, core_idx, theta_c);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.w_stats.assign(candidates.size(), nan);
    res.fits.resize(candidates.size());
    res.biases.resize(candidates.size());
    res.usable.assign(candidates.size(), false);

    for (std::size_t k = 0; k < candidates.size(); ++k) {
        try {
            const auto add = additional_part(ds, candidates[k]);
            const auto comp_add = components(ds, add, theta_c);
            if (!(comp_core.eta + comp_add.eta > 0.0))
                throw EstimationError("degenerate candidate set (combined eta <= 0)");
            LimlFit fit = minimize(ds, candidates[k]);
            fit.variance = variance_of_fit(comp_core, comp_add);
            const auto bias = estimate_bias(ds, candidates[k], theta_c, comp_core, comp_add);
            res.fits[k] = fit;
            res.biases[k] = bias;
            res.w_stats[k] = w_statistic(bias.b_hat, bias.var_b, fit.variance, delta_c);
            res.usable[k] = true;
        } catch (const EstimationError& e) {
            res.fits[k].theta_hat = nan;
            res.warnings.push_back("candidate " + std::to_string(k + 1) +
                                   " excluded: " + e.what());
        }
    }

    std::size_t best = SelectionResult::core_chosen;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!res.usable[k]) continue;
        if (best == SelectionResult::core_chosen || res.w_stats[k] < res.w_stats[best]) best = k;
    }

    if (best == SelectionResult::core_chosen) {
        // nothing to select over; keep the core fit and flag it
        res.degraded = true;
        res.chosen = SelectionResult::core_chosen;
        res.theta_hat = res.core_fit.theta_hat;
        res.variance = res.core_fit.variance;
        return res;
    }

    if (res.w_stats[best] <= 0.0) {
        res.chosen = best;
        res.theta_hat = res.fits[best].theta_hat;
        res.variance = res.fits[best].variance;
    } else {
        res.chosen = SelectionResult::core_chosen;
        res.theta_hat = res.core_fit.theta_hat;
        res.variance = res.core_fit.variance;
    }
    return res;
}

// 1-D k-means over the Wald ratios bY/bX of the additional variants, then
// every nonempty union of clusters becomes a candidate (2^k - 1 sets, fewer
// if unions coincide). Deterministic: centroids start at the (2i-1)/(2k)
// quantiles and points tie to the lower cluster index.
inline std::vector<InstrumentSet> kmeans_candidates(const Dataset& ds, std::size_t k,
                                                    std::vector<std::string>* warnings = nullptr) {
    check_dataset(ds);
    if (k == 0)
        throw ValidationError("kmeans requires k >= 1");

    std::vector<std::size_t> idx;
    std::vector<double> ratio;
    for (std::size_t j = 0; j < ds.variants.size(); ++j) {
        const auto& v = ds.variants[j];
        if (v.is_core) continue;
        if (v.beta_x == 0.0) {
            if (warnings)
                warnings->push_back("variant '" + v.id +
                                    "' dropped from clustering: zero exposure association");
            continue;
        }
        idx.push_back(j);
        ratio.push_back(v.beta_y / v.beta_x);
    }
    if (idx.empty())
        throw EstimationError("no clusterable additional variants");
    if (k > idx.size()) k = idx.size();

    std::vector<double> sorted = ratio;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> centroid(k);
    for (std::size_t i = 0; i < k; ++i)
        centroid[i] = quantile_sorted(sorted, (2.0 * static_cast<double>(i) + 1.0) /
                                                  (2.0 * static_cast<double>(k)));

    std::vector<std::size_t> assign(ratio.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < ratio.size(); ++i) {
            std::size_t bestc = 0;
            double bestd = std::fabs(ratio[i] - centroid[0]);
            for (std::size_t cidx = 1; cidx < k; ++cidx) {
                const double d = std::fabs(ratio[i] - centroid[cidx]);
                if (d < bestd) {
                    bestd = d;
                    bestc = cidx;
                }
            }
            if (assign[i] != bestc) {
                assign[i] = bestc;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        for (std::size_t cidx = 0; cidx < k; ++cidx) {
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < ratio.size(); ++i) {
                if (assign[i] == cidx) {
                    s += ratio[i];
                    ++n;
                }
            }
            if (n > 0) centroid[cidx] = s / static_cast<double>(n); // empty keeps its centroid
        }
    }

    std::vector<std::vector<std::size_t>> cluster(k);
    for (std::size_t i = 0; i < ratio.size(); ++i)
        cluster[assign[i]].push_back(idx[i]);

    std::vector<InstrumentSet> out;
    const std::size_t n_masks = (std::size_t{1} << k);
    for (std::size_t mask = 1; mask < n_masks; ++mask) {
        std::vector<std::size_t> extra;
        for (std::size_t cidx = 0; cidx < k; ++cidx)
            if (mask & (std::size_t{1} << cidx))
                extra.insert(extra.end(), cluster[cidx].begin(), cluster[cidx].end());
        if (extra.empty()) continue;
        InstrumentSet s = union_set(ds, extra, out.size());
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i].candidate_index = i;
    return out;
}

// The single everything-but-nothing candidate: core plus all additional.
inline std::vector<InstrumentSet> full_candidate(const Dataset& ds) {
    return {union_set(ds, ds.additional_indices(), 0)};
}

} // namespace focusmr
