#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "focusmr/errors.hpp"
#include "focusmr/liml.hpp"
#include "focusmr/summary_data.hpp"

namespace focusmr {

// Joint asymptotic covariance of (core estimate, K candidate estimates,
// K candidate bias estimates), in that slot order. Dimension 2K+1.
struct DeltaMatrix {
    std::size_t K = 0;
    Eigen::MatrixXd m;

    std::size_t dim() const { return 2 * K + 1; }
    double delta_c() const { return m(0, 0); }
    double delta_f(std::size_t k) const { return m(1 + k, 1 + k); }
    double delta_b(std::size_t k) const { return m(K + 1 + k, K + 1 + k); }
};

// The candidate sets chopped into distinct membership groups: every additional
// variant that appears in at least one candidate belongs to exactly one group,
// identified by the bitmask of candidates containing it. Components are
// computed per group at the shared reference theta.
struct Partition {
    std::size_t K = 0;
    std::vector<VarianceComponents> atoms;
    std::vector<std::uint64_t> masks; // bit k set when the group lies inside candidate k
};

inline Partition make_partition(const Dataset& ds, const std::vector<InstrumentSet>& candidates,
                                double theta_ref) {
    if (candidates.size() > 62)
        throw ValidationError("too many candidate sets (limit 62)");
    std::map<std::size_t, std::uint64_t> mask_of; // variant index -> membership bits
    for (std::size_t k = 0; k < candidates.size(); ++k)
        for (std::size_t j : additional_part(ds, candidates[k]))
            mask_of[j] |= (std::uint64_t{1} << k);

    std::map<std::uint64_t, std::vector<std::size_t>> groups;
    for (const auto& [j, mask] : mask_of)
        groups[mask].push_back(j);

    Partition part;
    part.K = candidates.size();
    for (const auto& [mask, indices] : groups) {
        part.masks.push_back(mask);
        part.atoms.push_back(components(ds, indices, theta_ref));
    }
    return part;
}

// Rebuilds the covariance from its two structural pieces: a rank-one part
// driven by the core-set noise and one rank-structured part per membership
// group. Entirely determined by the component sums (eta, sigma_term, xi).
inline DeltaMatrix assemble_delta(const VarianceComponents& comp_core, const Partition& part) {
    const std::size_t K = part.K;
    for (const auto& a : part.atoms)
        if (a.theta_ref != comp_core.theta_ref)
            throw std::invalid_argument("assemble_delta: component theta_ref mismatch");

    std::vector<double> eta_s(K, 0.0);
    for (std::size_t l = 0; l < part.atoms.size(); ++l)
        for (std::size_t k = 0; k < K; ++k)
            if (part.masks[l] & (std::uint64_t{1} << k)) eta_s[k] += part.atoms[l].eta;

    const double eta_c = comp_core.eta;
    if (!(eta_c > 0.0))
        throw EstimationError("covariance assembly requires core eta > 0");
    for (std::size_t k = 0; k < K; ++k)
        if (!(eta_c + eta_s[k] > 0.0))
            throw EstimationError("covariance assembly requires combined eta > 0 for every candidate");

    const std::size_t dim = 2 * K + 1;
    Eigen::VectorXd pi_c(dim);
    pi_c(0) = 1.0 / eta_c;
    for (std::size_t k = 0; k < K; ++k) {
        pi_c(1 + k) = 1.0 / (eta_c + eta_s[k]);
        pi_c(K + 1 + k) = -eta_s[k] / (eta_c * (eta_c + eta_s[k]));
    }

    DeltaMatrix delta;
    delta.K = K;
    delta.m = Eigen::MatrixXd::Zero(dim, dim);

    // Accumulates coeff * v v'. The product v_i * v_j is rounded before the
    // coefficient multiply so entries (i,j) and (j,i) round identically and
    // the matrix comes out symmetric to the last bit.
    const auto add_outer = [&](double coeff, const Eigen::VectorXd& v) {
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) delta.m(i, j) += coeff * (v(i) * v(j));
    };

    add_outer(eta_c + comp_core.sigma_term, pi_c);

    for (std::size_t l = 0; l < part.atoms.size(); ++l) {
        Eigen::VectorXd uv = Eigen::VectorXd::Zero(dim); // estimate and bias slots together
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);  // bias slots only
        for (std::size_t k = 0; k < K; ++k) {
            if (!(part.masks[l] & (std::uint64_t{1} << k))) continue;
            const double a = 1.0 / (eta_c + eta_s[k]);
            uv(1 + k) = a;
            uv(K + 1 + k) = a;
            v(K + 1 + k) = a;
        }
        add_outer(part.atoms[l].eta + part.atoms[l].sigma_term, uv);
        add_outer(part.atoms[l].xi, v);
    }
    return delta;
}

} // namespace focusmr
