#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "focusmr/delta.hpp"
#include "focusmr/errors.hpp"
#include "focusmr/rng.hpp"

namespace focusmr {

// Monte-Carlo draws from the limiting law of the selected estimator's error
// at a fixed bias vector b.
struct LambdaDraws {
    std::vector<double> draws;    // emission order, unsorted
    std::vector<double> b_used;   // the bias vector the draws were taken at
    std::uint64_t seed = 0;
    bool shared_noise = false;    // true when the caller supplied reused noise
    std::size_t core_count = 0;   // draws where the core law was emitted
    std::vector<std::size_t> candidate_counts; // per-candidate emissions
};

// M x dim standard normals, filled row by row so the stream is a pure
// function of (seed, M, dim).
inline Eigen::MatrixXd standard_normal_matrix(std::size_t M, std::size_t dim,
                                              std::uint64_t seed) {
    Eigen::MatrixXd z(M, dim);
    Rng rng(seed);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < dim; ++j) z(i, j) = rng.normal();
    return z;
}

// Square root of the covariance via symmetric eigendecomposition. Symmetry
// must hold to 1e-12 relative and eigenvalues may dip below zero only within
// -1e-8 * trace; such dips are clamped to zero.
inline Eigen::MatrixXd covariance_factor(const DeltaMatrix& delta) {
    const auto& m = delta.m;
    if (m.rows() != m.cols() || static_cast<std::size_t>(m.rows()) != delta.dim())
        throw NumericError("covariance matrix has the wrong dimension");
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
        throw NumericError("covariance matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericError("covariance eigendecomposition failed");
    const double tol = 1e-8 * std::max(m.trace(), 0.0);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -tol)
            throw NumericError("covariance matrix is not positive semidefinite");
        if (ev(i) < 0.0) ev(i) = 0.0;
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

// Evaluates the selected-estimator law on precomputed correlated noise
// kappa (M x dim, each row one N(0, Delta) draw). Per draw, candidate k's
// criterion is
//   A_k = max((b_k + kappa_bias_k)^2 - Delta_B_k, 0) + Delta_F_k
// and the draw is b_k* + kappa_est_k* for the minimizing k* when
// A_k* <= Delta_C (ties to the smallest k), else the core noise alone.
inline LambdaDraws lambda_at(const DeltaMatrix& delta, const Eigen::MatrixXd& kappa,
                             const std::vector<double>& b, std::uint64_t seed,
                             bool shared_noise) {
    const std::size_t K = delta.K;
    if (b.size() != K)
        throw std::invalid_argument("lambda_at: bias vector length must equal K");
    if (static_cast<std::size_t>(kappa.cols()) != delta.dim())
        throw std::invalid_argument("lambda_at: noise width must equal 2K+1");

    const std::size_t M = static_cast<std::size_t>(kappa.rows());
    LambdaDraws out;
    out.draws.resize(M);
    out.b_used = b;
    out.seed = seed;
    out.shared_noise = shared_noise;
    out.candidate_counts.assign(K, 0);

    const double delta_c = delta.delta_c();
    for (std::size_t i = 0; i < M; ++i) {
        std::size_t best = 0;
        double best_a = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            const double t = b[k] + kappa(i, K + 1 + k);
            const double a = std::max(t * t - delta.delta_b(k), 0.0) + delta.delta_f(k);
            if (a < best_a) {
                best_a = a;
                best = k;
            }
        }
        if (best_a <= delta_c) {
            out.draws[i] = b[best] + kappa(i, 1 + best);
            ++out.candidate_counts[best];
        } else {
            out.draws[i] = kappa(i, 0);
            ++out.core_count;
        }
    }
    return out;
}

inline LambdaDraws simulate_lambda(const DeltaMatrix& delta, const std::vector<double>& b,
                                   std::size_t M, std::uint64_t seed) {
    if (M < 1000)
        throw ValidationError("law simulation needs at least 1000 draws");
    const Eigen::MatrixXd factor = covariance_factor(delta);
    const Eigen::MatrixXd kappa =
        standard_normal_matrix(M, delta.dim(), seed) * factor.transpose();
    return lambda_at(delta, kappa, b, seed, false);
}

} // namespace focusmr
