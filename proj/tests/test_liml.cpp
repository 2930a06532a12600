#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "focusmr/liml.hpp"
#include "focusmr/rng.hpp"
#include "focusmr/simlab.hpp"

using namespace focusmr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Dataset toy_dataset() {
    Dataset ds;
    ds.variants = {
        {"v1", 0.1, 0.05, 0.02, 0.05, true},
        {"v2", 0.2, 0.05, 0.04, 0.05, true},
        {"v3", 0.3, 0.05, 0.09, 0.05, false},
    };
    return ds;
}

InstrumentSet all_of(const Dataset& ds) {
    InstrumentSet s;
    s.kind = InstrumentSet::Kind::CoreUnion;
    for (std::size_t j = 0; j < ds.total_count(); ++j) s.indices.push_back(j);
    return s;
}

// Random consistent instance: strong instruments, one true slope.
Dataset random_instance(Rng& rng, std::size_t nv) {
    Dataset ds;
    const double theta0 = rng.uniform(-1.5, 1.5);
    for (std::size_t j = 0; j < nv; ++j) {
        VariantRecord v;
        v.id = "g" + std::to_string(j);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        v.beta_x = sign * rng.uniform(0.1, 0.5);
        v.se_x = rng.uniform(0.02, 0.08);
        v.se_y = rng.uniform(0.02, 0.08);
        v.beta_y = theta0 * v.beta_x + 0.3 * v.se_y * rng.normal();
        v.is_core = j < nv / 2;
        ds.variants.push_back(v);
    }
    return ds;
}

// Oracle minimizer: dense grid plus one parabolic refinement, written
// without reference to the library's search strategy.
double grid_oracle_minimum(const Dataset& ds, const InstrumentSet& set,
                           double lo, double hi, std::size_t points) {
    std::vector<double> q(points);
    const double h = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        q[i] = objective(ds, set, lo + h * static_cast<double>(i));
    const std::size_t i =
        static_cast<std::size_t>(std::min_element(q.begin(), q.end()) - q.begin());
    if (i == 0 || i + 1 == points) return lo + h * static_cast<double>(i);
    const double denom = q[i - 1] - 2.0 * q[i] + q[i + 1];
    double x = lo + h * static_cast<double>(i);
    if (denom > 0.0) x += 0.5 * h * (q[i - 1] - q[i + 1]) / denom;
    return x;
}

} // namespace

TEST_CASE("objective and score match hand-computed values on the toy table") {
    const Dataset ds = toy_dataset();
    const InstrumentSet full = all_of(ds);
    CHECK_THAT(objective(ds, full, 0.2), WithinRel(0.34615384615384615, 1e-12));
    CHECK_THAT(score(ds, full, 0.2), WithinRel(3.5281065088757395, 1e-12));
}

TEST_CASE("score equals minus half the objective derivative") {
    Rng rng(11, 0);
    for (int inst = 0; inst < 5; ++inst) {
        const Dataset ds = random_instance(rng, 12);
        const InstrumentSet full = all_of(ds);
        for (double theta : {-1.7, -0.4, 0.0, 0.3, 1.1, 2.5}) {
            const double h = 1e-6 * std::max(1.0, std::fabs(theta));
            const double fd =
                (objective(ds, full, theta + h) - objective(ds, full, theta - h)) /
                (2.0 * h);
            const double analytic = -2.0 * score(ds, full, theta);
            CHECK_THAT(analytic, WithinAbs(fd, 1e-4 * std::max(1.0, std::fabs(fd))));
        }
    }
}

TEST_CASE("a single strong variant is fit by its ratio") {
    Dataset ds;
    ds.variants = {{"v", 0.5, 0.01, 0.25, 0.01, true}};
    const LimlFit fit = minimize(ds, core_set(ds));
    CHECK_THAT(fit.theta_hat, WithinAbs(0.5, 1e-9));
    CHECK(fit.objective_at_min < 1e-18);
}

TEST_CASE("minimize agrees with a dense-grid oracle") {
    Rng rng(17, 0);
    for (int inst = 0; inst < 3; ++inst) {
        const Dataset ds = random_instance(rng, 20);
        const InstrumentSet full = all_of(ds);
        const LimlFit fit = minimize(ds, full);
        const double oracle = grid_oracle_minimum(ds, full, -25.0, 25.0, 200001);
        CHECK_THAT(fit.theta_hat, WithinAbs(oracle, 1e-6));
        // the reported minimum really is a stationary point
        CHECK_THAT(score(ds, full, fit.theta_hat), WithinAbs(0.0, 1e-4));
    }
}

TEST_CASE("fits recover the slope of simulated data") {
    SimConfig cfg;
    cfg.master_seed = 23;
    const Dataset ds = generate(cfg, 0);
    const LimlFit core = fit_core(ds);
    const double se = std::sqrt(core.variance);
    CHECK(std::fabs(core.theta_hat - cfg.theta0) < 3.0 * se);
}

TEST_CASE("scaling the outcome scales the fit") {
    Rng rng(29, 0);
    const Dataset ds = random_instance(rng, 14);
    Dataset scaled = ds;
    for (auto& v : scaled.variants) {
        v.beta_y *= 2.0;
        v.se_y *= 2.0;
    }
    const InstrumentSet full = all_of(ds);
    // doubling is exact in floating point, so the objective is invariant
    for (double theta : {-0.9, 0.0, 0.7})
        CHECK(objective(scaled, full, 2.0 * theta) == objective(ds, full, theta));
    const LimlFit a = minimize(ds, full);
    const LimlFit b = minimize(scaled, full);
    CHECK_THAT(b.theta_hat, WithinAbs(2.0 * a.theta_hat, 1e-9));
}

TEST_CASE("variant order does not matter") {
    Rng rng(31, 0);
    const Dataset ds = random_instance(rng, 14);
    Dataset rev = ds;
    std::reverse(rev.variants.begin(), rev.variants.end());
    const InstrumentSet full = all_of(ds);
    CHECK_THAT(objective(rev, full, 0.4), WithinRel(objective(ds, full, 0.4), 1e-12));
    CHECK_THAT(minimize(rev, full).theta_hat,
               WithinAbs(minimize(ds, full).theta_hat, 1e-9));
}

TEST_CASE("degenerate fits raise estimation errors") {
    Dataset ds = toy_dataset();
    InstrumentSet empty;
    CHECK_THROWS_AS(minimize(ds, empty), EstimationError);
    Dataset null = toy_dataset();
    for (auto& v : null.variants) v.beta_x = 0.0;
    CHECK_THROWS_AS(minimize(null, core_set(null)), EstimationError);
}

TEST_CASE("variance components match hand-computed values at theta 0.2") {
    const Dataset ds = toy_dataset();
    const auto full = components(ds, all_of(ds).indices, 0.2);
    CHECK_THAT(full.eta, WithinRel(50.961538461538461, 1e-12));
    CHECK_THAT(full.sigma_term, WithinRel(2.7736686390532546, 1e-12));
    CHECK_THAT(full.xi, WithinRel(0.22189349112426035, 1e-12));

    const auto core = components(ds, core_set(ds).indices, 0.2);
    CHECK_THAT(core.eta, WithinRel(17.307692307692307, 1e-12));
    CHECK_THAT(core.sigma_term, WithinRel(1.849112426035503, 1e-12));
    CHECK_THAT(core.xi, WithinRel(0.14792899408284024, 1e-12));

    const auto add = components(ds, additional_part(ds, all_of(ds)), 0.2);
    CHECK_THAT(add.eta, WithinRel(33.653846153846153, 1e-12));
    CHECK_THAT(add.sigma_term, WithinRel(0.92455621301775148, 1e-12));
    CHECK_THAT(add.xi, WithinRel(0.073964497041420121, 1e-12));
}

TEST_CASE("components collapse to outcome weighting at theta 0") {
    const Dataset ds = toy_dataset();
    const auto c = components(ds, all_of(ds).indices, 0.0);
    CHECK_THAT(c.eta, WithinRel(53.0, 1e-12));        // sum (bx^2-sx^2)/sy^2
    CHECK_THAT(c.sigma_term, WithinRel(3.0, 1e-12));  // sum sx^2/sy^2
    CHECK(c.xi == 0.0);
}

TEST_CASE("fit variances match hand-computed values") {
    const Dataset ds = toy_dataset();
    const auto core = components(ds, core_set(ds).indices, 0.2);
    const auto add = components(ds, additional_part(ds, all_of(ds)), 0.2);
    CHECK_THAT(variance_of_fit(core), WithinRel(0.063950617283950614, 1e-12));
    CHECK_THAT(variance_of_fit(core, add), WithinRel(0.02069063723745105, 1e-12));
}

TEST_CASE("bias-corrected strength can go negative and is reported") {
    Dataset weak;
    weak.variants = {{"v1", 0.01, 0.05, 0.0, 0.05, true},
                     {"v2", 0.02, 0.05, 0.0, 0.05, true}};
    const auto c = components(weak, core_set(weak).indices, 0.0);
    CHECK(c.eta < 0.0);
    CHECK_THROWS_AS(variance_of_fit(c), EstimationError);
}

TEST_CASE("sampled core strength matches its design value") {
    SimConfig cfg;
    cfg.master_seed = 37;
    const double target =
        cfg.lambda_c * static_cast<double>(cfg.n_core) / (1.0 + cfg.theta0 * cfg.theta0);
    const DgpTruth truth = make_truth(cfg);
    double mean = 0.0;
    const std::size_t reps = 10000;
    for (std::size_t r = 0; r < reps; ++r) {
        const Dataset ds = generate(cfg, truth, r);
        mean += components(ds, core_set(ds).indices, cfg.theta0).eta;
    }
    mean /= static_cast<double>(reps);
    CHECK_THAT(mean, WithinRel(target, 0.01));
}
