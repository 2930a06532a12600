#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "focusmr/delta.hpp"
#include "focusmr/focus.hpp"
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

VarianceComponents make_comp(double eta, double sigma, double xi, double theta_ref) {
    VarianceComponents c;
    c.eta = eta;
    c.sigma_term = sigma;
    c.xi = xi;
    c.theta_ref = theta_ref;
    return c;
}

// Closed forms for the single-candidate covariance, written straight from the
// component sums.
struct SingleCandidate {
    double dc, de, da, df, dd, db;
};

SingleCandidate closed_forms(double ec, double sc, double es, double ss, double xs) {
    SingleCandidate o;
    const double tot = ec + es;
    o.dc = (ec + sc) / (ec * ec);
    o.de = (ec + sc) / (ec * tot);
    o.da = -o.de * es / ec;
    o.df = (ec + es + sc + ss) / (tot * tot);
    o.db = (es + ss + xs + es * es * (ec + sc) / (ec * ec)) / (tot * tot);
    o.dd = (es + ss) / (tot * tot) - o.de * es / tot;
    return o;
}

} // namespace

TEST_CASE("toy covariance entries match hand-computed values") {
    const Dataset ds = toy_dataset();
    const auto comp_core = components(ds, ds.core_indices(), 0.2);
    const Partition part = make_partition(ds, full_candidate(ds), 0.2);
    REQUIRE(part.K == 1);
    REQUIRE(part.atoms.size() == 1);
    REQUIRE(part.masks == std::vector<std::uint64_t>{1});

    const DeltaMatrix d = assemble_delta(comp_core, part);
    REQUIRE(d.dim() == 3);
    CHECK_THAT(d.delta_c(), WithinRel(0.063950617283950614, 1e-12));
    CHECK_THAT(d.delta_f(0), WithinRel(0.02069063723745105, 1e-12));
    CHECK_THAT(d.delta_b(0), WithinRel(0.041231579271213778, 1e-12));
    CHECK_THAT(d.m(0, 1), WithinRel(0.021719077568134171, 1e-12));
    CHECK_THAT(d.m(0, 2), WithinRel(-0.042231539715816446, 1e-12));
    CHECK_THAT(d.m(1, 2), WithinRel(-0.0010284403306831218, 1e-12));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < i; ++j)
            CHECK(d.m(i, j) == d.m(j, i));
}

TEST_CASE("single-candidate assembly matches the closed forms everywhere") {
    Rng rng(47, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const double ec = rng.uniform(1.0, 100.0);
        const double sc = rng.uniform(0.0, 10.0);
        const double es = rng.uniform(-0.4 * ec, 4.0 * ec);
        const double ss = rng.uniform(0.0, 30.0);
        const double xs = rng.uniform(0.0, 30.0);

        Partition part;
        part.K = 1;
        part.masks = {1};
        part.atoms = {make_comp(es, ss, xs, 0.7)};
        const DeltaMatrix d = assemble_delta(make_comp(ec, sc, 0.0, 0.7), part);

        const SingleCandidate o = closed_forms(ec, sc, es, ss, xs);
        CHECK_THAT(d.m(0, 0), WithinRel(o.dc, 1e-12));
        CHECK_THAT(d.m(0, 1), WithinRel(o.de, 1e-12));
        CHECK_THAT(d.m(0, 2), WithinRel(o.da, 1e-12));
        CHECK_THAT(d.m(1, 1), WithinRel(o.df, 1e-12));
        CHECK_THAT(d.m(2, 2), WithinRel(o.db, 1e-12));
        // the mixed estimate/bias entry can pass through zero; bound it by the
        // scale of the terms it is a difference of
        CHECK_THAT(d.m(1, 2), WithinAbs(o.dd, 1e-12 * (o.df + o.dc)));
    }
}

TEST_CASE("a vanishing additional group recovers the core-only covariance") {
    Partition part;
    part.K = 1;
    part.masks = {1};
    part.atoms = {make_comp(1e-12, 0.0, 0.0, 0.2)};
    const auto core = make_comp(20.0, 2.0, 0.1, 0.2);
    const DeltaMatrix d = assemble_delta(core, part);
    const double dc = (20.0 + 2.0) / 400.0;
    CHECK_THAT(d.delta_c(), WithinRel(dc, 1e-12));
    CHECK_THAT(d.delta_f(0), WithinRel(dc, 1e-9));
    CHECK_THAT(d.m(0, 1), WithinRel(dc, 1e-9));
    CHECK_THAT(d.delta_b(0), WithinAbs(0.0, 1e-12));
    CHECK_THAT(d.m(0, 2), WithinAbs(0.0, 1e-12));
}

TEST_CASE("overlapping candidates partition into membership groups") {
    Dataset ds;
    ds.variants = {
        {"c1", 0.5, 0.01, 0.10, 0.01, true},
        {"c2", 0.4, 0.01, 0.08, 0.01, true},
        {"a", 0.30, 0.02, 0.06, 0.02, false},
        {"b", 0.31, 0.02, 0.07, 0.02, false},
        {"c", 0.32, 0.02, 0.05, 0.02, false},
        {"d", 0.33, 0.02, 0.08, 0.02, false},
    };
    const std::vector<InstrumentSet> cands = {union_set(ds, {2, 3, 4}, 0),
                                              union_set(ds, {3, 4, 5}, 1)};
    const double theta_ref = 0.21;
    const Partition part = make_partition(ds, cands, theta_ref);
    REQUIRE(part.K == 2);
    REQUIRE(part.masks == std::vector<std::uint64_t>{1, 2, 3});
    CHECK_THAT(part.atoms[0].eta,
               WithinRel(components(ds, std::vector<std::size_t>{2}, theta_ref).eta, 1e-15));
    CHECK_THAT(part.atoms[1].eta,
               WithinRel(components(ds, std::vector<std::size_t>{5}, theta_ref).eta, 1e-15));
    CHECK_THAT(part.atoms[2].eta,
               WithinRel(components(ds, std::vector<std::size_t>{3, 4}, theta_ref).eta, 1e-15));

    // cross-candidate covariance: rank-one core part plus the shared group
    const auto comp_core = components(ds, ds.core_indices(), theta_ref);
    const DeltaMatrix d = assemble_delta(comp_core, part);
    const double e1 = part.atoms[0].eta + part.atoms[2].eta;
    const double e2 = part.atoms[1].eta + part.atoms[2].eta;
    const double shared = part.atoms[2].eta + part.atoms[2].sigma_term;
    const double expect = ((comp_core.eta + comp_core.sigma_term) + shared) /
                          ((comp_core.eta + e1) * (comp_core.eta + e2));
    CHECK_THAT(d.m(1, 2), WithinRel(expect, 1e-12));
}

TEST_CASE("assembled covariances are positive semidefinite") {
    SimConfig cfg;
    cfg.p = 40;
    cfg.n_core = 6;
    cfg.tau_bar = 6.0;
    cfg.master_seed = 53;
    const Dataset ds = generate(cfg, 0);
    const LimlFit core = fit_core(ds);
    const auto cands = kmeans_candidates(ds, 2);
    REQUIRE(cands.size() == 3);
    const auto comp_core = components(ds, ds.core_indices(), core.theta_hat);
    const Partition part = make_partition(ds, cands, core.theta_hat);
    const DeltaMatrix d = assemble_delta(comp_core, part);
    REQUIRE(d.dim() == 7);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.m);
    REQUIRE(es.info() == Eigen::Success);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * d.m.trace());
}

TEST_CASE("degenerate strengths are rejected during assembly") {
    Partition part;
    part.K = 1;
    part.masks = {1};
    part.atoms = {make_comp(5.0, 1.0, 0.0, 0.2)};
    CHECK_THROWS_AS(assemble_delta(make_comp(-1.0, 1.0, 0.0, 0.2), part), EstimationError);

    part.atoms = {make_comp(-30.0, 1.0, 0.0, 0.2)};
    CHECK_THROWS_AS(assemble_delta(make_comp(20.0, 2.0, 0.0, 0.2), part), EstimationError);

    part.atoms = {make_comp(5.0, 1.0, 0.0, 0.3)};
    CHECK_THROWS_AS(assemble_delta(make_comp(20.0, 2.0, 0.0, 0.2), part),
                    std::invalid_argument);
}

TEST_CASE("the candidate-count limit is enforced") {
    Dataset ds;
    ds.variants.push_back({"core", 0.5, 0.01, 0.1, 0.01, true});
    std::vector<InstrumentSet> cands;
    for (int j = 0; j < 63; ++j) {
        VariantRecord v;
        v.id = "a" + std::to_string(j);
        v.beta_x = 0.3;
        v.se_x = 0.02;
        v.beta_y = 0.06;
        v.se_y = 0.02;
        v.is_core = false;
        ds.variants.push_back(v);
    }
    for (std::size_t j = 0; j < 63; ++j)
        cands.push_back(union_set(ds, {1 + j}, j));
    CHECK_THROWS_AS(make_partition(ds, cands, 0.2), ValidationError);
}
