#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "focusmr/analyze.hpp"
#include "focusmr/delta.hpp"
#include "focusmr/errors.hpp"
#include "focusmr/focus.hpp"
#include "focusmr/intervals.hpp"
#include "focusmr/json.hpp"
#include "focusmr/liml.hpp"
#include "focusmr/rng.hpp"
#include "focusmr/summary_data.hpp"

namespace focusmr {

// Named random streams; every draw in a run is addressed by
// (master_seed, stream, rep) so outputs never depend on thread scheduling.
enum : std::uint64_t {
    stream_tau = 1,  // per-configuration invalid effects, fixed across reps
    stream_data = 2, // per-rep association noise
    stream_mc = 3,   // per-rep law-simulation noise
};

struct SimConfig {
    std::size_t n = 1000;      // sample size behind each association
    std::size_t p = 110;       // total variants
    std::size_t n_core = 10;   // certified-valid variants, listed first
    double lambda_c = 40.0;    // core concentration per variant group
    double lambda_s = 40.0;    // additional-group concentration
    double tau_bar = 0.0;      // invalid-effect bound for additional variants
    double tau_bar_c = 0.0;    // invalid-effect bound for core variants
    double theta0 = 0.2;
    std::size_t reps = 1000;
    double alpha = 0.05;
    double gamma = 0.2;
    std::size_t mc_draws = 5000;
    std::size_t grid_size = 41;
    std::uint64_t master_seed = 20260801;
    bool intervals = true; // false skips interval construction (estimation only)
};

// Fixed per-configuration truth. Effects tau are drawn once from the
// configuration-level stream and held fixed across replications.
struct DgpTruth {
    std::vector<double> beta_x, beta_y, tau;
    double sigma = 0.0; // common standard error of every association
};

inline void check_config(const SimConfig& c) {
    if (c.n < 1) throw ValidationError("config: n must be >= 1");
    if (c.p < 2) throw ValidationError("config: p must be >= 2");
    if (c.n_core < 1 || c.n_core >= c.p)
        throw ValidationError("config: need 1 <= n_core < p");
    if (c.lambda_c < 0.0 || c.lambda_s < 0.0)
        throw ValidationError("config: concentrations must be nonnegative");
    if (c.tau_bar < 0.0 || c.tau_bar_c < 0.0)
        throw ValidationError("config: effect bounds must be nonnegative");
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
        throw ValidationError("config: alpha must be in (0,1)");
    if (c.gamma < 0.0 || c.gamma >= 1.0)
        throw ValidationError("config: gamma must be in [0,1)");
    if (c.reps < 1) throw ValidationError("config: reps must be >= 1");
}

inline DgpTruth make_truth(const SimConfig& c) {
    check_config(c);
    DgpTruth t;
    const double n = static_cast<double>(c.n);
    const double p = static_cast<double>(c.p);
    t.sigma = 1.0 / std::sqrt(n);
    t.beta_x.resize(c.p);
    t.beta_y.resize(c.p);
    t.tau.resize(c.p);

    // per-variant exposure signal making the group concentration exact
    const double bx_core = std::sqrt(c.lambda_c / n);
    const double bx_add = std::sqrt(c.lambda_s / n);

    // Uniform draws are consumed for every variant in index order so that
    // the additional-variant effects do not move when tau_bar_c is toggled.
    Rng rng(c.master_seed, stream_tau);
    for (std::size_t j = 0; j < c.p; ++j) {
        const bool core = j < c.n_core;
        const double bound = (core ? c.tau_bar_c : c.tau_bar) / std::sqrt(n * p);
        t.tau[j] = rng.uniform() * bound;
        t.beta_x[j] = core ? bx_core : bx_add;
        t.beta_y[j] = c.theta0 * t.beta_x[j] + t.tau[j];
    }
    return t;
}

// One replication's observed dataset: associations drawn around the truth.
inline Dataset generate(const SimConfig& c, const DgpTruth& t, std::size_t rep) {
    Dataset ds;
    ds.variants.resize(c.p);
    Rng rng(c.master_seed, stream_data, rep);
    char idbuf[16];
    for (std::size_t j = 0; j < c.p; ++j) {
        auto& v = ds.variants[j];
        std::snprintf(idbuf, sizeof(idbuf), "v%05zu", j + 1);
        v.id = idbuf;
        v.is_core = j < c.n_core;
        v.beta_x = rng.normal(t.beta_x[j], t.sigma);
        v.beta_y = rng.normal(t.beta_y[j], t.sigma);
        v.se_x = t.sigma;
        v.se_y = t.sigma;
    }
    return ds;
}

inline Dataset generate(const SimConfig& c, std::size_t rep) {
    return generate(c, make_truth(c), rep);
}

// Per-cell aggregate. Method order everywhere: naive, core, one_step,
// two_step, focused.
struct CellSummary {
    SimConfig config;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    bool valid = true; // false when more than 10% of reps failed
    double rmse_core = 0.0, rmse_full = 0.0, rmse_focused = 0.0;
    double sel_core = 0.0, sel_full = 0.0;
    std::array<double, 5> coverage{}, mean_length{}, cov_se{};
};

inline constexpr std::array<const char*, 5> method_names = {"naive", "core", "one_step",
                                                            "two_step", "focused"};

namespace detail {

struct RepOutcome {
    bool ok = false;
    double est_core = 0.0, est_full = 0.0, est_focused = 0.0;
    bool full_chosen = false;
    std::array<double, 5> lo{}, hi{};
};

inline RepOutcome run_one_rep(const SimConfig& cfg, const DgpTruth& truth, std::size_t rep) {
    RepOutcome o;
    try {
        const Dataset ds = generate(cfg, truth, rep);
        const auto sel = focused_estimate(ds, full_candidate(ds));
        if (sel.degraded)
            throw EstimationError("selection degraded");
        o.est_core = sel.core_fit.theta_hat;
        o.est_full = sel.fits[0].theta_hat;
        o.est_focused = sel.theta_hat;
        o.full_chosen = !sel.core_selected();

        if (cfg.intervals) {
            const double theta_c = sel.core_fit.theta_hat;
            const auto comp_core = components(ds, ds.core_indices(), theta_c);
            const auto part = make_partition(ds, sel.candidates, theta_c);
            const DeltaMatrix delta = assemble_delta(comp_core, part);
            const std::vector<double> b = {sel.biases[0].b_hat};
            const std::uint64_t seed = derive_seed(cfg.master_seed, stream_mc, rep);

            const IntervalResult r[5] = {
                interval_naive(sel.theta_hat, sel.variance, cfg.alpha),
                interval_core(sel.core_fit.theta_hat, sel.core_fit.variance, cfg.alpha),
                interval_onestep(sel.theta_hat, delta, b, cfg.alpha, cfg.mc_draws, seed),
                interval_twostep(sel.theta_hat, delta, b, cfg.alpha, cfg.mc_draws, seed,
                                 cfg.grid_size),
                interval_focused(sel.theta_hat, delta, b, cfg.alpha, cfg.gamma, cfg.mc_draws,
                                 seed, cfg.grid_size)};
            for (int i = 0; i < 5; ++i) {
                o.lo[i] = r[i].lower;
                o.hi[i] = r[i].upper;
            }
        }
        o.ok = true;
    } catch (const EstimationError&) {
        o.ok = false;
    } catch (const NumericError&) {
        o.ok = false;
    }
    return o;
}

} // namespace detail

// Runs every replication of one configuration. Replications are indexed
// work items; their seeds derive from the rep index, and aggregation walks
// the results in rep order, so the summary is identical for any thread count.
inline CellSummary run_cell(const SimConfig& cfg, std::size_t threads = 1) {
    check_config(cfg);
    const DgpTruth truth = make_truth(cfg);
    std::vector<detail::RepOutcome> out(cfg.reps);

    if (threads <= 1) {
        for (std::size_t rep = 0; rep < cfg.reps; ++rep)
            out[rep] = detail::run_one_rep(cfg, truth, rep);
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (;;) {
                const std::size_t rep = next.fetch_add(1);
                if (rep >= cfg.reps) break;
                out[rep] = detail::run_one_rep(cfg, truth, rep);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(work);
        work();
        for (auto& th : pool) th.join();
    }

    CellSummary cell;
    cell.config = cfg;
    double se_c = 0.0, se_f = 0.0, se_foc = 0.0;
    std::array<double, 5> cov_n{}, len_sum{};
    std::size_t full_n = 0;
    for (const auto& o : out) {
        if (!o.ok) {
            ++cell.n_failed;
            continue;
        }
        ++cell.n_ok;
        se_c += (o.est_core - cfg.theta0) * (o.est_core - cfg.theta0);
        se_f += (o.est_full - cfg.theta0) * (o.est_full - cfg.theta0);
        se_foc += (o.est_focused - cfg.theta0) * (o.est_focused - cfg.theta0);
        if (o.full_chosen) ++full_n;
        if (cfg.intervals) {
            for (int i = 0; i < 5; ++i) {
                if (o.lo[i] <= cfg.theta0 && cfg.theta0 <= o.hi[i]) cov_n[i] += 1.0;
                len_sum[i] += o.hi[i] - o.lo[i];
            }
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (cell.n_ok > 0) {
        const double n_ok = static_cast<double>(cell.n_ok);
        cell.rmse_core = std::sqrt(se_c / n_ok);
        cell.rmse_full = std::sqrt(se_f / n_ok);
        cell.rmse_focused = std::sqrt(se_foc / n_ok);
        cell.sel_full = static_cast<double>(full_n) / n_ok;
        cell.sel_core = 1.0 - cell.sel_full;
        for (int i = 0; i < 5; ++i) {
            if (cfg.intervals) {
                cell.coverage[i] = cov_n[i] / n_ok;
                cell.mean_length[i] = len_sum[i] / n_ok;
                cell.cov_se[i] =
                    std::sqrt(cell.coverage[i] * (1.0 - cell.coverage[i]) / n_ok);
            } else {
                cell.coverage[i] = cell.mean_length[i] = cell.cov_se[i] = nan;
            }
        }
    } else {
        cell.rmse_core = cell.rmse_full = cell.rmse_focused = nan;
        cell.sel_core = cell.sel_full = nan;
        for (int i = 0; i < 5; ++i)
            cell.coverage[i] = cell.mean_length[i] = cell.cov_se[i] = nan;
    }
    cell.valid =
        static_cast<double>(cell.n_failed) <= 0.1 * static_cast<double>(cfg.reps);
    return cell;
}

// A sweep: one cell per (lambda pair) x (tau_bar value), in that loop order.
struct SimGridSpec {
    SimConfig base;
    std::vector<double> tau_bars;                      // empty: just base.tau_bar
    std::vector<std::pair<double, double>> lambda_pairs; // empty: base lambdas
};

inline std::vector<CellSummary> run_grid(const SimGridSpec& spec, std::size_t threads = 1) {
    std::vector<double> taus = spec.tau_bars;
    if (taus.empty()) taus.push_back(spec.base.tau_bar);
    std::vector<std::pair<double, double>> lams = spec.lambda_pairs;
    if (lams.empty()) lams.emplace_back(spec.base.lambda_c, spec.base.lambda_s);

    std::vector<CellSummary> cells;
    cells.reserve(taus.size() * lams.size());
    for (const auto& [lc, ls] : lams) {
        for (double tb : taus) {
            SimConfig cfg = spec.base;
            cfg.lambda_c = lc;
            cfg.lambda_s = ls;
            cfg.tau_bar = tb;
            cells.push_back(run_cell(cfg, threads));
        }
    }
    return cells;
}

// Fixed-header CSV, one row per cell, floats with 9 significant digits.
inline std::string grid_csv(const std::vector<CellSummary>& cells) {
    std::ostringstream out;
    out << "n,p,n_core,lambda_c,lambda_s,tau_bar,tau_bar_c,theta0,reps,alpha,gamma,mc_draws,"
           "grid_size,master_seed,n_ok,n_failed,valid,rmse_core,rmse_full,rmse_focused,"
           "sel_core,sel_full";
    for (const char* prefix : {"cov", "len", "se"})
        for (const char* m : method_names) out << ',' << prefix << '_' << m;
    out << '\n';
    for (const auto& c : cells) {
        const auto& g = c.config;
        out << g.n << ',' << g.p << ',' << g.n_core << ',' << fmt_g9(g.lambda_c) << ','
            << fmt_g9(g.lambda_s) << ',' << fmt_g9(g.tau_bar) << ',' << fmt_g9(g.tau_bar_c)
            << ',' << fmt_g9(g.theta0) << ',' << g.reps << ',' << fmt_g9(g.alpha) << ','
            << fmt_g9(g.gamma) << ',' << g.mc_draws << ',' << g.grid_size << ','
            << g.master_seed << ',' << c.n_ok << ',' << c.n_failed << ','
            << (c.valid ? 1 : 0) << ',' << fmt_g9(c.rmse_core) << ',' << fmt_g9(c.rmse_full)
            << ',' << fmt_g9(c.rmse_focused) << ',' << fmt_g9(c.sel_core) << ','
            << fmt_g9(c.sel_full);
        for (const auto* arr : {&c.coverage, &c.mean_length, &c.cov_se})
            for (double v : *arr) out << ',' << fmt_g9(v);
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline double parse_config_double(const std::string& val, const std::string& key,
                                  const std::string& name, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(val, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != val.size() || !std::isfinite(v))
        throw FormatError(name + ": line " + std::to_string(line_no) + ": key '" + key +
                          "': cannot parse number from '" + val + "'");
    return v;
}

inline std::uint64_t parse_config_u64(const std::string& val, const std::string& key,
                                      const std::string& name, std::size_t line_no) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(val, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != val.size())
        throw FormatError(name + ": line " + std::to_string(line_no) + ": key '" + key +
                          "': cannot parse integer from '" + val + "'");
    return v;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) out.push_back(trim(cur));
    return out;
}

} // namespace detail

// Flat key=value configuration, '#' comments, lists comma-separated.
// lambda_pairs entries look like 40:40. Unknown keys are errors.
inline SimGridSpec parse_sim_config(std::istream& in, const std::string& name = "<config>") {
    SimGridSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(name + ": line " + std::to_string(line_no) +
                              ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto& b = spec.base;
        if (key == "n")
            b.n = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "p")
            b.p = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "n_core")
            b.n_core = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "lambda_c")
            b.lambda_c = detail::parse_config_double(val, key, name, line_no);
        else if (key == "lambda_s")
            b.lambda_s = detail::parse_config_double(val, key, name, line_no);
        else if (key == "tau_bar")
            b.tau_bar = detail::parse_config_double(val, key, name, line_no);
        else if (key == "tau_bar_c")
            b.tau_bar_c = detail::parse_config_double(val, key, name, line_no);
        else if (key == "theta0")
            b.theta0 = detail::parse_config_double(val, key, name, line_no);
        else if (key == "reps")
            b.reps = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "alpha")
            b.alpha = detail::parse_config_double(val, key, name, line_no);
        else if (key == "gamma")
            b.gamma = detail::parse_config_double(val, key, name, line_no);
        else if (key == "mc_draws")
            b.mc_draws = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "grid_size")
            b.grid_size = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "master_seed")
            b.master_seed = detail::parse_config_u64(val, key, name, line_no);
        else if (key == "intervals")
            b.intervals = detail::parse_config_u64(val, key, name, line_no) != 0;
        else if (key == "tau_bar_values") {
            for (const auto& item : detail::split_list(val))
                spec.tau_bars.push_back(detail::parse_config_double(item, key, name, line_no));
        } else if (key == "lambda_pairs") {
            for (const auto& item : detail::split_list(val)) {
                const std::size_t colon = item.find(':');
                if (colon == std::string::npos)
                    throw FormatError(name + ": line " + std::to_string(line_no) + ": key '" +
                                      key + "': expected entries like 40:40");
                spec.lambda_pairs.emplace_back(
                    detail::parse_config_double(detail::trim(item.substr(0, colon)), key, name,
                                                line_no),
                    detail::parse_config_double(detail::trim(item.substr(colon + 1)), key, name,
                                                line_no));
            }
        } else {
            throw FormatError(name + ": line " + std::to_string(line_no) + ": unknown key '" +
                              key + "'");
        }
    }
    check_config(spec.base);
    return spec;
}

} // namespace focusmr
