#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "focusmr/delta.hpp"
#include "focusmr/errors.hpp"
#include "focusmr/focus.hpp"
#include "focusmr/intervals.hpp"
#include "focusmr/json.hpp"
#include "focusmr/liml.hpp"
#include "focusmr/summary_data.hpp"
#include "focusmr/version.hpp"

namespace focusmr {

struct AnalyzeOptions {
    double alpha = 0.05;
    double gamma = 0.2;
    std::string candidates = "full"; // "full" or "kmeans:<k>"
    std::size_t mc_draws = 10000;
    std::uint64_t seed = 0;
    std::size_t grid_size = 41;
};

// Full single-dataset result: selection state plus the five intervals.
struct AnalyzeReport {
    AnalyzeOptions options;
    std::size_t core_count = 0;
    std::size_t total_count = 0;
    SelectionResult selection;
    IntervalResult naive, core, one_step, two_step, focused;
    std::vector<std::string> warnings;
};

inline std::vector<InstrumentSet> make_candidates(const Dataset& ds, const std::string& spec,
                                                  std::vector<std::string>* warnings) {
    if (spec == "full") return full_candidate(ds);
    if (spec.rfind("kmeans:", 0) == 0) {
        const std::string arg = spec.substr(7);
        std::size_t pos = 0;
        unsigned long k = 0;
        try {
            k = std::stoul(arg, &pos);
        } catch (const std::exception&) {
            throw FormatError("bad candidate spec '" + spec + "': expected kmeans:<k>");
        }
        if (pos != arg.size() || k == 0)
            throw FormatError("bad candidate spec '" + spec + "': expected kmeans:<k>");
        return kmeans_candidates(ds, k, warnings);
    }
    throw FormatError("unknown candidate spec '" + spec + "' (use full or kmeans:<k>)");
}

// Runs selection and all interval constructions on one dataset.
inline AnalyzeReport analyze(const Dataset& ds, const AnalyzeOptions& opt) {
    AnalyzeReport rep;
    rep.options = opt;
    rep.core_count = ds.core_count();
    rep.total_count = ds.total_count();
    rep.warnings = validate(ds);

    auto candidates = make_candidates(ds, opt.candidates, &rep.warnings);
    rep.selection = focused_estimate(ds, candidates);
    for (const auto& w : rep.selection.warnings) rep.warnings.push_back(w);

    const auto& sel = rep.selection;
    rep.naive = interval_naive(sel.theta_hat, sel.variance, opt.alpha);
    rep.core = interval_core(sel.core_fit.theta_hat, sel.core_fit.variance, opt.alpha);

    if (sel.degraded) {
        // no usable candidate: the law has nothing to select over, so every
        // simulation-based interval degrades to the core normal interval
        for (auto* r : {&rep.one_step, &rep.two_step, &rep.focused}) {
            *r = rep.core;
            r->degraded = true;
        }
        rep.one_step.method = "one_step";
        rep.two_step.method = "two_step";
        rep.focused.method = "focused";
        rep.focused.gamma = opt.gamma;
        return rep;
    }

    // covariance and bias vector over the usable candidates only
    std::vector<InstrumentSet> usable_sets;
    std::vector<double> b_hat;
    for (std::size_t k = 0; k < sel.candidates.size(); ++k) {
        if (!sel.usable[k]) continue;
        usable_sets.push_back(sel.candidates[k]);
        b_hat.push_back(sel.biases[k].b_hat);
    }
    const double theta_c = sel.core_fit.theta_hat;
    const auto comp_core = components(ds, ds.core_indices(), theta_c);
    const auto part = make_partition(ds, usable_sets, theta_c);
    const DeltaMatrix delta = assemble_delta(comp_core, part);

    rep.one_step =
        interval_onestep(sel.theta_hat, delta, b_hat, opt.alpha, opt.mc_draws, opt.seed);
    rep.two_step = interval_twostep(sel.theta_hat, delta, b_hat, opt.alpha, opt.mc_draws,
                                    opt.seed, opt.grid_size);
    rep.focused = interval_focused(sel.theta_hat, delta, b_hat, opt.alpha, opt.gamma,
                                   opt.mc_draws, opt.seed, opt.grid_size);
    return rep;
}

namespace detail {

inline std::string candidate_label(std::size_t k) { return "union_" + std::to_string(k + 1); }

inline JValue interval_json(const IntervalResult& r) {
    JValue j = JValue::object();
    j.obj["lower"] = JValue::real(r.lower);
    j.obj["upper"] = JValue::real(r.upper);
    j.obj["alpha"] = JValue::real(r.alpha);
    if (std::isfinite(r.alpha1)) {
        j.obj["alpha1"] = JValue::real(r.alpha1);
        j.obj["alpha2"] = JValue::real(r.alpha2);
    }
    if (std::isfinite(r.gamma)) j.obj["gamma"] = JValue::real(r.gamma);
    if (!r.b_star.empty()) {
        JValue arr = JValue::array();
        for (double v : r.b_star) arr.arr.push_back(JValue::real(v));
        j.obj["b_star"] = std::move(arr);
    }
    if (r.degraded) j.obj["degraded"] = JValue::boolean(true);
    return j;
}

} // namespace detail

inline std::string report_json(const AnalyzeReport& rep, const Dataset& ds) {
    const auto& sel = rep.selection;
    JValue root = JValue::object();
    root.obj["alpha"] = JValue::real(rep.options.alpha);
    root.obj["gamma"] = JValue::real(rep.options.gamma);
    root.obj["mc_draws"] = JValue::integer(static_cast<long long>(rep.options.mc_draws));
    root.obj["seed"] = JValue::integer(static_cast<long long>(rep.options.seed));
    root.obj["version"] = JValue::str(version_string);

    JValue data = JValue::object();
    data.obj["core_count"] = JValue::integer(static_cast<long long>(rep.core_count));
    data.obj["total_count"] = JValue::integer(static_cast<long long>(rep.total_count));
    root.obj["data"] = std::move(data);

    JValue cands = JValue::array();
    for (std::size_t k = 0; k < sel.candidates.size(); ++k) {
        JValue c = JValue::object();
        c.obj["label"] = JValue::str(detail::candidate_label(k));
        JValue ids = JValue::array();
        for (std::size_t j : additional_part(ds, sel.candidates[k]))
            ids.arr.push_back(JValue::str(ds.variants[j].id));
        c.obj["ids"] = std::move(ids);
        c.obj["usable"] = JValue::boolean(static_cast<bool>(sel.usable[k]));
        if (sel.usable[k]) {
            c.obj["theta_hat"] = JValue::real(sel.fits[k].theta_hat);
            c.obj["variance"] = JValue::real(sel.fits[k].variance);
            c.obj["b_hat"] = JValue::real(sel.biases[k].b_hat);
            c.obj["var_b"] = JValue::real(sel.biases[k].var_b);
            c.obj["w"] = JValue::real(sel.w_stats[k]);
        }
        cands.arr.push_back(std::move(c));
    }
    root.obj["candidates"] = std::move(cands);

    JValue core = JValue::object();
    core.obj["theta_hat"] = JValue::real(sel.core_fit.theta_hat);
    core.obj["variance"] = JValue::real(sel.core_fit.variance);
    root.obj["core"] = std::move(core);

    root.obj["chosen"] =
        JValue::str(sel.core_selected() ? "core" : detail::candidate_label(sel.chosen));
    root.obj["theta_hat"] = JValue::real(sel.theta_hat);
    root.obj["variance"] = JValue::real(sel.variance);
    if (sel.degraded) root.obj["degraded_selection"] = JValue::boolean(true);

    JValue ints = JValue::object();
    ints.obj["naive"] = detail::interval_json(rep.naive);
    ints.obj["core"] = detail::interval_json(rep.core);
    ints.obj["one_step"] = detail::interval_json(rep.one_step);
    ints.obj["two_step"] = detail::interval_json(rep.two_step);
    ints.obj["focused"] = detail::interval_json(rep.focused);
    root.obj["intervals"] = std::move(ints);

    JValue warn = JValue::array();
    for (const auto& w : rep.warnings) warn.arr.push_back(JValue::str(w));
    root.obj["warnings"] = std::move(warn);

    return root.render() + "\n";
}

namespace detail {

inline std::string csv_num(double v) { return fmt_g9(v); }

inline void csv_interval_row(std::ostringstream& out, const IntervalResult& r) {
    out << "interval," << r.method << ",,,,,,," << csv_num(r.lower) << ',' << csv_num(r.upper)
        << ',' << csv_num(r.alpha) << ',';
    if (std::isfinite(r.alpha1)) out << csv_num(r.alpha1);
    out << ',';
    if (std::isfinite(r.alpha2)) out << csv_num(r.alpha2);
    out << ',';
    if (std::isfinite(r.gamma)) out << csv_num(r.gamma);
    out << ',';
    for (std::size_t i = 0; i < r.b_star.size(); ++i) {
        if (i) out << ';';
        out << csv_num(r.b_star[i]);
    }
    out << ',' << (r.degraded ? 1 : 0) << '\n';
}

} // namespace detail

// One fixed header; empty cells where a field does not apply. b_star joins
// its coordinates with ';' inside one cell.
inline std::string report_csv(const AnalyzeReport& rep) {
    const auto& sel = rep.selection;
    std::ostringstream out;
    out << "record,label,theta_hat,variance,b_hat,var_b,w,usable,lower,upper,alpha,alpha1,"
           "alpha2,gamma,b_star,degraded\n";
    out << "core,core," << detail::csv_num(sel.core_fit.theta_hat) << ','
        << detail::csv_num(sel.core_fit.variance) << ",,,,,,,,,,,,\n";
    for (std::size_t k = 0; k < sel.candidates.size(); ++k) {
        out << "candidate," << detail::candidate_label(k) << ',';
        if (sel.usable[k])
            out << detail::csv_num(sel.fits[k].theta_hat) << ','
                << detail::csv_num(sel.fits[k].variance) << ','
                << detail::csv_num(sel.biases[k].b_hat) << ','
                << detail::csv_num(sel.biases[k].var_b) << ','
                << detail::csv_num(sel.w_stats[k]) << ",1,,,,,,,,\n";
        else
            out << ",,,,,0,,,,,,,,\n";
    }
    out << "chosen," << (sel.core_selected() ? "core" : detail::candidate_label(sel.chosen))
        << ',' << detail::csv_num(sel.theta_hat) << ',' << detail::csv_num(sel.variance)
        << ",,,,,,,,,,,," << (sel.degraded ? 1 : 0) << '\n';
    detail::csv_interval_row(out, rep.naive);
    detail::csv_interval_row(out, rep.core);
    detail::csv_interval_row(out, rep.one_step);
    detail::csv_interval_row(out, rep.two_step);
    detail::csv_interval_row(out, rep.focused);
    return out.str();
}

} // namespace focusmr
