#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "focusmr/errors.hpp"

namespace focusmr {

// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

// Standard normal quantile. Acklam's rational approximation polished with one
// Halley step through erfc, accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("normal_quantile: p must be in (0,1)");

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};

    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement: e is the CDF error at x.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

namespace detail {

// Regularized lower incomplete gamma P(a,x), series branch (x < a+1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x), continued fraction (x >= a+1),
// modified Lentz.
inline double gamma_q_cf(double a, double x) {
    const double fpmin = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

// Regularized lower incomplete gamma P(a,x).
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0)
        throw std::domain_error("gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

// Chi-square quantile with k degrees of freedom: smallest x with
// P(k/2, x/2) = p. Wilson-Hilferty start, Newton steps kept inside a
// verified bracket.
inline double chi2_quantile(double p, double k) {
    if (!(p > 0.0 && p < 1.0) || k <= 0.0)
        throw std::domain_error("chi2_quantile: invalid arguments");
    const double a = k / 2.0;

    // Wilson-Hilferty initial guess on the chi-square scale.
    const double z = normal_quantile(p);
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    double x = 0.5 * k * t * t * t; // gamma scale (x = chi2/2)
    if (!(x > 0.0)) x = 0.5;

    double lo = 0.0;
    double hi = std::max(2.0 * x, 1.0);
    while (gamma_p(a, hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    if (x <= lo || x >= hi) x = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
        const double f = gamma_p(a, x) - p;
        if (f > 0.0) hi = x; else lo = x;
        // density of the gamma(a,1) law at x
        const double fp = std::exp((a - 1.0) * std::log(x) - x - std::lgamma(a));
        double next = (fp > 0.0) ? x - f / fp : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-13 * (1.0 + std::fabs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return 2.0 * x;
}

// Empirical quantile of an ascending-sorted sample: order statistic i
// (1-based) sits at probability (i - 0.5)/m, linear interpolation between,
// clamped to the sample range.
inline double quantile_sorted(const std::vector<double>& x, double p) {
    if (x.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    const double m = static_cast<double>(x.size());
    const double h = p * m - 0.5; // 0-based fractional order-statistic index
    if (h <= 0.0) return x.front();
    if (h >= m - 1.0) return x.back();
    const std::size_t i = static_cast<std::size_t>(h);
    const double f = h - static_cast<double>(i);
    return x[i] + f * (x[i + 1] - x[i]);
}

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Sample standard deviation (n-1 denominator).
inline double sample_sd(const std::vector<double>& x) {
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

} // namespace focusmr
