#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ecodyn/error.hpp"

namespace ecodyn::stats {

[[nodiscard]] inline double mean(std::span<const double> x) {
    if (x.empty()) throw InputError("mean of an empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Unbiased (n - 1) variance, two-pass.
[[nodiscard]] inline double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw InputError("sample variance needs at least 2 values");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

[[nodiscard]] inline double sample_covariance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("covariance needs two equal-length samples of size >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - mx) * (y[k] - my);
    return s / static_cast<double>(x.size() - 1);
}

/// Pearson correlation; NaN when either sample has zero variance.
[[nodiscard]] inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("pearson needs two equal-length samples of size >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = x[k] - mx;
        const double dy = y[k] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    double r = sxy / std::sqrt(sxx * syy);
    if (r > 1.0) r = 1.0;
    if (r < -1.0) r = -1.0;
    return r;
}

/// Upper tail P(F > f) for F(d1, d2).
[[nodiscard]] inline double f_test_p(double f, double d1, double d2) {
    if (std::isnan(f)) return 1.0;
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), f));
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
[[nodiscard]] inline double t_test_p(double t, double df) {
    if (std::isnan(t)) return 1.0;
    if (std::isinf(t)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
}

}  // namespace ecodyn::stats
