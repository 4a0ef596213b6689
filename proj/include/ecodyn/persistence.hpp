#pragma once

// Persistence of a cross-sectional distribution: the Pearson correlation of
// the same entities' scores in two years, its geometric decay with lag,
// (1 - delta)^tau, and the implied half-life.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ecodyn/error.hpp"
#include "ecodyn/io.hpp"
#include "ecodyn/panel.hpp"
#include "ecodyn/stats.hpp"

namespace ecodyn {

struct Correlation {
    double rho = 0.0;
    std::size_t n = 0;  ///< entities present in both years
};

struct PersistenceEntry {
    int t = 0;    ///< later year
    int tau = 0;  ///< lag in years
    double rho = 0.0;
    std::size_t n = 0;
};

struct PersistenceMatrix {
    std::vector<PersistenceEntry> entries;
    std::size_t failed_pairs = 0;  ///< year pairs skipped for insufficient overlap or zero variance
};

struct DeltaEstimate {
    double delta = 0.0;
    double std_error = 0.0;  ///< regression standard error propagated to delta
    std::size_t n_pairs = 0;
    std::size_t n_excluded = 0;  ///< entries with rho <= 0, left out of the log fit
    double slope = 0.0;          ///< fitted ln(1 - delta)
};

enum class DeltaWeighting { None, ByCount, InverseLag };

struct DeltaOptions {
    DeltaWeighting weighting = DeltaWeighting::None;
};

/// Pearson correlation across the entities observed in both years.
[[nodiscard]] inline Correlation cross_section_corr(const PanelTable& p, int t1, int t2) {
    const auto a = p.cross_section(t1);
    const auto b = p.cross_section(t2);
    std::vector<double> x, y;
    for (const auto& [entity, v] : a) {
        const auto it = b.find(entity);
        if (it == b.end()) continue;
        x.push_back(v);
        y.push_back(it->second);
    }
    if (x.size() < 3)
        throw InputError("years " + std::to_string(t1) + " and " + std::to_string(t2) + " share " +
                         std::to_string(x.size()) + " entities; need at least 3");
    const double rho = stats::pearson(x, y);
    if (std::isnan(rho))
        throw InputError("zero variance in the cross-section of year " + std::to_string(t1) + " or " +
                         std::to_string(t2));
    return {t1 == t2 ? 1.0 : rho, x.size()};
}

/// One entry per unordered pair of observation years. Pairs that cannot be
/// correlated are skipped and counted.
[[nodiscard]] inline PersistenceMatrix persistence_matrix(const PanelTable& p, std::vector<int> years) {
    std::sort(years.begin(), years.end());
    years.erase(std::unique(years.begin(), years.end()), years.end());
    if (years.size() < 2) throw InputError("persistence_matrix needs at least 2 distinct observation years");
    PersistenceMatrix m;
    for (std::size_t a = 0; a < years.size(); ++a)
        for (std::size_t b = a + 1; b < years.size(); ++b) {
            try {
                const Correlation c = cross_section_corr(p, years[a], years[b]);
                m.entries.push_back({years[b], years[b] - years[a], c.rho, c.n});
            } catch (const InputError&) {
                ++m.failed_pairs;
            }
        }
    return m;
}

/// Least-squares fit of ln(rho) = tau * ln(1 - delta) through the origin.
[[nodiscard]] inline DeltaEstimate estimate_delta(const PersistenceMatrix& m, const DeltaOptions& opt = {}) {
    DeltaEstimate est;
    std::vector<double> taus, logs, weights;
    std::set<int> lags;
    for (const auto& e : m.entries) {
        if (!(e.rho > 0.0) || e.tau <= 0) {
            ++est.n_excluded;
            continue;
        }
        taus.push_back(e.tau);
        logs.push_back(std::log(e.rho));
        lags.insert(e.tau);
        switch (opt.weighting) {
            case DeltaWeighting::None: weights.push_back(1.0); break;
            case DeltaWeighting::ByCount: weights.push_back(static_cast<double>(e.n)); break;
            case DeltaWeighting::InverseLag: weights.push_back(1.0 / e.tau); break;
        }
    }
    if (lags.size() < 2)
        throw EstimationError("estimate_delta needs positive correlations at 2 or more distinct lags");

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        sxx += weights[k] * taus[k] * taus[k];
        sxy += weights[k] * taus[k] * logs[k];
    }
    const double slope = sxy / sxx;
    if (slope > 0.0) throw EstimationError("persistence increases with lag; the erosion model does not apply");

    double ssr = 0.0;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const double r = logs[k] - slope * taus[k];
        ssr += weights[k] * r * r;
    }
    const double slope_se = std::sqrt(ssr / static_cast<double>(taus.size() - 1) / sxx);
    est.slope = slope;
    est.delta = slope == 0.0 ? 0.0 : -std::expm1(slope);
    est.std_error = std::exp(slope) * slope_se;
    est.n_pairs = taus.size();
    return est;
}

/// Years for persistence to halve: ln(1/2) / ln(1 - delta).
[[nodiscard]] inline double half_life(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw InputError("half_life requires 0 < delta < 1 (got " + std::to_string(delta) + ")");
    return std::log(0.5) / std::log1p(-delta);
}

/// Per-entry annualized erosion 1 - rho^(1/tau); entries with rho <= 0 are skipped.
[[nodiscard]] inline std::vector<double> erosion_values(const PersistenceMatrix& m) {
    std::vector<double> out;
    for (const auto& e : m.entries)
        if (e.rho > 0.0 && e.tau > 0) out.push_back(-std::expm1(std::log(e.rho) / e.tau));
    return out;
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

/// Equal-width bins spanning [min, max] of the data; the last bin is closed.
[[nodiscard]] inline std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw InputError("histogram needs at least one bin");
    if (values.empty()) return {};
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn;
    const double hi = *mx;
    if (hi == lo) return {{lo, hi, values.size()}};
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        out[k].lo = lo + width * static_cast<double>(k);
        out[k].hi = k + 1 == bins ? hi : lo + width * static_cast<double>(k + 1);
    }
    for (double v : values) {
        auto k = static_cast<std::size_t>((v - lo) / width);
        if (k >= bins) k = bins - 1;
        ++out[k].count;
    }
    return out;
}

inline void write_persistence_csv(std::ostream& out, const PersistenceMatrix& m) {
    out << "t,tau,rho,n\n";
    for (const auto& e : m.entries) out << e.t << ',' << e.tau << ',' << io::format_double(e.rho) << ',' << e.n << '\n';
}

inline void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
    out << "bin_lo,bin_hi,count\n";
    for (const auto& b : bins) out << io::format_double(b.lo) << ',' << io::format_double(b.hi) << ',' << b.count << '\n';
}

}  // namespace ecodyn
