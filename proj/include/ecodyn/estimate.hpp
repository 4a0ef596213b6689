#pragma once

// Estimators applied to trajectories and cross-sections: directional
// projection, exponential relaxation fits with F-test screening, the angular
// scan for the preferred convergence direction, equilibrium anisotropy
// (variance ratio, 2-D PCA) and OLS for the equilibrium covariate model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecodyn/error.hpp"
#include "ecodyn/model.hpp"
#include "ecodyn/panel.hpp"
#include "ecodyn/simulate.hpp"
#include "ecodyn/stats.hpp"

namespace ecodyn {

// --- projection -------------------------------------------------------------

struct ProjectedSeries {
    std::string entity;
    double theta = 0.0;  ///< degrees in [0, 180)
    std::vector<double> times;
    std::vector<double> values;
};

/// Maps any angle into [0, 180). Projections at theta and theta + 180 differ only in sign.
[[nodiscard]] inline double normalize_angle(double theta) {
    double t = std::fmod(theta, 180.0);
    if (t < 0.0) t += 180.0;
    if (t >= 180.0) t -= 180.0;
    return t;
}

/// value_k = e_k cos(theta) + i_k sin(theta), theta taken modulo 180 degrees.
[[nodiscard]] inline ProjectedSeries project(const Trajectory& traj, double theta) {
    if (!std::isfinite(theta)) throw InputError("projection angle must be finite");
    ProjectedSeries s;
    s.entity = traj.entity_id;
    s.theta = normalize_angle(theta);
    const double rad = s.theta * std::numbers::pi / 180.0;
    const double c = std::cos(rad), sn = std::sin(rad);
    s.times = traj.times;
    s.values.reserve(traj.points.size());
    for (const PhasePoint& x : traj.points) s.values.push_back(x.e * c + x.i * sn);
    return s;
}

// --- relaxation fit -------------------------------------------------------------

enum class FitStatus { Converged, TauAtBound, NotConverged, Degenerate };

[[nodiscard]] inline std::string_view to_string(FitStatus s) noexcept {
    switch (s) {
        case FitStatus::Converged: return "converged";
        case FitStatus::TauAtBound: return "tau-at-bound";
        case FitStatus::NotConverged: return "not-converged";
        case FitStatus::Degenerate: return "degenerate";
    }
    return "unknown";
}

struct FitOptions {
    double tau_min = 0.5;
    double tau_max = 200.0;
    int max_iterations = 500;
};

/// x(t) = offset + amplitude * exp(-(t - t0) / tau), t0 the first sample time.
struct FitResult {
    std::string entity;
    double theta = 0.0;
    double tau = std::numeric_limits<double>::quiet_NaN();
    double amplitude = 0.0;
    double offset = 0.0;
    double p_value = 1.0;  ///< F-test against the constant-mean model
    double rms_residual = 0.0;
    std::size_t n = 0;
    int iterations = 0;
    FitStatus status = FitStatus::Degenerate;

    /// Converged, significant at `p_threshold`, and tau strictly inside the bounds.
    [[nodiscard]] bool sound(double p_threshold) const noexcept {
        return status == FitStatus::Converged && p_value < p_threshold && std::isfinite(tau) && tau > 0.0;
    }
};

namespace detail {

inline double relaxation_sse(std::span<const double> dt, std::span<const double> x, const Eigen::Vector3d& p) {
    double sse = 0.0;
    for (std::size_t k = 0; k < dt.size(); ++k) {
        const double r = p[0] + p[1] * std::exp(-dt[k] / p[2]) - x[k];
        sse += r * r;
    }
    return sse;
}

}  // namespace detail

/// Levenberg-Marquardt fit of a single exponential relaxation.
[[nodiscard]] inline FitResult fit_relaxation(const ProjectedSeries& s, const FitOptions& opt = {}) {
    const std::size_t n = s.values.size();
    if (n < 5 || s.times.size() != n) throw InputError("fit_relaxation needs at least 5 points");
    if (!(opt.tau_min > 0.0) || !(opt.tau_max > opt.tau_min)) throw InputError("invalid tau bounds");

    FitResult res;
    res.entity = s.entity;
    res.theta = s.theta;
    res.n = n;

    std::vector<double> dt(n);
    for (std::size_t k = 0; k < n; ++k) dt[k] = s.times[k] - s.times.front();
    const double span = dt.back();
    if (!(span > 0.0)) throw InputError("fit_relaxation needs increasing times");

    const double mean = stats::mean(s.values);
    double sst = 0.0, ss = 0.0;
    for (double v : s.values) {
        sst += (v - mean) * (v - mean);
        ss += v * v;
    }
    if (sst <= 1e-24 * ss) {  // constant up to rounding
        res.offset = mean;
        res.status = FitStatus::Degenerate;
        return res;
    }

    Eigen::Vector3d p(s.values.back(), s.values.front() - s.values.back(), std::clamp(span / 2.0, opt.tau_min, opt.tau_max));
    double sse = detail::relaxation_sse(dt, s.values, p);
    double damping = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
        for (std::size_t k = 0; k < n; ++k) {
            const double ex = std::exp(-dt[k] / p[2]);
            const Eigen::Vector3d j(1.0, ex, p[1] * ex * dt[k] / (p[2] * p[2]));
            const double r = p[0] + p[1] * ex - s.values[k];
            jtj += j * j.transpose();
            jtr += j * r;
        }
        const double diag_floor = 1e-12 * jtj.diagonal().maxCoeff();
        while (true) {
            Eigen::Matrix3d a = jtj;
            for (int d = 0; d < 3; ++d) a(d, d) += damping * std::max(jtj(d, d), diag_floor);
            const Eigen::Vector3d step = a.ldlt().solve(-jtr);
            Eigen::Vector3d trial = p + step;
            trial[2] = std::clamp(trial[2], opt.tau_min, opt.tau_max);
            const double trial_sse = step.allFinite() ? detail::relaxation_sse(dt, s.values, trial)
                                                      : std::numeric_limits<double>::infinity();
            if (trial_sse < sse) {
                const double rel_step = ((trial - p).array().abs() / (p.array().abs() + 1e-12)).maxCoeff();
                const double rel_gain = (sse - trial_sse) / sse;
                p = trial;
                sse = trial_sse;
                damping = std::max(damping / 10.0, 1e-15);
                if (rel_step < 1e-12 || rel_gain < 1e-15 || sse <= 1e-30 * sst) converged = true;
                break;
            }
            damping *= 10.0;
            if (damping > 1e16) {
                converged = true;  // no downhill step left: at a minimum
                break;
            }
        }
    }

    res.offset = p[0];
    res.amplitude = p[1];
    res.tau = p[2];
    res.iterations = it;
    res.rms_residual = std::sqrt(sse / static_cast<double>(n));
    const double f = sse > 0.0 ? ((sst - sse) / 2.0) / (sse / static_cast<double>(n - 3))
                               : std::numeric_limits<double>::infinity();
    res.p_value = stats::f_test_p(f, 2.0, static_cast<double>(n - 3));
    const bool at_bound = p[2] <= opt.tau_min * (1.0 + 1e-9) || p[2] >= opt.tau_max * (1.0 - 1e-9);
    if (!converged) res.status = FitStatus::NotConverged;
    else if (at_bound) res.status = FitStatus::TauAtBound;
    else res.status = FitStatus::Converged;
    return res;
}

// --- screening ------------------------------------------------------------------

struct TauAggregate {
    double mean_tau = 0.0;
    double sigma = 0.0;  ///< sample standard deviation; 0 when n == 1
    std::size_t n = 0;
};

[[nodiscard]] inline TauAggregate screen_and_aggregate(std::span<const FitResult> fits, double p_threshold = 0.1) {
    std::vector<double> kept;
    for (const auto& f : fits)
        if (f.sound(p_threshold)) kept.push_back(f.tau);
    if (kept.empty()) throw EstimationError("no fits survive screening at p < " + std::to_string(p_threshold));
    TauAggregate agg;
    agg.n = kept.size();
    agg.mean_tau = stats::mean(kept);
    agg.sigma = kept.size() > 1 ? std::sqrt(stats::sample_variance(kept)) : 0.0;
    return agg;
}

// --- angular scan ------------------------------------------------------------------

struct AngularScan {
    std::vector<double> thetas;
    std::vector<int> counts;  ///< sound fits at theta plus sound fits at theta + 90
    double a = 0.0, b = 0.0, c = 0.0;  ///< count ~ a theta^2 + b theta + c (theta in degrees)
    double theta_star = 0.0;
    double fit_p_value = 1.0;

    [[nodiscard]] double parabola(double theta) const noexcept { return (a * theta + b) * theta + c; }
};

/// 0, 5, ..., 90 degrees.
[[nodiscard]] inline std::vector<double> default_theta_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 18; ++k) g.push_back(5.0 * k);
    return g;
}

struct ParabolaFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double p_value = 1.0;  ///< F-test of the parabola against a constant
};

/// Least-squares parabola, solved in centred coordinates for conditioning.
[[nodiscard]] inline ParabolaFit fit_parabola(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 4 || y.size() != n) throw InputError("parabola fit needs at least 4 points");
    const double xm = stats::mean(x);
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd rhs(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double u = x[k] - xm;
        design(static_cast<Eigen::Index>(k), 0) = u * u;
        design(static_cast<Eigen::Index>(k), 1) = u;
        design(static_cast<Eigen::Index>(k), 2) = 1.0;
        rhs[static_cast<Eigen::Index>(k)] = y[k];
    }
    const Eigen::Vector3d q = design.colPivHouseholderQr().solve(rhs);
    const double sse = (design * q - rhs).squaredNorm();
    const double ym = rhs.mean();
    const double sst = (rhs.array() - ym).square().sum();

    ParabolaFit fit;
    fit.a = q[0];
    fit.b = q[1] - 2.0 * q[0] * xm;
    fit.c = q[2] - q[1] * xm + q[0] * xm * xm;
    const double f = sse > 0.0 ? ((sst - sse) / 2.0) / (sse / static_cast<double>(n - 3))
                               : (sst > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    fit.p_value = stats::f_test_p(f, 2.0, static_cast<double>(n - 3));
    return fit;
}

/// Tallies sound relaxation fits of every trajectory projected at theta and
/// theta + 90, then locates the preferred direction with a parabola.
[[nodiscard]] inline AngularScan angular_scan(std::span<const Trajectory> trajs,
                                              const std::vector<double>& theta_grid = default_theta_grid(),
                                              double p_threshold = 0.1, const FitOptions& fit_opt = {}) {
    if (trajs.size() < 2) throw InputError("angular_scan needs at least 2 trajectories");
    if (theta_grid.size() < 4) throw InputError("angular_scan needs at least 4 angles in the grid");
    for (std::size_t k = 0; k < theta_grid.size(); ++k) {
        if (!std::isfinite(theta_grid[k])) throw InputError("theta grid must be finite");
        if (k > 0 && !(theta_grid[k] > theta_grid[k - 1])) throw InputError("theta grid must be strictly increasing");
    }

    AngularScan scan;
    scan.thetas = theta_grid;
    for (double theta : theta_grid) {
        int count = 0;
        for (const auto& t : trajs) {
            if (t.size() < 5) continue;
            for (double angle : {theta, theta + 90.0})
                if (fit_relaxation(project(t, angle), fit_opt).sound(p_threshold)) ++count;
        }
        scan.counts.push_back(count);
    }
    if (std::all_of(scan.counts.begin(), scan.counts.end(), [&](int c) { return c == scan.counts.front(); }))
        throw EstimationError("degenerate angular scan: every angle has the same count (" +
                              std::to_string(scan.counts.front()) + ")");

    const std::vector<double> y(scan.counts.begin(), scan.counts.end());
    const ParabolaFit pf = fit_parabola(theta_grid, y);
    scan.a = pf.a;
    scan.b = pf.b;
    scan.c = pf.c;
    scan.fit_p_value = pf.p_value;
    const double lo = theta_grid.front(), hi = theta_grid.back();
    if (pf.a < 0.0) scan.theta_star = std::clamp(-pf.b / (2.0 * pf.a), lo, hi);
    else scan.theta_star = scan.parabola(lo) >= scan.parabola(hi) ? lo : hi;
    return scan;
}

// --- equilibrium anisotropy ----------------------------------------------------------

struct VarianceRatioEstimate {
    double ratio = 0.0;                   ///< var(I + E) / var(I - E) across entities
    std::optional<double> alpha_inferred;  ///< empty when ratio < 1
};

[[nodiscard]] inline VarianceRatioEstimate empirical_variance_ratio(const EntityAverages& avgs) {
    if (avgs.size() < 3) throw InputError("variance ratio needs at least 3 entities");
    std::vector<double> mu, kappa;
    for (const auto& a : avgs) {
        mu.push_back(a.i_mean + a.e_mean);
        kappa.push_back(a.i_mean - a.e_mean);
    }
    const double vk = stats::sample_variance(kappa);
    if (!(vk > 0.0)) throw EstimationError("zero kappa variance: the variance ratio is unbounded");
    VarianceRatioEstimate est;
    est.ratio = stats::sample_variance(mu) / vk;
    if (est.ratio >= 1.0) est.alpha_inferred = alpha_from_variance_ratio(est.ratio);
    return est;
}

struct PrincipalAxis {
    double angle = 0.0;           ///< leading eigenvector direction, degrees in [0, 180)
    double variance_share = 0.0;  ///< lambda1 / (lambda1 + lambda2)
    bool weakly_determined = false;  ///< near-isotropic cloud; the angle carries little information
};

[[nodiscard]] inline PrincipalAxis pca2(const EntityAverages& avgs) {
    if (avgs.size() < 2) throw InputError("pca2 needs at least 2 entities");
    std::vector<double> e, i;
    for (const auto& a : avgs) {
        e.push_back(a.e_mean);
        i.push_back(a.i_mean);
    }
    const double see = stats::sample_variance(e);
    const double sii = stats::sample_variance(i);
    const double sei = stats::sample_covariance(e, i);
    const double tr = see + sii;
    if (!(tr > 0.0)) throw EstimationError("degenerate covariance: all entities coincide");
    const double disc = std::sqrt((see - sii) * (see - sii) + 4.0 * sei * sei);
    const double l1 = 0.5 * (tr + disc);
    const double l2 = std::max(0.0, 0.5 * (tr - disc));

    PrincipalAxis pa;
    pa.angle = normalize_angle(0.5 * std::atan2(2.0 * sei, see - sii) * 180.0 / std::numbers::pi);
    pa.variance_share = l1 / (l1 + l2);
    pa.weakly_determined = (l1 - l2) / (l1 + l2) < 0.1;
    return pa;
}

// --- OLS -----------------------------------------------------------------------------

struct Column {
    std::string name;
    std::vector<double> values;
};

struct OlsResult {
    std::vector<std::string> names;  ///< "intercept" first when fitted
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> t_stats;
    std::vector<double> p_values;
    double r_squared = 0.0;
    double sigma2 = 0.0;  ///< residual variance SSE / (n - p)
    std::size_t n = 0;
    std::size_t dof = 0;

    [[nodiscard]] std::size_t index(std::string_view name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return k;
        throw InputError("no coefficient named '" + std::string(name) + "'");
    }
    [[nodiscard]] double coefficient(std::string_view name) const { return coefficients[index(name)]; }
    [[nodiscard]] double p_value(std::string_view name) const { return p_values[index(name)]; }
};

/// Ordinary least squares via column-pivoted QR; standard errors from sigma^2 (X'X)^-1
/// and two-sided t-test p-values.
[[nodiscard]] inline OlsResult ols(std::span<const double> y, std::span<const Column> covariates, bool intercept = true) {
    const std::size_t n = y.size();
    const std::size_t p = covariates.size() + (intercept ? 1 : 0);
    if (p == 0) throw InputError("ols needs at least one regressor");
    if (n <= p) throw InputError("ols needs more observations (" + std::to_string(n) + ") than parameters (" +
                                 std::to_string(p) + ")");

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd yv(n);
    OlsResult res;
    Eigen::Index col = 0;
    if (intercept) {
        x.col(col++).setOnes();
        res.names.emplace_back("intercept");
    }
    for (const auto& c : covariates) {
        if (c.values.size() != n) throw InputError("covariate '" + c.name + "' length differs from y");
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(c.values[k])) throw InputError("covariate '" + c.name + "' has a non-finite value");
            x(static_cast<Eigen::Index>(k), col) = c.values[k];
        }
        ++col;
        res.names.push_back(c.name);
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(y[k])) throw InputError("response has a non-finite value");
        yv[static_cast<Eigen::Index>(k)] = y[k];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < p)
        throw RankDeficiencyError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                                  std::to_string(p) + ")");
    const Eigen::VectorXd beta = qr.solve(yv);
    const Eigen::VectorXd resid = yv - x * beta;
    const double sse = resid.squaredNorm();
    res.n = n;
    res.dof = n - p;
    res.sigma2 = sse / static_cast<double>(res.dof);

    const auto pp = static_cast<Eigen::Index>(p);
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(pp, pp).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv =
        r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(pp, pp));
    const Eigen::MatrixXd xtx_inv = qr.colsPermutation() * (rinv * rinv.transpose()) * qr.colsPermutation().transpose();

    for (Eigen::Index k = 0; k < pp; ++k) {
        const double b = beta[k];
        const double se = std::sqrt(res.sigma2 * xtx_inv(k, k));
        const double t = se > 0.0 ? b / se : (b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b));
        res.coefficients.push_back(b);
        res.std_errors.push_back(se);
        res.t_stats.push_back(t);
        res.p_values.push_back(stats::t_test_p(t, static_cast<double>(res.dof)));
    }

    double sst = 0.0;
    if (intercept) {
        const double ym = yv.mean();
        sst = (yv.array() - ym).square().sum();
    } else {
        sst = yv.squaredNorm();
    }
    res.r_squared = sst > 0.0 ? std::clamp(1.0 - sse / sst, 0.0, 1.0) : (sse == 0.0 ? 1.0 : 0.0);
    return res;
}

/// Squared semi-partial correlation of each covariate: the drop in r^2 when it is removed.
[[nodiscard]] inline std::vector<double> explained_shares(std::span<const double> y, std::span<const Column> covariates,
                                                          bool intercept = true) {
    const double full = ols(y, covariates, intercept).r_squared;
    std::vector<double> shares;
    for (std::size_t k = 0; k < covariates.size(); ++k) {
        std::vector<Column> rest;
        for (std::size_t j = 0; j < covariates.size(); ++j)
            if (j != k) rest.push_back(covariates[j]);
        const double reduced = (rest.empty() && intercept) ? 0.0 : ols(y, rest, intercept).r_squared;
        shares.push_back(std::max(0.0, full - reduced));
    }
    return shares;
}

enum class Response { Mu, Kappa };

struct MuKappaRegression {
    std::vector<std::string> entities;  ///< entities with every covariate present
    std::size_t n_dropped = 0;
    std::vector<std::string> covariates;
    OlsResult mu_model;
    OlsResult kappa_model;
    std::vector<double> mu_shares;
    std::vector<double> kappa_shares;
};

namespace detail {

struct RegressionData {
    std::vector<std::string> entities;
    std::vector<double> mu, kappa;
    std::vector<Column> columns;
    std::size_t dropped = 0;
};

inline RegressionData regression_data(const EntityAverages& avgs, const CovariateTable& cov,
                                      const std::vector<std::string>& names) {
    RegressionData d;
    std::vector<std::size_t> idx;
    for (const auto& name : names) {
        idx.push_back(cov.column(name));
        d.columns.push_back({name, {}});
    }
    for (const auto& a : avgs) {
        const auto it = cov.rows.find(a.entity);
        bool complete = it != cov.rows.end();
        for (std::size_t k = 0; complete && k < idx.size(); ++k) complete = it->second[idx[k]].has_value();
        if (!complete) {
            ++d.dropped;
            continue;
        }
        d.entities.push_back(a.entity);
        d.mu.push_back(a.i_mean + a.e_mean);
        d.kappa.push_back(a.i_mean - a.e_mean);
        for (std::size_t k = 0; k < idx.size(); ++k) d.columns[k].values.push_back(*it->second[idx[k]]);
    }
    return d;
}

}  // namespace detail

/// Regresses mu = I + E and kappa = I - E of the time-averaged states on the
/// same covariates. An empty `names` uses every covariate in the table.
[[nodiscard]] inline MuKappaRegression regress_mu_kappa(const EntityAverages& avgs, const CovariateTable& cov,
                                                        std::vector<std::string> names = {}) {
    if (names.empty()) names = cov.names;
    const auto d = detail::regression_data(avgs, cov, names);
    MuKappaRegression out;
    out.entities = d.entities;
    out.n_dropped = d.dropped;
    out.covariates = names;
    out.mu_model = ols(d.mu, d.columns);
    out.kappa_model = ols(d.kappa, d.columns);
    out.mu_shares = explained_shares(d.mu, d.columns);
    out.kappa_shares = explained_shares(d.kappa, d.columns);
    return out;
}

/// Adds the squared covariate to a one-covariate model; its coefficient tests for curvature.
[[nodiscard]] inline OlsResult quadratic_term_check(const EntityAverages& avgs, const CovariateTable& cov,
                                                    const std::string& name, Response response = Response::Mu) {
    auto d = detail::regression_data(avgs, cov, {name});
    Column sq{name + "^2", {}};
    for (double v : d.columns[0].values) sq.values.push_back(v * v);
    d.columns.push_back(std::move(sq));
    return ols(response == Response::Mu ? d.mu : d.kappa, d.columns);
}

}  // namespace ecodyn
