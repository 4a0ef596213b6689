#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ecodyn/estimate.hpp"
#include "ecodyn/rng.hpp"
#include "ecodyn/serialize.hpp"

using namespace ecodyn;

namespace {

ProjectedSeries series(std::vector<double> times, std::vector<double> values) {
    ProjectedSeries s;
    s.entity = "X";
    s.times = std::move(times);
    s.values = std::move(values);
    return s;
}

ProjectedSeries exponential(double offset, double amplitude, double tau, int n = 21, double t0 = 0.0) {
    std::vector<double> t, v;
    for (int k = 0; k < n; ++k) {
        t.push_back(t0 + k);
        v.push_back(offset + amplitude * std::exp(-k / tau));
    }
    return series(t, v);
}

FitResult fake_fit(double tau, double p, FitStatus status = FitStatus::Converged) {
    FitResult f;
    f.tau = tau;
    f.p_value = p;
    f.status = status;
    return f;
}

std::vector<Trajectory> cohort_trajectories(const SystemParams& p, std::size_t n, double sigma, std::uint64_t seed) {
    const auto cohort = make_cohort(p, {n, 1.0, 1.0 / 3, 3.0}, seed);
    const auto sim = simulate_panel(cohort, 21, {sigma, seed});
    return trajectories_from_panel(join_panels(sim.e, sim.i));
}

EntityAverages cloud(double angle_deg, double sd_major, double sd_minor, std::size_t n, std::uint64_t seed,
                     bool symmetrize = false) {
    Rng rng(seed);
    const double th = angle_deg * std::numbers::pi / 180.0;
    EntityAverages out;
    for (std::size_t k = 0; k < n; ++k) {
        const double u = rng.normal(0.0, sd_major), v = rng.normal(0.0, sd_minor);
        for (double sgn : symmetrize ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0})
            out.push_back({"E" + std::to_string(out.size()), u * std::cos(th) - sgn * v * std::sin(th),
                           u * std::sin(th) + sgn * v * std::cos(th), 1});
    }
    return out;
}

/// Normal-equations OLS by Gauss-Jordan elimination: shares no code with the QR path.
struct NormalEquations {
    std::vector<double> beta, se;
};

NormalEquations normal_equations(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    const std::size_t n = y.size(), p = x.front().size();
    std::vector<std::vector<double>> a(p, std::vector<double>(2 * p, 0.0));
    std::vector<double> xty(p, 0.0);
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t k = 0; k < n; ++k) a[r][c] += x[k][r] * x[k][c];
        a[r][p + r] = 1.0;
        for (std::size_t k = 0; k < n; ++k) xty[r] += x[k][r] * y[k];
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        const double d = a[c][c];
        for (auto& v : a[c]) v /= d;
        for (std::size_t r = 0; r < p; ++r)
            if (r != c) {
                const double f = a[r][c];
                for (std::size_t j = 0; j < 2 * p; ++j) a[r][j] -= f * a[c][j];
            }
    }
    NormalEquations out;
    out.beta.assign(p, 0.0);
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) out.beta[r] += a[r][p + c] * xty[c];
    double sse = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double fit = 0.0;
        for (std::size_t r = 0; r < p; ++r) fit += x[k][r] * out.beta[r];
        sse += (y[k] - fit) * (y[k] - fit);
    }
    const double s2 = sse / static_cast<double>(n - p);
    for (std::size_t r = 0; r < p; ++r) out.se.push_back(std::sqrt(s2 * a[r][p + r]));
    return out;
}

}  // namespace

// --- projection ----------------------------------------------------------------------

TEST(Project, Examples) {
    const Trajectory t{"A", {0, 1, 2}, {{1, 1}, {1, 0}, {-2, 3}}};
    const auto s0 = project(t, 0.0);
    EXPECT_EQ(s0.values, (std::vector<double>{1, 1, -2}));
    EXPECT_NEAR(project(t, 45.0).values[0], std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(project(t, 135.0).values[1], -1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(project(t, 200.0).theta, 20.0);
    EXPECT_EQ(project(t, -45.0).theta, 135.0);
    EXPECT_THROW((void)project(t, NAN), InputError);
}

TEST(Project, MuOverRootTwoAt45) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> z;
    Trajectory t{"A", {}, {}};
    for (int k = 0; k < 20; ++k) {
        t.times.push_back(k);
        t.points.push_back({z(gen), z(gen)});
    }
    const auto s = project(t, 45.0);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(s.values[k], to_eigen(t.points[k]).mu / std::sqrt(2.0), 1e-14);
}

TEST(Project, Linearity) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 20; ++rep) {
        Trajectory a{"a", {}, {}}, b{"b", {}, {}}, sum{"s", {}, {}};
        for (int k = 0; k < 10; ++k) {
            const PhasePoint pa{z(gen), z(gen)}, pb{z(gen), z(gen)};
            for (auto* t : {&a, &b, &sum}) t->times.push_back(k);
            a.points.push_back(pa);
            b.points.push_back(pb);
            sum.points.push_back({pa.e + pb.e, pa.i + pb.i});
        }
        const double theta = 180.0 * std::uniform_real_distribution<double>(0, 1)(gen);
        const auto pa = project(a, theta), pb = project(b, theta), ps = project(sum, theta);
        for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(ps.values[k], pa.values[k] + pb.values[k], 1e-12);
    }
}

// --- relaxation fit ---------------------------------------------------------------------

TEST(FitRelaxation, ExactSeries) {
    const auto f = fit_relaxation(exponential(2.0, 3.0, 10.0));
    EXPECT_EQ(f.status, FitStatus::Converged);
    EXPECT_NEAR(f.tau, 10.0, 1e-6);
    EXPECT_NEAR(f.amplitude, 3.0, 1e-6);
    EXPECT_NEAR(f.offset, 2.0, 1e-6);
    EXPECT_LT(f.p_value, 1e-6);
    EXPECT_TRUE(f.sound(0.1));
    EXPECT_EQ(f.n, 21u);
}

TEST(FitRelaxation, ExactRecoveryAcrossTimeConstants) {
    for (double tau : {2.0, 5.0, 10.0, 30.0})
        for (double amp : {-1.5, 0.7, 4.0}) {
            const auto f = fit_relaxation(exponential(-0.3, amp, tau, 21, 1996.0));
            EXPECT_EQ(f.status, FitStatus::Converged) << tau << " " << amp;
            EXPECT_NEAR(f.tau / tau, 1.0, 1e-6) << tau << " " << amp;
        }
}

TEST(FitRelaxation, ConstantSeriesIsUnsound) {
    const auto f = fit_relaxation(series({0, 1, 2, 3, 4, 5}, {2, 2, 2, 2, 2, 2}));
    EXPECT_FALSE(f.sound(0.1));
    EXPECT_NEAR(f.amplitude, 0.0, 1e-12);
    EXPECT_NEAR(f.p_value, 1.0, 1e-12);
}

TEST(FitRelaxation, LinearTrendHitsTheBound) {
    std::vector<double> t, v;
    for (int k = 0; k < 21; ++k) {
        t.push_back(k);
        v.push_back(0.1 * k);
    }
    const auto f = fit_relaxation(series(t, v));
    EXPECT_NE(f.status, FitStatus::Converged);
    EXPECT_FALSE(f.sound(1.0));
}

TEST(FitRelaxation, Errors) {
    EXPECT_THROW((void)fit_relaxation(series({0, 1, 2, 3}, {4, 3, 2, 1})), InputError);
    FitOptions bad;
    bad.tau_min = 5.0;
    bad.tau_max = 1.0;
    EXPECT_THROW((void)fit_relaxation(exponential(0, 1, 3), bad), InputError);
}

TEST(FitRelaxation, MonteCarloOnSimulatedPanels) {
    const SystemParams p{0.5, 0.2, 1.0};
    const std::vector<CohortMember> member{{"AAA", p, {0, 0}, {3.0, 3.0}}};
    int within = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto sim = simulate_panel(member, 21, {0.05, seed});
        const auto traj = trajectories_from_panel(join_panels(sim.e, sim.i)).front();
        const auto f = fit_relaxation(project(traj, 45.0));
        if (std::isfinite(f.tau) && std::abs(f.tau - 10.0) <= 2.0) ++within;
    }
    RecordProperty("within", within);
    EXPECT_GE(within, 80);
}

// --- screening -------------------------------------------------------------------------

TEST(ScreenAndAggregate, Mean) {
    std::vector<FitResult> fits;
    const std::array<double, 11> taus{3.0, 4.5, 6.0, 7.5, 9.0, 10.5, 12.0, 13.5, 15.0, 16.5, 18.0};
    for (double t : taus) fits.push_back(fake_fit(t, 0.01));
    const auto a = screen_and_aggregate(fits);
    EXPECT_NEAR(a.mean_tau, 10.5, 1e-12);
    EXPECT_EQ(a.n, 11u);
    EXPECT_NEAR(a.sigma, std::sqrt(1.5 * 1.5 * 11.0), 1e-12);  // sample sd of an arithmetic sequence
}

TEST(ScreenAndAggregate, EmptySurvivors) {
    const std::vector<FitResult> fits(5, fake_fit(5.0, 0.5));
    EXPECT_THROW((void)screen_and_aggregate(fits), EstimationError);
}

TEST(ScreenAndAggregate, HandCountAndMonotonicity) {
    const std::vector<FitResult> fits{fake_fit(5, 0.01),  fake_fit(6, 0.09),  fake_fit(7, 0.1),
                                      fake_fit(8, 0.2),   fake_fit(9, 0.001, FitStatus::TauAtBound),
                                      fake_fit(NAN, 0.0), fake_fit(4, 0.05, FitStatus::NotConverged),
                                      fake_fit(3, 0.099)};
    const auto a = screen_and_aggregate(fits, 0.1);
    EXPECT_EQ(a.n, 3u);  // tau 5, 6 and 3
    EXPECT_NEAR(a.mean_tau, 14.0 / 3.0, 1e-12);
    EXPECT_EQ(screen_and_aggregate(fits, 1.0).n, 5u);
    std::size_t prev = 0;
    for (double thr = 0.005; thr <= 1.0; thr += 0.005) {
        std::size_t n = 0;
        try {
            n = screen_and_aggregate(fits, thr).n;
        } catch (const EstimationError&) {
        }
        EXPECT_GE(n, prev);
        prev = n;
    }
}

// --- angular scan -------------------------------------------------------------------------

TEST(FitParabola, ExactAndFlat) {
    std::vector<double> x, y;
    for (int k = 0; k <= 18; ++k) {
        x.push_back(5.0 * k);
        y.push_back(-0.02 * (x.back() - 40.0) * (x.back() - 40.0) + 100.0);
    }
    const auto f = fit_parabola(x, y);
    EXPECT_NEAR(f.a, -0.02, 1e-12);
    EXPECT_NEAR(-f.b / (2 * f.a), 40.0, 1e-9);
    EXPECT_LT(f.p_value, 1e-12);
    const std::vector<double> flat(x.size(), 3.0);
    EXPECT_EQ(fit_parabola(x, flat).p_value, 1.0);
}

TEST(AngularScan, EqualDissipationPeaksAt45) {
    const auto trajs = cohort_trajectories({0.5, 0.2, 1.0}, 50, 0.03, 1);
    const auto scan = angular_scan(trajs);
    EXPECT_EQ(scan.thetas.size(), 19u);
    EXPECT_NEAR(scan.theta_star, 45.0, 10.0);
    EXPECT_LT(scan.a, 0.0);
    for (int c : scan.counts) {
        EXPECT_GE(c, 0);
        EXPECT_LE(c, 100);
    }
}

TEST(AngularScan, UnequalDissipationShiftsTowardTheSlowAxis) {
    const SystemParams p{0.5, 0.2, 2.0};
    const double axis = eigen_general(p).axis_angle;
    ASSERT_NEAR(axis, 22.5, 1e-9);
    for (std::uint64_t seed : {1, 2, 3}) EXPECT_LT(angular_scan(cohort_trajectories(p, 50, 0.03, seed)).theta_star, 45.0);
}

TEST(AngularScan, Errors) {
    const auto trajs = cohort_trajectories({0.5, 0.2, 1.0}, 5, 0.03, 3);
    EXPECT_THROW((void)angular_scan(trajs, {45.0}), InputError);
    EXPECT_THROW((void)angular_scan(trajs, {0.0, 10.0, 5.0, 20.0}), InputError);
    EXPECT_THROW((void)angular_scan(std::span<const Trajectory>(trajs.data(), 1)), InputError);
    // entities that never move: nothing relaxes at any angle
    std::vector<Trajectory> still;
    for (int k = 0; k < 10; ++k) {
        Trajectory t{entity_code(static_cast<std::size_t>(k)), {}, {}};
        for (int y = 0; y < 21; ++y) {
            t.times.push_back(1996 + y);
            t.points.push_back({0.1 * k, -0.2 * k});
        }
        still.push_back(t);
    }
    EXPECT_THROW((void)angular_scan(still), EstimationError);
}

// --- variance ratio and principal axis ---------------------------------------------------------

TEST(VarianceRatio, Examples) {
    const EntityAverages diagonal{{"A", 1, 1, 1}, {"B", 2, 2, 1}, {"C", -1, -1, 1}};
    EXPECT_THROW((void)empirical_variance_ratio(diagonal), EstimationError);

    const auto aniso = empirical_variance_ratio(cloud(45.0, 3.0, 1.0, 1000, 4));
    EXPECT_NEAR(aniso.ratio, 9.0, 0.8);
    ASSERT_TRUE(aniso.alpha_inferred.has_value());
    EXPECT_NEAR(*aniso.alpha_inferred, 0.5, 0.03);

    const auto iso = empirical_variance_ratio(cloud(0.0, 1.0, 1.0, 1000, 5));
    EXPECT_NEAR(iso.ratio, 1.0, 0.15);
    EXPECT_THROW((void)empirical_variance_ratio(EntityAverages{{"A", 1, 0, 1}, {"B", 0, 1, 1}}), InputError);
}

TEST(Pca2, Examples) {
    const auto a = pca2(cloud(45.0, 3.0, 1.0, 1000, 6));
    EXPECT_NEAR(a.angle, 45.0, 3.0);
    EXPECT_NEAR(a.variance_share, 0.9, 0.02);
    EXPECT_FALSE(a.weakly_determined);

    const auto iso = pca2(cloud(0.0, 1.0, 1.0, 1000, 7));
    EXPECT_NEAR(iso.variance_share, 0.5, 0.05);
    EXPECT_TRUE(iso.weakly_determined);

    const auto two = pca2(EntityAverages{{"A", 1, 2, 1}, {"B", -1, -2, 1}});
    EXPECT_EQ(two.variance_share, 1.0);
    EXPECT_NEAR(two.angle, std::atan2(2.0, 1.0) * 180.0 / std::numbers::pi, 1e-12);
    EXPECT_THROW((void)pca2(EntityAverages{{"A", 1, 1, 1}, {"B", 1, 1, 1}}), EstimationError);
}

TEST(Pca2, ShareMatchesVarianceRatioOn45DegreeData) {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const auto avgs = cloud(45.0, 2.0 + seed % 3, 0.7, 200, seed, true);
        const double r = empirical_variance_ratio(avgs).ratio;
        const auto pa = pca2(avgs);
        EXPECT_NEAR(pa.angle, 45.0, 1e-8);
        EXPECT_NEAR(pa.variance_share, r / (1.0 + r), 1e-10);
    }
}

// --- OLS -------------------------------------------------------------------------------------------

TEST(Ols, NoiselessPlane) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-5, 5);
    std::vector<Column> cols{{"x1", {}}, {"x2", {}}};
    std::vector<double> y;
    for (int k = 0; k < 30; ++k) {
        cols[0].values.push_back(u(gen));
        cols[1].values.push_back(u(gen));
        y.push_back(2.0 * cols[0].values.back() - 3.0 * cols[1].values.back() + 1.0);
    }
    const auto r = ols(y, cols);
    EXPECT_EQ(r.names, (std::vector<std::string>{"intercept", "x1", "x2"}));
    EXPECT_NEAR(r.coefficient("intercept"), 1.0, 1e-10);
    EXPECT_NEAR(r.coefficient("x1"), 2.0, 1e-10);
    EXPECT_NEAR(r.coefficient("x2"), -3.0, 1e-10);
    EXPECT_NEAR(r.r_squared, 1.0, 1e-10);
}

TEST(Ols, SixPointOracle) {
    const std::vector<double> x1{1, 2, 3, 4, 5, 6}, x2{2, 1, 4, 3, 6, 5}, y{1.3, 0.4, 4.9, 3.1, 7.7, 5.2};
    const std::vector<Column> cols{{"x1", x1}, {"x2", x2}};
    const auto r = ols(y, cols);

    std::vector<std::vector<double>> design;
    for (std::size_t k = 0; k < y.size(); ++k) design.push_back({1.0, x1[k], x2[k]});
    const auto ne = normal_equations(design, y);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(r.coefficients[k], ne.beta[k], 1e-10);
        EXPECT_NEAR(r.std_errors[k], ne.se[k], 1e-10);
    }
    // frozen reference values from an independent statistics package
    EXPECT_NEAR(r.coefficients[0], -1.1333333333333395, 1e-10);
    EXPECT_NEAR(r.coefficients[1], -0.1666666666666653, 1e-10);
    EXPECT_NEAR(r.coefficients[2], 1.5666666666666669, 1e-10);
    EXPECT_NEAR(r.std_errors[2], 0.22139603362233864, 1e-10);
    EXPECT_NEAR(r.p_values[0], 0.10856664256283191, 1e-10);
    EXPECT_NEAR(r.p_values[2], 0.005803321270280538, 1e-10);
    EXPECT_NEAR(r.r_squared, 0.9780039992728595, 1e-10);
    EXPECT_NEAR(r.sigma2, 0.2688888888888889, 1e-10);
    EXPECT_EQ(r.n, 6u);
    EXPECT_EQ(r.dof, 3u);
}

TEST(Ols, RescalingInvariance) {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> z;
    std::vector<Column> cols{{"a", {}}, {"b", {}}};
    std::vector<double> y;
    for (int k = 0; k < 40; ++k) {
        cols[0].values.push_back(z(gen));
        cols[1].values.push_back(z(gen));
        y.push_back(0.5 * cols[0].values.back() + 0.2 * cols[1].values.back() + z(gen));
    }
    const auto base = ols(y, cols);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
        auto scaled = cols;
        for (auto& v : scaled[0].values) v *= c;
        const auto r = ols(y, scaled);
        EXPECT_NEAR(r.coefficient("a") * c, base.coefficient("a"), 1e-10);
        EXPECT_NEAR(r.p_value("a"), base.p_value("a"), 1e-10);
        EXPECT_NEAR(r.r_squared, base.r_squared, 1e-10);
    }
}

TEST(Ols, Errors) {
    const std::vector<double> y{1, 2, 3, 4};
    const std::vector<Column> dup{{"a", {1, 2, 3, 5}}, {"b", {2, 4, 6, 10}}};
    EXPECT_THROW((void)ols(y, dup), RankDeficiencyError);
    const std::vector<Column> too_many{{"a", {1, 2, 3, 5}}, {"b", {0, 1, 0, 2}}, {"c", {1, 1, 0, 0}}};
    EXPECT_THROW((void)ols(y, too_many), InputError);
    const std::vector<Column> short_col{{"a", {1, 2}}};
    EXPECT_THROW((void)ols(y, short_col), InputError);
}

TEST(ExplainedShares, OrthogonalCovariatesSumToRSquared) {
    // centred, mutually orthogonal columns
    const std::vector<Column> cols{{"a", {1, -1, 1, -1, 1, -1, 1, -1}}, {"b", {1, 1, -1, -1, 1, 1, -1, -1}}};
    const std::vector<double> y{3.1, 0.9, 1.2, -1.1, 2.8, 1.3, 0.7, -0.8};
    const auto shares = explained_shares(y, cols);
    EXPECT_NEAR(shares[0] + shares[1], ols(y, cols).r_squared, 1e-12);
}

namespace {

CovariateTable covariate_table(const std::vector<std::string>& entities, const std::vector<double>& t,
                               const std::vector<double>& h) {
    CovariateTable c;
    c.names = {"t_star", "h"};
    for (std::size_t k = 0; k < entities.size(); ++k) c.rows[entities[k]] = {t[k], h[k]};
    return c;
}

}  // namespace

TEST(RegressMuKappa, ExactMuAndNoiseKappa) {
    Rng rng(12);
    std::vector<std::string> ents;
    std::vector<double> t, h;
    EntityAverages avgs;
    for (int k = 0; k < 120; ++k) {
        ents.push_back(entity_code(static_cast<std::size_t>(k)));
        t.push_back(rng.normal(15.0, 5.0));
        h.push_back(rng.uniform(0.0, 3.0));
        const double mu = -0.15 * t.back() - 1.5 * h.back() + 2.0;
        const double kappa = rng.normal(0.0, 0.3);
        avgs.push_back({ents.back(), (mu - kappa) / 2.0, (mu + kappa) / 2.0, 21});
    }
    auto cov = covariate_table(ents, t, h);
    cov.rows[ents[3]][1].reset();
    avgs.push_back({"ZZZ", 0.0, 0.0, 1});  // no covariates at all

    const auto reg = regress_mu_kappa(avgs, cov);
    EXPECT_EQ(reg.n_dropped, 2u);
    EXPECT_EQ(reg.entities.size(), 119u);
    EXPECT_NEAR(reg.mu_model.r_squared, 1.0, 1e-10);
    EXPECT_NEAR(reg.mu_model.coefficient("t_star"), -0.15, 1e-10);
    EXPECT_NEAR(reg.mu_model.coefficient("h"), -1.5, 1e-10);
    EXPECT_LT(reg.kappa_model.r_squared, 0.1);
    EXPECT_EQ(reg.mu_shares.size(), 2u);

    const auto only_h = regress_mu_kappa(avgs, cov, {"h"});
    EXPECT_EQ(only_h.mu_model.names.size(), 2u);
}

TEST(QuadraticTermCheck, LinearAndQuadraticTruths) {
    Rng rng(13);
    std::vector<std::string> ents;
    std::vector<double> x, h;
    EntityAverages lin, quad;
    for (int k = 0; k < 80; ++k) {
        ents.push_back(entity_code(static_cast<std::size_t>(k)));
        x.push_back(rng.uniform(-3.0, 3.0));
        h.push_back(0.0);
        const double noise = rng.normal(0.0, 0.2);
        const double mu_lin = 1.0 + 0.8 * x.back() + noise;
        const double mu_quad = x.back() * x.back() + noise;
        lin.push_back({ents.back(), mu_lin / 2.0, mu_lin / 2.0, 1});
        quad.push_back({ents.back(), mu_quad / 2.0, mu_quad / 2.0, 1});
    }
    const auto cov = covariate_table(ents, x, h);
    const auto rl = quadratic_term_check(lin, cov, "t_star");
    EXPECT_LT(std::abs(rl.coefficient("t_star^2")), 2.0 * rl.std_errors[rl.index("t_star^2")]);
    const auto rq = quadratic_term_check(quad, cov, "t_star");
    EXPECT_LT(rq.p_value("t_star^2"), 0.01);
}

// --- serialization -----------------------------------------------------------------------------------

TEST(Serialize, StableKeys) {
    DeltaEstimate d;
    d.delta = 0.00135;
    d.std_error = 0.00045;
    d.n_pairs = 486;
    const json j = to_json(d);
    for (const char* key : {"delta", "stderr", "n_pairs", "half_life_years"}) EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_NEAR(j["half_life_years"].get<double>(), 513.0957, 1e-3);

    const json f = to_json(fake_fit(NAN, 1.0, FitStatus::Degenerate));
    EXPECT_TRUE(f["tau"].is_null());
    EXPECT_EQ(f["status"], "degenerate");

    AngularScan s;
    s.thetas = {0, 45};
    s.counts = {1, 2};
    const json sj = to_json(s);
    for (const char* key : {"thetas", "counts", "parabola", "theta_star", "fit_p_value"}) EXPECT_TRUE(sj.contains(key));
}
