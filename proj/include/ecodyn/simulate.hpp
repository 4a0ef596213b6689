#pragma once

// Propagation of the stable and unconstrained systems, streamline fields for
// phase portraits, and the seeded synthetic-panel generator.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ecodyn/error.hpp"
#include "ecodyn/io.hpp"
#include "ecodyn/model.hpp"
#include "ecodyn/panel.hpp"
#include "ecodyn/rng.hpp"

namespace ecodyn {

[[nodiscard]] constexpr PhaseVelocity derivative(const SystemParams& p, const ForcingTerms& forcing,
                                                 PhasePoint x) noexcept {
    return {p.lambda * (-x.e + p.alpha * x.i) + forcing.f, p.lambda * (p.alpha * x.e - p.gamma * x.i) + forcing.g};
}

/// The drag-free system: institutions beget growth, growth begets institutions.
[[nodiscard]] constexpr PhaseVelocity derivative_unconstrained(double alpha, const ForcingTerms& forcing,
                                                               PhasePoint x) noexcept {
    return {alpha * x.i + forcing.f, alpha * x.e + forcing.g};
}

template <class F>
concept VectorField = requires(const F& field, PhasePoint x) {
    { field(x) } -> std::convertible_to<PhaseVelocity>;
};

struct StableSystem {
    SystemParams params;
    ForcingTerms forcing;

    [[nodiscard]] PhaseVelocity operator()(PhasePoint x) const noexcept { return derivative(params, forcing, x); }
    [[nodiscard]] std::optional<PhasePoint> equilibrium() const { return fixed_point(params, forcing).point(); }
};

struct UnconstrainedSystem {
    double alpha = 0.5;
    ForcingTerms forcing;

    [[nodiscard]] PhaseVelocity operator()(PhasePoint x) const noexcept {
        return derivative_unconstrained(alpha, forcing, x);
    }
    /// The saddle point, when alpha > 0.
    [[nodiscard]] std::optional<PhasePoint> equilibrium() const {
        if (alpha == 0.0) return std::nullopt;
        return PhasePoint{-forcing.g / alpha, -forcing.f / alpha};
    }
};

/// Exact solution of the stable linear system after `dt` years.
[[nodiscard]] inline PhasePoint propagate_closed_form(const SystemParams& p, const ForcingTerms& forcing, PhasePoint x0,
                                                      double dt) {
    detail::require_stable(p);
    if (!std::isfinite(dt) || dt < 0.0) throw InputError("dt must be finite and >= 0");
    if (dt == 0.0) return x0;
    const FixedPoint fp = fixed_point(p, forcing);

    if (p.gamma == 1.0) {
        const TimeConstants tc = time_constants(p);
        const EigenCoords c = to_eigen(x0);
        return from_eigen({fp.mu0 + (c.mu - fp.mu0) * std::exp(-dt / tc.tau_mu),
                           fp.kappa0 + (c.kappa - fp.kappa0) * std::exp(-dt / tc.tau_kappa)});
    }

    // The system matrix is symmetric, so the eigenbasis is orthonormal.
    const EigenSolution eig = eigen_general(p);
    const double th = eig.axis_angle * std::numbers::pi / 180.0;
    const double ue = std::cos(th), ui = std::sin(th);
    const double de = x0.e - fp.e0, di = x0.i - fp.i0;
    const double slow = (de * ue + di * ui) * std::exp(eig.eigenvalue_mu * dt);
    const double fast = (-de * ui + di * ue) * std::exp(eig.eigenvalue_kappa * dt);
    return {fp.e0 + slow * ue - fast * ui, fp.i0 + slow * ui + fast * ue};
}

struct Trajectory {
    std::string entity_id;
    std::vector<double> times;
    std::vector<PhasePoint> points;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

/// Throws InputError unless the trajectory has >= 2 finite points at strictly increasing times.
inline void validate(const Trajectory& t) {
    if (t.times.size() != t.points.size()) throw InputError("trajectory times and points differ in length");
    if (t.points.size() < 2) throw InputError("trajectory '" + t.entity_id + "' has fewer than 2 points");
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        if (!std::isfinite(t.times[k]) || !std::isfinite(t.points[k].e) || !std::isfinite(t.points[k].i))
            throw InputError("trajectory '" + t.entity_id + "' has a non-finite entry");
        if (k > 0 && !(t.times[k] > t.times[k - 1]))
            throw InputError("trajectory '" + t.entity_id + "' times are not strictly increasing");
    }
}

template <VectorField F>
[[nodiscard]] PhasePoint rk4_step(const F& field, PhasePoint x, double h) {
    const PhaseVelocity k1 = field(x);
    const PhaseVelocity k2 = field({x.e + 0.5 * h * k1.de_dt, x.i + 0.5 * h * k1.di_dt});
    const PhaseVelocity k3 = field({x.e + 0.5 * h * k2.de_dt, x.i + 0.5 * h * k2.di_dt});
    const PhaseVelocity k4 = field({x.e + h * k3.de_dt, x.i + h * k3.di_dt});
    return {x.e + h / 6.0 * (k1.de_dt + 2.0 * (k2.de_dt + k3.de_dt) + k4.de_dt),
            x.i + h / 6.0 * (k1.di_dt + 2.0 * (k2.di_dt + k3.di_dt) + k4.di_dt)};
}

/// Classical RK4 over [0, dt_total] with ceil(dt_total / step) equal steps.
template <VectorField F>
[[nodiscard]] Trajectory integrate_rk4(const F& field, PhasePoint x0, double dt_total, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw InputError("step must be > 0");
    if (!(dt_total > 0.0) || !std::isfinite(dt_total)) throw InputError("dt_total must be > 0");
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(dt_total / step - 1e-9)));
    const double h = dt_total / static_cast<double>(n);

    Trajectory traj;
    traj.times.reserve(n + 1);
    traj.points.reserve(n + 1);
    traj.times.push_back(0.0);
    traj.points.push_back(x0);
    PhasePoint x = x0;
    for (std::size_t k = 1; k <= n; ++k) {
        x = rk4_step(field, x, h);
        if (!std::isfinite(x.e) || !std::isfinite(x.i))
            throw DivergenceError("integration diverged at t=" + std::to_string(h * static_cast<double>(k)));
        traj.times.push_back(k == n ? dt_total : h * static_cast<double>(k));
        traj.points.push_back(x);
    }
    return traj;
}

[[nodiscard]] inline Trajectory integrate_rk4(const SystemParams& p, const ForcingTerms& forcing, PhasePoint x0,
                                              double dt_total, double step = 0.05) {
    validate(p);
    return integrate_rk4(StableSystem{p, forcing}, x0, dt_total, step);
}

// --- streamlines ---------------------------------------------------------------

struct GridSpec {
    double e_min = -3.0;
    double e_max = 3.0;
    double i_min = -3.0;
    double i_max = 3.0;
    int n_e = 10;  ///< seeds along E
    int n_i = 10;  ///< seeds along I

    [[nodiscard]] bool contains(PhasePoint x) const noexcept {
        return x.e >= e_min && x.e <= e_max && x.i >= i_min && x.i <= i_max;
    }
};

inline void validate(const GridSpec& g) {
    if (!(g.e_max > g.e_min) || !(g.i_max > g.i_min) || !std::isfinite(g.e_min) || !std::isfinite(g.e_max) ||
        !std::isfinite(g.i_min) || !std::isfinite(g.i_max))
        throw InputError("grid bounds must be finite with max > min");
    if (g.n_e < 1 || g.n_i < 1) throw InputError("grid needs at least one seed per axis");
}

/// Cell-centred seeds, row-major in I then E.
[[nodiscard]] inline std::vector<PhasePoint> grid_seeds(const GridSpec& g) {
    validate(g);
    std::vector<PhasePoint> seeds;
    seeds.reserve(static_cast<std::size_t>(g.n_e) * static_cast<std::size_t>(g.n_i));
    const double de = (g.e_max - g.e_min) / g.n_e;
    const double di = (g.i_max - g.i_min) / g.n_i;
    for (int r = 0; r < g.n_i; ++r)
        for (int c = 0; c < g.n_e; ++c) seeds.push_back({g.e_min + (c + 0.5) * de, g.i_min + (r + 0.5) * di});
    return seeds;
}

struct StreamlineOptions {
    double step = 0.05;
    std::size_t max_steps = 100000;
    double arrival_tol = 1e-3;
};

enum class StreamlineEnd { ReachedFixedPoint, ExitedBounds, MaxSteps };

struct Streamline {
    std::vector<double> times;
    std::vector<PhasePoint> points;
    StreamlineEnd end = StreamlineEnd::MaxSteps;
};

struct StreamlineField {
    GridSpec grid;
    std::optional<PhasePoint> fixed_point;
    std::vector<Streamline> lines;
};

/// Forward RK4 from `seed` until the point leaves the grid bounds, comes within
/// `arrival_tol` of the equilibrium, or runs out of steps.
template <VectorField F>
[[nodiscard]] Streamline trace_streamline(const F& field, std::optional<PhasePoint> target, PhasePoint seed,
                                          const GridSpec& grid, const StreamlineOptions& opt = {}) {
    const auto arrived = [&](PhasePoint x) {
        return target && std::hypot(x.e - target->e, x.i - target->i) < opt.arrival_tol;
    };
    Streamline line;
    line.times.push_back(0.0);
    line.points.push_back(seed);
    if (arrived(seed)) {
        line.end = StreamlineEnd::ReachedFixedPoint;
        return line;
    }
    PhasePoint x = seed;
    for (std::size_t k = 1; k <= opt.max_steps; ++k) {
        x = rk4_step(field, x, opt.step);
        if (!std::isfinite(x.e) || !std::isfinite(x.i)) {
            line.end = StreamlineEnd::ExitedBounds;
            return line;
        }
        line.times.push_back(opt.step * static_cast<double>(k));
        line.points.push_back(x);
        if (!grid.contains(x)) {
            line.end = StreamlineEnd::ExitedBounds;
            return line;
        }
        if (arrived(x)) {
            line.end = StreamlineEnd::ReachedFixedPoint;
            return line;
        }
    }
    line.end = StreamlineEnd::MaxSteps;
    return line;
}

template <VectorField F>
    requires requires(const F& f) { { f.equilibrium() } -> std::convertible_to<std::optional<PhasePoint>>; }
[[nodiscard]] StreamlineField streamlines(const F& system, const GridSpec& grid, const StreamlineOptions& opt = {}) {
    if (!(opt.step > 0.0) || opt.max_steps == 0) throw InputError("streamline step must be > 0 and max_steps >= 1");
    StreamlineField field;
    field.grid = grid;
    field.fixed_point = system.equilibrium();
    for (const PhasePoint& seed : grid_seeds(grid))
        field.lines.push_back(trace_streamline(system, field.fixed_point, seed, grid, opt));
    return field;
}

/// One row per vertex: polyline_id, t, e, i.
inline void write_streamlines_csv(std::ostream& out, const StreamlineField& field) {
    out << "polyline_id,t,e,i\n";
    for (std::size_t k = 0; k < field.lines.size(); ++k) {
        const auto& l = field.lines[k];
        for (std::size_t v = 0; v < l.points.size(); ++v)
            out << k << ',' << io::format_double(l.times[v]) << ',' << io::format_double(l.points[v].e) << ','
                << io::format_double(l.points[v].i) << '\n';
    }
}

inline void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajs) {
    out << "polyline_id,t,e,i\n";
    for (const auto& t : trajs)
        for (std::size_t v = 0; v < t.points.size(); ++v)
            out << t.entity_id << ',' << io::format_double(t.times[v]) << ',' << io::format_double(t.points[v].e)
                << ',' << io::format_double(t.points[v].i) << '\n';
}

struct SvgOptions {
    int width = 600;
    int height = 600;
    double min_vertex_px = 1.0;  ///< vertices closer than this to the last kept one are dropped
    std::string title;
};

/// Standalone SVG: frame, E/I axes through the origin, streamlines, equilibrium marker.
[[nodiscard]] inline std::string render_svg(const StreamlineField& field, const SvgOptions& opt = {}) {
    const GridSpec& g = field.grid;
    const double margin = 40.0;
    const double w = opt.width - 2 * margin;
    const double h = opt.height - 2 * margin;
    const auto px = [&](PhasePoint x) {
        return std::pair{margin + (x.e - g.e_min) / (g.e_max - g.e_min) * w,
                         margin + (g.i_max - x.i) / (g.i_max - g.i_min) * h};
    };
    const auto num = [](double v) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(1);
        s << v;
        return s.str();
    };

    std::ostringstream svg;
    svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << opt.width << R"(" height=")" << opt.height
        << R"(" viewBox="0 0 )" << opt.width << ' ' << opt.height << R"(">)" << '\n';
    svg << R"(<rect x="0" y="0" width=")" << opt.width << R"(" height=")" << opt.height << R"(" fill="white"/>)" << '\n';
    svg << R"(<rect x=")" << margin << R"(" y=")" << margin << R"(" width=")" << w << R"(" height=")" << h
        << R"(" fill="none" stroke="#444" stroke-width="1"/>)" << '\n';
    if (g.e_min <= 0.0 && g.e_max >= 0.0) {
        const auto [x0, y0] = px({0.0, g.i_min});
        const auto [x1, y1] = px({0.0, g.i_max});
        svg << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y1)
            << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    if (g.i_min <= 0.0 && g.i_max >= 0.0) {
        const auto [x0, y0] = px({g.e_min, 0.0});
        const auto [x1, y1] = px({g.e_max, 0.0});
        svg << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y1)
            << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    svg << "<text x=\"" << num(margin + w / 2) << "\" y=\"" << num(opt.height - 10.0)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">E</text>\n";
    svg << "<text x=\"14\" y=\"" << num(margin + h / 2)
        << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">I</text>\n";
    if (!opt.title.empty())
        svg << "<text x=\"" << num(margin + w / 2) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" "
            << "text-anchor=\"middle\">" << opt.title << "</text>\n";

    for (const auto& line : field.lines) {
        std::ostringstream pts;
        double lx = 0.0, ly = 0.0;
        std::size_t kept = 0;
        for (std::size_t v = 0; v < line.points.size(); ++v) {
            const PhasePoint x{std::clamp(line.points[v].e, g.e_min, g.e_max),
                               std::clamp(line.points[v].i, g.i_min, g.i_max)};
            const auto [sx, sy] = px(x);
            const bool last = v + 1 == line.points.size();
            if (kept > 0 && !last && std::hypot(sx - lx, sy - ly) < opt.min_vertex_px) continue;
            pts << (kept ? " " : "") << num(sx) << ',' << num(sy);
            lx = sx;
            ly = sy;
            ++kept;
        }
        if (kept < 2) continue;
        svg << R"(<polyline fill="none" stroke="#1f5fa8" stroke-width="1" points=")" << pts.str() << "\"/>\n";
    }
    if (field.fixed_point && g.contains(*field.fixed_point)) {
        const auto [fx, fy] = px(*field.fixed_point);
        svg << "<circle cx=\"" << num(fx) << "\" cy=\"" << num(fy) << "\" r=\"4\" fill=\"#c0392b\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// --- synthetic panels ----------------------------------------------------------------

struct NoiseSpec {
    double sigma = 0.0;  ///< per-sqrt(year) standard deviation, applied independently to E and I
    std::uint64_t seed = 0;
};

struct CohortMember {
    std::string entity;
    SystemParams params;
    ForcingTerms forcing;
    PhasePoint initial;
};

struct PanelSimOptions {
    int start_year = 1996;
    int substeps = 10;  ///< Euler-Maruyama substeps per recorded year; 1 is a plain annual step
};

struct SimulatedPanels {
    PanelTable e;
    PanelTable i;
};

/// Three-letter synthetic entity code for index k: AAA, AAB, ... (longer past 26^3).
[[nodiscard]] inline std::string entity_code(std::size_t k) {
    std::string code;
    std::size_t width = 3;
    std::size_t span = 26 * 26 * 26;
    while (k >= span) {
        k -= span;
        ++width;
        span *= 26;
    }
    code.assign(width, 'A');
    for (std::size_t pos = width; pos-- > 0;) {
        code[pos] = static_cast<char>('A' + k % 26);
        k /= 26;
    }
    return code;
}

/// Euler-Maruyama integration of every cohort member, one recorded row per year.
/// Entity k draws its noise from Rng::stream(noise.seed, k).
[[nodiscard]] inline SimulatedPanels simulate_panel(std::span<const CohortMember> cohort, int years,
                                                    const NoiseSpec& noise, const PanelSimOptions& opt = {}) {
    if (years < 2) throw InputError("simulate_panel needs years >= 2");
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) throw InputError("noise sigma must be >= 0");
    if (opt.substeps < 1) throw InputError("substeps must be >= 1");
    const double h = 1.0 / opt.substeps;
    const double kick = noise.sigma * std::sqrt(h);

    std::vector<PanelRow> e_rows, i_rows;
    e_rows.reserve(cohort.size() * static_cast<std::size_t>(years));
    i_rows.reserve(e_rows.capacity());
    for (std::size_t k = 0; k < cohort.size(); ++k) {
        const CohortMember& m = cohort[k];
        validate(m.params);
        Rng rng = Rng::stream(noise.seed, k);
        PhasePoint x = m.initial;
        for (int y = 0; y < years; ++y) {
            if (y > 0) {
                for (int s = 0; s < opt.substeps; ++s) {
                    const PhaseVelocity v = derivative(m.params, m.forcing, x);
                    x.e += h * v.de_dt;
                    x.i += h * v.di_dt;
                    if (kick > 0.0) {
                        x.e += kick * rng.normal();
                        x.i += kick * rng.normal();
                    }
                }
                if (!std::isfinite(x.e) || !std::isfinite(x.i))
                    throw DivergenceError("simulation of '" + m.entity + "' diverged");
            }
            e_rows.push_back({m.entity, opt.start_year + y, x.e});
            i_rows.push_back({m.entity, opt.start_year + y, x.i});
        }
    }
    return {PanelTable(std::move(e_rows)), PanelTable(std::move(i_rows))};
}

/// Recipe for a synthetic cohort sharing one SystemParams.
struct CohortSpec {
    std::size_t n_entities = 200;
    double sd_mu0 = 1.0;         ///< spread of equilibria along mu = I + E
    double sd_kappa0 = 1.0 / 3;  ///< spread of equilibria along kappa = I - E
    double offset_sd = 3.0;      ///< initial displacement along each eigenvector (unit-vector coordinates)
};

/// Draws equilibria, derives the forcing that places each one, and displaces the
/// starting state along the system's eigenvectors.
[[nodiscard]] inline std::vector<CohortMember> make_cohort(const SystemParams& p, const CohortSpec& shape,
                                                           std::uint64_t seed) {
    detail::require_stable(p);
    if (shape.sd_mu0 < 0.0 || shape.sd_kappa0 < 0.0 || shape.offset_sd < 0.0)
        throw InputError("cohort spreads must be >= 0");
    const EigenSolution eig = eigen_general(p);
    const double th = eig.axis_angle * std::numbers::pi / 180.0;
    const double ue = std::cos(th), ui = std::sin(th);

    std::vector<CohortMember> cohort;
    cohort.reserve(shape.n_entities);
    for (std::size_t k = 0; k < shape.n_entities; ++k) {
        Rng rng = Rng::stream(splitmix64(seed ^ 0x636f686f7274ULL), k);
        const double mu0 = rng.normal(0.0, shape.sd_mu0);
        const double kappa0 = rng.normal(0.0, shape.sd_kappa0);
        const PhasePoint eq = from_eigen({mu0, kappa0});
        // forcing that makes `eq` the fixed point
        const ForcingTerms forcing{-p.lambda * (-eq.e + p.alpha * eq.i), -p.lambda * (p.alpha * eq.e - p.gamma * eq.i)};
        const double slow = rng.normal(0.0, shape.offset_sd);
        const double fast = rng.normal(0.0, shape.offset_sd);
        const PhasePoint start{eq.e + slow * ue - fast * ui, eq.i + slow * ui + fast * ue};
        cohort.push_back({entity_code(k), p, forcing, start});
    }
    return cohort;
}

/// Groups a joined panel into one trajectory per entity (times are years).
/// Entities with a single observation are dropped.
[[nodiscard]] inline std::vector<Trajectory> trajectories_from_panel(const JoinedPanel& j) {
    std::vector<Trajectory> out;
    for (const auto& r : j) {
        if (out.empty() || out.back().entity_id != r.entity) out.push_back({r.entity, {}, {}});
        out.back().times.push_back(static_cast<double>(r.year));
        out.back().points.push_back({r.e, r.i});
    }
    std::erase_if(out, [](const Trajectory& t) { return t.size() < 2; });
    return out;
}

}  // namespace ecodyn
