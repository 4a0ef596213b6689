#pragma once

// Closed-form mathematics of the coupled institutions/economy system
//
//   dE/dt = lambda * (-E + alpha * I) + f
//   dI/dt = lambda * (alpha * E - gamma * I) + g
//
// E is economic performance, I is institutions (both in standardized score
// units). The diagonals mu = I + E and kappa = I - E are the eigen-directions
// when gamma = 1.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "ecodyn/error.hpp"

namespace ecodyn {

/// Coupling alpha (dimensionless), drag lambda (1/year) and relative
/// dissipation gamma (drag on I relative to drag on E).
///
/// The asymmetric coupling of the unscaled equations is absorbed by rescaling
/// I, so a single coupling constant is stored.
struct SystemParams {
    double alpha = 0.5;
    double lambda = 0.2;
    double gamma = 1.0;

    /// Validating constructor: lambda > 0, alpha >= 0, gamma > 0, all finite.
    static SystemParams make(double alpha, double lambda, double gamma = 1.0);

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// Per-polity constant forcing rates (1/year); no sign constraint.
struct ForcingTerms {
    double f = 0.0;
    double g = 0.0;

    friend bool operator==(const ForcingTerms&, const ForcingTerms&) = default;
};

struct PhasePoint {
    double e = 0.0;
    double i = 0.0;

    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

struct EigenCoords {
    double mu = 0.0;
    double kappa = 0.0;

    friend bool operator==(const EigenCoords&, const EigenCoords&) = default;
};

/// Time derivative of a PhasePoint.
struct PhaseVelocity {
    double de_dt = 0.0;
    double di_dt = 0.0;

    friend bool operator==(const PhaseVelocity&, const PhaseVelocity&) = default;
};

struct TimeConstants {
    double tau_mu = 0.0;
    double tau_kappa = 0.0;
};

struct EigenSolution {
    double eigenvalue_mu = 0.0;     ///< slow mode, 1/year
    double eigenvalue_kappa = 0.0;  ///< fast mode, 1/year
    double tau_mu = 0.0;
    double tau_kappa = 0.0;
    double axis_angle = 45.0;  ///< slow-mode direction in the (E, I) plane, degrees in [0, 180)
    bool degenerate = false;   ///< equal eigenvalues; axis_angle is then the 45 degree convention
};

struct FixedPoint {
    double e0 = 0.0;
    double i0 = 0.0;
    double mu0 = 0.0;
    double kappa0 = 0.0;

    [[nodiscard]] PhasePoint point() const noexcept { return {e0, i0}; }
};

/// Inverse of the time-constant relation.
struct CouplingEstimate {
    double alpha = 0.0;
    double lambda = 0.0;
};

enum class Stability { StableNode, Saddle, Marginal };

[[nodiscard]] inline std::string_view to_string(Stability s) noexcept {
    switch (s) {
        case Stability::StableNode: return "stable-node";
        case Stability::Saddle: return "saddle";
        case Stability::Marginal: return "marginal";
    }
    return "unknown";
}

inline void validate(const SystemParams& p) {
    if (!std::isfinite(p.alpha) || !std::isfinite(p.lambda) || !std::isfinite(p.gamma))
        throw InputError("system parameters must be finite");
    if (!(p.lambda > 0.0)) throw InputError("lambda must be > 0 (got " + std::to_string(p.lambda) + ")");
    if (!(p.alpha >= 0.0)) throw InputError("alpha must be >= 0 (got " + std::to_string(p.alpha) + ")");
    if (!(p.gamma > 0.0)) throw InputError("gamma must be > 0 (got " + std::to_string(p.gamma) + ")");
}

inline SystemParams SystemParams::make(double alpha, double lambda, double gamma) {
    SystemParams p{alpha, lambda, gamma};
    validate(p);
    return p;
}

[[nodiscard]] constexpr EigenCoords to_eigen(PhasePoint p) noexcept { return {p.i + p.e, p.i - p.e}; }

[[nodiscard]] constexpr PhasePoint from_eigen(EigenCoords c) noexcept {
    return {(c.mu - c.kappa) / 2.0, (c.mu + c.kappa) / 2.0};
}

/// lambda == 0 is read as "drag removed": the unconstrained system
/// dE/dt = alpha I + f, dI/dt = alpha E + g, a saddle for any alpha > 0.
[[nodiscard]] inline Stability stability_classify(const SystemParams& p) {
    if (p.lambda == 0.0) return p.alpha > 0.0 ? Stability::Saddle : Stability::Marginal;
    validate(p);
    const double a2 = p.alpha * p.alpha;
    if (a2 < p.gamma) return Stability::StableNode;
    if (a2 > p.gamma) return Stability::Saddle;
    return Stability::Marginal;
}

namespace detail {

inline void require_stable(const SystemParams& p) {
    validate(p);
    const Stability s = stability_classify(p);
    if (s != Stability::StableNode)
        throw StabilityError("parameters are not in the stable regime (requires alpha^2 < gamma; alpha=" +
                             std::to_string(p.alpha) + ", gamma=" + std::to_string(p.gamma) + ", " +
                             std::string(to_string(s)) + ")");
}

}  // namespace detail

/// Time constants of the symmetric (gamma = 1) system:
/// tau_mu = 1 / (lambda (1 - alpha)), tau_kappa = 1 / (lambda (1 + alpha)).
[[nodiscard]] inline TimeConstants time_constants(const SystemParams& p) {
    validate(p);
    if (p.gamma != 1.0) throw InputError("time_constants requires gamma == 1; use eigen_general");
    if (p.alpha >= 1.0)
        throw StabilityError("alpha must be < 1 for a finite tau_mu (got " + std::to_string(p.alpha) + ")");
    return {1.0 / (p.lambda * (1.0 - p.alpha)), 1.0 / (p.lambda * (1.0 + p.alpha))};
}

/// Eigenstructure of lambda * [[-1, alpha], [alpha, -gamma]] for any gamma in the stable regime.
[[nodiscard]] inline EigenSolution eigen_general(const SystemParams& p) {
    detail::require_stable(p);
    const double a = p.alpha;
    const double g = p.gamma;
    const double disc = std::sqrt((1.0 - g) * (1.0 - g) + 4.0 * a * a);

    EigenSolution sol;
    sol.eigenvalue_mu = 0.5 * p.lambda * (-(1.0 + g) + disc);
    sol.eigenvalue_kappa = 0.5 * p.lambda * (-(1.0 + g) - disc);
    sol.tau_mu = -1.0 / sol.eigenvalue_mu;
    sol.tau_kappa = -1.0 / sol.eigenvalue_kappa;
    sol.degenerate = disc <= 1e-14 * (1.0 + g);
    if (sol.degenerate) {
        sol.axis_angle = 45.0;
        return sol;
    }

    // Two candidate null vectors of (M - nu I); either row gives one, take the better conditioned.
    const double nu = 0.5 * (-(1.0 + g) + disc);
    const double v1e = a, v1i = 1.0 + nu;
    const double v2e = g + nu, v2i = a;
    const bool first = std::hypot(v1e, v1i) >= std::hypot(v2e, v2i);
    double deg = std::atan2(first ? v1i : v2i, first ? v1e : v2e) * 180.0 / std::numbers::pi;
    deg = std::fmod(deg, 180.0);
    if (deg < 0.0) deg += 180.0;
    if (deg >= 180.0) deg -= 180.0;
    sol.axis_angle = deg;
    return sol;
}

/// Equilibrium of the forced system. For gamma = 1, mu0 = (f + g) / (lambda (1 - alpha)) and
/// kappa0 = (g - f) / (lambda (1 + alpha)).
[[nodiscard]] inline FixedPoint fixed_point(const SystemParams& p, const ForcingTerms& forcing) {
    validate(p);
    const Stability s = stability_classify(p);
    if (s == Stability::Marginal)
        throw SingularSystemError("fixed point undefined: alpha^2 == gamma makes the system singular");
    detail::require_stable(p);

    // Cramer's rule on [[-1, a], [a, -gamma]] x = -(f, g) / lambda
    const double det = p.gamma - p.alpha * p.alpha;
    const double e0 = (forcing.f * p.gamma + p.alpha * forcing.g) / (p.lambda * det);
    const double i0 = (forcing.g + p.alpha * forcing.f) / (p.lambda * det);
    const EigenCoords c = to_eigen({e0, i0});
    return {e0, i0, c.mu, c.kappa};
}

/// Equilibrium variance ratio sigma^2(mu0) / sigma^2(kappa0) = ((1 + alpha) / (1 - alpha))^2.
[[nodiscard]] inline double variance_ratio(double alpha) {
    if (!std::isfinite(alpha) || alpha < 0.0 || alpha >= 1.0)
        throw InputError("variance_ratio requires 0 <= alpha < 1 (got " + std::to_string(alpha) + ")");
    const double q = (1.0 + alpha) / (1.0 - alpha);
    return q * q;
}

[[nodiscard]] inline double alpha_from_variance_ratio(double ratio) {
    if (!std::isfinite(ratio) || ratio < 1.0)
        throw InputError("variance ratio must be >= 1 (got " + std::to_string(ratio) +
                         "); a ratio below 1 means the mu and kappa axes are swapped");
    const double s = std::sqrt(ratio);
    return (s - 1.0) / (s + 1.0);
}

/// Recovers (alpha, lambda) from measured time constants of the gamma = 1 system.
[[nodiscard]] inline CouplingEstimate infer_alpha_lambda(double tau_mu, double tau_kappa) {
    if (!std::isfinite(tau_mu) || !std::isfinite(tau_kappa) || !(tau_kappa > 0.0))
        throw InputError("time constants must be finite and positive");
    if (tau_mu < tau_kappa)
        throw InputError("tau_mu must be >= tau_kappa (got " + std::to_string(tau_mu) + " < " +
                         std::to_string(tau_kappa) + ")");
    const double rho = tau_mu / tau_kappa;
    return {(rho - 1.0) / (rho + 1.0), 0.5 * (1.0 / tau_mu + 1.0 / tau_kappa)};
}

}  // namespace ecodyn
