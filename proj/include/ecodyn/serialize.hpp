#pragma once

// JSON forms of estimator results. Key names are part of the file contract.

#include <cmath>
#include <span>

#include "json.hpp"

#include "ecodyn/estimate.hpp"
#include "ecodyn/model.hpp"
#include "ecodyn/persistence.hpp"

namespace ecodyn {

using json = nlohmann::ordered_json;

namespace detail {

/// JSON has no NaN or infinity; those become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

[[nodiscard]] inline json to_json(const SystemParams& p) {
    return {{"alpha", p.alpha}, {"lambda", p.lambda}, {"gamma", p.gamma}};
}

[[nodiscard]] inline json to_json(const DeltaEstimate& d) {
    json j{{"delta", d.delta}, {"stderr", d.std_error}, {"n_pairs", d.n_pairs}};
    j["half_life_years"] = d.delta > 0.0 && d.delta < 1.0 ? detail::number(half_life(d.delta)) : json(nullptr);
    j["n_excluded"] = d.n_excluded;
    j["stderr_kind"] = "regression slope standard error (delta method)";
    return j;
}

[[nodiscard]] inline json to_json(const FitResult& f) {
    return {{"entity", f.entity},
            {"theta", f.theta},
            {"tau", detail::number(f.tau)},
            {"amplitude", detail::number(f.amplitude)},
            {"offset", detail::number(f.offset)},
            {"p_value", detail::number(f.p_value)},
            {"rms_residual", detail::number(f.rms_residual)},
            {"n", f.n},
            {"status", std::string(to_string(f.status))}};
}

[[nodiscard]] inline json to_json(const TauAggregate& a) {
    return {{"mean_tau", a.mean_tau}, {"sigma", a.sigma}, {"n", a.n}};
}

[[nodiscard]] inline json to_json(const AngularScan& s) {
    return {{"thetas", s.thetas},
            {"counts", s.counts},
            {"parabola", {{"a", s.a}, {"b", s.b}, {"c", s.c}}},
            {"theta_star", s.theta_star},
            {"fit_p_value", s.fit_p_value}};
}

[[nodiscard]] inline json to_json(const OlsResult& r) {
    json coefs = json::array();
    for (std::size_t k = 0; k < r.names.size(); ++k)
        coefs.push_back({{"name", r.names[k]},
                         {"estimate", detail::number(r.coefficients[k])},
                         {"std_error", detail::number(r.std_errors[k])},
                         {"t", detail::number(r.t_stats[k])},
                         {"p_value", detail::number(r.p_values[k])}});
    return {{"coefficients", coefs}, {"r_squared", r.r_squared}, {"sigma2", r.sigma2}, {"n", r.n}, {"dof", r.dof}};
}

[[nodiscard]] inline json to_json(const MuKappaRegression& m) {
    json mu_shares = json::object(), kappa_shares = json::object();
    for (std::size_t k = 0; k < m.covariates.size(); ++k) {
        mu_shares[m.covariates[k]] = m.mu_shares[k];
        kappa_shares[m.covariates[k]] = m.kappa_shares[k];
    }
    return {{"n_entities", m.entities.size()},
            {"n_dropped", m.n_dropped},
            {"mu_model", to_json(m.mu_model)},
            {"kappa_model", to_json(m.kappa_model)},
            {"mu_explained_shares", mu_shares},
            {"kappa_explained_shares", kappa_shares}};
}

}  // namespace ecodyn
