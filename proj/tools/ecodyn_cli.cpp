// ecodyn: command-line front end for the E/I dynamics library.
//
// Exit codes: 0 success, 2 bad input or config, 3 I/O failure, 4 estimation failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ecodyn/estimate.hpp"
#include "ecodyn/io.hpp"
#include "ecodyn/model.hpp"
#include "ecodyn/panel.hpp"
#include "ecodyn/persistence.hpp"
#include "ecodyn/serialize.hpp"
#include "ecodyn/simulate.hpp"

namespace fs = std::filesystem;
using namespace ecodyn;

namespace {

constexpr const char* kVersion = "1.0.0";

// --- config file ------------------------------------------------------------------

struct ConfigEntry {
    std::string key;
    std::string value;
};

/// Flat key=value text. '#' starts a comment; keys may repeat for list options.
std::vector<ConfigEntry> read_config(const fs::path& path) {
    auto in = io::open_input(path);
    io::LineReader reader(in);
    std::vector<ConfigEntry> out;
    std::string line;
    while (reader.next(line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = io::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(reader.line_no(), "config line is not key=value");
        auto key = io::trim(body.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.remove_prefix(1);
        if (key.empty()) throw ParseError(reader.line_no(), "empty config key");
        out.push_back({std::string(key), std::string(io::trim(body.substr(eq + 1)))});
    }
    return out;
}

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
    }
    return std::nullopt;
}

std::set<std::string> flags_on_command_line(const std::vector<std::string>& args) {
    std::set<std::string> names;
    for (const auto& a : args)
        if (a.rfind("--", 0) == 0 && a.size() > 2) names.insert(a.substr(2, a.find('=') - 2));
    return names;
}

// --- shared option groups ------------------------------------------------------------

/// Real-valued option whose recorded default keeps full precision.
CLI::Option* add_real(CLI::App* app, const std::string& name, double& v, const std::string& help = "") {
    return app->add_option(name, v, help)->default_str(io::format_double(v));
}

struct ParamOptions {
    double alpha = 0.5;
    double lambda = 0.2;
    double gamma = 1.0;

    void add(CLI::App* app) {
        add_real(app, "--alpha", alpha, "coupling between E and I");
        add_real(app, "--lambda", lambda, "drag rate, 1/year");
        add_real(app, "--gamma", gamma, "dissipation of I relative to E");
    }
    [[nodiscard]] SystemParams params() const { return SystemParams::make(alpha, lambda, gamma); }
};

struct PanelInput {
    std::string e_panel;
    std::vector<std::string> i_panels;
    std::string joined;
    std::string entity_col = "entity";
    std::string year_col = "year";
    std::string value_col = "value";
    std::string delimiter = ",";
    bool standardize = false;

    void add(CLI::App* app) {
        app->add_option("--e-panel", e_panel, "long-form E panel (entity, year, value)");
        app->add_option("--i-panel", i_panels, "long-form I panel; repeat to average several into a composite");
        app->add_option("--joined", joined, "joined panel with columns entity, year, e, i");
        add_schema(app);
        app->add_flag("--standardize", standardize, "z-score each panel within every year before joining");
    }
    void add_schema(CLI::App* app) {
        app->add_option("--entity-col", entity_col, "entity column name");
        app->add_option("--year-col", year_col, "year column name");
        app->add_option("--value-col", value_col, "value column name");
        app->add_option("--delimiter", delimiter, "field delimiter: one character, or 'tab'");
    }

    [[nodiscard]] char delim() const {
        if (delimiter == "tab" || delimiter == "\\t") return '\t';
        if (delimiter.size() != 1) throw InputError("delimiter must be a single character or 'tab'");
        return delimiter[0];
    }
    [[nodiscard]] PanelSchema schema(const std::string& value) const {
        PanelSchema s;
        s.entity_col = entity_col;
        s.year_col = year_col;
        s.value_col = value;
        s.delimiter = delim();
        return s;
    }

    [[nodiscard]] JoinedPanel load() const {
        if (!joined.empty()) {
            if (!e_panel.empty() || !i_panels.empty()) throw InputError("give either --joined or --e-panel/--i-panel");
            PanelTable e = load_panel_file(joined, schema("e"));
            PanelTable i = load_panel_file(joined, schema("i"));
            if (standardize) {
                e = standardize_by_year(e);
                i = standardize_by_year(i);
            }
            return join_panels(e, i);
        }
        if (e_panel.empty() || i_panels.empty()) throw InputError("need --e-panel and at least one --i-panel, or --joined");
        PanelTable e = load_panel_file(e_panel, schema(value_col));
        std::vector<PanelTable> parts;
        for (const auto& path : i_panels) {
            PanelTable p = load_panel_file(path, schema(value_col));
            parts.push_back(standardize ? standardize_by_year(p) : std::move(p));
        }
        PanelTable i = parts.size() == 1 ? std::move(parts.front()) : composite_index(parts);
        if (standardize) {
            e = standardize_by_year(e);
            if (parts.size() > 1) i = standardize_by_year(i);
        }
        return join_panels(e, i);
    }
};

struct FitSettings {
    double p_threshold = 0.1;
    double tau_min = 0.5;
    double tau_max = 200.0;
    int max_iterations = 500;

    void add(CLI::App* app) {
        add_real(app, "--p-threshold", p_threshold, "screening threshold on the fit p-value");
        add_real(app, "--tau-min", tau_min, "lower bound on tau, years");
        add_real(app, "--tau-max", tau_max, "upper bound on tau, years");
        app->add_option("--max-iterations", max_iterations, "Levenberg-Marquardt iteration cap");
    }
    [[nodiscard]] FitOptions options() const {
        if (!(p_threshold > 0.0) || p_threshold > 1.0) throw InputError("--p-threshold must be in (0, 1]");
        if (max_iterations < 1) throw InputError("--max-iterations must be >= 1");
        return {tau_min, tau_max, max_iterations};
    }
};

// --- output ---------------------------------------------------------------------------

class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {}

    void write(const std::string& name, const std::string& content) {
        io::atomic_write(fs::path(dir_) / name, content);
        files_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    [[nodiscard]] const std::vector<std::string>& files() const noexcept { return files_; }
    [[nodiscard]] const std::string& dir() const noexcept { return dir_; }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

json option_value(const CLI::Option* opt) {
    const auto scalar = [](const std::string& s) -> json {
        if (const auto n = io::parse_int(s)) return *n;
        if (const auto v = io::parse_double(s)) return *v;
        return s;
    };
    if (opt->get_expected_min() == 0) return opt->count() > 0;
    if (opt->count() == 0) {
        const std::string d = opt->get_default_str();
        if (d.empty() || d == "[]") return opt->get_items_expected_max() > 1 ? json::array() : json(nullptr);
        return scalar(d);
    }
    const auto& results = opt->results();
    if (opt->get_items_expected_max() > 1) {
        json arr = json::array();
        for (const auto& r : results) arr.push_back(scalar(r));
        return arr;
    }
    return scalar(results.back());
}

/// The effective configuration of a subcommand and where each value came from.
json effective_config(const CLI::App* sub, const std::set<std::string>& from_config) {
    json values = json::object(), sources = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config" || name == "out") continue;
        values[name] = option_value(opt);
        sources[name] = opt->count() == 0 ? "default" : (from_config.count(name) ? "config" : "flag");
    }
    return {{"values", values}, {"sources", sources}};
}

struct Context {
    const CLI::App* sub = nullptr;
    std::set<std::string> from_config;
    std::optional<std::string> config_path;
};

void write_manifest(Outputs& out, const Context& ctx, json extra = json::object()) {
    json m;
    m["tool"] = "ecodyn";
    m["version"] = kVersion;
    m["subcommand"] = ctx.sub->get_name();
    m["config_file"] = ctx.config_path ? json(*ctx.config_path) : json(nullptr);
    m["effective_config"] = effective_config(ctx.sub, ctx.from_config);
    for (auto& [k, v] : extra.items()) m[k] = v;
    json files = out.files();
    files.push_back("manifest.json");
    m["outputs"] = files;
    out.write_json("manifest.json", m);
}

// --- subcommands ------------------------------------------------------------------------

struct SynthCmd {
    ParamOptions p;
    std::size_t entities = 200;
    int years = 21;
    double sigma = 0.03;
    std::uint64_t seed = 42;
    int start_year = 1996;
    int substeps = 10;
    double sd_mu0 = 1.0;
    double sd_kappa0 = 1.0 / 3.0;
    double offset_sd = 3.0;
    std::string out = ".";

    void add(CLI::App* app) {
        p.add(app);
        app->add_option("--entities", entities, "cohort size");
        app->add_option("--years", years, "recorded years per entity");
        add_real(app, "--sigma", sigma, "noise standard deviation per sqrt(year)");
        app->add_option("--seed", seed, "generator seed (cohort and noise)");
        app->add_option("--start-year", start_year, "first recorded year");
        app->add_option("--substeps", substeps, "Euler-Maruyama substeps per year");
        add_real(app, "--sd-mu0", sd_mu0, "spread of equilibria along mu");
        add_real(app, "--sd-kappa0", sd_kappa0, "spread of equilibria along kappa");
        add_real(app, "--offset-sd", offset_sd, "initial displacement from equilibrium; 0 starts at the fixed point");
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        const SystemParams params = p.params();
        if (entities == 0) throw InputError("--entities must be >= 1");
        const auto cohort = make_cohort(params, {entities, sd_mu0, sd_kappa0, offset_sd}, seed);
        const auto sim = simulate_panel(cohort, years, {sigma, seed}, {start_year, substeps});
        const EigenSolution eig = eigen_general(params);

        Outputs o(out);
        std::ostringstream e, i, truth;
        write_panel(e, sim.e);
        write_panel(i, sim.i);
        truth << "entity,f,g,e0,i0,e_start,i_start\n";
        for (const auto& m : cohort) {
            const auto fp = fixed_point(m.params, m.forcing);
            truth << m.entity << ',' << io::format_double(m.forcing.f) << ',' << io::format_double(m.forcing.g) << ','
                  << io::format_double(fp.e0) << ',' << io::format_double(fp.i0) << ','
                  << io::format_double(m.initial.e) << ',' << io::format_double(m.initial.i) << '\n';
        }
        o.write("e_panel.csv", e.str());
        o.write("i_panel.csv", i.str());
        o.write("truth.csv", truth.str());
        write_manifest(o, ctx,
                       {{"ground_truth",
                         {{"params", to_json(params)},
                          {"tau_mu", eig.tau_mu},
                          {"tau_kappa", eig.tau_kappa},
                          {"slow_axis_angle", eig.axis_angle},
                          {"rows_per_panel", sim.e.size()}}}});
    }
};

struct StreamlinesCmd {
    ParamOptions p;
    double f = 0.0, g = 0.0;
    bool unconstrained = false;
    GridSpec grid;
    StreamlineOptions sopt;
    bool svg = false;
    std::string out = ".";

    void add(CLI::App* app) {
        p.add(app);
        add_real(app, "--f", f, "forcing on E");
        add_real(app, "--g", g, "forcing on I");
        app->add_flag("--unconstrained", unconstrained, "saddle system without drag (only alpha and forcing apply)");
        add_real(app, "--e-min", grid.e_min);
        add_real(app, "--e-max", grid.e_max);
        add_real(app, "--i-min", grid.i_min);
        add_real(app, "--i-max", grid.i_max);
        app->add_option("--n-e", grid.n_e, "seeds along E");
        app->add_option("--n-i", grid.n_i, "seeds along I");
        add_real(app, "--step", sopt.step, "RK4 step, years");
        app->add_option("--max-steps", sopt.max_steps, "step cap per streamline");
        add_real(app, "--arrival-tol", sopt.arrival_tol, "distance to the fixed point that ends a streamline");
        app->add_flag("--svg", svg, "also render streamlines.svg");
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        validate(grid);
        StreamlineField field;
        std::string title;
        if (unconstrained) {
            if (!std::isfinite(p.alpha) || p.alpha < 0.0) throw InputError("alpha must be finite and >= 0");
            field = streamlines(UnconstrainedSystem{p.alpha, {f, g}}, grid, sopt);
            title = "unconstrained, alpha=" + io::format_double(p.alpha);
        } else {
            const SystemParams params = p.params();
            (void)fixed_point(params, {f, g});  // rejects saddle and singular regimes up front
            field = streamlines(StableSystem{params, {f, g}}, grid, sopt);
            title = "alpha=" + io::format_double(p.alpha) + ", lambda=" + io::format_double(p.lambda) +
                    ", gamma=" + io::format_double(p.gamma);
        }

        Outputs o(out);
        std::ostringstream csv;
        write_streamlines_csv(csv, field);
        o.write("streamlines.csv", csv.str());
        if (svg) {
            SvgOptions so;
            so.title = title;
            o.write("streamlines.svg", render_svg(field, so));
        }
        std::map<std::string, int> ends;
        for (const auto& l : field.lines)
            ++ends[l.end == StreamlineEnd::ReachedFixedPoint ? "reached_fixed_point"
                   : l.end == StreamlineEnd::ExitedBounds    ? "exited_bounds"
                                                             : "max_steps"];
        json fp = field.fixed_point ? json{{"e", field.fixed_point->e}, {"i", field.fixed_point->i}} : json(nullptr);
        write_manifest(o, ctx, {{"n_polylines", field.lines.size()}, {"fixed_point", fp}, {"termini", ends}});
    }
};

struct PersistenceCmd {
    std::string panel;
    PanelInput schema;
    std::vector<int> years;
    std::string weighting = "none";
    std::size_t bins = 20;
    std::string out = ".";

    void add(CLI::App* app) {
        app->add_option("--panel", panel, "long-form panel (entity, year, value)")->required();
        schema.add_schema(app);
        app->add_option("--years", years, "observation years to correlate (default: every year in the panel)");
        app->add_option("--weighting", weighting, "log-fit weights: none, count or lag")
            ->check(CLI::IsMember({"none", "count", "lag"}));
        app->add_option("--bins", bins, "erosion histogram bins");
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        const PanelTable t = load_panel_file(panel, schema.schema(schema.value_col));
        const auto m = persistence_matrix(t, years.empty() ? t.years() : years);
        DeltaOptions dopt;
        dopt.weighting = weighting == "count" ? DeltaWeighting::ByCount
                         : weighting == "lag" ? DeltaWeighting::InverseLag
                                              : DeltaWeighting::None;

        Outputs o(out);
        std::ostringstream pm, hist;
        write_persistence_csv(pm, m);
        o.write("persistence.csv", pm.str());
        const auto erosion = erosion_values(m);
        write_histogram_csv(hist, histogram(erosion, bins));
        o.write("erosion_histogram.csv", hist.str());

        const DeltaEstimate d = estimate_delta(m, dopt);
        json dj = to_json(d);
        dj["failed_pairs"] = m.failed_pairs;
        o.write_json("delta.json", dj);
        write_manifest(o, ctx, {{"n_entries", m.entries.size()}, {"failed_pairs", m.failed_pairs}});
    }
};

std::string fits_csv(const std::vector<FitResult>& fits, double p_threshold) {
    std::ostringstream s;
    s << "entity,theta,tau,amplitude,offset,p_value,rms_residual,n,status,sound\n";
    for (const auto& f : fits)
        s << f.entity << ',' << io::format_double(f.theta) << ',' << io::format_double(f.tau) << ','
          << io::format_double(f.amplitude) << ',' << io::format_double(f.offset) << ',' << io::format_double(f.p_value)
          << ',' << io::format_double(f.rms_residual) << ',' << f.n << ',' << to_string(f.status) << ','
          << (f.sound(p_threshold) ? 1 : 0) << '\n';
    return s.str();
}

struct FitCmd {
    PanelInput input;
    FitSettings fit;
    double theta = 45.0;
    std::optional<double> tau_mu, tau_kappa;
    std::string out = ".";

    void add(CLI::App* app) {
        input.add(app);
        fit.add(app);
        add_real(app, "--theta", theta, "projection angle for the slow direction, degrees");
        app->add_option("--tau-mu", tau_mu, "skip fitting: aggregated slow time constant");
        app->add_option("--tau-kappa", tau_kappa, "skip fitting: aggregated fast time constant");
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        Outputs o(out);
        if (tau_mu || tau_kappa) {
            if (!tau_mu || !tau_kappa) throw InputError("--tau-mu and --tau-kappa go together");
            const auto est = infer_alpha_lambda(*tau_mu, *tau_kappa);
            o.write_json("inference.json",
                         {{"tau_mu", *tau_mu}, {"tau_kappa", *tau_kappa}, {"alpha", est.alpha}, {"lambda", est.lambda}});
            write_manifest(o, ctx);
            return;
        }

        const FitOptions fopt = fit.options();
        const auto trajs = trajectories_from_panel(input.load());
        std::vector<FitResult> slow, fast;
        std::size_t skipped = 0;
        for (const auto& t : trajs) {
            if (t.size() < 5) {
                ++skipped;
                continue;
            }
            slow.push_back(fit_relaxation(project(t, theta), fopt));
            fast.push_back(fit_relaxation(project(t, theta + 90.0), fopt));
        }
        std::vector<FitResult> all = slow;
        all.insert(all.end(), fast.begin(), fast.end());
        o.write("fits.csv", fits_csv(all, fit.p_threshold));

        json agg{{"theta", normalize_angle(theta)},
                 {"theta_conjugate", normalize_angle(theta + 90.0)},
                 {"p_threshold", fit.p_threshold},
                 {"n_trajectories", trajs.size()},
                 {"n_skipped", skipped}};
        std::optional<TauAggregate> mu, kappa;
        std::string failure;
        try {
            mu = screen_and_aggregate(slow, fit.p_threshold);
        } catch (const EstimationError& e) {
            failure = std::string("slow direction: ") + e.what();
        }
        try {
            kappa = screen_and_aggregate(fast, fit.p_threshold);
        } catch (const EstimationError& e) {
            failure += (failure.empty() ? "" : "; ") + std::string("fast direction: ") + e.what();
        }
        const auto put = [&](const std::string& suffix, const std::optional<TauAggregate>& a, std::size_t n_fits) {
            agg["mean_tau_" + suffix] = a ? json(a->mean_tau) : json(nullptr);
            agg["sigma_" + suffix] = a ? json(a->sigma) : json(nullptr);
            agg["n_" + suffix] = a ? a->n : 0;
            agg["n_fits_" + suffix] = n_fits;
        };
        put("mu", mu, slow.size());
        put("kappa", kappa, fast.size());
        agg["alpha"] = nullptr;
        agg["lambda"] = nullptr;
        if (mu && kappa) {
            try {
                const auto est = infer_alpha_lambda(mu->mean_tau, kappa->mean_tau);
                agg["alpha"] = est.alpha;
                agg["lambda"] = est.lambda;
            } catch (const InputError& e) {
                agg["inference_error"] = e.what();
            }
        }
        o.write_json("aggregate.json", agg);
        write_manifest(o, ctx);
        if (!failure.empty()) throw EstimationError(failure);
    }
};

struct ScanCmd {
    PanelInput input;
    FitSettings fit;
    std::vector<double> thetas;
    double theta_min = 0.0, theta_max = 90.0, theta_step = 5.0;
    std::string out = ".";

    void add(CLI::App* app) {
        input.add(app);
        fit.add(app);
        app->add_option("--thetas", thetas, "explicit angle grid, degrees (overrides min/max/step)");
        add_real(app, "--theta-min", theta_min);
        add_real(app, "--theta-max", theta_max);
        add_real(app, "--theta-step", theta_step);
        app->add_option("--out", out, "output directory");
    }

    [[nodiscard]] std::vector<double> grid() const {
        if (!thetas.empty()) return thetas;
        if (!(theta_step > 0.0) || !(theta_max >= theta_min)) throw InputError("invalid theta grid");
        std::vector<double> g;
        const auto n = static_cast<int>(std::floor((theta_max - theta_min) / theta_step + 1e-9));
        for (int k = 0; k <= n; ++k) g.push_back(theta_min + theta_step * k);
        return g;
    }

    void run(const Context& ctx) const {
        const FitOptions fopt = fit.options();
        const auto g = grid();
        if (g.size() < 4) throw InputError("angular scan needs at least 4 angles in the grid");
        const auto trajs = trajectories_from_panel(input.load());
        const AngularScan scan = angular_scan(trajs, g, fit.p_threshold, fopt);

        Outputs o(out);
        std::ostringstream csv;
        csv << "theta,count,parabola\n";
        for (std::size_t k = 0; k < scan.thetas.size(); ++k)
            csv << io::format_double(scan.thetas[k]) << ',' << scan.counts[k] << ','
                << io::format_double(scan.parabola(scan.thetas[k])) << '\n';
        o.write("scan.csv", csv.str());
        json j = to_json(scan);
        j["n_trajectories"] = trajs.size();
        o.write_json("scan.json", j);
        write_manifest(o, ctx);
    }
};

struct PrepareCmd {
    PanelInput input;
    std::string out = ".";

    void add(CLI::App* app) {
        input.add(app);
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        const JoinedPanel j = input.load();
        const EntityAverages avgs = time_average(j);
        Outputs o(out);
        std::ostringstream jo, ao;
        write_joined(jo, j);
        write_averages(ao, avgs);
        o.write("joined.csv", jo.str());
        o.write("averages.csv", ao.str());

        json s{{"n_rows", j.size()}, {"n_entities", avgs.size()}};
        const auto vr = empirical_variance_ratio(avgs);
        s["variance_ratio"] = vr.ratio;
        s["alpha_inferred"] = vr.alpha_inferred ? json(*vr.alpha_inferred) : json(nullptr);
        const auto pa = pca2(avgs);
        s["principal_angle"] = pa.angle;
        s["variance_share"] = pa.variance_share;
        s["weakly_determined"] = pa.weakly_determined;
        o.write_json("structure.json", s);
        write_manifest(o, ctx);
    }
};

struct RegressCmd {
    std::string averages;
    PanelInput input;
    std::string covariates;
    std::string cov_entity_col = "entity";
    std::vector<std::string> names;
    std::string quadratic;
    std::string out = ".";

    void add(CLI::App* app) {
        app->add_option("--averages", averages, "entity averages (entity, e_mean, i_mean[, n_years])");
        input.add(app);
        app->add_option("--covariates", covariates, "wide per-entity covariate table")->required();
        app->add_option("--cov-entity-col", cov_entity_col, "entity column of the covariate table");
        app->add_option("--covariate", names, "covariate to include; repeat for several (default: all)");
        app->add_option("--quadratic", quadratic, "covariate whose square is tested in a one-covariate mu model");
        app->add_option("--out", out, "output directory");
    }

    void run(const Context& ctx) const {
        EntityAverages avgs;
        if (!averages.empty()) {
            auto in = io::open_input(averages);
            avgs = load_averages(in, input.delim());
        } else {
            avgs = time_average(input.load());
        }
        auto cin = io::open_input(covariates);
        const CovariateTable cov = load_covariates(cin, cov_entity_col, input.delim());
        const auto reg = regress_mu_kappa(avgs, cov, names);
        json j = to_json(reg);
        if (!quadratic.empty()) j["quadratic_check"] = to_json(quadratic_term_check(avgs, cov, quadratic));
        Outputs o(out);
        o.write_json("regression.json", j);
        write_manifest(o, ctx);
    }
};

int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "ecodyn: " << kind << ": " << e.what() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);

    CLI::App app{"Coupled economic/institutional dynamics: simulation, persistence and trajectory estimation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SynthCmd synth;
    StreamlinesCmd stream;
    PersistenceCmd persist;
    FitCmd fit;
    ScanCmd scan;
    PrepareCmd prepare;
    RegressCmd regress;

    std::map<std::string, std::function<void(const Context&)>> runners;
    const auto reg = [&](const std::string& name, const std::string& help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", "flat key=value file; command-line flags take precedence");
        cmd.add(sub);
        runners[name] = [&cmd](const Context& c) { cmd.run(c); };
        return sub;
    };
    reg("synth", "simulate a synthetic cohort into E and I panels", synth);
    reg("streamlines", "streamline field of the stable or unconstrained system", stream);
    reg("persistence", "cross-sectional persistence, erosion rate and half-life", persist);
    reg("fit", "per-entity relaxation fits at theta and theta+90, screened and aggregated", fit);
    reg("scan", "angular scan of sound-fit counts with a parabolic peak estimate", scan);
    reg("prepare", "join E and I panels and time-average by entity", prepare);
    reg("regress", "OLS of time-averaged mu and kappa on entity covariates", regress);

    Context ctx;
    try {
        ctx.config_path = find_config_path(args);
        if (ctx.config_path) {
            const auto cmd_pos = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind('-', 0) != 0; });
            CLI::App* sub = cmd_pos == args.end() ? nullptr : app.get_subcommand_no_throw(*cmd_pos);
            if (sub == nullptr) throw InputError("--config must follow a subcommand");
            const auto given = flags_on_command_line(args);
            std::vector<std::string> injected;
            for (const auto& [key, value] : read_config(*ctx.config_path)) {
                if (given.count(key)) continue;
                const CLI::Option* opt = sub->get_option_no_throw("--" + key);
                if (opt == nullptr) throw InputError("unknown config key '" + key + "' for " + sub->get_name());
                if (opt->get_expected_min() == 0) {
                    if (value == "true" || value == "1") injected.push_back("--" + key);
                    else if (value != "false" && value != "0") throw InputError("config flag '" + key + "' must be true or false");
                } else {
                    injected.push_back("--" + key);
                    injected.push_back(value);
                }
                ctx.from_config.insert(key);
            }
            args.insert(cmd_pos + 1, injected.begin(), injected.end());
        }
    } catch (const InputError& e) {
        return report("config error", e, 2);
    } catch (const IoError& e) {
        return report("I/O error", e, 3);
    }

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return 2;
    }

    const CLI::App* sub = app.get_subcommands().front();
    ctx.sub = sub;
    try {
        runners.at(sub->get_name())(ctx);
    } catch (const InputError& e) {
        return report("input error", e, 2);
    } catch (const IoError& e) {
        return report("I/O error", e, 3);
    } catch (const EstimationError& e) {
        return report("estimation failed", e, 4);
    } catch (const std::exception& e) {
        return report("error", e, 1);
    }
    return 0;
}
