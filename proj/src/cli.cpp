#include "clusterdr/cli.hpp"

#include "clusterdr/errors.hpp"
#include "clusterdr/estimators.hpp"
#include "clusterdr/glm.hpp"
#include "clusterdr/io.hpp"
#include "clusterdr/mixture.hpp"
#include "clusterdr/rng.hpp"
#include "clusterdr/simulate.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace clusterdr {

namespace {

constexpr const char* kVersion = "1.0.0";

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string output;
};

struct ConfigFile {
    Json doc = Json::object();
    std::filesystem::path base;

    explicit ConfigFile(const std::string& path) {
        if (path.empty()) return;
        doc = read_json_file(path);
        if (!doc.is_object()) throw InputError("config '" + path + "': expected a JSON object");
        base = std::filesystem::path(path).parent_path();
    }

    // Relative paths in a config file are taken relative to the file.
    std::string resolve(const std::string& p) const {
        const std::filesystem::path fp(p);
        if (fp.is_absolute() || base.empty()) return p;
        return (base / fp).lexically_normal().string();
    }
};

struct DataSource {
    std::string path;
    CsvSchema schema;
};

DataSource read_data_source(ObjectReader& r, const ConfigFile& cf, const std::string& cli_data) {
    DataSource src;
    if (const auto p = r.get<std::string>("data")) src.path = cf.resolve(*p);
    if (!cli_data.empty()) src.path = cli_data;
    if (const Json* s = r.raw("schema")) src.schema = csv_schema_from_json(*s, "config.schema");
    if (src.path.empty()) throw InputError("no data file given (use --data or the config key 'data')");
    return src;
}

Json source_json(const DataSource& src) { return {{"data", src.path}, {"schema", to_json(src.schema)}}; }

std::uint64_t pick_seed(const Globals& g, ObjectReader& r) {
    const auto from_config = r.get<std::uint64_t>("seed");
    if (g.seed) return *g.seed;
    return from_config.value_or(0);
}

std::string pick_output(const Globals& g, ObjectReader& r, const ConfigFile& cf) {
    const auto from_config = r.get<std::string>("output");
    if (!g.output.empty()) return g.output;
    return from_config ? cf.resolve(*from_config) : std::string{};
}

std::string sibling_path(const std::string& output, const std::string& suffix) {
    std::filesystem::path p(output);
    p.replace_extension();
    return p.string() + suffix;
}

Dataset load_valid(const DataSource& src, std::string& stage, Json& data_summary) {
    stage = "load";
    Dataset d = load_csv(src.path, src.schema);
    stage = "validate";
    const ValidationReport rep = validate(d);
    if (!rep.accepted()) {
        const auto& [row, msg] = rep.errors.front();
        throw InputError("row " + std::to_string(row) + ": " + msg);
    }
    Json warnings = Json::array();
    for (const auto& [cluster, msg] : rep.warnings) warnings.push_back({{"cluster", cluster}, {"message", msg}});
    data_summary = {{"n", d.n()},
                    {"c", d.c()},
                    {"k", d.k()},
                    {"covariates", d.covariate_names()},
                    {"degenerate_clusters", rep.degenerate_clusters.size()},
                    {"warnings", warnings}};
    return d;
}

void emit(Json report, const Globals& g, const std::string& output, const Json& effective, std::uint64_t seed,
          std::ostream& out) {
    report["version"] = kVersion;
    report["seed"] = seed;
    report["config"] = effective;
    report["config_hash"] = config_hash(effective);
    report["timestamp"] = utc_timestamp();
    const std::string text = report.dump(2) + "\n";
    if (output.empty()) {
        out << text;
    } else {
        write_text_file(output, text);
    }
    (void)g;
}

std::string fmt4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string data;
    bool baselines = false;
    std::optional<int> folds;
    std::optional<double> eta;
};

int cmd_estimate(const Globals& g, const EstimateArgs& a, std::ostream& out, std::ostream& err, std::string& stage) {
    stage = "config";
    const ConfigFile cf(g.config);
    ObjectReader r(cf.doc, "config");
    const DataSource src = read_data_source(r, cf, a.data);
    std::optional<StatSpec> spec;
    if (const Json* s = r.raw("spec")) {
        if (s->is_string()) {
            spec = stat_spec_from_json(read_json_file(cf.resolve(s->get<std::string>())), "config.spec");
        } else {
            spec = stat_spec_from_json(*s, "config.spec");
        }
        if (spec->terms.empty()) throw InputError("config.spec: the statistic spec is empty");
    }
    std::string cluster_stats;
    if (const auto p = r.get<std::string>("cluster_stats")) cluster_stats = cf.resolve(*p);
    if (spec && !cluster_stats.empty()) throw InputError("config: give either 'spec' or 'cluster_stats', not both");
    NuisanceConfig nuisance;
    if (const Json* n = r.raw("nuisance")) nuisance = nuisance_from_json(*n, "config.nuisance");
    int folds = r.get_or("folds", 2);
    double eta = r.get_or("eta", kDefaultEta);
    bool baselines = r.get_or("baselines", false);
    if (a.folds) folds = *a.folds;
    if (a.eta) eta = *a.eta;
    baselines = baselines || a.baselines;
    const std::uint64_t seed = pick_seed(g, r);
    const std::string output = pick_output(g, r, cf);
    r.finish();
    if (!(eta > 0.0 && eta < 0.5)) throw InputError("eta must lie in (0, 0.5)");

    Json data_summary;
    const Dataset d = load_valid(src, stage, data_summary);

    stage = "sufficient statistics";
    DrPipelineConfig pc;
    pc.nuisance = nuisance;
    pc.folds = folds;
    pc.seed = seed;
    pc.eta = eta;
    AugmentedDesign design;
    StatSpec used_spec = spec ? *spec : mundlak_spec(d.k());
    if (!cluster_stats.empty()) {
        std::vector<std::string> names;
        const Eigen::MatrixXd stats = read_cluster_stats_csv(d, cluster_stats, names);
        design = augment_with_cluster_stats(d, stats, names);
    } else {
        design = build_suffstats(d, used_spec);
    }
    const std::vector<std::string> statistic_names = design.stat_names;

    stage = "estimation";
    const DrPipelineResult res = run_dr_pipeline(d, std::move(design), pc);

    Json report = {{"command", "estimate"},
                   {"data", data_summary},
                   {"statistics", statistic_names},
                   {"nuisance",
                    {{"notes", res.nuisances.spec_notes},
                     {"propensity_fits_with_separation", res.nuisances.propensity_fits_with_separation}}},
                   {"result", to_json(res.result, d.cluster_labels())}};

    if (baselines) {
        stage = "baselines";
        Json b = Json::object();
        auto guarded = [&](const char* name, auto fn) {
            try {
                b[name] = fn();
            } catch (const EstimationError& ex) {
                b[name] = {{"error", ex.what()}};
            }
        };
        guarded("fe", [&] { return to_json(fe_ols(d)); });
        guarded("mundlak", [&] { return to_json(mundlak_ols(d)); });
        guarded("weighted_fe", [&] {
            std::vector<Index> rows;
            for (Index i = 0; i < d.n(); ++i) {
                if (res.design.a(i) != 0.0) rows.push_back(i);
            }
            Eigen::VectorXd e(static_cast<Index>(rows.size()));
            for (std::size_t t = 0; t < rows.size(); ++t) e(static_cast<Index>(t)) = res.nuisances.e(rows[t]);
            Json j = to_json(weighted_fe(d.subset(rows), e));
            j["units"] = rows.size();
            return j;
        });
        report["baselines"] = b;
    }

    Json effective = source_json(src);
    if (!cluster_stats.empty()) {
        effective["cluster_stats"] = cluster_stats;
    } else {
        effective["spec"] = to_json(used_spec);
    }
    effective["nuisance"] = to_json(nuisance);
    effective["folds"] = folds;
    effective["eta"] = eta;
    effective["baselines"] = baselines;
    stage = "output";
    emit(report, g, output, effective, seed, out);

    const auto& dr = res.result;
    std::ostream& human = output.empty() ? err : out;
    human << "tau=" << fmt4(dr.tau_hat) << " se=" << fmt4(dr.se) << " ci=[" << fmt4(dr.ci_lower) << ", "
          << fmt4(dr.ci_upper) << "] trimmed_share=" << fmt4(1.0 - dr.a_bar) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string preset;
    std::optional<int> reps;
    std::string estimator;
    std::string per_rep_csv;
    std::string write_data;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out, std::ostream& err, std::string& stage) {
    stage = "config";
    const ConfigFile cf(g.config);
    ObjectReader r(cf.doc, "config");
    DgpConfig dgp;
    if (const Json* d = r.raw("dgp")) {
        dgp = d->is_string() ? dgp_preset(d->get<std::string>()) : dgp_from_json(*d, "config.dgp");
    } else {
        dgp = dgp_preset("mundlak-linear");
    }
    if (!a.preset.empty()) dgp = dgp_preset(a.preset);
    EstimatorConfig est;
    if (const Json* e = r.raw("estimator")) est = estimator_from_json(*e, "config.estimator");
    if (!a.estimator.empty()) {
        est.estimator = a.estimator;
        est = estimator_from_json(to_json(est), "estimator");
    }
    int reps = r.get_or("reps", 1);
    if (a.reps) reps = *a.reps;
    if (reps < 1) throw InputError("reps must be at least 1");
    std::string per_rep_csv;
    if (const auto p = r.get<std::string>("per_rep_csv")) per_rep_csv = cf.resolve(*p);
    if (!a.per_rep_csv.empty()) per_rep_csv = a.per_rep_csv;
    const std::uint64_t seed = pick_seed(g, r);
    const std::string output = pick_output(g, r, cf);
    r.finish();
    dgp.check();
    if (per_rep_csv.empty() && !output.empty()) per_rep_csv = sibling_path(output, ".per_rep.csv");

    if (!a.write_data.empty()) {
        // Replication 0's dataset, for feeding the other commands.
        stage = "write data";
        write_csv(generate(dgp, Rng(seed).split(0).seed()).d, a.write_data);
    }

    stage = "simulation";
    const McReport mc = monte_carlo(dgp, est, reps, seed, g.threads);

    const Json effective = {{"dgp", to_json(dgp)}, {"estimator", to_json(est)}, {"reps", reps}};
    Json report = {{"command", "simulate"}, {"report", to_json(mc)}};
    if (!per_rep_csv.empty()) report["per_rep_csv"] = std::filesystem::path(per_rep_csv).filename().string();
    stage = "output";
    emit(report, g, output, effective, seed, out);
    if (!per_rep_csv.empty()) write_per_rep_csv(mc, per_rep_csv);

    std::ostream& human = output.empty() ? err : out;
    human << "reps=" << mc.reps << " failures=" << mc.failures << " bias=" << fmt4(mc.bias) << " rmse=" << fmt4(mc.rmse)
          << " coverage=" << fmt4(mc.coverage) << " mean_se=" << fmt4(mc.mean_se) << " mc_sd=" << fmt4(mc.mc_sd) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectArgs {
    std::string data;
    std::optional<double> lambda;
    std::optional<int> grid_size;
    std::optional<int> max_active;
};

int cmd_select(const Globals& g, const SelectArgs& a, std::ostream& out, std::ostream& err, std::string& stage) {
    stage = "config";
    const ConfigFile cf(g.config);
    ObjectReader r(cf.doc, "config");
    const DataSource src = read_data_source(r, cf, a.data);
    std::optional<StatSpec> candidates;
    if (const Json* c = r.raw("candidates")) {
        candidates = stat_spec_from_json(*c, "config.candidates");
        if (candidates->terms.empty()) throw InputError("config.candidates: no candidate statistics");
    }
    std::optional<double> lambda = r.get<double>("lambda");
    std::optional<std::vector<double>> grid = r.get<std::vector<double>>("lambda_grid");
    int grid_size = r.get_or("grid_size", 30);
    const double min_ratio = r.get_or("min_ratio", 0.01);
    GroupLassoOptions opts;
    opts.standardize = r.get_or("standardize", opts.standardize);
    opts.tol = r.get_or("tol", opts.tol);
    opts.max_sweeps = r.get_or("max_sweeps", opts.max_sweeps);
    opts.max_active = r.get_or("max_active", opts.max_active);
    if (a.lambda) {
        lambda = a.lambda;
        grid.reset();
    }
    if (a.grid_size) grid_size = *a.grid_size;
    if (a.max_active) opts.max_active = *a.max_active;
    const std::uint64_t seed = pick_seed(g, r);
    const std::string output = pick_output(g, r, cf);
    r.finish();
    if (lambda && grid) throw InputError("config: give either 'lambda' or 'lambda_grid', not both");
    if (lambda && !(*lambda >= 0.0)) throw InputError("lambda must be nonnegative");

    Json data_summary;
    const Dataset d = load_valid(src, stage, data_summary);
    stage = "candidates";
    const StatSpec spec = candidates ? *candidates : mundlak_spec(d.k());
    spec.check(d.k());
    const Eigen::MatrixXd features = spec.evaluate(d);
    const std::vector<std::string> names = stat_names(spec, d.covariate_names());
    const std::vector<Index> categories(d.cluster_of().begin(), d.cluster_of().end());

    stage = "selection";
    Json report = {{"command", "select"}, {"data", data_summary}, {"candidates", names}};
    Json warnings = Json::array();
    GroupLassoFit chosen;
    const double lambda_max = group_lasso_lambda_max(features, categories, opts);
    report["lambda_max"] = lambda_max;
    if (lambda) {
        chosen = multinomial_group_lasso(features, categories, *lambda, opts);
        report["mode"] = "single";
    } else {
        const GroupLassoPath path = multinomial_group_lasso_path(features, categories, grid_size, min_ratio, opts, grid);
        Json fits = Json::array();
        for (const auto& fit : path.fits) fits.push_back(to_json(fit, names));
        Json order = Json::array();
        for (const Index j : path.entry_order) order.push_back(names[static_cast<std::size_t>(j)]);
        report["mode"] = "path";
        report["path"] = fits;
        report["entry_order"] = order;
        chosen = path.fits.back();
    }
    StatSpec selected;
    for (const Index j : chosen.selected) selected.terms.push_back(spec.terms[static_cast<std::size_t>(j)]);
    if (selected.terms.empty()) {
        warnings.push_back("no statistic selected: lambda is at or above lambda_max");
        err << "warning: no statistic selected (lambda " << chosen.lambda << " >= lambda_max " << lambda_max << ")\n";
    }
    report["lambda"] = chosen.lambda;
    report["fit"] = to_json(chosen, names);
    report["selected"] = stat_names(selected, d.covariate_names());
    report["selected_spec"] = to_json(selected);
    report["warnings"] = warnings;

    Json effective = source_json(src);
    effective["candidates"] = to_json(spec);
    if (lambda) {
        effective["lambda"] = *lambda;
    } else if (grid) {
        effective["lambda_grid"] = *grid;
    } else {
        effective["grid_size"] = grid_size;
        effective["min_ratio"] = min_ratio;
    }
    effective["standardize"] = opts.standardize;
    effective["tol"] = opts.tol;
    effective["max_sweeps"] = opts.max_sweeps;
    effective["max_active"] = opts.max_active;
    stage = "output";
    emit(report, g, output, effective, seed, out);
    std::ostream& human = output.empty() ? err : out;
    human << "selected " << selected.terms.size() << " of " << spec.terms.size() << " candidates at lambda="
          << chosen.lambda << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// mixture
// ---------------------------------------------------------------------------

struct MixtureArgs {
    std::string data;
    std::optional<int> components;
    bool estimate = false;
    std::string posterior_csv;
    std::vector<int> p_grid;
};

int cmd_mixture(const Globals& g, const MixtureArgs& a, std::ostream& out, std::ostream& err, std::string& stage) {
    stage = "config";
    const ConfigFile cf(g.config);
    ObjectReader r(cf.doc, "config");
    const DataSource src = read_data_source(r, cf, a.data);
    int p = r.get_or("components", 2);
    EmOptions opts;
    opts.restarts = r.get_or("restarts", opts.restarts);
    opts.max_iter = r.get_or("max_iter", opts.max_iter);
    opts.tol = r.get_or("tol", opts.tol);
    opts.support_cap = r.get_or("support_cap", opts.support_cap);
    opts.threads = g.threads;
    std::vector<int> p_grid = r.get_or("p_grid", std::vector<int>{});
    bool estimate = r.get_or("estimate", false);
    NuisanceConfig nuisance;
    if (const Json* n = r.raw("nuisance")) nuisance = nuisance_from_json(*n, "config.nuisance");
    int folds = r.get_or("folds", 2);
    double eta = r.get_or("eta", kDefaultEta);
    std::string posterior_csv;
    if (const auto pc = r.get<std::string>("posterior_csv")) posterior_csv = cf.resolve(*pc);
    if (a.components) p = *a.components;
    if (!a.p_grid.empty()) p_grid = a.p_grid;
    estimate = estimate || a.estimate;
    if (!a.posterior_csv.empty()) posterior_csv = a.posterior_csv;
    const std::uint64_t seed = pick_seed(g, r);
    const std::string output = pick_output(g, r, cf);
    r.finish();
    if (posterior_csv.empty() && !output.empty()) posterior_csv = sibling_path(output, ".posterior.csv");

    Json data_summary;
    const Dataset d = load_valid(src, stage, data_summary);

    stage = "mixture fit";
    const MixtureModel model = em_fit(d, p, seed, opts);
    const Eigen::MatrixXd post = posterior_suffstat(model, d);
    Json report = {{"command", "mixture"}, {"data", data_summary}, {"model", to_json(model, d.covariate_names())}};
    Json posteriors = Json::array();
    for (Index c = 0; c < post.rows(); ++c) {
        Json row = Json::array();
        for (Index k = 0; k < post.cols(); ++k) row.push_back(post(c, k));
        posteriors.push_back({{"cluster", d.cluster_labels()[static_cast<std::size_t>(c)]}, {"posterior", row}});
    }
    report["posteriors"] = posteriors;
    report["mean_max_posterior"] = post.rowwise().maxCoeff().mean();

    if (!p_grid.empty()) {
        stage = "component grid";
        Json grid = Json::array();
        const double clusters = static_cast<double>(d.c());
        for (const int q : p_grid) {
            const MixtureModel mq = em_fit(d, q, seed, opts);
            const double params = (q - 1) + static_cast<double>(q) * (static_cast<double>(mq.support.size()) - 1.0);
            grid.push_back({{"p", q}, {"loglik", mq.loglik}, {"bic", -2.0 * mq.loglik + params * std::log(clusters)}});
        }
        report["p_grid"] = grid;
    }

    if (estimate) {
        stage = "estimation";
        // The posterior columns sum to one; the last is left out.
        std::vector<std::string> names;
        for (Index k = 0; k + 1 < post.cols(); ++k) names.push_back("post_" + std::to_string(k + 1));
        AugmentedDesign design = augment_with_cluster_stats(d, post.leftCols(post.cols() - 1), names);
        DrPipelineConfig pc;
        pc.nuisance = nuisance;
        pc.folds = folds;
        pc.seed = seed;
        pc.eta = eta;
        const DrPipelineResult res = run_dr_pipeline(d, std::move(design), pc);
        report["estimate"] = {{"statistics", names}, {"nuisance_notes", res.nuisances.spec_notes},
                              {"result", to_json(res.result, d.cluster_labels())}};
        std::ostream& human = output.empty() ? err : out;
        human << "tau=" << fmt4(res.result.tau_hat) << " se=" << fmt4(res.result.se) << " ci=[" << fmt4(res.result.ci_lower)
              << ", " << fmt4(res.result.ci_upper) << "] trimmed_share=" << fmt4(1.0 - res.result.a_bar) << '\n';
    }
    if (!posterior_csv.empty()) report["posterior_csv"] = std::filesystem::path(posterior_csv).filename().string();

    Json effective = source_json(src);
    effective["components"] = p;
    effective["restarts"] = opts.restarts;
    effective["max_iter"] = opts.max_iter;
    effective["tol"] = opts.tol;
    effective["support_cap"] = opts.support_cap;
    effective["p_grid"] = p_grid;
    effective["estimate"] = estimate;
    if (estimate) {
        effective["nuisance"] = to_json(nuisance);
        effective["folds"] = folds;
        effective["eta"] = eta;
    }
    stage = "output";
    emit(report, g, output, effective, seed, out);
    if (!posterior_csv.empty()) write_posterior_csv(d, post, posterior_csv);
    std::ostream& human = output.empty() ? err : out;
    human << "p=" << p << " loglik=" << fmt4(model.loglik) << " mean_max_posterior=" << fmt4(post.rowwise().maxCoeff().mean())
          << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// check-equivalence
// ---------------------------------------------------------------------------

struct EquivalenceArgs {
    std::string data;
    std::string time;
};

int cmd_check_equivalence(const Globals& g, const EquivalenceArgs& a, std::ostream& out, std::ostream& err,
                          std::string& stage) {
    stage = "config";
    const ConfigFile cf(g.config);
    ObjectReader r(cf.doc, "config");
    DataSource src = read_data_source(r, cf, a.data);
    if (!a.time.empty()) src.schema.time = a.time;
    const std::uint64_t seed = pick_seed(g, r);
    const std::string output = pick_output(g, r, cf);
    r.finish();

    Json data_summary;
    const Dataset d = load_valid(src, stage, data_summary);
    stage = "equivalence";
    double tau_fe = 0.0, tau_mundlak = 0.0;
    std::string mode;
    if (d.has_time()) {
        mode = "panel";
        const TwoWayCheck check = twoway_mundlak_check(d);
        tau_fe = check.tau_fe;
        tau_mundlak = check.tau_mundlak;
    } else {
        mode = "cross-section";
        tau_fe = fe_ols(d).tau;
        tau_mundlak = mundlak_ols(d).tau;
    }
    const double diff = std::abs(tau_fe - tau_mundlak);
    const double tolerance = 1e-8 * (1.0 + std::abs(tau_fe));
    const bool equivalent = diff <= tolerance;
    Json report = {{"command", "check-equivalence"}, {"data", data_summary}, {"mode", mode}, {"tau_fe", tau_fe},
                   {"tau_mundlak", tau_mundlak}, {"max_abs_diff", diff}, {"tolerance", tolerance}, {"equivalent", equivalent}};
    stage = "output";
    emit(report, g, output, source_json(src), seed, out);
    std::ostream& human = output.empty() ? err : out;
    human << std::setprecision(12) << "tau_fe=" << tau_fe << " tau_mundlak=" << tau_mundlak << " max_abs_diff=" << diff
          << (equivalent ? " equivalent" : " NOT equivalent") << '\n';
    if (!equivalent) {
        err << "error: check-equivalence: difference " << diff << " exceeds tolerance " << tolerance << '\n';
        return kExitEstimation;
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Treatment effects in clustered observational data", "clusterdr"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "JSON run configuration");
    auto* seed_opt = app.add_option("--seed", seed_value, "master seed");
    app.add_option("--threads", g.threads, "worker cap")->check(CLI::PositiveNumber);
    app.add_option("--output", g.output, "report path (default: standard output)");

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "cross-fitted doubly robust estimate");
    est->add_option("--data", ea.data, "CSV file");
    est->add_flag("--baselines", ea.baselines, "add FE, Mundlak and weighted-FE estimates");
    est->add_option("--folds", ea.folds, "cross-fitting folds");
    est->add_option("--eta", ea.eta, "overlap trimming threshold");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
    sim->add_option("--preset", sa.preset, "named data-generating process");
    sim->add_option("--reps", sa.reps, "replications");
    sim->add_option("--estimator", sa.estimator, "dr, fe, mundlak, weighted-fe, weighted-fe-true or qte");
    sim->add_option("--per-rep-csv", sa.per_rep_csv, "per-replication CSV path");
    sim->add_option("--write-data", sa.write_data, "also write the first replication's dataset as CSV");

    SelectArgs sel_args;
    auto* sel = app.add_subcommand("select", "group-lasso selection of sufficient statistics");
    sel->add_option("--data", sel_args.data, "CSV file");
    sel->add_option("--lambda", sel_args.lambda, "single penalty level");
    sel->add_option("--grid-size", sel_args.grid_size, "path grid size");
    sel->add_option("--max-active", sel_args.max_active, "stop the path once more candidates are active");

    MixtureArgs ma;
    auto* mix = app.add_subcommand("mixture", "finite mixture posteriors as sufficient statistics");
    mix->add_option("--data", ma.data, "CSV file");
    mix->add_option("-p,--components", ma.components, "number of components");
    mix->add_flag("--estimate", ma.estimate, "use the posteriors in a doubly robust estimate");
    mix->add_option("--posterior-csv", ma.posterior_csv, "posterior CSV path");
    mix->add_option("--p-grid", ma.p_grid, "component counts to compare");

    EquivalenceArgs qa;
    auto* eq = app.add_subcommand("check-equivalence", "fixed-effect versus Mundlak treatment coefficient");
    eq->add_option("--data", qa.data, "CSV file");
    eq->add_option("--time", qa.time, "time column (balanced panel)");

    std::vector<std::string> argv_store;
    argv_store.push_back("clusterdr");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    std::string command = app.get_subcommands().front()->get_name();
    std::string stage = "config";
    try {
        if (command == "estimate") return cmd_estimate(g, ea, out, err, stage);
        if (command == "simulate") return cmd_simulate(g, sa, out, err, stage);
        if (command == "select") return cmd_select(g, sel_args, out, err, stage);
        if (command == "mixture") return cmd_mixture(g, ma, out, err, stage);
        return cmd_check_equivalence(g, qa, out, err, stage);
    } catch (const InputError& ex) {
        err << "error: " << command << " failed at " << stage << ": " << ex.what() << '\n';
        return kExitInput;
    } catch (const EstimationError& ex) {
        err << "error: " << command << " failed at " << stage << ": " << ex.what() << '\n';
        return kExitEstimation;
    } catch (const Json::exception& ex) {
        err << "error: " << command << " failed at " << stage << ": " << ex.what() << '\n';
        return kExitInput;
    } catch (const std::exception& ex) {
        err << "error: " << command << " failed at " << stage << ": " << ex.what() << '\n';
        return kExitEstimation;
    }
}

}  // namespace clusterdr
