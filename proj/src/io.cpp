#include "clusterdr/io.hpp"

#include "clusterdr/errors.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace clusterdr {

// ---------------------------------------------------------------------------
// Strict object reading
// ---------------------------------------------------------------------------

ObjectReader::ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InputError(where_ + ": expected a JSON object");
}

bool ObjectReader::has(const std::string& key) const { return j_.contains(key); }

const Json* ObjectReader::raw(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
}

void ObjectReader::throw_type(const std::string& key) const {
    throw InputError(path(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
}

void ObjectReader::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
        if (!seen_.count(it.key())) throw InputError(where_ + ": unknown key '" + it.key() + "'");
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& ex) {
        throw InputError("'" + path + "' is not valid JSON: " + ex.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
    if (!out) throw InputError("failed writing '" + path + "'");
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string canonical_body(const Json& report) {
    Json body = report;
    if (body.is_object()) body.erase("timestamp");
    return body.dump(2) + "\n";
}

std::string config_hash(const Json& effective_config) { return fnv1a_hex(effective_config.dump()); }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// ---------------------------------------------------------------------------
// StatSpec
// ---------------------------------------------------------------------------

namespace {

const std::map<StatTerm::Kind, std::string>& kind_names() {
    static const std::map<StatTerm::Kind, std::string> names = {
        {StatTerm::Kind::TreatmentMean, "treatment_mean"},
        {StatTerm::Kind::CovariateMean, "covariate_mean"},
        {StatTerm::Kind::CovariateSecondMoment, "covariate_product"},
        {StatTerm::Kind::CovariateTreatment, "covariate_treatment"},
        {StatTerm::Kind::Custom, "transform"},
    };
    return names;
}

// Non-finite values become null.
Json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json arr = Json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
    return arr;
}

std::vector<FeatureTransform> transforms_from_json(const Json& j, const std::string& where) {
    if (!j.is_array()) throw InputError(where + ": expected an array");
    std::vector<FeatureTransform> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string at = where + "[" + std::to_string(i) + "]";
        ObjectReader r(j[i], at);
        FeatureTransform ft;
        const auto index = r.get<Index>("index");
        const auto name = r.get<std::string>("transform");
        if (!index || !name) throw InputError(at + ": needs 'index' and 'transform'");
        if (!has_transform(*name)) throw InputError(at + ": unknown transform '" + *name + "'");
        ft.index = *index;
        ft.transform = *name;
        r.finish();
        out.push_back(ft);
    }
    return out;
}

Json transforms_json(const std::vector<FeatureTransform>& ts) {
    Json arr = Json::array();
    for (const auto& t : ts) arr.push_back({{"index", t.index}, {"transform", t.transform}});
    return arr;
}

}  // namespace

Json to_json(const StatTerm& term) {
    Json j = {{"kind", kind_names().at(term.kind)}};
    switch (term.kind) {
        case StatTerm::Kind::TreatmentMean: break;
        case StatTerm::Kind::CovariateMean:
        case StatTerm::Kind::CovariateTreatment: j["index"] = term.index; break;
        case StatTerm::Kind::CovariateSecondMoment:
            j["index"] = term.index;
            j["index2"] = term.index2;
            break;
        case StatTerm::Kind::Custom:
            j["index"] = term.index;
            j["transform"] = term.tag;
            break;
    }
    return j;
}

Json to_json(const StatSpec& spec) {
    Json arr = Json::array();
    for (const auto& t : spec.terms) arr.push_back(to_json(t));
    return arr;
}

StatTerm stat_term_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    const auto kind = r.get<std::string>("kind");
    if (!kind) throw InputError(where + ": missing 'kind'");
    StatTerm term;
    bool found = false;
    for (const auto& [k, name] : kind_names()) {
        if (name == *kind) {
            term.kind = k;
            found = true;
        }
    }
    if (!found) throw InputError(where + ": unknown statistic kind '" + *kind + "'");
    auto need_index = [&](const char* key) {
        const auto v = r.get<Index>(key);
        if (!v) throw InputError(where + ": missing '" + key + "'");
        if (*v < 0) throw InputError(where + ": '" + key + "' must be nonnegative");
        return *v;
    };
    switch (term.kind) {
        case StatTerm::Kind::TreatmentMean: break;
        case StatTerm::Kind::CovariateMean:
        case StatTerm::Kind::CovariateTreatment: term.index = need_index("index"); break;
        case StatTerm::Kind::CovariateSecondMoment:
            term.index = need_index("index");
            term.index2 = need_index("index2");
            break;
        case StatTerm::Kind::Custom: {
            term.index = need_index("index");
            const auto tag = r.get<std::string>("transform");
            if (!tag) throw InputError(where + ": missing 'transform'");
            if (!has_transform(*tag)) throw InputError(where + ": unknown transform '" + *tag + "'");
            term.tag = *tag;
            break;
        }
    }
    r.finish();
    return term;
}

StatSpec stat_spec_from_json(const Json& j, const std::string& where) {
    const Json* arr = &j;
    // A select report can be used directly.
    if (j.is_object() && j.contains("selected_spec")) arr = &j.at("selected_spec");
    if (!arr->is_array()) throw InputError(where + ": expected an array of statistic terms");
    StatSpec spec;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        spec.terms.push_back(stat_term_from_json((*arr)[i], where + "[" + std::to_string(i) + "]"));
    }
    return spec;
}

std::vector<std::string> stat_names(const StatSpec& spec, const std::vector<std::string>& covariate_names) {
    std::vector<std::string> names;
    for (const auto& t : spec.terms) names.push_back(t.name(covariate_names));
    return names;
}

// ---------------------------------------------------------------------------
// Schema, nuisance, DGP and estimator configs
// ---------------------------------------------------------------------------

Json to_json(const CsvSchema& schema) {
    Json j = {{"outcome", schema.outcome}, {"treatment", schema.treatment}, {"cluster", schema.cluster}};
    if (schema.time) j["time"] = *schema.time;
    if (schema.covariates_explicit) j["covariates"] = schema.covariates;
    return j;
}

CsvSchema csv_schema_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    CsvSchema s;
    s.outcome = r.get_or<std::string>("outcome", s.outcome);
    s.treatment = r.get_or<std::string>("treatment", s.treatment);
    s.cluster = r.get_or<std::string>("cluster", s.cluster);
    s.time = r.get<std::string>("time");
    if (const auto cov = r.get<std::vector<std::string>>("covariates")) {
        s.covariates = *cov;
        s.covariates_explicit = true;
    }
    r.finish();
    return s;
}

Json to_json(const NuisanceConfig& cfg) {
    const auto& o = cfg.outcome;
    const auto& p = cfg.propensity;
    return {
        {"outcome",
         {{"use_x", o.use_x},
          {"use_sbar", o.use_sbar},
          {"interact_x", o.interact_x},
          {"interact_sbar", o.interact_sbar},
          {"x_transforms", transforms_json(o.x_transforms)},
          {"sbar_transforms", transforms_json(o.sbar_transforms)}}},
        {"propensity",
         {{"use_x", p.use_x},
          {"use_sbar", p.use_sbar},
          {"x_transforms", transforms_json(p.x_transforms)},
          {"sbar_transforms", transforms_json(p.sbar_transforms)},
          {"ridge", p.ridge},
          {"degenerate_known", p.degenerate_known}}},
    };
}

NuisanceConfig nuisance_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    NuisanceConfig cfg;
    if (const Json* o = r.raw("outcome")) {
        ObjectReader ro(*o, where + ".outcome");
        auto& oc = cfg.outcome;
        oc.use_x = ro.get_or("use_x", oc.use_x);
        oc.use_sbar = ro.get_or("use_sbar", oc.use_sbar);
        oc.interact_x = ro.get_or("interact_x", oc.interact_x);
        oc.interact_sbar = ro.get_or("interact_sbar", oc.interact_sbar);
        if (const Json* t = ro.raw("x_transforms")) oc.x_transforms = transforms_from_json(*t, ro.path("x_transforms"));
        if (const Json* t = ro.raw("sbar_transforms")) oc.sbar_transforms = transforms_from_json(*t, ro.path("sbar_transforms"));
        ro.finish();
    }
    if (const Json* p = r.raw("propensity")) {
        ObjectReader rp(*p, where + ".propensity");
        auto& pc = cfg.propensity;
        pc.use_x = rp.get_or("use_x", pc.use_x);
        pc.use_sbar = rp.get_or("use_sbar", pc.use_sbar);
        pc.ridge = rp.get_or("ridge", pc.ridge);
        pc.degenerate_known = rp.get_or("degenerate_known", pc.degenerate_known);
        if (!(pc.ridge >= 0.0)) throw InputError(rp.path("ridge") + ": must be nonnegative");
        if (const Json* t = rp.raw("x_transforms")) pc.x_transforms = transforms_from_json(*t, rp.path("x_transforms"));
        if (const Json* t = rp.raw("sbar_transforms")) pc.sbar_transforms = transforms_from_json(*t, rp.path("sbar_transforms"));
        rp.finish();
    }
    r.finish();
    return cfg;
}

Json to_json(const DgpConfig& cfg) {
    Json comps = Json::array();
    for (const auto& c : cfg.eta.components) {
        comps.push_back({{"weight", c.weight}, {"x_prob", c.x_prob}, {"w_prob", c.w_prob}, {"u_value", c.u_value}});
    }
    Json j = {
        {"c", cfg.c},
        {"n_c", cfg.n_c},
        {"k", cfg.k},
        {"u_dim", cfg.u_dim},
        {"eta_map",
         {{"name", cfg.eta.name},
          {"u_sd", cfg.eta.u_sd},
          {"beta_a", cfg.eta.beta_a},
          {"beta_b", cfg.eta.beta_b},
          {"p_fixed", cfg.eta.p_fixed},
          {"gamma", cfg.eta.gamma},
          {"components", comps}}},
        {"outcome_map",
         {{"name", cfg.outcome.name},
          {"intercept", cfg.outcome.intercept},
          {"beta", cfg.outcome.beta},
          {"theta", cfg.outcome.theta},
          {"lambda_u", cfg.outcome.lambda_u},
          {"lambda_p", cfg.outcome.lambda_p}}},
        {"effect_map",
         {{"name", cfg.effect.name}, {"delta", cfg.effect.delta}, {"kappa_u", cfg.effect.kappa_u}, {"kappa_p", cfg.effect.kappa_p}}},
        {"sigma", cfg.sigma},
        {"noise", cfg.noise},
        {"noise_df", cfg.noise_df},
        {"seed", cfg.seed},
    };
    if (!cfg.preset.empty()) j["preset"] = cfg.preset;
    return j;
}

DgpConfig dgp_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    DgpConfig cfg;
    if (const auto preset = r.get<std::string>("preset")) cfg = dgp_preset(*preset);
    cfg.c = r.get_or("c", cfg.c);
    cfg.n_c = r.get_or("n_c", cfg.n_c);
    cfg.k = r.get_or("k", cfg.k);
    cfg.u_dim = r.get_or("u_dim", cfg.u_dim);
    cfg.sigma = r.get_or("sigma", cfg.sigma);
    cfg.noise = r.get_or("noise", cfg.noise);
    cfg.noise_df = r.get_or("noise_df", cfg.noise_df);
    cfg.seed = r.get_or("seed", cfg.seed);
    if (const Json* e = r.raw("eta_map")) {
        ObjectReader re(*e, where + ".eta_map");
        auto& eta = cfg.eta;
        eta.name = re.get_or("name", eta.name);
        eta.u_sd = re.get_or("u_sd", eta.u_sd);
        eta.beta_a = re.get_or("beta_a", eta.beta_a);
        eta.beta_b = re.get_or("beta_b", eta.beta_b);
        eta.p_fixed = re.get_or("p_fixed", eta.p_fixed);
        eta.gamma = re.get_or("gamma", eta.gamma);
        if (const Json* comps = re.raw("components")) {
            if (!comps->is_array()) throw InputError(re.path("components") + ": expected an array");
            eta.components.clear();
            for (std::size_t i = 0; i < comps->size(); ++i) {
                ObjectReader rc((*comps)[i], re.path("components") + "[" + std::to_string(i) + "]");
                MixtureComponentSpec c;
                c.weight = rc.get_or("weight", c.weight);
                c.x_prob = rc.get_or("x_prob", c.x_prob);
                c.w_prob = rc.get_or("w_prob", c.w_prob);
                c.u_value = rc.get_or("u_value", c.u_value);
                rc.finish();
                eta.components.push_back(c);
            }
        }
        re.finish();
    }
    if (const Json* o = r.raw("outcome_map")) {
        ObjectReader ro(*o, where + ".outcome_map");
        auto& om = cfg.outcome;
        om.name = ro.get_or("name", om.name);
        om.intercept = ro.get_or("intercept", om.intercept);
        om.beta = ro.get_or("beta", om.beta);
        om.theta = ro.get_or("theta", om.theta);
        om.lambda_u = ro.get_or("lambda_u", om.lambda_u);
        om.lambda_p = ro.get_or("lambda_p", om.lambda_p);
        ro.finish();
    }
    if (const Json* e = r.raw("effect_map")) {
        ObjectReader re(*e, where + ".effect_map");
        auto& em = cfg.effect;
        em.name = re.get_or("name", em.name);
        em.delta = re.get_or("delta", em.delta);
        em.kappa_u = re.get_or("kappa_u", em.kappa_u);
        em.kappa_p = re.get_or("kappa_p", em.kappa_p);
        re.finish();
    }
    r.finish();
    cfg.check();
    return cfg;
}

Json to_json(const EstimatorConfig& cfg) {
    Json j = {{"estimator", cfg.estimator}, {"nuisance", to_json(cfg.nuisance)}, {"folds", cfg.folds}, {"eta", cfg.eta}, {"q", cfg.q}};
    if (!cfg.spec.terms.empty()) j["spec"] = to_json(cfg.spec);
    return j;
}

EstimatorConfig estimator_from_json(const Json& j, const std::string& where) {
    ObjectReader r(j, where);
    EstimatorConfig cfg;
    cfg.estimator = r.get_or("estimator", cfg.estimator);
    static const std::set<std::string> known = {"dr", "fe", "mundlak", "weighted-fe", "weighted-fe-true", "qte"};
    if (!known.count(cfg.estimator)) throw InputError(r.path("estimator") + ": unknown estimator '" + cfg.estimator + "'");
    if (const Json* s = r.raw("spec")) cfg.spec = stat_spec_from_json(*s, r.path("spec"));
    if (const Json* n = r.raw("nuisance")) cfg.nuisance = nuisance_from_json(*n, r.path("nuisance"));
    cfg.folds = r.get_or("folds", cfg.folds);
    cfg.eta = r.get_or("eta", cfg.eta);
    cfg.q = r.get_or("q", cfg.q);
    if (cfg.folds < 2) throw InputError(r.path("folds") + ": needs at least 2 folds");
    if (!(cfg.eta > 0.0 && cfg.eta < 0.5)) throw InputError(r.path("eta") + ": must lie in (0, 0.5)");
    if (!(cfg.q > 0.0 && cfg.q < 1.0)) throw InputError(r.path("q") + ": must lie in (0, 1)");
    r.finish();
    return cfg;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

Json to_json(const DrResult& r, const std::vector<std::string>& cluster_labels) {
    Json xi = Json::array();
    for (Index g = 0; g < r.xi.size(); ++g) {
        xi.push_back({{"cluster", cluster_labels.at(static_cast<std::size_t>(g))}, {"xi", number(r.xi(g))}});
    }
    return {
        {"estimand", "conditional: average of mu(1, x, s) - mu(0, x, s) over sampled units in the overlap set"},
        {"tau_hat", number(r.tau_hat)},
        {"v_hat", number(r.v_hat)},
        {"se", number(r.se)},
        {"ci_lower", number(r.ci_lower)},
        {"ci_upper", number(r.ci_upper)},
        {"a_bar", number(r.a_bar)},
        {"trimmed_share", number(1.0 - r.a_bar)},
        {"n", r.n},
        {"c", r.c},
        {"folds", r.folds},
        {"eta", r.eta},
        {"xi", xi},
    };
}

Json to_json(const RegressionEstimate& r) {
    return {{"tau", number(r.tau)}, {"se", number(r.se)}, {"beta", vector_json(r.beta)}, {"notes", r.notes}};
}

Json to_json(const MundlakEstimate& r) {
    return {{"tau", number(r.tau)},           {"se", number(r.se)},
            {"intercept", number(r.intercept)}, {"beta", vector_json(r.beta)},
            {"delta", number(r.delta)},       {"gamma", vector_json(r.gamma)},
            {"columns_dropped", r.columns_dropped},
            {"notes", Json::array({"standard error: cluster-robust sandwich on regression scores"})}};
}

Json to_json(const MixtureModel& m, const std::vector<std::string>& covariate_names) {
    Json support = Json::array();
    for (const auto& cell : m.support) {
        Json x = Json::object();
        for (std::size_t j = 0; j < cell.x.size(); ++j) {
            const std::string name = j < covariate_names.size() ? covariate_names[j] : "x" + std::to_string(j + 1);
            x[name] = cell.x[j];
        }
        support.push_back({{"x", x}, {"w", cell.w}});
    }
    Json pmfs = Json::array();
    for (Index k = 0; k < m.component_pmfs.rows(); ++k) pmfs.push_back(vector_json(m.component_pmfs.row(k).transpose()));
    Json traces = Json::array();
    for (const auto& t : m.loglik_traces) traces.push_back(t);
    return {
        {"p", m.p},
        {"pi", vector_json(m.pi)},
        {"support", support},
        {"component_pmfs", pmfs},
        {"loglik", number(m.loglik)},
        {"iterations", m.iterations},
        {"converged", m.converged},
        {"best_restart", m.best_restart},
        {"loglik_traces", traces},
    };
}

Json to_json(const McReport& r) {
    Json rows = Json::array();
    for (const auto& rep : r.per_rep) {
        Json row = {{"rep", rep.rep}, {"failed", rep.failed}};
        if (rep.failed) {
            row["error"] = rep.error;
        } else {
            row["tau_hat"] = number(rep.tau_hat);
            row["se"] = number(rep.se);
            row["truth"] = number(rep.truth);
            row["covered"] = rep.covered;
            row["a_bar"] = number(rep.a_bar);
        }
        rows.push_back(row);
    }
    return {
        {"reps", r.reps},
        {"failures", r.failures},
        {"failure_rate", number(r.failure_rate)},
        {"bias", number(r.bias)},
        {"rmse", number(r.rmse)},
        {"coverage", number(r.coverage)},
        {"mean_se", number(r.mean_se)},
        {"mc_sd", number(r.mc_sd)},
        {"sd_tau_hat", number(r.sd_tau_hat)},
        {"mean_truth", number(r.mean_truth)},
        {"mean_tau_hat", number(r.mean_tau_hat)},
        {"mean_sd_effect", number(r.mean_sd_effect)},
        {"mean_a_bar", number(r.mean_a_bar)},
        {"per_rep", rows},
    };
}

Json to_json(const GroupLassoFit& fit, const std::vector<std::string>& names) {
    Json selected = Json::array();
    for (const Index j : fit.selected) selected.push_back(names.at(static_cast<std::size_t>(j)));
    return {{"lambda", fit.lambda},
            {"selected", selected},
            {"group_norms", vector_json(fit.group_norms)},
            {"sweeps", fit.sweeps},
            {"converged", fit.converged},
            {"objective", number(fit.objective)}};
}

namespace {

std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

std::vector<std::string> split_simple(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_per_rep_csv(const McReport& r, const std::string& path) {
    std::ostringstream os;
    os << "rep,failed,tau_hat,se,truth,covered,a_bar\n";
    for (const auto& rep : r.per_rep) {
        os << rep.rep << ',' << (rep.failed ? 1 : 0) << ',';
        if (rep.failed) {
            os << ",,,,\n";
            continue;
        }
        os << fmt(rep.tau_hat) << ',' << fmt(rep.se) << ',' << fmt(rep.truth) << ',' << (rep.covered ? 1 : 0) << ','
           << fmt(rep.a_bar) << '\n';
    }
    write_text_file(path, os.str());
}

void write_posterior_csv(const Dataset& d, const Eigen::MatrixXd& posterior, const std::string& path) {
    std::ostringstream os;
    os << "cluster";
    for (Index k = 0; k < posterior.cols(); ++k) os << ",post_" << k + 1;
    os << '\n';
    for (Index g = 0; g < posterior.rows(); ++g) {
        os << d.cluster_labels()[static_cast<std::size_t>(g)];
        for (Index k = 0; k < posterior.cols(); ++k) os << ',' << fmt(posterior(g, k));
        os << '\n';
    }
    write_text_file(path, os.str());
}

Eigen::MatrixXd read_cluster_stats_csv(const Dataset& d, const std::string& path, std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
    const auto header = split_simple(line);
    if (header.size() < 2) throw InputError("'" + path + "': needs a cluster column and at least one statistic");
    names.assign(header.begin() + 1, header.end());
    const auto m = static_cast<Index>(names.size());
    Eigen::MatrixXd stats = Eigen::MatrixXd::Constant(d.c(), m, std::numeric_limits<double>::quiet_NaN());
    std::map<std::string, Index> index;
    for (Index g = 0; g < d.c(); ++g) index[d.cluster_labels()[static_cast<std::size_t>(g)]] = g;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_simple(line);
        if (static_cast<Index>(cells.size()) != m + 1) {
            throw InputError("'" + path + "' row " + std::to_string(row) + ": expected " + std::to_string(m + 1) + " fields");
        }
        const auto it = index.find(cells[0]);
        if (it == index.end()) continue;
        for (Index s = 0; s < m; ++s) {
            const std::string& cell = cells[static_cast<std::size_t>(s + 1)];
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty()) {
                throw InputError("'" + path + "' row " + std::to_string(row) + ": non-numeric value '" + cell + "'");
            }
            stats(it->second, s) = v;
        }
    }
    for (Index g = 0; g < d.c(); ++g) {
        if (!stats.row(g).allFinite()) {
            throw InputError("'" + path + "': no statistics for cluster '" + d.cluster_labels()[static_cast<std::size_t>(g)] + "'");
        }
    }
    return stats;
}

}  // namespace clusterdr
