#include "clusterdr/suffstats.hpp"

#include "clusterdr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace clusterdr {

namespace {

std::map<std::string, ScalarTransform>& registry() {
    static std::map<std::string, ScalarTransform> transforms = {
        {"identity", [](double v) { return v; }},
        {"square", [](double v) { return v * v; }},
        {"cube", [](double v) { return v * v * v; }},
        {"abs", [](double v) { return std::abs(v); }},
        {"exp", [](double v) { return std::exp(v); }},
        {"log", [](double v) { return std::log(std::max(v, 1e-12)); }},
        {"log1p-abs", [](double v) { return std::log1p(std::abs(v)); }},
        {"clip3", [](double v) { return std::clamp(v, -3.0, 3.0); }},
        {"positive", [](double v) { return v > 0.0 ? 1.0 : 0.0; }},
        // Logit clipped away from the boundary so degenerate shares stay finite.
        {"logit", [](double v) {
             const double p = std::clamp(v, 1e-6, 1.0 - 1e-6);
             return std::log(p / (1.0 - p));
         }},
    };
    return transforms;
}

std::string covariate_label(Index j, const std::vector<std::string>& names) {
    if (j < static_cast<Index>(names.size())) return names[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j + 1);
}

}  // namespace

const ScalarTransform& lookup_transform(const std::string& name) {
    const auto& reg = registry();
    const auto it = reg.find(name);
    if (it == reg.end()) throw InputError("unknown transform '" + name + "'");
    return it->second;
}

bool has_transform(const std::string& name) { return registry().count(name) > 0; }

std::vector<std::string> transform_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

void register_transform(const std::string& name, ScalarTransform fn) { registry()[name] = std::move(fn); }

double StatTerm::evaluate(double w, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    switch (kind) {
        case Kind::TreatmentMean: return w;
        case Kind::CovariateMean: return x(index);
        case Kind::CovariateSecondMoment: return x(index) * x(index2);
        case Kind::CovariateTreatment: return x(index) * w;
        case Kind::Custom: return lookup_transform(tag)(x(index));
    }
    return 0.0;
}

std::string StatTerm::name(const std::vector<std::string>& covariate_names) const {
    switch (kind) {
        case Kind::TreatmentMean: return "mean(w)";
        case Kind::CovariateMean: return "mean(" + covariate_label(index, covariate_names) + ")";
        case Kind::CovariateSecondMoment:
            return "mean(" + covariate_label(index, covariate_names) + "*" + covariate_label(index2, covariate_names) + ")";
        case Kind::CovariateTreatment: return "mean(w*" + covariate_label(index, covariate_names) + ")";
        case Kind::Custom: return "mean(" + tag + "(" + covariate_label(index, covariate_names) + "))";
    }
    return {};
}

void StatSpec::check(Index k) const {
    if (terms.empty()) throw InputError("sufficient-statistic spec has no terms");
    for (const auto& t : terms) {
        if (t.kind == StatTerm::Kind::TreatmentMean) continue;
        if (t.index < 0 || t.index >= k) {
            throw InputError("statistic term references covariate " + std::to_string(t.index) + " but K = " + std::to_string(k));
        }
        if (t.kind == StatTerm::Kind::CovariateSecondMoment && (t.index2 < 0 || t.index2 >= k)) {
            throw InputError("statistic term references covariate " + std::to_string(t.index2) + " but K = " + std::to_string(k));
        }
        if (t.kind == StatTerm::Kind::Custom && !has_transform(t.tag)) {
            throw InputError("unknown transform '" + t.tag + "'");
        }
    }
}

Eigen::MatrixXd StatSpec::evaluate(const Dataset& d) const {
    check(d.k());
    Eigen::MatrixXd s(d.n(), size());
    for (Index i = 0; i < d.n(); ++i) {
        const double w = d.w()(i);
        for (Index t = 0; t < size(); ++t) s(i, t) = terms[static_cast<std::size_t>(t)].evaluate(w, d.x().row(i));
    }
    return s;
}

StatSpec mundlak_spec(Index k) {
    StatSpec spec;
    spec.terms.push_back(StatTerm::treatment_mean());
    for (Index j = 0; j < k; ++j) spec.terms.push_back(StatTerm::covariate_mean(j));
    return spec;
}

void AugmentedDesign::set_overlap(const Eigen::VectorXd& mask) {
    if (mask.size() != n()) throw InputError("overlap mask has wrong length");
    for (Index i = 0; i < mask.size(); ++i) {
        if (mask(i) != 0.0 && mask(i) != 1.0) throw InputError("overlap mask entries must be 0 or 1");
    }
    a = mask;
}

namespace {

AugmentedDesign design_skeleton(const Dataset& d) {
    AugmentedDesign ad;
    ad.x = d.x();
    ad.w = d.w_real();
    ad.n_c.resize(d.n());
    for (Index i = 0; i < d.n(); ++i) ad.n_c(i) = static_cast<int>(d.cluster_size(d.cluster_of()[static_cast<std::size_t>(i)]));
    ad.a = Eigen::VectorXd::Ones(d.n());
    ad.cluster_of = d.cluster_of();
    return ad;
}

}  // namespace

AugmentedDesign build_suffstats(const Dataset& d, const StatSpec& spec) {
    const Eigen::MatrixXd s = spec.evaluate(d);
    Eigen::MatrixXd cluster_mean = Eigen::MatrixXd::Zero(d.c(), spec.size());
    for (Index g = 0; g < d.c(); ++g) {
        const auto& rows = d.members()[static_cast<std::size_t>(g)];
        for (const Index i : rows) cluster_mean.row(g) += s.row(i);
        cluster_mean.row(g) /= static_cast<double>(rows.size());
    }
    std::vector<std::string> names;
    std::optional<Index> treatment_col;
    for (Index t = 0; t < spec.size(); ++t) {
        const auto& term = spec.terms[static_cast<std::size_t>(t)];
        names.push_back(term.name(d.covariate_names()));
        if (term.kind == StatTerm::Kind::TreatmentMean && !treatment_col) treatment_col = t;
    }
    AugmentedDesign ad = augment_with_cluster_stats(d, cluster_mean, std::move(names));
    ad.treatment_mean_column = treatment_col;
    return ad;
}

AugmentedDesign augment_with_cluster_stats(const Dataset& d, const Eigen::MatrixXd& cluster_stats,
                                           std::vector<std::string> names) {
    if (cluster_stats.rows() != d.c()) throw InputError("cluster statistics must have one row per cluster");
    if (static_cast<Index>(names.size()) != cluster_stats.cols()) {
        names.clear();
        for (Index t = 0; t < cluster_stats.cols(); ++t) names.push_back("stat" + std::to_string(t + 1));
    }
    AugmentedDesign ad = design_skeleton(d);
    ad.s_bar.resize(d.n(), cluster_stats.cols());
    for (Index i = 0; i < d.n(); ++i) ad.s_bar.row(i) = cluster_stats.row(d.cluster_of()[static_cast<std::size_t>(i)]);
    ad.stat_names = std::move(names);
    return ad;
}

Eigen::VectorXd overlap_set(const Eigen::VectorXd& e_hat, double eta,
                            const std::optional<Eigen::VectorXd>& known_mask) {
    if (known_mask) {
        if (known_mask->size() != e_hat.size()) throw InputError("overlap mask has wrong length");
        for (Index i = 0; i < known_mask->size(); ++i) {
            if ((*known_mask)(i) != 0.0 && (*known_mask)(i) != 1.0) throw InputError("overlap mask entries must be 0 or 1");
        }
        return *known_mask;
    }
    if (!(eta > 0.0 && eta < 0.5)) throw InputError("overlap threshold eta must lie in (0, 0.5)");
    Eigen::VectorXd a(e_hat.size());
    for (Index i = 0; i < e_hat.size(); ++i) a(i) = (e_hat(i) > eta && e_hat(i) < 1.0 - eta) ? 1.0 : 0.0;
    return a;
}

}  // namespace clusterdr
