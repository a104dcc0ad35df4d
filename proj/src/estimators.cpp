#include "clusterdr/estimators.hpp"

#include "clusterdr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace clusterdr {

namespace {

Eigen::MatrixXd cluster_means(const Dataset& d, const Eigen::MatrixXd& z, const Eigen::VectorXd& weights) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(d.c(), z.cols());
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(d.c());
    for (Index i = 0; i < d.n(); ++i) {
        const Index g = d.cluster_of()[static_cast<std::size_t>(i)];
        means.row(g) += weights(i) * z.row(i);
        mass(g) += weights(i);
    }
    for (Index g = 0; g < d.c(); ++g) {
        if (mass(g) > 0.0) means.row(g) /= mass(g);
    }
    return means;
}

Eigen::MatrixXd demean_by_cluster(const Dataset& d, const Eigen::MatrixXd& z, const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd means = cluster_means(d, z, weights);
    Eigen::MatrixXd out = z;
    for (Index i = 0; i < d.n(); ++i) out.row(i) -= means.row(d.cluster_of()[static_cast<std::size_t>(i)]);
    return out;
}

// CR0 sandwich for the retained columns of a WLS fit; returns the full
// covariance in retained-column order.
Eigen::MatrixXd cluster_robust_cov(const Eigen::MatrixXd& design, const WlsFit<double>& fit,
                                   const Eigen::VectorXd& response, const Eigen::VectorXd& weights,
                                   const std::vector<Index>& cluster_of, Index clusters) {
    const Index r = fit.rank;
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(clusters, r);
    for (Index i = 0; i < design.rows(); ++i) {
        const double resid = response(i) - fit.fitted(i);
        const Index g = cluster_of[static_cast<std::size_t>(i)];
        for (Index q = 0; q < r; ++q) {
            scores(g, q) += weights(i) * design(i, fit.columns_kept[static_cast<std::size_t>(q)]) * resid;
        }
    }
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    return fit.xtwx_inverse * meat * fit.xtwx_inverse;
}

std::optional<Index> position_in(const std::vector<Index>& kept, Index column) {
    const auto it = std::find(kept.begin(), kept.end(), column);
    if (it == kept.end()) return std::nullopt;
    return static_cast<Index>(it - kept.begin());
}

double coefficient_se(const Eigen::MatrixXd& cov, const std::vector<Index>& kept, Index column) {
    const auto pos = position_in(kept, column);
    if (!pos) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(std::max(0.0, cov(*pos, *pos)));
}

RegressionEstimate within_regression(const Dataset& d, const Eigen::VectorXd& weights) {
    require_valid(d);
    Eigen::MatrixXd raw(d.n(), 2 + d.k());
    raw.col(0) = d.y();
    raw.col(1) = d.w_real();
    raw.rightCols(d.k()) = d.x();
    const Eigen::MatrixXd dm = demean_by_cluster(d, raw, weights);
    const Eigen::VectorXd y = dm.col(0);
    const Eigen::MatrixXd z = dm.rightCols(1 + d.k());
    if (z.col(0).cwiseAbs().maxCoeff() == 0.0) {
        throw EstimationError("no treatment variation within clusters (every cluster is degenerate)");
    }
    const auto fit = wls_fit(z, y, weights);
    if (!position_in(fit.columns_kept, 0)) {
        throw EstimationError("treatment is collinear with the fixed effects");
    }
    RegressionEstimate est;
    est.tau = fit.coefficients(0);
    est.beta = fit.coefficients.tail(d.k());
    const Eigen::MatrixXd cov = cluster_robust_cov(z, fit, y, weights, d.cluster_of(), d.c());
    est.se = coefficient_se(cov, fit.columns_kept, 0);
    for (const Index j : fit.columns_dropped) {
        est.notes.push_back("covariate column " + std::to_string(j) + " dropped as collinear");
    }
    est.notes.push_back("standard error: cluster-robust sandwich on regression scores");
    return est;
}

}  // namespace

RegressionEstimate fe_ols(const Dataset& d) { return within_regression(d, Eigen::VectorXd::Ones(d.n())); }

RegressionEstimate weighted_fe(const Dataset& d, const Eigen::VectorXd& e_hat) {
    if (e_hat.size() != d.n()) throw InputError("propensity vector has wrong length");
    Eigen::VectorXd weights(d.n());
    for (Index i = 0; i < d.n(); ++i) {
        const double e = e_hat(i);
        if (!(e > 0.0 && e < 1.0)) throw InputError("propensity at row " + std::to_string(i + 1) + " is on the boundary of (0, 1)");
        weights(i) = ipw_weight(d.w()(i), e);
    }
    return within_regression(d, weights);
}

MundlakEstimate mundlak_ols(const Dataset& d) {
    require_valid(d);
    const Index k = d.k();
    Eigen::MatrixXd raw(d.n(), 1 + k);
    raw.col(0) = d.w_real();
    raw.rightCols(k) = d.x();
    const Eigen::MatrixXd means = cluster_means(d, raw, Eigen::VectorXd::Ones(d.n()));
    Eigen::MatrixXd design(d.n(), 2 + 2 * k + 1);
    design.col(0).setOnes();
    design.col(1) = raw.col(0);
    design.block(0, 2, d.n(), k) = d.x();
    for (Index i = 0; i < d.n(); ++i) {
        const Index g = d.cluster_of()[static_cast<std::size_t>(i)];
        design(i, 2 + k) = means(g, 0);
        design.block(i, 3 + k, 1, k) = means.block(g, 1, 1, k);
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.n());
    const auto fit = wls_fit(design, d.y(), ones);
    if (!position_in(fit.columns_kept, 1)) throw EstimationError("treatment column is collinear in the Mundlak design");
    MundlakEstimate est;
    est.intercept = fit.coefficients(0);
    est.tau = fit.coefficients(1);
    est.beta = fit.coefficients.segment(2, k);
    est.delta = fit.coefficients(2 + k);
    est.gamma = fit.coefficients.segment(3 + k, k);
    est.columns_dropped = fit.columns_dropped;
    const Eigen::MatrixXd cov = cluster_robust_cov(design, fit, d.y(), ones, d.cluster_of(), d.c());
    est.se = coefficient_se(cov, fit.columns_kept, 1);
    return est;
}

// ---------------------------------------------------------------------------
// Nuisances
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd transformed_columns(const Eigen::MatrixXd& source, const std::vector<FeatureTransform>& specs,
                                    const char* what) {
    Eigen::MatrixXd out(source.rows(), static_cast<Index>(specs.size()));
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto& spec = specs[s];
        if (spec.index < 0 || spec.index >= source.cols()) {
            throw InputError(std::string(what) + " transform references column " + std::to_string(spec.index) +
                             " but only " + std::to_string(source.cols()) + " exist");
        }
        const auto& fn = lookup_transform(spec.transform);
        for (Index i = 0; i < source.rows(); ++i) out(i, static_cast<Index>(s)) = fn(source(i, spec.index));
    }
    return out;
}

Eigen::MatrixXd size_dummies(const Eigen::VectorXi& n_c) {
    std::set<int> levels(n_c.data(), n_c.data() + n_c.size());
    if (levels.size() <= 1) return Eigen::MatrixXd(n_c.size(), 0);
    std::vector<int> lv(levels.begin(), levels.end());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_c.size(), static_cast<Index>(lv.size()) - 1);
    for (Index i = 0; i < n_c.size(); ++i) {
        const auto pos = std::find(lv.begin(), lv.end(), n_c(i)) - lv.begin();
        if (pos > 0) out(i, pos - 1) = 1.0;
    }
    return out;
}

Eigen::MatrixXd hcat(std::initializer_list<const Eigen::MatrixXd*> blocks, Index rows) {
    Index cols = 0;
    for (const auto* b : blocks) cols += b->cols();
    Eigen::MatrixXd out(rows, cols);
    Index at = 0;
    for (const auto* b : blocks) {
        if (b->cols() == 0) continue;
        out.middleCols(at, b->cols()) = *b;
        at += b->cols();
    }
    return out;
}

struct OutcomeDesign {
    Eigen::MatrixXd base;         // n x b, features not involving w
    Eigen::MatrixXd interacting;  // n x r, features interacted with w

    Eigen::MatrixXd rows_at(const std::vector<Index>& rows, const Eigen::VectorXd& w) const {
        const Index b = base.cols();
        const Index r = interacting.cols();
        Eigen::MatrixXd out(static_cast<Index>(rows.size()), 2 + b + r);
        for (std::size_t t = 0; t < rows.size(); ++t) {
            const Index i = rows[t];
            const auto row = static_cast<Index>(t);
            out(row, 0) = 1.0;
            out(row, 1) = w(i);
            out.block(row, 2, 1, b) = base.row(i);
            out.block(row, 2 + b, 1, r) = w(i) * interacting.row(i);
        }
        return out;
    }
};

OutcomeDesign outcome_design(const AugmentedDesign& ad, const OutcomeModelConfig& cfg) {
    const Index n = ad.n();
    const Eigen::MatrixXd empty(n, 0);
    const Eigen::MatrixXd x = cfg.use_x ? ad.x : empty;
    const Eigen::MatrixXd xt = transformed_columns(ad.x, cfg.x_transforms, "covariate");
    const Eigen::MatrixXd s = cfg.use_sbar ? ad.s_bar : empty;
    const Eigen::MatrixXd st = cfg.use_sbar ? transformed_columns(ad.s_bar, cfg.sbar_transforms, "statistic") : empty;
    const Eigen::MatrixXd sizes = cfg.use_sbar ? size_dummies(ad.n_c) : empty;
    OutcomeDesign od;
    od.base = hcat({&x, &xt, &s, &st, &sizes}, n);
    const Eigen::MatrixXd ix = cfg.interact_x ? x : empty;
    const Eigen::MatrixXd ixt = cfg.interact_x ? xt : empty;
    const Eigen::MatrixXd is = cfg.interact_sbar ? s : empty;
    const Eigen::MatrixXd ist = cfg.interact_sbar ? st : empty;
    od.interacting = hcat({&ix, &ixt, &is, &ist}, n);
    return od;
}

Eigen::MatrixXd propensity_design(const AugmentedDesign& ad, const PropensityModelConfig& cfg) {
    const Index n = ad.n();
    const Eigen::MatrixXd empty(n, 0);
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(n, 1);
    const Eigen::MatrixXd x = cfg.use_x ? ad.x : empty;
    const Eigen::MatrixXd xt = transformed_columns(ad.x, cfg.x_transforms, "covariate");
    const Eigen::MatrixXd s = cfg.use_sbar ? ad.s_bar : empty;
    const Eigen::MatrixXd st = cfg.use_sbar ? transformed_columns(ad.s_bar, cfg.sbar_transforms, "statistic") : empty;
    const Eigen::MatrixXd sizes = cfg.use_sbar ? size_dummies(ad.n_c) : empty;
    return hcat({&one, &x, &xt, &s, &st, &sizes}, n);
}

std::string describe(const NuisanceConfig& cfg) {
    std::ostringstream os;
    os << "outcome: linear in (1, w";
    if (cfg.outcome.use_x) os << ", x";
    if (!cfg.outcome.x_transforms.empty()) os << ", f(x)";
    if (cfg.outcome.use_sbar) os << ", s_bar, size";
    if (!cfg.outcome.sbar_transforms.empty() && cfg.outcome.use_sbar) os << ", g(s_bar)";
    if (cfg.outcome.interact_x) os << ", w*x";
    if (cfg.outcome.interact_sbar && cfg.outcome.use_sbar) os << ", w*s_bar";
    os << "); propensity: logistic in (1";
    if (cfg.propensity.use_x) os << ", x";
    if (!cfg.propensity.x_transforms.empty()) os << ", f(x)";
    if (cfg.propensity.use_sbar) os << ", s_bar, size";
    if (!cfg.propensity.sbar_transforms.empty() && cfg.propensity.use_sbar) os << ", g(s_bar)";
    os << ")";
    return os.str();
}

}  // namespace

NuisanceEstimates fit_nuisances(const AugmentedDesign& ad, const Dataset& d, const FoldAssignment& folds,
                                const NuisanceConfig& cfg) {
    if (ad.n() != d.n()) throw InputError("augmented design does not match dataset");
    if (static_cast<Index>(folds.fold_of_cluster.size()) != d.c()) throw InputError("fold assignment does not cover all clusters");
    require_valid(d);
    const Index n = d.n();
    const Eigen::VectorXd& w = ad.w;

    NuisanceEstimates nu;
    nu.mu0.resize(n);
    nu.mu1.resize(n);
    nu.e.resize(n);
    nu.fold_of_unit.resize(n);
    nu.folds = folds.folds;
    nu.spec_notes = describe(cfg);
    for (Index i = 0; i < n; ++i) {
        nu.fold_of_unit(i) = folds.fold_of_cluster[static_cast<std::size_t>(ad.cluster_of[static_cast<std::size_t>(i)])];
    }

    const OutcomeDesign od = outcome_design(ad, cfg.outcome);
    const Eigen::MatrixXd pd = propensity_design(ad, cfg.propensity);

    // Known propensities of degenerate clusters.
    std::vector<bool> degenerate(static_cast<std::size_t>(n), false);
    if (cfg.propensity.degenerate_known && cfg.propensity.use_sbar && ad.treatment_mean_column) {
        for (Index i = 0; i < n; ++i) {
            const double share = ad.s_bar(i, *ad.treatment_mean_column);
            degenerate[static_cast<std::size_t>(i)] = share == 0.0 || share == 1.0;
        }
    }

    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    LogisticOptions<double> lopts;
    lopts.ridge = cfg.propensity.ridge;

    for (int fold = 0; fold < folds.folds; ++fold) {
        std::vector<Index> train, test, ptrain;
        int treated = 0, ptreated = 0;
        for (Index i = 0; i < n; ++i) {
            if (nu.fold_of_unit(i) == fold) {
                test.push_back(i);
            } else {
                train.push_back(i);
                treated += d.w()(i);
                if (!degenerate[static_cast<std::size_t>(i)]) {
                    ptrain.push_back(i);
                    ptreated += d.w()(i);
                }
            }
        }
        nu.training_clusters.push_back({});
        for (std::size_t g = 0; g < folds.fold_of_cluster.size(); ++g) {
            if (folds.fold_of_cluster[g] != fold) nu.training_clusters.back().push_back(static_cast<Index>(g));
        }
        if (test.empty()) continue;
        if (treated == 0 || treated == static_cast<int>(train.size())) {
            throw EstimationError("training data for fold " + std::to_string(fold) + " lacks one treatment arm");
        }
        if (ptreated == 0 || ptreated == static_cast<int>(ptrain.size())) {
            throw EstimationError("propensity training data for fold " + std::to_string(fold) + " lacks one treatment arm");
        }

        Eigen::VectorXd y_train(static_cast<Index>(train.size()));
        for (std::size_t t = 0; t < train.size(); ++t) y_train(static_cast<Index>(t)) = d.y()(train[t]);
        const auto ofit = wls_fit(od.rows_at(train, w), y_train, Eigen::VectorXd::Ones(y_train.size()));
        const Eigen::VectorXd m0 = od.rows_at(test, zeros) * ofit.coefficients;
        const Eigen::VectorXd m1 = od.rows_at(test, ones) * ofit.coefficients;

        Eigen::MatrixXd p_train(static_cast<Index>(ptrain.size()), pd.cols());
        Eigen::VectorXd w_train(static_cast<Index>(ptrain.size()));
        for (std::size_t t = 0; t < ptrain.size(); ++t) {
            p_train.row(static_cast<Index>(t)) = pd.row(ptrain[t]);
            w_train(static_cast<Index>(t)) = w(ptrain[t]);
        }
        const auto pfit = logistic_fit(p_train, w_train, Eigen::VectorXd::Ones(w_train.size()), lopts);
        if (pfit.separation_detected) ++nu.propensity_fits_with_separation;

        for (std::size_t t = 0; t < test.size(); ++t) {
            const Index i = test[t];
            nu.mu0(i) = m0(static_cast<Index>(t));
            nu.mu1(i) = m1(static_cast<Index>(t));
            if (degenerate[static_cast<std::size_t>(i)]) {
                nu.e(i) = std::clamp(ad.s_bar(i, *ad.treatment_mean_column), kProbabilityFloor, 1.0 - kProbabilityFloor);
            } else {
                nu.e(i) = predict_proba(pfit, pd.row(i));
            }
        }
    }
    return nu;
}

// ---------------------------------------------------------------------------
// DR estimate, QTE
// ---------------------------------------------------------------------------

DrResult dr_estimate(const Dataset& d, const AugmentedDesign& ad, const NuisanceEstimates& nu) {
    const Index n = d.n();
    if (ad.n() != n || nu.mu0.size() != n || nu.mu1.size() != n || nu.e.size() != n) {
        throw InputError("nuisance estimates do not cover all units");
    }
    const Eigen::VectorXd& a = ad.a;
    const double a_bar = a.mean();
    if (!(a_bar > 0.0)) throw EstimationError("overlap set is empty (A_bar = 0)");

    DrResult r;
    r.n = n;
    r.c = d.c();
    r.folds = nu.folds;
    r.a_bar = a_bar;
    r.xi = Eigen::VectorXd::Zero(d.c());
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (a(i) == 0.0) continue;
        const int wi = d.w()(i);
        const double yi = d.y()(i);
        total += a(i) * psi(yi, wi, nu.mu1(i), nu.mu0(i), nu.e(i));
        const double mu_w = wi == 1 ? nu.mu1(i) : nu.mu0(i);
        const double signed_weight = wi == 1 ? 1.0 / nu.e(i) : -1.0 / (1.0 - nu.e(i));
        const Index g = d.cluster_of()[static_cast<std::size_t>(i)];
        r.xi(g) += a(i) * signed_weight * (yi - mu_w);
    }
    for (Index g = 0; g < d.c(); ++g) r.xi(g) /= static_cast<double>(d.cluster_size(g));
    r.tau_hat = total / (static_cast<double>(n) * a_bar);
    const double xi_mean = r.xi.mean();
    r.v_hat = (r.xi.array() - xi_mean).square().sum() / static_cast<double>(d.c()) / (a_bar * a_bar);
    r.se = std::sqrt(r.v_hat / static_cast<double>(d.c()));
    r.ci_lower = r.tau_hat - kNormalCritical95 * r.se;
    r.ci_upper = r.tau_hat + kNormalCritical95 * r.se;
    return r;
}

double qte_estimate(const Dataset& d, const NuisanceEstimates& nu, const Eigen::VectorXd& a, double q, int arm) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0, 1)");
    if (arm != 0 && arm != 1) throw InputError("arm must be 0 or 1");
    if (a.size() != d.n() || nu.e.size() != d.n()) throw InputError("overlap mask or propensities have wrong length");
    std::vector<std::pair<double, double>> pts;  // (outcome, weight)
    for (Index i = 0; i < d.n(); ++i) {
        if (a(i) == 0.0 || d.w()(i) != arm) continue;
        pts.emplace_back(d.y()(i), ipw_weight(arm, nu.e(i)));
    }
    if (pts.empty()) throw EstimationError("no units of arm " + std::to_string(arm) + " inside the overlap set");
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (const auto& pt : pts) total += pt.second;
    double cum = 0.0;
    for (std::size_t s = 0; s < pts.size(); ++s) {
        cum += pts[s].second;
        const bool last_of_tie = s + 1 == pts.size() || pts[s + 1].first != pts[s].first;
        if (last_of_tie && cum / total >= q) return pts[s].first;
    }
    return pts.back().first;
}

// ---------------------------------------------------------------------------
// Two-way panel identity
// ---------------------------------------------------------------------------

TwoWayCheck twoway_mundlak_check(const Dataset& panel) {
    require_valid(panel);
    if (!panel.has_time()) throw InputError("panel check needs a time column");
    const Index units = panel.c();
    const auto periods = static_cast<Index>(panel.time_labels().size());
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(units, periods);
    for (Index i = 0; i < panel.n(); ++i) {
        seen(panel.cluster_of()[static_cast<std::size_t>(i)], panel.time_of()[static_cast<std::size_t>(i)]) += 1;
    }
    if ((seen.array() != 1).any()) throw EstimationError("panel is unbalanced: every unit must appear exactly once in every period");

    const Index k = panel.k();
    Eigen::MatrixXd raw(panel.n(), 2 + k);
    raw.col(0) = panel.y();
    raw.col(1) = panel.w_real();
    raw.rightCols(k) = panel.x();
    Eigen::MatrixXd by_unit = Eigen::MatrixXd::Zero(units, raw.cols());
    Eigen::MatrixXd by_time = Eigen::MatrixXd::Zero(periods, raw.cols());
    for (Index i = 0; i < panel.n(); ++i) {
        by_unit.row(panel.cluster_of()[static_cast<std::size_t>(i)]) += raw.row(i);
        by_time.row(panel.time_of()[static_cast<std::size_t>(i)]) += raw.row(i);
    }
    by_unit /= static_cast<double>(periods);
    by_time /= static_cast<double>(units);
    const Eigen::RowVectorXd grand = raw.colwise().mean();

    Eigen::MatrixXd dot = raw;
    for (Index i = 0; i < panel.n(); ++i) {
        dot.row(i) += -by_time.row(panel.time_of()[static_cast<std::size_t>(i)]) -
                      by_unit.row(panel.cluster_of()[static_cast<std::size_t>(i)]) + grand;
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(panel.n());
    const auto fe = wls_fit(dot.rightCols(1 + k), dot.col(0), ones);
    if (!position_in(fe.columns_kept, 0)) {
        throw EstimationError("treatment has no variation after removing unit and period effects");
    }

    // (1, W, X, Wbar_t, Wbar_c, Xbar_t, Xbar_c)
    Eigen::MatrixXd design(panel.n(), 1 + (1 + k) * 3);
    for (Index i = 0; i < panel.n(); ++i) {
        const Index t = panel.time_of()[static_cast<std::size_t>(i)];
        const Index g = panel.cluster_of()[static_cast<std::size_t>(i)];
        design(i, 0) = 1.0;
        design.block(i, 1, 1, 1 + k) = raw.block(i, 1, 1, 1 + k);
        design(i, 2 + k) = by_time(t, 1);
        design(i, 3 + k) = by_unit(g, 1);
        design.block(i, 4 + k, 1, k) = by_time.block(t, 2, 1, k);
        design.block(i, 4 + 2 * k, 1, k) = by_unit.block(g, 2, 1, k);
    }
    const auto mk = wls_fit(design, panel.y(), ones);
    if (!position_in(mk.columns_kept, 1)) throw EstimationError("treatment column is collinear in the two-way Mundlak design");

    TwoWayCheck check;
    check.tau_fe = fe.coefficients(0);
    check.tau_mundlak = mk.coefficients(1);
    check.max_abs_diff = std::abs(check.tau_fe - check.tau_mundlak);
    return check;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

DrPipelineResult run_dr_pipeline(const Dataset& d, const DrPipelineConfig& cfg) {
    const StatSpec spec = cfg.spec.terms.empty() ? mundlak_spec(d.k()) : cfg.spec;
    return run_dr_pipeline(d, build_suffstats(d, spec), cfg);
}

DrPipelineResult run_dr_pipeline(const Dataset& d, AugmentedDesign design, const DrPipelineConfig& cfg) {
    const FoldAssignment folds = cross_fit_folds(d.c(), cfg.folds, cfg.seed);
    DrPipelineResult out;
    out.nuisances = fit_nuisances(design, d, folds, cfg.nuisance);
    design.set_overlap(overlap_set(out.nuisances.e, cfg.eta, cfg.known_overlap));
    out.result = dr_estimate(d, design, out.nuisances);
    out.result.eta = cfg.eta;
    out.design = std::move(design);
    return out;
}

}  // namespace clusterdr
