#include "clusterdr/simulate.hpp"

#include "clusterdr/errors.hpp"
#include "clusterdr/parallel.hpp"
#include "clusterdr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace clusterdr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool open_unit(double p) { return p > 0.0 && p < 1.0; }

double logistic_of(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double logit_of(double p) { return std::log(p / (1.0 - p)); }

bool normal_family(const EtaMap& eta) { return eta.name == "normal-beta" || eta.name == "normal-fixed"; }

// Posterior means of (u, p) for one cluster given its data.
struct Posterior {
    double u = 0.0;
    double p = 0.0;
};

Posterior normal_posterior(const DgpConfig& cfg, double x_bar, double w_bar, double n) {
    const double tau2 = cfg.eta.u_sd * cfg.eta.u_sd;
    Posterior post;
    post.u = n * tau2 * (x_bar - cfg.eta.gamma * w_bar) / (1.0 + n * tau2);
    post.p = cfg.eta.name == "normal-beta" ? (cfg.eta.beta_a + n * w_bar) / (cfg.eta.beta_a + cfg.eta.beta_b + n)
                                           : cfg.eta.p_fixed;
    return post;
}

// P(W_i = 1 | x_i, Wbar, Xbar) for the normal families.
double normal_propensity(const DgpConfig& cfg, double x, double x_bar, double w_bar, double n) {
    if (w_bar == 0.0 || w_bar == 1.0) return w_bar;
    const double s2 = 1.0 - 1.0 / n;
    const double g = cfg.eta.gamma;
    return logistic_of(logit_of(w_bar) + g * (x - x_bar) / s2 + g * g * (2.0 * w_bar - 1.0) / (2.0 * s2));
}

double baseline(const OutcomeMap& om, double x, double u, double p) {
    const double theta = om.name == "exp-x" ? om.theta : 0.0;
    return om.intercept + om.beta * x + theta * std::exp(x) + om.lambda_u * u + om.lambda_p * p;
}

double unit_effect(const EffectMap& em, double u, double p) {
    if (em.name == "zero") return 0.0;
    if (em.name == "constant") return em.delta;
    return em.delta + em.kappa_u * u + em.kappa_p * p;
}

double draw_noise(const DgpConfig& cfg, Rng& rng) {
    if (cfg.sigma == 0.0) return 0.0;
    return cfg.sigma * (cfg.noise == "student-t" ? rng.student_t_unit(cfg.noise_df) : rng.normal());
}

// Smallest value whose empirical CDF reaches q.
double sample_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    for (std::size_t s = 0; s < v.size(); ++s) {
        const bool last_of_tie = s + 1 == v.size() || v[s + 1] != v[s];
        if (last_of_tie && static_cast<double>(s + 1) / n >= q) return v[s];
    }
    return v.back();
}

double sd_of(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

void DgpConfig::check() const {
    if (c < 1) throw InputError("dgp: c must be at least 1");
    if (n_c < 1) throw InputError("dgp: n_c must be at least 1");
    if (k < 1) throw InputError("dgp: k must be at least 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("dgp: sigma must be finite and non-negative");
    if (noise != "gaussian" && noise != "student-t") throw InputError("dgp: unknown noise '" + noise + "'");
    if (noise == "student-t" && !(noise_df > 2.0)) throw InputError("dgp: student-t noise needs df > 2");
    if (outcome.name != "linear" && outcome.name != "exp-x") throw InputError("dgp: unknown outcome_map '" + outcome.name + "'");
    if (effect.name != "zero" && effect.name != "constant" && effect.name != "u-linear") {
        throw InputError("dgp: unknown effect_map '" + effect.name + "'");
    }
    if (eta.name == "normal-beta") {
        if (!(eta.beta_a > 0.0 && eta.beta_b > 0.0)) throw InputError("dgp: beta parameters must be positive");
        if (u_dim != 2) throw InputError("dgp: normal-beta has u_dim 2");
    } else if (eta.name == "normal-fixed") {
        if (!open_unit(eta.p_fixed)) throw InputError("dgp: p_fixed must lie in (0, 1)");
        if (u_dim != 1) throw InputError("dgp: normal-fixed has u_dim 1");
    } else if (eta.name == "discrete-mixture") {
        if (k != 1) throw InputError("dgp: discrete-mixture has a single binary covariate");
        if (u_dim != 1) throw InputError("dgp: discrete-mixture has u_dim 1");
        if (eta.components.empty()) throw InputError("dgp: discrete-mixture needs components");
        double total = 0.0;
        for (const auto& comp : eta.components) {
            if (!open_unit(comp.x_prob) || !open_unit(comp.w_prob)) {
                throw InputError("dgp: component probabilities must lie in (0, 1)");
            }
            if (!(comp.weight > 0.0)) throw InputError("dgp: component weights must be positive");
            total += comp.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InputError("dgp: component weights must sum to 1");
    } else {
        throw InputError("dgp: unknown eta_map '" + eta.name + "'");
    }
    if (normal_family(eta) && !(eta.u_sd >= 0.0 && std::isfinite(eta.u_sd) && std::isfinite(eta.gamma))) {
        throw InputError("dgp: u_sd must be non-negative and gamma finite");
    }
}

std::vector<std::string> dgp_preset_names() {
    return {"mundlak-linear", "nonlinear-u", "randomized", "separated-mixture", "ipw-fe", "sparse-selection"};
}

DgpConfig dgp_preset(const std::string& name) {
    DgpConfig cfg;
    cfg.preset = name;
    if (name == "mundlak-linear") {
        cfg.outcome = {"linear", 0.0, 1.0, 0.0, 1.0, 1.0};
        cfg.effect = {"constant", 1.0, 0.0, 0.0};
    } else if (name == "nonlinear-u") {
        cfg.c = 400;
        cfg.eta.u_sd = 0.7;
        cfg.eta.gamma = 0.5;
        cfg.outcome = {"exp-x", 0.0, 1.0, 0.3, 1.0, 2.0};
        cfg.effect = {"u-linear", 1.0, 0.5, 1.0};
    } else if (name == "randomized") {
        cfg.c = 500;
        cfg.n_c = 10;
        cfg.u_dim = 1;
        cfg.eta.name = "normal-fixed";
        cfg.eta.p_fixed = 0.5;
        cfg.eta.gamma = 0.0;
        cfg.outcome = {"exp-x", 0.0, 1.0, 0.3, 1.0, 0.0};
        cfg.effect = {"constant", 1.0, 0.0, 0.0};
    } else if (name == "separated-mixture") {
        cfg.c = 200;
        cfg.n_c = 20;
        cfg.u_dim = 1;
        cfg.eta.name = "discrete-mixture";
        cfg.eta.components = {{0.5, 0.8, 0.7, 1.0}, {0.5, 0.2, 0.3, -1.0}};
        cfg.outcome = {"linear", 0.0, 1.0, 0.0, 1.0, 0.0};
        cfg.effect = {"u-linear", 1.0, 0.5, 0.0};
    } else if (name == "ipw-fe") {
        cfg.c = 500;
        cfg.n_c = 200;
        cfg.eta.u_sd = 0.3;
        cfg.eta.beta_a = 4.0;
        cfg.eta.beta_b = 4.0;
        cfg.eta.gamma = 0.7;
        cfg.outcome = {"exp-x", 0.0, 0.0, 1.0, 1.0, 0.0};
        cfg.effect = {"constant", 1.0, 0.0, 0.0};
    } else if (name == "sparse-selection") {
        cfg.c = 20;
        cfg.n_c = 30;
        cfg.k = 9;
        cfg.eta.gamma = 0.5;
        cfg.outcome = {"linear", 0.0, 1.0, 0.0, 1.0, 0.0};
        cfg.effect = {"constant", 1.0, 0.0, 0.0};
    } else {
        throw InputError("unknown dgp preset '" + name + "'");
    }
    return cfg;
}

double GeneratedData::tau_tilde(const Eigen::VectorXd& a) const {
    if (a.size() != cond_effect.size()) throw InputError("trimming mask has wrong length");
    const double mass = a.sum();
    if (!(mass > 0.0)) throw EstimationError("overlap set is empty (A_bar = 0)");
    return a.dot(cond_effect) / mass;
}

GeneratedData generate(const DgpConfig& cfg, std::uint64_t seed) {
    cfg.check();
    Rng rng(seed);
    const Index c = cfg.c, nc = cfg.n_c, k = cfg.k, n = c * nc;
    const auto ncd = static_cast<double>(nc);

    Eigen::VectorXd y(n);
    Eigen::VectorXi w(n);
    Eigen::MatrixXd x(n, k);
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    std::vector<std::string> names;
    for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));

    GeneratedData g;
    g.y0.resize(n);
    g.y1.resize(n);
    g.effect.resize(n);
    g.cond_effect.resize(n);
    g.mu0.resize(n);
    g.mu1.resize(n);
    g.e_true.resize(n);
    g.e_within.resize(n);
    g.u = Eigen::MatrixXd::Zero(c, 2);

    const bool mixture = cfg.eta.name == "discrete-mixture";
    std::vector<double> cum;
    for (const auto& comp : cfg.eta.components) cum.push_back((cum.empty() ? 0.0 : cum.back()) + comp.weight);

    for (Index cl = 0; cl < c; ++cl) {
        const Index first = cl * nc;
        double u = 0.0, p = 0.0;
        int type = -1;
        if (mixture) {
            const double draw = rng.uniform() * cum.back();
            type = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), draw) - cum.begin());
            type = std::min(type, static_cast<int>(cum.size()) - 1);
            u = cfg.eta.components[static_cast<std::size_t>(type)].u_value;
            p = cfg.eta.components[static_cast<std::size_t>(type)].w_prob;
            g.component.push_back(type);
        } else {
            u = cfg.eta.u_sd * rng.normal();
            p = cfg.eta.name == "normal-beta" ? rng.beta(cfg.eta.beta_a, cfg.eta.beta_b) : cfg.eta.p_fixed;
        }
        g.u(cl, 0) = u;
        g.u(cl, 1) = p;

        for (Index t = 0; t < nc; ++t) {
            const Index i = first + t;
            labels[static_cast<std::size_t>(i)] = "g" + std::to_string(cl + 1);
            w(i) = rng.bernoulli(p) ? 1 : 0;
            if (mixture) {
                x(i, 0) = rng.bernoulli(cfg.eta.components[static_cast<std::size_t>(type)].x_prob) ? 1.0 : 0.0;
                g.e_within(i) = p;
            } else {
                x(i, 0) = u + cfg.eta.gamma * w(i) + rng.normal();
                for (Index j = 1; j < k; ++j) x(i, j) = rng.normal();
                g.e_within(i) = logistic_of(logit_of(p) + cfg.eta.gamma * (x(i, 0) - u) -
                                            0.5 * cfg.eta.gamma * cfg.eta.gamma);
            }
            const double base = baseline(cfg.outcome, x(i, 0), u, p) + draw_noise(cfg, rng);
            g.y0(i) = base;
            g.y1(i) = base + unit_effect(cfg.effect, u, p);
            g.effect(i) = g.y1(i) - g.y0(i);
            y(i) = w(i) == 1 ? g.y1(i) : g.y0(i);
        }

        // Conditional truths given the cluster's sufficient statistic.
        const Eigen::VectorXd xs = x.block(first, 0, nc, 1);
        const Eigen::VectorXi ws = w.segment(first, nc);
        const double x_bar = xs.mean();
        const double w_bar = ws.cast<double>().mean();
        Posterior post;
        if (mixture) {
            const auto& comps = cfg.eta.components;
            Eigen::VectorXd logw(static_cast<Index>(comps.size()));
            for (std::size_t m = 0; m < comps.size(); ++m) {
                double lw = std::log(comps[m].weight);
                for (Index t = 0; t < nc; ++t) {
                    lw += xs(t) == 1.0 ? std::log(comps[m].x_prob) : std::log(1.0 - comps[m].x_prob);
                    lw += ws(t) == 1 ? std::log(comps[m].w_prob) : std::log(1.0 - comps[m].w_prob);
                }
                logw(static_cast<Index>(m)) = lw;
            }
            const Eigen::VectorXd pw = (logw.array() - logw.maxCoeff()).exp();
            const Eigen::VectorXd post_k = pw / pw.sum();
            for (std::size_t m = 0; m < comps.size(); ++m) {
                post.u += post_k(static_cast<Index>(m)) * comps[m].u_value;
                post.p += post_k(static_cast<Index>(m)) * comps[m].w_prob;
            }
        } else {
            post = normal_posterior(cfg, x_bar, w_bar, ncd);
        }
        for (Index t = 0; t < nc; ++t) {
            const Index i = first + t;
            g.mu0(i) = baseline(cfg.outcome, x(i, 0), post.u, post.p);
            g.cond_effect(i) = unit_effect(cfg.effect, post.u, post.p);
            g.mu1(i) = g.mu0(i) + g.cond_effect(i);
            if (mixture) {
                double same = 0.0, treated = 0.0;
                for (Index s = 0; s < nc; ++s) {
                    if (xs(s) != x(i, 0)) continue;
                    same += 1.0;
                    treated += ws(s);
                }
                g.e_true(i) = treated / same;
            } else {
                g.e_true(i) = nc == 1 ? w_bar : normal_propensity(cfg, x(i, 0), x_bar, w_bar, ncd);
            }
        }
    }
    g.d = Dataset::from_columns(std::move(y), std::move(w), std::move(x), labels, names);
    g.tau_tilde_a = g.cond_effect.mean();
    return g;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

McRep run_replication(const DgpConfig& dgp, const EstimatorConfig& est, std::uint64_t data_seed,
                      std::uint64_t fold_seed) {
    McRep rep;
    rep.se = kNaN;
    try {
        const GeneratedData g = generate(dgp, data_seed);
        const Dataset& d = g.d;
        rep.sd_effect = sd_of(g.effect);
        const Eigen::VectorXd all = Eigen::VectorXd::Ones(d.n());

        DrPipelineConfig pc;
        pc.spec = est.spec;
        pc.nuisance = est.nuisance;
        pc.folds = est.folds;
        pc.seed = fold_seed;
        pc.eta = est.eta;

        if (est.estimator == "dr") {
            const auto out = run_dr_pipeline(d, pc);
            rep.tau_hat = out.result.tau_hat;
            rep.se = out.result.se;
            rep.a_bar = out.result.a_bar;
            rep.truth = g.tau_tilde(out.design.a);
        } else if (est.estimator == "fe") {
            const auto fe = fe_ols(d);
            rep.tau_hat = fe.tau;
            rep.se = fe.se;
            rep.truth = g.tau_tilde(all);
        } else if (est.estimator == "mundlak") {
            const auto mk = mundlak_ols(d);
            rep.tau_hat = mk.tau;
            rep.se = mk.se;
            rep.truth = g.tau_tilde(all);
        } else if (est.estimator == "weighted-fe-true") {
            const Eigen::VectorXd e = g.e_within.cwiseMax(kProbabilityFloor).cwiseMin(1.0 - kProbabilityFloor);
            const auto fe = weighted_fe(d, e);
            rep.tau_hat = fe.tau;
            rep.se = fe.se;
            rep.truth = g.tau_tilde(all);
        } else if (est.estimator == "weighted-fe") {
            // Cross-fitted propensities; units outside the overlap set are dropped.
            const StatSpec spec = est.spec.terms.empty() ? mundlak_spec(d.k()) : est.spec;
            AugmentedDesign ad = build_suffstats(d, spec);
            const auto nu = fit_nuisances(ad, d, cross_fit_folds(d.c(), est.folds, fold_seed), est.nuisance);
            const Eigen::VectorXd a = overlap_set(nu.e, est.eta);
            std::vector<Index> rows;
            for (Index i = 0; i < d.n(); ++i) {
                if (a(i) != 0.0) rows.push_back(i);
            }
            if (rows.empty()) throw EstimationError("overlap set is empty (A_bar = 0)");
            Eigen::VectorXd e(static_cast<Index>(rows.size()));
            for (std::size_t t = 0; t < rows.size(); ++t) e(static_cast<Index>(t)) = nu.e(rows[t]);
            const auto fe = weighted_fe(d.subset(rows), e);
            rep.tau_hat = fe.tau;
            rep.se = fe.se;
            rep.a_bar = a.mean();
            rep.truth = g.tau_tilde(a);
        } else if (est.estimator == "qte") {
            const auto out = run_dr_pipeline(d, pc);
            const Eigen::VectorXd& a = out.design.a;
            rep.tau_hat = qte_estimate(d, out.nuisances, a, est.q, 1) - qte_estimate(d, out.nuisances, a, est.q, 0);
            std::vector<double> q1, q0;
            for (Index i = 0; i < d.n(); ++i) {
                if (a(i) == 0.0) continue;
                q1.push_back(g.y1(i));
                q0.push_back(g.y0(i));
            }
            rep.truth = sample_quantile(q1, est.q) - sample_quantile(q0, est.q);
            rep.a_bar = out.result.a_bar;
        } else {
            throw InputError("unknown estimator '" + est.estimator + "'");
        }
        if (std::isfinite(rep.se)) {
            rep.covered = std::abs(rep.tau_hat - rep.truth) <= kNormalCritical95 * rep.se;
        }
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& ex) {
        rep.failed = true;
        rep.error = ex.what();
    }
    return rep;
}

McReport summarize(std::vector<McRep> reps) {
    McReport r;
    r.reps = static_cast<int>(reps.size());
    std::vector<const McRep*> ok;
    for (const auto& rep : reps) {
        if (rep.failed) {
            ++r.failures;
        } else {
            ok.push_back(&rep);
        }
    }
    r.failure_rate = r.reps > 0 ? static_cast<double>(r.failures) / r.reps : 0.0;
    const auto m = static_cast<Index>(ok.size());
    if (m == 0) {
        r.bias = r.rmse = r.coverage = r.mean_se = r.mc_sd = r.sd_tau_hat = kNaN;
        r.mean_truth = r.mean_tau_hat = r.mean_sd_effect = r.mean_a_bar = kNaN;
        r.per_rep = std::move(reps);
        return r;
    }
    Eigen::VectorXd err(m), tau(m);
    double truth = 0.0, sd_eff = 0.0, a_bar = 0.0, se_sum = 0.0, covered = 0.0;
    int with_se = 0;
    for (Index t = 0; t < m; ++t) {
        const McRep& rep = *ok[static_cast<std::size_t>(t)];
        err(t) = rep.tau_hat - rep.truth;
        tau(t) = rep.tau_hat;
        truth += rep.truth;
        sd_eff += rep.sd_effect;
        a_bar += rep.a_bar;
        if (std::isfinite(rep.se)) {
            ++with_se;
            se_sum += rep.se;
            covered += rep.covered ? 1.0 : 0.0;
        }
    }
    const auto md = static_cast<double>(m);
    r.bias = err.mean();
    r.rmse = std::sqrt(err.squaredNorm() / md);
    r.mc_sd = sd_of(err);
    r.sd_tau_hat = sd_of(tau);
    r.mean_truth = truth / md;
    r.mean_tau_hat = tau.mean();
    r.mean_sd_effect = sd_eff / md;
    r.mean_a_bar = a_bar / md;
    r.coverage = with_se > 0 ? covered / with_se : kNaN;
    r.mean_se = with_se > 0 ? se_sum / with_se : kNaN;
    r.per_rep = std::move(reps);
    return r;
}

McReport monte_carlo(const DgpConfig& dgp, const EstimatorConfig& est, int reps, std::uint64_t seed,
                     unsigned threads) {
    if (reps < 1) throw InputError("reps must be at least 1");
    dgp.check();
    const Rng master(seed);
    std::vector<McRep> rows(static_cast<std::size_t>(reps));
    parallel_for(rows.size(), threads, [&](std::size_t r) {
        const auto stream = static_cast<std::uint64_t>(r);
        rows[r] = run_replication(dgp, est, master.split(2 * stream).seed(), master.split(2 * stream + 1).seed());
        rows[r].rep = static_cast<int>(r);
    });
    return summarize(std::move(rows));
}

}  // namespace clusterdr
