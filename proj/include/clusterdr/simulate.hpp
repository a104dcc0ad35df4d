#pragma once

#include "clusterdr/dataset.hpp"
#include "clusterdr/estimators.hpp"
#include "clusterdr/suffstats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace clusterdr {

struct MixtureComponentSpec {
    double weight = 0.5;
    double x_prob = 0.5;  // P(x = 1 | type)
    double w_prob = 0.5;  // P(w = 1 | type)
    double u_value = 0.0; // cluster effect entering the outcome
};

// How the cluster effect U and the within-cluster (X, W) law are drawn.
//
//  normal-beta:  U = (u ~ N(0, u_sd^2), p ~ Beta(a, b)); W ~ Bern(p);
//                x_0 ~ N(u + gamma W, 1); x_1..x_{K-1} ~ N(0, 1).
//                (X, W) | U is exponential family with S(x, w) = (w, x_0).
//  normal-fixed: as normal-beta with p = p_fixed for every cluster.
//  discrete-mixture: finite type U; x_0 ~ Bern(x_prob), W ~ Bern(w_prob),
//                independent given the type; K must be 1.
struct EtaMap {
    std::string name = "normal-beta";
    double u_sd = 1.0;
    double beta_a = 2.0;
    double beta_b = 2.0;
    double p_fixed = 0.5;
    double gamma = 1.0;
    std::vector<MixtureComponentSpec> components;
};

// Baseline outcome: intercept + beta x_0 + theta exp(x_0) + lambda_u u + lambda_p p.
// "linear" forces theta = 0; "exp-x" keeps it.
struct OutcomeMap {
    std::string name = "linear";
    double intercept = 0.0;
    double beta = 1.0;
    double theta = 0.0;
    double lambda_u = 1.0;
    double lambda_p = 0.0;
};

// Unit effect Y(1) - Y(0): "zero", "constant" (delta) or
// "u-linear" (delta + kappa_u u + kappa_p p).
struct EffectMap {
    std::string name = "constant";
    double delta = 1.0;
    double kappa_u = 0.0;
    double kappa_p = 0.0;
};

struct DgpConfig {
    std::string preset;  // informational
    Index c = 200;
    Index n_c = 5;
    Index k = 1;
    Index u_dim = 2;
    EtaMap eta;
    OutcomeMap outcome;
    EffectMap effect;
    double sigma = 1.0;
    std::string noise = "gaussian";  // or "student-t"
    double noise_df = 5.0;
    std::uint64_t seed = 0;

    // Throws InputError on invalid probabilities or sizes.
    void check() const;
};

// Named truth-known worlds: mundlak-linear, nonlinear-u, randomized,
// separated-mixture, ipw-fe, sparse-selection.
DgpConfig dgp_preset(const std::string& name);
std::vector<std::string> dgp_preset_names();

struct GeneratedData {
    Dataset d;
    Eigen::VectorXd y0, y1;
    Eigen::VectorXd effect;        // Y_i(1) - Y_i(0)
    Eigen::VectorXd cond_effect;   // mu(1, X_i, S_i) - mu(0, X_i, S_i)
    Eigen::VectorXd mu0, mu1;      // true conditional means given (X_i, S-bar)
    Eigen::VectorXd e_true;        // P(W_i = 1 | X_i, S-bar)
    Eigen::VectorXd e_within;      // P(W_i = 1 | X_i, U)
    Eigen::MatrixXd u;             // c x 2: (u, p) per cluster
    std::vector<int> component;    // discrete-mixture type per cluster
    double tau_tilde_a = 0.0;      // with A = 1 everywhere

    // In-sample trimmed average of the conditional effect.
    double tau_tilde(const Eigen::VectorXd& a) const;
};

GeneratedData generate(const DgpConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct EstimatorConfig {
    // dr | fe | mundlak | weighted-fe | weighted-fe-true | qte
    std::string estimator = "dr";
    StatSpec spec;  // empty = Mundlak spec
    NuisanceConfig nuisance;
    int folds = 2;
    double eta = kDefaultEta;
    double q = 0.5;
};

struct McRep {
    int rep = 0;
    bool failed = false;
    std::string error;
    double tau_hat = 0.0;
    double se = 0.0;
    double truth = 0.0;
    bool covered = false;
    double a_bar = 1.0;
    double sd_effect = 0.0;
};

struct McReport {
    int reps = 0;
    int failures = 0;
    double failure_rate = 0.0;
    double bias = 0.0;
    double rmse = 0.0;
    double coverage = 0.0;
    double mean_se = 0.0;
    double mc_sd = 0.0;        // sd of (tau_hat - truth) across reps
    double sd_tau_hat = 0.0;
    double mean_truth = 0.0;
    double mean_tau_hat = 0.0;
    double mean_sd_effect = 0.0;
    double mean_a_bar = 0.0;
    std::vector<McRep> per_rep;
};

// One replication: generate, estimate, compare with the per-rep truth.
McRep run_replication(const DgpConfig& dgp, const EstimatorConfig& est, std::uint64_t data_seed,
                      std::uint64_t fold_seed);

// Reps use seeds split from the master seed by rep index; the report is
// identical for any thread count.
McReport monte_carlo(const DgpConfig& dgp, const EstimatorConfig& est, int reps, std::uint64_t seed,
                     unsigned threads = 1);

McReport summarize(std::vector<McRep> reps);

}  // namespace clusterdr
