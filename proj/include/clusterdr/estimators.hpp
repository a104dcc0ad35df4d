#pragma once

#include "clusterdr/dataset.hpp"
#include "clusterdr/glm.hpp"
#include "clusterdr/suffstats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace clusterdr {

// AIPW functional: mu1 - mu0 + (w/e - (1-w)/(1-e)) (y - mu_w).
template <typename Scalar>
Scalar psi(Scalar y, int w, Scalar mu1, Scalar mu0, Scalar e) {
    if (!(e > Scalar(0) && e < Scalar(1))) throw InputError("propensity must lie strictly inside (0, 1)");
    const Scalar mu_w = w == 1 ? mu1 : mu0;
    const Scalar weight = w == 1 ? Scalar(1) / e : -Scalar(1) / (Scalar(1) - e);
    return mu1 - mu0 + weight * (y - mu_w);
}

// Inverse-propensity weight of the observed arm.
template <typename Scalar>
Scalar ipw_weight(int w, Scalar e) {
    return w == 1 ? Scalar(1) / e : Scalar(1) / (Scalar(1) - e);
}

// ---------------------------------------------------------------------------
// Regression baselines
// ---------------------------------------------------------------------------

// Treatment coefficient of a cluster fixed-effect style regression. se is a
// cluster-robust (CR0) sandwich built from per-cluster score sums; it is a
// plumbing addition, not part of the estimator itself.
struct RegressionEstimate {
    double tau = 0.0;
    Eigen::VectorXd beta;  // covariate coefficients
    double se = 0.0;
    std::vector<std::string> notes;
};

struct MundlakEstimate {
    double tau = 0.0;
    double intercept = 0.0;
    Eigen::VectorXd beta;   // X_i
    double delta = 0.0;     // cluster mean of W
    Eigen::VectorXd gamma;  // cluster means of X
    double se = 0.0;
    std::vector<Index> columns_dropped;  // in design order (1, W, X, Wbar, Xbar)
};

// Within transformation followed by OLS of demeaned Y on demeaned (W, X).
RegressionEstimate fe_ols(const Dataset& d);

// OLS of Y on (1, W, X, Wbar_c, Xbar_c).
MundlakEstimate mundlak_ols(const Dataset& d);

// Fixed-effect least squares with weights 1 / (e^w (1 - e)^(1 - w)), computed
// by weighted within transformation.
RegressionEstimate weighted_fe(const Dataset& d, const Eigen::VectorXd& e_hat);

// ---------------------------------------------------------------------------
// Nuisance models
// ---------------------------------------------------------------------------

struct FeatureTransform {
    Index index = 0;
    std::string transform;
    bool operator==(const FeatureTransform&) const = default;
};

// Linear outcome model in (1, w, x, f(x), s_bar, g(s_bar), size dummies) with
// optional treatment interactions.
struct OutcomeModelConfig {
    bool use_x = true;
    bool use_sbar = true;
    bool interact_x = true;
    bool interact_sbar = true;
    std::vector<FeatureTransform> x_transforms;
    std::vector<FeatureTransform> sbar_transforms;
};

// Logistic propensity model in (1, x, f(x), s_bar, g(s_bar), size dummies).
struct PropensityModelConfig {
    bool use_x = true;
    bool use_sbar = true;
    std::vector<FeatureTransform> x_transforms;
    std::vector<FeatureTransform> sbar_transforms;
    double ridge = 0.0;
    // Units of clusters with no treatment variation have e = Wbar in {0, 1};
    // they are assigned that value and left out of the propensity fit. Only
    // applies when the model uses s_bar and s_bar contains the treatment mean.
    bool degenerate_known = true;
};

struct NuisanceConfig {
    OutcomeModelConfig outcome;
    PropensityModelConfig propensity;
};

struct NuisanceEstimates {
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
    Eigen::VectorXd e;
    Eigen::VectorXi fold_of_unit;
    int folds = 0;
    std::vector<std::vector<Index>> training_clusters;  // per fold
    std::string spec_notes;
    int propensity_fits_with_separation = 0;
};

NuisanceEstimates fit_nuisances(const AugmentedDesign& ad, const Dataset& d, const FoldAssignment& folds,
                                const NuisanceConfig& cfg);

// ---------------------------------------------------------------------------
// Doubly robust estimate
// ---------------------------------------------------------------------------

struct DrResult {
    double tau_hat = 0.0;
    double v_hat = 0.0;
    double se = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double a_bar = 0.0;
    Eigen::VectorXd xi;  // per cluster
    Index n = 0;
    Index c = 0;
    int folds = 0;
    double eta = kDefaultEta;
};

constexpr double kNormalCritical95 = 1.96;

// tau_hat = sum_i A_i psi_i / (N A_bar); xi_c is the cluster mean of the
// A-masked weighted residual; v_hat = var_c(xi) / A_bar^2; se = sqrt(v_hat/C).
DrResult dr_estimate(const Dataset& d, const AugmentedDesign& ad, const NuisanceEstimates& nu);

// Weighted quantile of arm w within the overlap set: the smallest observed
// outcome whose normalized inverse-propensity-weighted CDF reaches q.
double qte_estimate(const Dataset& d, const NuisanceEstimates& nu, const Eigen::VectorXd& a, double q, int arm);

// ---------------------------------------------------------------------------
// Two-way panel identity
// ---------------------------------------------------------------------------

struct TwoWayCheck {
    double tau_fe = 0.0;
    double tau_mundlak = 0.0;
    double max_abs_diff = 0.0;
};

// Panel: clusters are individuals, time labels are periods. Throws
// EstimationError when the panel is unbalanced.
TwoWayCheck twoway_mundlak_check(const Dataset& panel);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct DrPipelineConfig {
    StatSpec spec;                 // empty = Mundlak spec
    NuisanceConfig nuisance;
    int folds = 2;
    std::uint64_t seed = 0;
    double eta = kDefaultEta;
    std::optional<Eigen::VectorXd> known_overlap;
};

struct DrPipelineResult {
    AugmentedDesign design;
    NuisanceEstimates nuisances;
    DrResult result;
};

// build_suffstats -> folds -> fit_nuisances -> overlap_set -> dr_estimate.
DrPipelineResult run_dr_pipeline(const Dataset& d, const DrPipelineConfig& cfg);

// Same, but with caller-supplied cluster-level statistics.
DrPipelineResult run_dr_pipeline(const Dataset& d, AugmentedDesign design, const DrPipelineConfig& cfg);

}  // namespace clusterdr
