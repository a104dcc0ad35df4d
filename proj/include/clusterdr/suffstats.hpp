#pragma once

#include "clusterdr/dataset.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace clusterdr {

// Basis function S(x, w) whose within-cluster average enters the conditioning
// set. Covariate indices are zero-based.
struct StatTerm {
    enum class Kind { TreatmentMean, CovariateMean, CovariateSecondMoment, CovariateTreatment, Custom };

    Kind kind = Kind::TreatmentMean;
    Index index = 0;
    Index index2 = 0;
    std::string tag;  // transform name for Kind::Custom

    static StatTerm treatment_mean() { return {Kind::TreatmentMean, 0, 0, {}}; }
    static StatTerm covariate_mean(Index j) { return {Kind::CovariateMean, j, 0, {}}; }
    static StatTerm second_moment(Index j, Index k) { return {Kind::CovariateSecondMoment, j, k, {}}; }
    static StatTerm treatment_interaction(Index j) { return {Kind::CovariateTreatment, j, 0, {}}; }
    static StatTerm custom(std::string tag, Index j) { return {Kind::Custom, j, 0, std::move(tag)}; }

    double evaluate(double w, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    std::string name(const std::vector<std::string>& covariate_names = {}) const;

    bool operator==(const StatTerm&) const = default;
};

struct StatSpec {
    std::vector<StatTerm> terms;

    Index size() const { return static_cast<Index>(terms.size()); }
    // Throws InputError if empty, an index is >= k, or a custom tag is unknown.
    void check(Index k) const;
    // n x m matrix of S(x_i, w_i), one column per term.
    Eigen::MatrixXd evaluate(const Dataset& d) const;
    bool operator==(const StatSpec&) const = default;
};

// {treatment-mean, covariate-mean(0..k-1)}: the group averages used by the
// Mundlak regression.
StatSpec mundlak_spec(Index k);

// Named scalar transforms used by custom terms and derived features.
using ScalarTransform = std::function<double(double)>;
const ScalarTransform& lookup_transform(const std::string& name);
bool has_transform(const std::string& name);
std::vector<std::string> transform_names();
// Not thread-safe against concurrent lookups; register during start-up.
void register_transform(const std::string& name, ScalarTransform fn);

// Per-unit conditioning set (X_i, N_c, S-bar_c) plus overlap indicator.
struct AugmentedDesign {
    Eigen::MatrixXd x;       // n x k
    Eigen::VectorXd w;       // n
    Eigen::MatrixXd s_bar;   // n x m, constant within cluster
    Eigen::VectorXi n_c;     // n
    Eigen::VectorXd a;       // n, entries in {0, 1}
    std::vector<Index> cluster_of;
    std::vector<std::string> stat_names;
    std::optional<Index> treatment_mean_column;

    Index n() const { return x.rows(); }
    Index m() const { return s_bar.cols(); }
    double a_bar() const { return a.size() == 0 ? 0.0 : a.mean(); }
    void set_overlap(const Eigen::VectorXd& mask);
};

AugmentedDesign build_suffstats(const Dataset& d, const StatSpec& spec);

// Uses cluster-level statistics supplied by the caller (for instance mixture
// posteriors) instead of averages of a StatSpec. cluster_stats is c x m.
AugmentedDesign augment_with_cluster_stats(const Dataset& d, const Eigen::MatrixXd& cluster_stats,
                                           std::vector<std::string> names);

// a_i = 1 iff eta < e_i < 1 - eta. A user mask, when given, overrides the
// plug-in rule.
Eigen::VectorXd overlap_set(const Eigen::VectorXd& e_hat, double eta,
                            const std::optional<Eigen::VectorXd>& known_mask = std::nullopt);

constexpr double kDefaultEta = 0.05;

}  // namespace clusterdr
