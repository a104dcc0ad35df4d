#pragma once

#include "clusterdr/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace clusterdr {

// One cell of the discrete (x, w) support.
struct SupportCell {
    std::vector<double> x;
    int w = 0;
    bool operator<(const SupportCell& o) const { return w != o.w ? w < o.w : x < o.x; }
    bool operator==(const SupportCell&) const = default;
};

// Finite mixture over cluster types with saturated component tables.
struct MixtureModel {
    Index p = 0;
    Eigen::VectorXd pi;                 // p
    std::vector<SupportCell> support;   // sorted
    Eigen::MatrixXd component_pmfs;     // p x |support|
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    // Observed-data log-likelihood at every iteration of every restart.
    std::vector<std::vector<double>> loglik_traces;
    int best_restart = 0;

    Index cell_of(const SupportCell& cell) const;  // -1 if absent
};

struct EmOptions {
    double tol = 1e-10;
    int max_iter = 1000;
    int restarts = 5;
    Index support_cap = 256;
    double pmf_floor = 1e-9;
    unsigned threads = 1;
};

// Observed (x, w) support of the dataset, sorted. Throws InputError when it
// exceeds cap (continuous covariates).
std::vector<SupportCell> discrete_support(const Dataset& d, Index cap);

// Maximizes sum_c log sum_k pi_k prod_j f(x_j, w_j | k) by EM; best of
// `restarts` seeded initializations.
MixtureModel em_fit(const Dataset& d, Index p, std::uint64_t seed, const EmOptions& opts = {});

// Observed-data log-likelihood of d under m.
double mixture_loglik(const MixtureModel& m, const Dataset& d);

// c x p matrix of posterior component probabilities per cluster, computed in
// log space.
Eigen::MatrixXd posterior_suffstat(const MixtureModel& m, const Dataset& d);

}  // namespace clusterdr
