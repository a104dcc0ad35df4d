#pragma once

#include "clusterdr/dataset.hpp"
#include "clusterdr/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

using clusterdr::Dataset;
using clusterdr::Index;
using clusterdr::Rng;

// Cross-section with c clusters of n_c units, k covariates, confounded
// treatment and an outcome depending on a cluster effect.
inline Dataset random_cross_section(std::uint64_t seed, Index c, Index n_c, Index k) {
    Rng rng(seed);
    const Index n = c * n_c;
    Eigen::VectorXd y(n);
    Eigen::VectorXi w(n);
    Eigen::MatrixXd x(n, k);
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    for (Index g = 0; g < c; ++g) {
        const double u = rng.normal();
        for (Index t = 0; t < n_c; ++t) {
            const Index i = g * n_c + t;
            for (Index j = 0; j < k; ++j) x(i, j) = rng.normal() + 0.5 * u;
            w(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-u))) ? 1 : 0;
            y(i) = 1.0 + 2.0 * w(i) + x.row(i).sum() + u + rng.normal();
            labels[static_cast<std::size_t>(i)] = "c" + std::to_string(g);
        }
    }
    return Dataset::from_columns(y, w, x, labels);
}

// Balanced panel: individuals are clusters, periods are time labels.
inline Dataset random_panel(std::uint64_t seed, Index c, Index periods, Index k) {
    Rng rng(seed);
    const Index n = c * periods;
    Eigen::VectorXd y(n);
    Eigen::VectorXi w(n);
    Eigen::MatrixXd x(n, k);
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    std::vector<std::string> times(static_cast<std::size_t>(n));
    std::vector<double> period_effect(static_cast<std::size_t>(periods));
    for (auto& v : period_effect) v = rng.normal();
    for (Index g = 0; g < c; ++g) {
        const double u = rng.normal();
        for (Index t = 0; t < periods; ++t) {
            const Index i = g * periods + t;
            for (Index j = 0; j < k; ++j) x(i, j) = rng.normal() + u;
            w(i) = rng.bernoulli(0.3 + 0.4 * (u > 0)) ? 1 : 0;
            y(i) = 0.5 * w(i) + x.row(i).sum() + u + period_effect[static_cast<std::size_t>(t)] + rng.normal();
            labels[static_cast<std::size_t>(i)] = "p" + std::to_string(g);
            times[static_cast<std::size_t>(i)] = "t" + std::to_string(t);
        }
    }
    return Dataset::from_columns(y, w, x, labels, {}, times);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("clusterdr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// OLS with an explicit dummy column per cluster; returns the coefficient on
// column `target` of z. Solved through the normal equations with LDLT on a
// full-rank design.
inline double dummy_ols(const Dataset& d, const Eigen::MatrixXd& z, Index target,
                        const Eigen::VectorXd& weights) {
    const Index n = d.n();
    Eigen::MatrixXd design(n, z.cols() + d.c());
    design.leftCols(z.cols()) = z;
    design.rightCols(d.c()).setZero();
    for (Index i = 0; i < n; ++i) design(i, z.cols() + d.cluster_of()[static_cast<std::size_t>(i)]) = 1.0;
    const Eigen::MatrixXd xtwx = design.transpose() * weights.asDiagonal() * design;
    const Eigen::VectorXd xtwy = design.transpose() * weights.asDiagonal() * d.y();
    return xtwx.ldlt().solve(xtwy)(target);
}

}  // namespace testsupport
