#pragma once

#include "clusterdr/estimators.hpp"
#include "clusterdr/rng.hpp"
#include "clusterdr/suffstats.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace testsupport {

using namespace clusterdr;

// Straight transcription of the estimator and its variance: every sum written
// out, no shared helpers with the library.
inline void transcribe_dr(const Dataset& d, const Eigen::VectorXd& a, const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1,
                   const Eigen::VectorXd& e, double& tau, double& v) {
    const Index n = d.n();
    double a_sum = 0.0;
    for (Index i = 0; i < n; ++i) a_sum += a(i);
    const double a_bar = a_sum / static_cast<double>(n);
    double s = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double w = d.w()(i);
        const double y = d.y()(i);
        const double mu_w = w * mu1(i) + (1.0 - w) * mu0(i);
        const double psi_i = mu1(i) - mu0(i) + (w / e(i) - (1.0 - w) / (1.0 - e(i))) * (y - mu_w);
        s += a(i) * psi_i;
    }
    tau = s / (static_cast<double>(n) * a_bar);

    std::vector<double> xi;
    for (const std::string& label : d.cluster_labels()) {
        double total = 0.0;
        double size = 0.0;
        for (Index i = 0; i < n; ++i) {
            if (d.unit(i).cluster_id == label) size += 1.0;
        }
        for (Index i = 0; i < n; ++i) {
            if (d.unit(i).cluster_id != label) continue;
            const double w = d.w()(i);
            const double mu_w = w * mu1(i) + (1.0 - w) * mu0(i);
            total += a(i) / size * (w / e(i) - (1.0 - w) / (1.0 - e(i))) * (d.y()(i) - mu_w);
        }
        xi.push_back(total);
    }
    const double c = static_cast<double>(xi.size());
    double mean = 0.0;
    for (const double v_c : xi) mean += v_c / c;
    double ss = 0.0;
    for (const double v_c : xi) ss += (v_c - mean) * (v_c - mean);
    v = ss / c / (a_bar * a_bar);
}

struct Nuisance {
    AugmentedDesign ad;
    NuisanceEstimates nu;
};

inline Nuisance random_nuisance(const Dataset& d, std::uint64_t seed) {
    Rng rng(seed);
    Nuisance out;
    out.ad = build_suffstats(d, mundlak_spec(d.k()));
    out.nu.mu0.resize(d.n());
    out.nu.mu1.resize(d.n());
    out.nu.e.resize(d.n());
    Eigen::VectorXd a(d.n());
    for (Index i = 0; i < d.n(); ++i) {
        out.nu.mu0(i) = rng.normal();
        out.nu.mu1(i) = 1.0 + rng.normal();
        out.nu.e(i) = 0.1 + 0.8 * rng.uniform();
        a(i) = rng.bernoulli(0.8) ? 1.0 : 0.0;
    }
    a(0) = 1.0;
    out.ad.set_overlap(a);
    out.nu.folds = 2;
    return out;
}

}  // namespace testsupport
