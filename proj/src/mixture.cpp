#include "clusterdr/mixture.hpp"

#include "clusterdr/errors.hpp"
#include "clusterdr/parallel.hpp"
#include "clusterdr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace clusterdr {

namespace {

SupportCell cell_at(const Dataset& d, Index i) {
    SupportCell cell;
    cell.x.resize(static_cast<std::size_t>(d.k()));
    for (Index j = 0; j < d.k(); ++j) cell.x[static_cast<std::size_t>(j)] = d.x()(i, j);
    cell.w = d.w()(i);
    return cell;
}

// c x |support| cell counts.
Eigen::MatrixXd cell_counts(const MixtureModel& m, const Dataset& d) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(d.c(), static_cast<Index>(m.support.size()));
    for (Index i = 0; i < d.n(); ++i) {
        const Index s = m.cell_of(cell_at(d, i));
        if (s < 0) throw InputError("row " + std::to_string(i + 1) + ": (x, w) cell outside the model support");
        counts(d.cluster_of()[static_cast<std::size_t>(i)], s) += 1.0;
    }
    return counts;
}

// log pi_k + sum_s counts_cs log f_ks, as a c x p matrix.
Eigen::MatrixXd joint_log(const Eigen::MatrixXd& counts, const Eigen::VectorXd& pi, const Eigen::MatrixXd& pmfs) {
    Eigen::MatrixXd lj = counts * pmfs.array().log().matrix().transpose();
    lj.rowwise() += pi.array().log().matrix().transpose();
    return lj;
}

// Normalizes rows in place, returns sum of row log-normalizers.
double normalize_rows(Eigen::MatrixXd& log_joint) {
    double total = 0.0;
    for (Index c = 0; c < log_joint.rows(); ++c) {
        const double mx = log_joint.row(c).maxCoeff();
        const double lse = mx + std::log((log_joint.row(c).array() - mx).exp().sum());
        log_joint.row(c) = (log_joint.row(c).array() - lse).exp().matrix();
        total += lse;
    }
    return total;
}

void floor_and_normalize(Eigen::MatrixXd& rows, double floor) {
    for (Index k = 0; k < rows.rows(); ++k) {
        rows.row(k) = rows.row(k).cwiseMax(floor);
        rows.row(k) /= rows.row(k).sum();
    }
}

struct EmRun {
    Eigen::VectorXd pi;
    Eigen::MatrixXd pmfs;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

EmRun run_em(const Eigen::MatrixXd& counts, Index p, Rng rng, const EmOptions& opts) {
    const Index clusters = counts.rows();
    // Random soft responsibilities, then an M-step.
    Eigen::MatrixXd resp(clusters, p);
    for (Index c = 0; c < clusters; ++c) {
        for (Index k = 0; k < p; ++k) resp(c, k) = rng.uniform() + 1e-3;
        resp.row(c) /= resp.row(c).sum();
    }
    EmRun run;
    auto m_step = [&] {
        run.pi = resp.colwise().sum().transpose() / static_cast<double>(clusters);
        run.pi = run.pi.cwiseMax(opts.pmf_floor);
        run.pi /= run.pi.sum();
        run.pmfs = resp.transpose() * counts;
        floor_and_normalize(run.pmfs, opts.pmf_floor);
    };
    m_step();
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        resp = joint_log(counts, run.pi, run.pmfs);
        const double ll = normalize_rows(resp);
        run.trace.push_back(ll);
        run.iterations = iter + 1;
        if (iter > 0 && ll - run.loglik <= opts.tol * (1.0 + std::abs(ll))) {
            run.loglik = std::max(ll, run.loglik);
            run.converged = true;
            break;
        }
        run.loglik = ll;
        m_step();
    }
    // Log-likelihood of the returned parameters.
    Eigen::MatrixXd lj = joint_log(counts, run.pi, run.pmfs);
    run.loglik = normalize_rows(lj);
    return run;
}

}  // namespace

Index MixtureModel::cell_of(const SupportCell& cell) const {
    const auto it = std::lower_bound(support.begin(), support.end(), cell);
    if (it == support.end() || !(*it == cell)) return -1;
    return static_cast<Index>(it - support.begin());
}

std::vector<SupportCell> discrete_support(const Dataset& d, Index cap) {
    std::map<SupportCell, int> cells;
    for (Index i = 0; i < d.n(); ++i) {
        cells.emplace(cell_at(d, i), 0);
        if (static_cast<Index>(cells.size()) > cap) {
            throw InputError("covariates are not discrete: (x, w) support exceeds " + std::to_string(cap) + " cells");
        }
    }
    std::vector<SupportCell> out;
    for (const auto& [cell, unused] : cells) out.push_back(cell);
    return out;
}

MixtureModel em_fit(const Dataset& d, Index p, std::uint64_t seed, const EmOptions& opts) {
    require_valid(d);
    if (p < 1) throw InputError("mixture needs at least one component");
    if (p > d.c()) throw InputError("more components (" + std::to_string(p) + ") than clusters (" + std::to_string(d.c()) + ")");
    if (opts.restarts < 1) throw InputError("restarts must be positive");

    MixtureModel model;
    model.p = p;
    model.support = discrete_support(d, opts.support_cap);
    const Eigen::MatrixXd counts = cell_counts(model, d);

    const Rng master(seed);
    std::vector<EmRun> runs(static_cast<std::size_t>(opts.restarts));
    parallel_for(runs.size(), opts.threads, [&](std::size_t r) {
        runs[r] = run_em(counts, p, master.split(r), opts);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].loglik > runs[best].loglik) best = r;
    }
    model.pi = runs[best].pi;
    model.component_pmfs = runs[best].pmfs;
    model.loglik = runs[best].loglik;
    model.iterations = runs[best].iterations;
    model.converged = runs[best].converged;
    model.best_restart = static_cast<int>(best);
    for (auto& run : runs) model.loglik_traces.push_back(std::move(run.trace));
    return model;
}

double mixture_loglik(const MixtureModel& m, const Dataset& d) {
    Eigen::MatrixXd lj = joint_log(cell_counts(m, d), m.pi, m.component_pmfs);
    return normalize_rows(lj);
}

Eigen::MatrixXd posterior_suffstat(const MixtureModel& m, const Dataset& d) {
    Eigen::MatrixXd post = joint_log(cell_counts(m, d), m.pi, m.component_pmfs);
    normalize_rows(post);
    return post;
}

}  // namespace clusterdr
