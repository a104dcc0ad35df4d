#include "clusterdr/glm.hpp"

#include "clusterdr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clusterdr {

std::vector<Index> FoldAssignment::clusters_in(int fold) const {
    std::vector<Index> out;
    for (std::size_t g = 0; g < fold_of_cluster.size(); ++g) {
        if (fold_of_cluster[g] == fold) out.push_back(static_cast<Index>(g));
    }
    return out;
}

FoldAssignment cross_fit_folds(Index clusters, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("cross-fitting needs at least 2 folds");
    if (folds > clusters) throw InputError("more folds (" + std::to_string(folds) + ") than clusters (" + std::to_string(clusters) + ")");
    std::vector<Index> order(static_cast<std::size_t>(clusters));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    rng.shuffle(order);
    FoldAssignment assignment;
    assignment.folds = folds;
    assignment.seed = seed;
    assignment.fold_of_cluster.assign(static_cast<std::size_t>(clusters), 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        assignment.fold_of_cluster[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    }
    return assignment;
}

namespace {

// Shared state of the multinomial problem on standardized features.
class MultinomialProblem {
public:
    MultinomialProblem(const Eigen::MatrixXd& features, const std::vector<Index>& categories, bool standardize) {
        n_ = features.rows();
        q_ = features.cols();
        if (q_ < 1) throw InputError("group lasso needs at least one candidate statistic");
        if (static_cast<Index>(categories.size()) != n_) throw InputError("category labels have wrong length");
        Index max_cat = -1;
        for (const Index g : categories) {
            if (g < 0) throw InputError("category labels must be nonnegative");
            max_cat = std::max(max_cat, g);
        }
        g_ = max_cat + 1;
        if (g_ < 2) throw InputError("group lasso needs at least two clusters");
        if (!features.allFinite()) throw InputError("candidate statistics contain non-finite values");
        x_ = features;
        if (standardize) {
            for (Index j = 0; j < q_; ++j) {
                const double mean = x_.col(j).mean();
                x_.col(j).array() -= mean;
                const double sd = std::sqrt(x_.col(j).squaredNorm() / static_cast<double>(n_));
                if (sd > 0.0) x_.col(j) /= sd;
            }
        }
        y_ = categories;
        counts_ = Eigen::VectorXd::Zero(g_);
        for (const Index g : categories) counts_(g) += 1.0;
        for (Index g = 0; g < g_; ++g) {
            if (counts_(g) == 0.0) throw InputError("category " + std::to_string(g) + " has no units");
        }
        xa_.resize(n_, q_ + 1);
        xa_.col(0).setOnes();
        xa_.rightCols(q_) = x_;
    }

    Index n() const { return n_; }
    Index q() const { return q_; }
    Index categories() const { return g_; }
    const Eigen::MatrixXd& x() const { return x_; }
    // Intercept column followed by the features.
    const Eigen::MatrixXd& xa() const { return xa_; }

    // Centered intercepts of the null model: log n_g minus its mean.
    Eigen::VectorXd null_intercepts() const {
        Eigen::VectorXd b0 = counts_.array().log();
        return b0.array() - b0.mean();
    }

    // eta: G x n linear predictors, one column per unit.
    Eigen::MatrixXd linear_predictor(const Eigen::MatrixXd& coef, const Eigen::VectorXd& b0) const {
        Eigen::MatrixXd eta = coef.transpose() * x_.transpose();
        eta.colwise() += b0;
        return eta;
    }

    // Residual P - Y (G x n), and the mean negative log-likelihood.
    double residual(const Eigen::MatrixXd& eta, Eigen::MatrixXd& resid) const {
        resid.resize(g_, n_);
        double nll = 0.0;
        for (Index i = 0; i < n_; ++i) {
            const auto e = eta.col(i);
            auto r = resid.col(i);
            const double mx = e.maxCoeff();
            r = (e.array() - mx).exp().matrix();
            const double denom = r.sum();
            r /= denom;
            const Index yi = y_[static_cast<std::size_t>(i)];
            nll += mx + std::log(denom) - e(yi);
            r(yi) -= 1.0;
        }
        return nll / static_cast<double>(n_);
    }

    // Diagonal curvature bound, (q+1) x G, for steps in (intercept, coef).
    // Across categories the softmax Hessian is dominated by diag(p), which
    // leaves one block M_g = mean_i p_ig xa_i xa_i' per category; each block
    // is then bounded by its scaled Gershgorin diagonal
    // D_jg = sum_k |M_jk| sqrt(M_kk / M_jj).
    Eigen::MatrixXd metric(const Eigen::MatrixXd& resid) const {
        Eigen::MatrixXd p = resid;
        for (Index i = 0; i < n_; ++i) p(y_[static_cast<std::size_t>(i)], i) += 1.0;
        const Index m = q_ + 1;
        std::vector<Eigen::VectorXd> blocks(static_cast<std::size_t>(m * m));
        for (Index j = 0; j < m; ++j) {
            for (Index k = j; k < m; ++k) {
                const Eigen::VectorXd v = p * xa_.col(j).cwiseProduct(xa_.col(k)) / static_cast<double>(n_);
                blocks[static_cast<std::size_t>(j * m + k)] = v;
                blocks[static_cast<std::size_t>(k * m + j)] = v;
            }
        }
        auto at = [&](Index j, Index k) -> const Eigen::VectorXd& { return blocks[static_cast<std::size_t>(j * m + k)]; };
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, g_);
        for (Index j = 0; j < m; ++j) {
            for (Index g = 0; g < g_; ++g) {
                const double mjj = at(j, j)(g);
                if (!(mjj > 0.0)) continue;
                double sum = 0.0;
                for (Index k = 0; k < m; ++k) sum += std::abs(at(j, k)(g)) * std::sqrt(at(k, k)(g) / mjj);
                d(j, g) = sum;
            }
            const double top = d.row(j).maxCoeff();
            d.row(j) = d.row(j).cwiseMax(top > 0.0 ? 1e-6 * top : 1.0);
        }
        return d;
    }

private:
    Index n_ = 0;
    Index q_ = 0;
    Index g_ = 0;
    Eigen::MatrixXd x_;
    std::vector<Index> y_;
    Eigen::VectorXd counts_;
    Eigen::MatrixXd xa_;
};

// Minimizer of 0.5 (b - z)' D (b - z) + penalty ||b|| over b, for a positive
// diagonal D. Zero when ||D z|| <= penalty; otherwise b = (D + mu)^-1 D z
// where mu = penalty / ||b||, found by bisection on log mu.
Eigen::RowVectorXd diagonal_group_prox(const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& d, double penalty) {
    if (penalty == 0.0) return z;
    const Eigen::RowVectorXd v = d.cwiseProduct(z);
    const double vnorm = v.norm();
    if (vnorm <= penalty) return Eigen::RowVectorXd::Zero(z.size());
    // mu ||(D + mu)^-1 v|| increases from 0 to ||v|| in mu.
    auto excess = [&](double mu) { return mu * (v.array() / (d.array() + mu)).matrix().norm() - penalty; };
    double lo = 1e-300, hi = 1.0;
    while (excess(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        (excess(mid) < 0.0 ? lo : hi) = mid;
        if (hi / lo < 1.0 + 1e-15) break;
    }
    const double mu = 0.5 * (lo + hi);
    return (v.array() / (d.array() + mu)).matrix();
}

struct Evaluation {
    Eigen::MatrixXd eta;
    Eigen::MatrixXd resid;
    double nll = 0.0;
};

// Accelerated proximal gradient over all blocks at once, in the diagonal
// metric alpha * D. alpha grows when the quadratic model fails to bound the
// loss; momentum restarts when the objective goes up.
GroupLassoFit solve_apg(const MultinomialProblem& prob, double lambda, const GroupLassoOptions& opts,
                        const Eigen::MatrixXd& coef, const Eigen::VectorXd& b0) {
    const Index q = prob.q();
    const Index m = q + 1;
    const double inv_n = 1.0 / static_cast<double>(prob.n());
    auto evaluate = [&](const Eigen::MatrixXd& th, Evaluation& e) {
        e.eta = th.transpose() * prob.xa().transpose();
        e.nll = prob.residual(e.eta, e.resid);
    };
    auto penalty = [&](const Eigen::MatrixXd& th) { return lambda * th.bottomRows(q).rowwise().norm().sum(); };

    Eigen::MatrixXd theta(m, prob.categories());
    theta.row(0) = b0.transpose();
    theta.bottomRows(q) = coef;
    Evaluation at_theta, at_y, at_next;
    evaluate(theta, at_theta);
    double objective = at_theta.nll + penalty(theta);
    const Eigen::MatrixXd d = prob.metric(at_theta.resid);
    Eigen::MatrixXd y = theta;
    at_y = at_theta;
    double t = 1.0;
    double alpha = 1.0;

    GroupLassoFit fit;
    fit.lambda = lambda;
    Eigen::MatrixXd next(m, prob.categories());
    for (int iter = 0; iter < opts.max_sweeps; ++iter) {
        const Eigen::MatrixXd grad = prob.xa().transpose() * at_y.resid.transpose() * inv_n;
        bool first_try = true;
        for (;;) {
            const Eigen::MatrixXd scaled = alpha * d;
            for (Index j = 0; j < m; ++j) {
                const Eigen::RowVectorXd z = y.row(j) - grad.row(j).cwiseQuotient(scaled.row(j));
                next.row(j) = j == 0 ? z : diagonal_group_prox(z, scaled.row(j), lambda);
            }
            evaluate(next, at_next);
            const Eigen::MatrixXd delta = next - y;
            const double model = at_y.nll + grad.cwiseProduct(delta).sum() +
                                 0.5 * scaled.cwiseProduct(delta).cwiseProduct(delta).sum();
            if (at_next.nll <= model + 1e-12 * (1.0 + std::abs(at_y.nll)) || alpha > 1e12) break;
            alpha *= 2.0;
            first_try = false;
        }
        if (first_try) alpha = std::max(1.0, 0.9 * alpha);

        // A common shift of one row across categories leaves the likelihood
        // unchanged; centering cannot raise the penalty.
        const Eigen::VectorXd shift = next.rowwise().mean();
        next.colwise() -= shift;
        at_next.eta.rowwise() -= (prob.xa() * shift).transpose();

        const double next_objective = at_next.nll + penalty(next);
        if (next_objective > objective && t > 1.0) {
            // Momentum overshot: take a plain step from theta next time.
            t = 1.0;
            y = theta;
            at_y = at_theta;
            fit.sweeps = iter + 1;
            continue;
        }
        const double change = (next - theta).cwiseAbs().maxCoeff();
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        if (beta > 0.0) {
            y = next + beta * (next - theta);
            evaluate(y, at_y);
        } else {
            y = next;
            at_y = at_next;
        }
        theta = next;
        std::swap(at_theta, at_next);
        objective = next_objective;
        t = t_next;
        fit.sweeps = iter + 1;
        if (change < opts.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coefficients = theta.bottomRows(q);
    fit.intercepts = theta.row(0).transpose();
    fit.group_norms = fit.coefficients.rowwise().norm();
    fit.objective = at_theta.nll + lambda * fit.group_norms.sum();
    for (Index j = 0; j < q; ++j) {
        if (fit.group_norms(j) > 0.0) fit.selected.push_back(j);
    }
    return fit;
}

double lambda_max_of(const MultinomialProblem& prob) {
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(prob.q(), prob.categories());
    const Eigen::MatrixXd eta = prob.linear_predictor(coef, prob.null_intercepts());
    Eigen::MatrixXd resid;
    prob.residual(eta, resid);
    const Eigen::MatrixXd grad = prob.x().transpose() * resid.transpose() / static_cast<double>(prob.n());
    return grad.rowwise().norm().maxCoeff();
}

}  // namespace

GroupLassoFit multinomial_group_lasso(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                                      double lambda, const GroupLassoOptions& opts) {
    if (!(lambda >= 0.0)) throw InputError("lambda must be nonnegative");
    const MultinomialProblem prob(features, categories, opts.standardize);
    return solve_apg(prob, lambda, opts, Eigen::MatrixXd::Zero(prob.q(), prob.categories()), prob.null_intercepts());
}

double group_lasso_lambda_max(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                              const GroupLassoOptions& opts) {
    const MultinomialProblem prob(features, categories, opts.standardize);
    return lambda_max_of(prob);
}

GroupLassoPath multinomial_group_lasso_path(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                                            int grid_size, double min_ratio, const GroupLassoOptions& opts,
                                            std::optional<std::vector<double>> grid) {
    const MultinomialProblem prob(features, categories, opts.standardize);
    GroupLassoPath path;
    path.lambda_max = lambda_max_of(prob);
    std::vector<double> lambdas;
    if (grid) {
        lambdas = *grid;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] >= 0.0)) throw InputError("lambda must be nonnegative");
            if (i > 0 && lambdas[i] > lambdas[i - 1]) throw InputError("lambda grid must be decreasing");
        }
    } else {
        if (grid_size < 1 || !(min_ratio > 0.0 && min_ratio <= 1.0)) throw InputError("invalid lambda grid settings");
        for (int s = 0; s < grid_size; ++s) {
            const double frac = grid_size == 1 ? 0.0 : static_cast<double>(s) / (grid_size - 1);
            lambdas.push_back(path.lambda_max * std::pow(min_ratio, frac));
        }
    }
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(prob.q(), prob.categories());
    Eigen::VectorXd b0 = prob.null_intercepts();
    std::vector<bool> seen(static_cast<std::size_t>(prob.q()), false);
    for (const double lambda : lambdas) {
        GroupLassoFit fit = solve_apg(prob, lambda, opts, coef, b0);
        coef = fit.coefficients;
        b0 = fit.intercepts;
        std::vector<Index> entering;
        for (const Index j : fit.selected) {
            if (!seen[static_cast<std::size_t>(j)]) entering.push_back(j);
        }
        std::stable_sort(entering.begin(), entering.end(),
                         [&](Index a, Index b) { return fit.group_norms(a) > fit.group_norms(b); });
        for (const Index j : entering) {
            seen[static_cast<std::size_t>(j)] = true;
            path.entry_order.push_back(j);
        }
        const auto active = fit.selected.size();
        path.fits.push_back(std::move(fit));
        if (opts.max_active > 0 && active > static_cast<std::size_t>(opts.max_active)) break;
    }
    return path;
}

}  // namespace clusterdr
