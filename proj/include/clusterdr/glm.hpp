#pragma once

#include "clusterdr/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace clusterdr {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Weighted least squares
// ---------------------------------------------------------------------------

template <typename Scalar>
struct WlsFit {
    Vec<Scalar> coefficients;  // dropped columns carry 0
    Vec<Scalar> fitted;
    Index rank = 0;
    std::vector<Index> columns_dropped;
    Mat<Scalar> xtwx_inverse;  // (X'WX)^-1 over retained columns, in retained order
    std::vector<Index> columns_kept;
};

namespace detail {

template <typename Scalar>
Scalar default_rank_tolerance() {
    return std::max(Scalar(1e-9), Scalar(100) * std::numeric_limits<Scalar>::epsilon());
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite entries");
}

}  // namespace detail

// Minimizes sum_i weights_i (response_i - design_i . beta)^2.
//
// Rank deficiency is resolved in column order: a column is dropped when its
// weighted residual after projection on the earlier retained columns is below
// tol relative to its own norm, so of two duplicated columns the later one is
// dropped. The retained, full-rank design is solved by column-pivoting QR.
template <typename DerivedX, typename DerivedY, typename DerivedW>
WlsFit<typename DerivedX::Scalar> wls_fit(const Eigen::MatrixBase<DerivedX>& design,
                                          const Eigen::MatrixBase<DerivedY>& response,
                                          const Eigen::MatrixBase<DerivedW>& weights,
                                          typename DerivedX::Scalar tol = detail::default_rank_tolerance<typename DerivedX::Scalar>()) {
    using Scalar = typename DerivedX::Scalar;
    const Index n = design.rows();
    const Index p = design.cols();
    if (n < 1) throw InputError("least squares needs at least one row");
    if (response.size() != n || weights.size() != n) throw InputError("least squares inputs have inconsistent lengths");
    detail::require_finite(design, "design");
    detail::require_finite(response, "response");
    detail::require_finite(weights, "weights");
    if ((weights.array() < Scalar(0)).any()) throw InputError("weights must be nonnegative");
    if (!(weights.array() > Scalar(0)).any()) throw InputError("weights are all zero");

    const Vec<Scalar> root_w = weights.array().sqrt().matrix();
    const Mat<Scalar> xw = root_w.asDiagonal() * design;

    // Two-pass Gram-Schmidt to decide which columns to keep.
    std::vector<Index> kept;
    std::vector<Index> dropped;
    Mat<Scalar> basis(n, p);
    for (Index j = 0; j < p; ++j) {
        Vec<Scalar> v = xw.col(j);
        const Scalar norm0 = v.norm();
        if (norm0 == Scalar(0)) {
            dropped.push_back(j);
            continue;
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t q = 0; q < kept.size(); ++q) {
                const auto b = basis.col(static_cast<Index>(q));
                v -= b.dot(v) * b;
            }
        }
        const Scalar norm1 = v.norm();
        if (norm1 <= tol * norm0) {
            dropped.push_back(j);
            continue;
        }
        basis.col(static_cast<Index>(kept.size())) = v / norm1;
        kept.push_back(j);
    }

    WlsFit<Scalar> fit;
    fit.coefficients = Vec<Scalar>::Zero(p);
    fit.rank = static_cast<Index>(kept.size());
    fit.columns_dropped = dropped;
    fit.columns_kept = kept;
    if (kept.empty()) {
        fit.fitted = Vec<Scalar>::Zero(n);
        return fit;
    }

    Mat<Scalar> xk(n, fit.rank);
    for (Index q = 0; q < fit.rank; ++q) xk.col(q) = xw.col(kept[static_cast<std::size_t>(q)]);
    const Vec<Scalar> yw = root_w.cwiseProduct(response);
    Eigen::ColPivHouseholderQR<Mat<Scalar>> qr(xk);
    const Vec<Scalar> beta = qr.solve(yw);
    for (Index q = 0; q < fit.rank; ++q) fit.coefficients(kept[static_cast<std::size_t>(q)]) = beta(q);
    fit.fitted = design * fit.coefficients;
    // X P = Q R  =>  (X'X)^-1 = P R^-1 R^-T P'
    const Mat<Scalar> r = qr.matrixR().topLeftCorner(fit.rank, fit.rank).template triangularView<Eigen::Upper>();
    const Mat<Scalar> r_inv = r.template triangularView<Eigen::Upper>().solve(Mat<Scalar>::Identity(fit.rank, fit.rank));
    const Mat<Scalar> inner = r_inv * r_inv.transpose();
    fit.xtwx_inverse = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
    return fit;
}

// ---------------------------------------------------------------------------
// Logistic regression (IRLS / Newton with step halving)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LogisticOptions {
    Scalar tol = Scalar(1e-8);
    int max_iter = 100;
    Scalar ridge = Scalar(0);
    // On detected separation with ridge == 0, refit with fallback_ridge.
    bool auto_ridge = true;
    Scalar fallback_ridge = Scalar(1e-6);
};

template <typename Scalar>
struct LogisticFit {
    Vec<Scalar> coefficients;
    bool converged = false;
    int iterations = 0;
    Scalar max_abs_score = Scalar(0);
    bool separation_detected = false;
    Scalar ridge_used = Scalar(0);
    // Penalized log-likelihood after each accepted iteration (index 0 = start).
    std::vector<Scalar> objective_trace;
};

constexpr double kProbabilityFloor = 1e-10;

template <typename Scalar>
Scalar logistic(Scalar eta) {
    if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-eta));
    const Scalar z = std::exp(eta);
    return z / (Scalar(1) + z);
}

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar eta) {
    return eta > Scalar(0) ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

template <typename Scalar>
Scalar penalized_loglik(const Mat<Scalar>& x, const Vec<Scalar>& y, const Vec<Scalar>& wt, const Vec<Scalar>& beta,
                        Scalar ridge) {
    const Vec<Scalar> eta = x * beta;
    Scalar ll = Scalar(0);
    for (Index i = 0; i < eta.size(); ++i) ll += wt(i) * (y(i) * eta(i) - softplus(eta(i)));
    return ll - Scalar(0.5) * ridge * beta.squaredNorm();
}

template <typename Scalar>
LogisticFit<Scalar> irls(const Mat<Scalar>& x, const Vec<Scalar>& y, const Vec<Scalar>& wt,
                         const LogisticOptions<Scalar>& opts, Scalar ridge) {
    const Index n = x.rows();
    const Index p = x.cols();
    LogisticFit<Scalar> fit;
    fit.ridge_used = ridge;
    Vec<Scalar> beta = Vec<Scalar>::Zero(p);
    Scalar obj = penalized_loglik(x, y, wt, beta, ridge);
    fit.objective_trace.push_back(obj);
    Vec<Scalar> prob(n);
    Vec<Scalar> score(p);

    auto compute_score = [&](const Vec<Scalar>& b) {
        const Vec<Scalar> eta = x * b;
        for (Index i = 0; i < n; ++i) prob(i) = logistic(eta(i));
        score = x.transpose() * (wt.cwiseProduct(y - prob)) - ridge * b;
    };

    compute_score(beta);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        fit.max_abs_score = score.cwiseAbs().maxCoeff();
        if (fit.max_abs_score < opts.tol) {
            fit.converged = true;
            break;
        }
        Vec<Scalar> curvature(n);
        for (Index i = 0; i < n; ++i) curvature(i) = wt(i) * prob(i) * (Scalar(1) - prob(i));
        Mat<Scalar> hessian = x.transpose() * curvature.asDiagonal() * x;
        hessian.diagonal().array() += ridge;
        const Vec<Scalar> step = hessian.completeOrthogonalDecomposition().solve(score);

        // Near the optimum the gain of a Newton step is below the rounding
        // error of the summed log-likelihood.
        const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(obj));
        Scalar scale = Scalar(1);
        Vec<Scalar> candidate = beta + step;
        Scalar cand_obj = penalized_loglik(x, y, wt, candidate, ridge);
        int halvings = 0;
        while (!(cand_obj >= obj - slack) && halvings < 30) {
            scale *= Scalar(0.5);
            candidate = beta + scale * step;
            cand_obj = penalized_loglik(x, y, wt, candidate, ridge);
            ++halvings;
        }
        fit.iterations = iter + 1;
        if (!(cand_obj >= obj - slack)) break;  // no ascent possible at working precision
        beta = candidate;
        obj = cand_obj;
        fit.objective_trace.push_back(obj);
        compute_score(beta);
    }
    fit.max_abs_score = score.cwiseAbs().maxCoeff();
    if (fit.max_abs_score < opts.tol) fit.converged = true;
    fit.coefficients = beta;
    for (Index i = 0; i < n; ++i) {
        if (wt(i) > Scalar(0) && (prob(i) <= Scalar(kProbabilityFloor) || prob(i) >= Scalar(1) - Scalar(kProbabilityFloor))) {
            fit.separation_detected = true;
            break;
        }
    }
    return fit;
}

}  // namespace detail

template <typename DerivedX, typename DerivedY, typename DerivedW>
LogisticFit<typename DerivedX::Scalar> logistic_fit(const Eigen::MatrixBase<DerivedX>& design,
                                                    const Eigen::MatrixBase<DerivedY>& labels,
                                                    const Eigen::MatrixBase<DerivedW>& weights,
                                                    const LogisticOptions<typename DerivedX::Scalar>& opts = {}) {
    using Scalar = typename DerivedX::Scalar;
    const Index n = design.rows();
    if (labels.size() != n || weights.size() != n) throw InputError("logistic inputs have inconsistent lengths");
    detail::require_finite(design, "design");
    detail::require_finite(weights, "weights");
    for (Index i = 0; i < n; ++i) {
        if (labels(i) != Scalar(0) && labels(i) != Scalar(1)) throw InputError("logistic labels must be 0 or 1");
    }
    if (opts.ridge < Scalar(0)) throw InputError("ridge must be nonnegative");
    const Mat<Scalar> x = design;
    const Vec<Scalar> y = labels;
    const Vec<Scalar> wt = weights;

    LogisticFit<Scalar> fit = detail::irls(x, y, wt, opts, opts.ridge);
    const bool diverging = !fit.converged && opts.ridge == Scalar(0);
    if ((fit.separation_detected || diverging) && opts.ridge == Scalar(0) && opts.auto_ridge) {
        // A diverging unpenalized fit is treated as separation as well.
        LogisticFit<Scalar> refit = detail::irls(x, y, wt, opts, opts.fallback_ridge);
        refit.separation_detected = true;
        return refit;
    }
    return fit;
}

// Logistic link of the linear predictor, clamped to [1e-10, 1 - 1e-10].
template <typename Scalar, typename DerivedRow>
Scalar predict_proba(const LogisticFit<Scalar>& fit, const Eigen::MatrixBase<DerivedRow>& row) {
    if (row.size() != fit.coefficients.size()) throw InputError("design row has wrong dimension for fitted model");
    const Scalar eta = row.derived().reshaped().dot(fit.coefficients);
    return std::clamp(logistic(eta), Scalar(kProbabilityFloor), Scalar(1) - Scalar(kProbabilityFloor));
}

template <typename Scalar, typename DerivedX>
Vec<Scalar> predict_proba_all(const LogisticFit<Scalar>& fit, const Eigen::MatrixBase<DerivedX>& design) {
    if (design.cols() != fit.coefficients.size()) throw InputError("design has wrong dimension for fitted model");
    const Vec<Scalar> eta = design * fit.coefficients;
    Vec<Scalar> p(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
        p(i) = std::clamp(logistic(eta(i)), Scalar(kProbabilityFloor), Scalar(1) - Scalar(kProbabilityFloor));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Cluster-level cross-fitting folds
// ---------------------------------------------------------------------------

struct FoldAssignment {
    std::vector<int> fold_of_cluster;
    int folds = 0;
    std::uint64_t seed = 0;

    std::vector<Index> clusters_in(int fold) const;
};

// Clusters are shuffled with the seeded generator and dealt round-robin.
FoldAssignment cross_fit_folds(Index clusters, int folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Group-penalized multinomial logit for statistic selection
// ---------------------------------------------------------------------------

struct GroupLassoOptions {
    double tol = 1e-6;
    int max_sweeps = 500;
    // Standardize candidate columns before fitting (penalty acts on the
    // standardized scale).
    bool standardize = true;
    // Path only: stop once more than this many candidates are active (0 = off).
    int max_active = 0;
};

struct GroupLassoFit {
    double lambda = 0.0;
    // Symmetric parametrization: one coefficient per category; the group
    // penalty keeps each row centered.
    Eigen::MatrixXd coefficients;  // q x categories
    Eigen::VectorXd intercepts;    // categories, centered
    Eigen::VectorXd group_norms;   // q
    std::vector<Index> selected;
    int sweeps = 0;
    bool converged = false;
    double objective = 0.0;
};

struct GroupLassoPath {
    std::vector<GroupLassoFit> fits;  // ordered by decreasing lambda
    double lambda_max = 0.0;
    // Order in which candidates first became active along the path; ties
    // broken by group norm at the entry lambda.
    std::vector<Index> entry_order;
};

GroupLassoFit multinomial_group_lasso(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                                      double lambda, const GroupLassoOptions& opts = {});

// Smallest lambda at which every group is zero.
double group_lasso_lambda_max(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                              const GroupLassoOptions& opts = {});

// Warm-started path over a geometric grid from lambda_max down to
// lambda_max * min_ratio (or over an explicit decreasing grid).
GroupLassoPath multinomial_group_lasso_path(const Eigen::MatrixXd& features, const std::vector<Index>& categories,
                                            int grid_size = 30, double min_ratio = 0.01,
                                            const GroupLassoOptions& opts = {},
                                            std::optional<std::vector<double>> grid = std::nullopt);

}  // namespace clusterdr
