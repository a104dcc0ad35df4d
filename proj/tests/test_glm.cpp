#include "clusterdr/glm.hpp"
#include "clusterdr/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace clusterdr;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Index n, Index p) {
    Eigen::MatrixXd m(n, p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) m(i, j) = rng.normal();
    }
    return m;
}

// Plain gradient ascent on the mean log-likelihood, run to a tiny gradient.
Eigen::VectorXd gradient_ascent_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    const double n = static_cast<double>(x.rows());
    for (int it = 0; it < 200000; ++it) {
        Eigen::VectorXd p(x.rows());
        for (Index i = 0; i < x.rows(); ++i) p(i) = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta)));
        const Eigen::VectorXd g = (x.transpose() * (y - p) - ridge * beta) / n;
        if (g.cwiseAbs().maxCoeff() < 1e-13) break;
        beta += 1.0 * g;
    }
    return beta;
}

Eigen::MatrixXd standardize(Eigen::MatrixXd x) {
    for (Index j = 0; j < x.cols(); ++j) {
        x.col(j).array() -= x.col(j).mean();
        const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(x.rows()));
        if (sd > 0.0) x.col(j) /= sd;
    }
    return x;
}

// Gradient of the mean multinomial negative log-likelihood with respect to the
// coefficient rows (q x G) and intercepts (G).
void multinomial_gradient(const Eigen::MatrixXd& x, const std::vector<Index>& cat, const Eigen::MatrixXd& coef,
                          const Eigen::VectorXd& b0, Eigen::MatrixXd& g_coef, Eigen::VectorXd& g_b0) {
    const Index n = x.rows();
    const Index g = coef.cols();
    Eigen::MatrixXd r(n, g);
    for (Index i = 0; i < n; ++i) {
        Eigen::VectorXd eta = coef.transpose() * x.row(i).transpose() + b0;
        eta.array() -= eta.maxCoeff();
        Eigen::VectorXd p = eta.array().exp();
        p /= p.sum();
        p(cat[static_cast<std::size_t>(i)]) -= 1.0;
        r.row(i) = p.transpose();
    }
    g_coef = x.transpose() * r / static_cast<double>(n);
    g_b0 = r.colwise().sum().transpose() / static_cast<double>(n);
}

// Features: the first two shift with the category, the rest are noise.
void selection_problem(std::uint64_t seed, Eigen::MatrixXd& x, std::vector<Index>& cat, Index groups = 8,
                       Index per = 25, Index noise = 4) {
    Rng rng(seed);
    x.resize(groups * per, 2 + noise);
    cat.clear();
    for (Index g = 0; g < groups; ++g) {
        const double m1 = rng.normal() * 1.5;
        const double m2 = rng.normal() * 1.5;
        for (Index t = 0; t < per; ++t) {
            const Index i = g * per + t;
            x(i, 0) = m1 + rng.normal();
            x(i, 1) = m2 + rng.normal();
            for (Index j = 0; j < noise; ++j) x(i, 2 + j) = rng.normal();
            cat.push_back(g);
        }
    }
}

}  // namespace

TEST_SUITE("glm") {
    TEST_CASE("weighted least squares matches the normal equations") {
        Rng rng(1);
        const Eigen::MatrixXd x = random_matrix(rng, 60, 4);
        const Eigen::VectorXd y = random_matrix(rng, 60, 1);
        Eigen::VectorXd w(60);
        for (Index i = 0; i < 60; ++i) w(i) = 0.5 + rng.uniform();
        const auto fit = wls_fit(x, y, w);
        const Eigen::VectorXd oracle = (x.transpose() * w.asDiagonal() * x).ldlt().solve(x.transpose() * w.asDiagonal() * y);
        CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(fit.rank == 4);
        const Eigen::MatrixXd inv = (x.transpose() * w.asDiagonal() * x).inverse();
        CHECK((fit.xtwx_inverse - inv).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("rank deficiency drops the later duplicate column") {
        Rng rng(2);
        Eigen::MatrixXd x = random_matrix(rng, 30, 3);
        Eigen::MatrixXd xd(30, 4);
        xd << x.col(0), x.col(1), 2.0 * x.col(0), x.col(2);
        const Eigen::VectorXd y = random_matrix(rng, 30, 1);
        const auto fit = wls_fit(xd, y, Eigen::VectorXd::Ones(30));
        CHECK(fit.rank == 3);
        CHECK(fit.columns_dropped == std::vector<Index>{2});
        CHECK(fit.coefficients(2) == 0.0);
        const auto full = wls_fit(x, y, Eigen::VectorXd::Ones(30));
        CHECK((fit.fitted - full.fitted).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("least squares input checks") {
        const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
        CHECK_THROWS_AS(wls_fit(x, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3)), InputError);
        CHECK_THROWS_AS(wls_fit(x, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)), InputError);
        CHECK_THROWS_AS(wls_fit(x, Eigen::VectorXd::Ones(3), -Eigen::VectorXd::Ones(3)), InputError);
        Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
        y(1) = std::nan("");
        CHECK_THROWS_AS(wls_fit(x, y, Eigen::VectorXd::Ones(3)), InputError);
    }

    TEST_CASE("logistic regression agrees with gradient ascent") {
        Rng rng(3);
        Eigen::MatrixXd x(200, 3);
        Eigen::VectorXd y(200);
        for (Index i = 0; i < 200; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = rng.normal();
            x(i, 2) = rng.normal();
            y(i) = rng.bernoulli(1.0 / (1.0 + std::exp(-(0.3 + x(i, 1) - 0.5 * x(i, 2))))) ? 1.0 : 0.0;
        }
        for (const double ridge : {0.0, 2.0}) {
            LogisticOptions<double> opts;
            opts.ridge = ridge;
            opts.tol = 1e-10;
            const auto fit = logistic_fit(x, y, Eigen::VectorXd::Ones(200), opts);
            CHECK(fit.converged);
            CHECK_FALSE(fit.separation_detected);
            const Eigen::VectorXd oracle = gradient_ascent_logistic(x, y, ridge);
            CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-7);
            for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
                const double prev = fit.objective_trace[t - 1];
                CHECK(fit.objective_trace[t] >= prev - 1e-12 * (1.0 + std::abs(prev)));
            }
        }
    }

    TEST_CASE("logistic regression with unit weights equals duplicated rows") {
        Rng rng(4);
        Eigen::MatrixXd x(40, 2);
        Eigen::VectorXd y(40);
        for (Index i = 0; i < 40; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = rng.normal();
            y(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
        }
        Eigen::VectorXd w = Eigen::VectorXd::Ones(40);
        w.head(10).setConstant(2.0);
        Eigen::MatrixXd xd(50, 2);
        xd << x, x.topRows(10);
        Eigen::VectorXd yd(50);
        yd << y, y.head(10);
        const auto a = logistic_fit(x, y, w);
        const auto b = logistic_fit(xd, yd, Eigen::VectorXd::Ones(50));
        CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("separation is detected and a ridge refit is returned") {
        Eigen::MatrixXd x(20, 2);
        Eigen::VectorXd y(20);
        for (Index i = 0; i < 20; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = static_cast<double>(i) - 9.5;
            y(i) = i >= 10 ? 1.0 : 0.0;
        }
        const auto fit = logistic_fit(x, y, Eigen::VectorXd::Ones(20));
        CHECK(fit.separation_detected);
        CHECK(fit.ridge_used > 0.0);
        CHECK(fit.coefficients.allFinite());
        const double p = predict_proba(fit, Eigen::RowVector2d(1.0, 9.5));
        CHECK(p <= 1.0 - kProbabilityFloor);
        CHECK(p > 0.99);
    }

    TEST_CASE("logistic input checks") {
        const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
        CHECK_THROWS_AS(logistic_fit(x, Eigen::Vector3d(0, 1, 2), Eigen::VectorXd::Ones(3)), InputError);
        LogisticOptions<double> bad;
        bad.ridge = -1.0;
        CHECK_THROWS_AS(logistic_fit(x, Eigen::Vector3d(0, 1, 0), Eigen::VectorXd::Ones(3), bad), InputError);
        LogisticFit<double> fit;
        fit.coefficients = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(predict_proba(fit, Eigen::RowVector3d(1, 2, 3)), InputError);
    }

    TEST_CASE("cross-fitting folds partition clusters deterministically") {
        const FoldAssignment a = cross_fit_folds(23, 4, 99);
        const FoldAssignment b = cross_fit_folds(23, 4, 99);
        CHECK(a.fold_of_cluster == b.fold_of_cluster);
        std::set<Index> all;
        for (int f = 0; f < 4; ++f) {
            const auto members = a.clusters_in(f);
            CHECK(members.size() >= 5);
            CHECK(members.size() <= 6);
            all.insert(members.begin(), members.end());
        }
        CHECK(all.size() == 23);
        CHECK(cross_fit_folds(23, 4, 100).fold_of_cluster != a.fold_of_cluster);
        CHECK_THROWS_AS(cross_fit_folds(3, 4, 1), InputError);
        CHECK_THROWS_AS(cross_fit_folds(3, 1, 1), InputError);
    }

    TEST_CASE("group lasso lambda_max is the largest null-model gradient norm") {
        Eigen::MatrixXd x;
        std::vector<Index> cat;
        selection_problem(5, x, cat);
        const Eigen::MatrixXd xs = standardize(x);
        // Null model: fitted probabilities are the category shares.
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
        for (const Index g : cat) counts(g) += 1.0;
        Eigen::MatrixXd r(x.rows(), 8);
        for (Index i = 0; i < x.rows(); ++i) {
            r.row(i) = (counts / static_cast<double>(x.rows())).transpose();
            r(i, cat[static_cast<std::size_t>(i)]) -= 1.0;
        }
        const double oracle = (xs.transpose() * r / static_cast<double>(x.rows())).rowwise().norm().maxCoeff();
        const double lmax = group_lasso_lambda_max(x, cat);
        CHECK(lmax == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(multinomial_group_lasso(x, cat, 1.001 * lmax).selected.empty());
        CHECK_FALSE(multinomial_group_lasso(x, cat, 0.95 * lmax).selected.empty());
    }

    TEST_CASE("group lasso solution satisfies the optimality conditions") {
        Eigen::MatrixXd x;
        std::vector<Index> cat;
        selection_problem(6, x, cat);
        const double lmax = group_lasso_lambda_max(x, cat);
        const double lambda = 0.3 * lmax;
        GroupLassoOptions opts;
        opts.tol = 1e-10;
        opts.max_sweeps = 20000;
        const GroupLassoFit fit = multinomial_group_lasso(x, cat, lambda, opts);
        REQUIRE(fit.converged);
        Eigen::MatrixXd g_coef;
        Eigen::VectorXd g_b0;
        multinomial_gradient(standardize(x), cat, fit.coefficients, fit.intercepts, g_coef, g_b0);
        CHECK(g_b0.cwiseAbs().maxCoeff() < 1e-6);
        for (Index j = 0; j < x.cols(); ++j) {
            const double norm = fit.coefficients.row(j).norm();
            if (norm > 0.0) {
                const Eigen::RowVectorXd kkt = g_coef.row(j) + lambda * fit.coefficients.row(j) / norm;
                CHECK(kkt.norm() < 1e-5);
            } else {
                CHECK(g_coef.row(j).norm() <= lambda + 1e-8);
            }
        }
        // The symmetric parametrization keeps every coefficient row centered.
        CHECK(fit.coefficients.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::find(fit.selected.begin(), fit.selected.end(), Index{0}) != fit.selected.end());
        CHECK(std::find(fit.selected.begin(), fit.selected.end(), Index{1}) != fit.selected.end());
    }

    TEST_CASE("group lasso path enters informative candidates first") {
        Eigen::MatrixXd x;
        std::vector<Index> cat;
        selection_problem(7, x, cat);
        const GroupLassoPath path = multinomial_group_lasso_path(x, cat, 25, 0.05);
        REQUIRE(path.entry_order.size() >= 2);
        const std::set<Index> first(path.entry_order.begin(), path.entry_order.begin() + 2);
        CHECK(first == std::set<Index>{0, 1});
        CHECK(path.fits.front().selected.empty());
        for (std::size_t s = 1; s < path.fits.size(); ++s) CHECK(path.fits[s].lambda < path.fits[s - 1].lambda);
        CHECK_THROWS_AS(multinomial_group_lasso_path(x, cat, 3, 0.1, {}, std::vector<double>{0.1, 0.2}), InputError);
    }

    TEST_CASE("group lasso input checks") {
        const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
        CHECK_THROWS_AS(multinomial_group_lasso(x, {0, 0, 0, 0}, 0.1), InputError);
        CHECK_THROWS_AS(multinomial_group_lasso(x, {0, 1, 1}, 0.1), InputError);
        CHECK_THROWS_AS(multinomial_group_lasso(x, {0, 1, 0, 1}, -1.0), InputError);
        CHECK_THROWS_AS(multinomial_group_lasso(Eigen::MatrixXd(4, 0), {0, 1, 0, 1}, 0.1), InputError);
    }
}
