#include "clusterdr/errors.hpp"
#include "clusterdr/mixture.hpp"
#include "clusterdr/simulate.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace clusterdr;

namespace {

Dataset separated_data(std::uint64_t seed, Index c = 60) {
    DgpConfig cfg = dgp_preset("separated-mixture");
    cfg.c = c;
    return generate(cfg, seed).d;
}

// Binary x, small clusters, no mixture structure.
Dataset small_discrete(std::uint64_t seed) {
    Rng rng(seed);
    const Index c = 12, n_c = 4;
    Eigen::VectorXd y(c * n_c);
    Eigen::VectorXi w(c * n_c);
    Eigen::MatrixXd x(c * n_c, 1);
    std::vector<std::string> labels;
    for (Index i = 0; i < c * n_c; ++i) {
        y(i) = rng.normal();
        w(i) = rng.bernoulli(0.5) ? 1 : 0;
        x(i, 0) = rng.bernoulli(0.3) ? 1.0 : 0.0;
        labels.push_back("g" + std::to_string(i / n_c));
    }
    return Dataset::from_columns(y, w, x, labels);
}

}  // namespace

TEST_SUITE("mixture") {
    TEST_CASE("support is sorted and capped") {
        const Dataset d = small_discrete(1);
        const auto support = discrete_support(d, 256);
        CHECK(support.size() == 4);
        CHECK(std::is_sorted(support.begin(), support.end()));
        CHECK_THROWS_AS(discrete_support(d, 3), InputError);
        const Dataset cont = testsupport::random_cross_section(1, 60, 5, 1);
        CHECK_THROWS_AS(em_fit(cont, 2, 1), InputError);
    }

    TEST_CASE("one component reduces to pooled cell frequencies") {
        const Dataset d = small_discrete(2);
        const MixtureModel m = em_fit(d, 1, 3);
        std::map<std::pair<double, int>, double> freq;
        for (Index i = 0; i < d.n(); ++i) freq[{d.x()(i, 0), d.w()(i)}] += 1.0;
        double ll = 0.0;
        for (const auto& [cell, count] : freq) {
            const double p = count / static_cast<double>(d.n());
            ll += count * std::log(p);
            const Index s = m.cell_of(SupportCell{{cell.first}, cell.second});
            REQUIRE(s >= 0);
            CHECK(m.component_pmfs(0, s) == doctest::Approx(p).epsilon(1e-12));
        }
        CHECK(m.loglik == doctest::Approx(ll).epsilon(1e-12));
        CHECK(posterior_suffstat(m, d).isOnes(1e-15));
    }

    TEST_CASE("posteriors match a naive product over units") {
        const Dataset d = separated_data(4, 30);
        const MixtureModel m = em_fit(d, 2, 5);
        const Eigen::MatrixXd post = posterior_suffstat(m, d);
        for (Index g = 0; g < d.c(); ++g) {
            std::vector<double> log_joint(2);
            for (Index k = 0; k < 2; ++k) {
                double lj = std::log(m.pi(k));
                for (Index i = 0; i < d.n(); ++i) {
                    if (d.cluster_of()[static_cast<std::size_t>(i)] != g) continue;
                    const Index s = m.cell_of(SupportCell{{d.x()(i, 0)}, d.w()(i)});
                    lj += std::log(m.component_pmfs(k, s));
                }
                log_joint[static_cast<std::size_t>(k)] = lj;
            }
            const double diff = log_joint[1] - log_joint[0];
            const double p0 = 1.0 / (1.0 + std::exp(diff));
            CHECK(post(g, 0) == doctest::Approx(p0).epsilon(1e-10));
            CHECK(std::abs(post.row(g).sum() - 1.0) <= 1e-12);
        }
        CHECK(mixture_loglik(m, d) == doctest::Approx(m.loglik).epsilon(1e-12));
    }

    TEST_CASE("log-likelihood never decreases along EM") {
        const Dataset d = separated_data(6);
        EmOptions opts;
        opts.restarts = 4;
        const MixtureModel m = em_fit(d, 3, 7, opts);
        REQUIRE(m.loglik_traces.size() == 4);
        for (const auto& trace : m.loglik_traces) {
            for (std::size_t t = 1; t < trace.size(); ++t) {
                CHECK(trace[t] >= trace[t - 1] - 1e-12 * (1.0 + std::abs(trace[t - 1])));
            }
        }
        CHECK((m.component_pmfs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(std::abs(m.pi.sum() - 1.0) < 1e-12);
    }

    TEST_CASE("separated components give concentrated posteriors") {
        const GeneratedData g = generate(dgp_preset("separated-mixture"), 8);
        const MixtureModel m = em_fit(g.d, 2, 9);
        const Eigen::MatrixXd post = posterior_suffstat(m, g.d);
        int concentrated = 0;
        int agree = 0;
        for (Index c = 0; c < g.d.c(); ++c) {
            Index best = 0;
            if (post.row(c).maxCoeff(&best) >= 0.95) ++concentrated;
            agree += best == g.component[static_cast<std::size_t>(c)] ? 1 : 0;
        }
        CHECK(concentrated >= static_cast<int>(0.9 * static_cast<double>(g.d.c())));
        // up to label switching
        const int matched = std::max(agree, static_cast<int>(g.d.c()) - agree);
        CHECK(matched >= static_cast<int>(0.9 * static_cast<double>(g.d.c())));
    }

    TEST_CASE("fit is deterministic and independent of the thread count") {
        const Dataset d = separated_data(10);
        EmOptions one, four;
        four.threads = 4;
        const MixtureModel a = em_fit(d, 2, 11, one);
        const MixtureModel b = em_fit(d, 2, 11, four);
        CHECK(a.loglik == b.loglik);
        CHECK(a.component_pmfs == b.component_pmfs);
        CHECK(a.loglik_traces == b.loglik_traces);
    }

    TEST_CASE("argument checks") {
        const Dataset d = small_discrete(3);
        CHECK_THROWS_AS(em_fit(d, 0, 1), InputError);
        CHECK_THROWS_AS(em_fit(d, 13, 1), InputError);
        EmOptions bad;
        bad.restarts = 0;
        CHECK_THROWS_AS(em_fit(d, 2, 1, bad), InputError);
        const MixtureModel m = em_fit(d, 2, 1);
        Eigen::MatrixXd x = d.x();
        x(0, 0) = 5.0;
        const Dataset other = Dataset::from_columns(d.y(), d.w(), x, std::vector<std::string>(48, "z"));
        CHECK_THROWS_AS(posterior_suffstat(m, other), InputError);
    }
}
