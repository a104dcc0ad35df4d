#include "clusterdr/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace clusterdr;

TEST_SUITE("io") {
    TEST_CASE("object reader rejects unknown keys and wrong types") {
        const Json j = {{"a", 1}, {"b", "x"}, {"typo", true}};
        ObjectReader r(j, "cfg");
        CHECK(r.get_or("a", 0) == 1);
        CHECK(r.get<std::string>("b") == std::string("x"));
        CHECK_FALSE(r.get<int>("missing").has_value());
        CHECK_THROWS_WITH_AS(r.finish(), "cfg: unknown key 'typo'", InputError);
        ObjectReader bad(j, "cfg");
        CHECK_THROWS_AS(bad.get<int>("b"), InputError);
        CHECK_THROWS_AS(ObjectReader(Json::array(), "cfg"), InputError);
    }

    TEST_CASE("statistic specs round-trip through JSON") {
        StatSpec spec = mundlak_spec(2);
        spec.terms.push_back(StatTerm::second_moment(0, 1));
        spec.terms.push_back(StatTerm::treatment_interaction(1));
        spec.terms.push_back(StatTerm::custom("log", 0));
        const Json j = to_json(spec);
        CHECK(j[3]["kind"] == "covariate_product");
        CHECK(stat_spec_from_json(j, "spec") == spec);
        CHECK(stat_spec_from_json(Json{{"selected_spec", j}}, "spec") == spec);
        CHECK_THROWS_AS(stat_spec_from_json(Json::parse(R"([{"kind": "covariate_mean"}])"), "s"), InputError);
        CHECK_THROWS_AS(stat_spec_from_json(Json::parse(R"([{"kind": "bogus"}])"), "s"), InputError);
        CHECK_THROWS_AS(stat_spec_from_json(Json::parse(R"([{"kind": "transform", "index": 0, "transform": "zz"}])"), "s"),
                        InputError);
        CHECK_THROWS_AS(stat_spec_from_json(Json::parse(R"([{"kind": "covariate_mean", "index": -1}])"), "s"), InputError);
        CHECK(stat_names(spec, {"a", "b"})[4] == "mean(w*b)");
    }

    TEST_CASE("nuisance, dgp and estimator configs round-trip") {
        NuisanceConfig n;
        n.outcome.use_sbar = false;
        n.outcome.x_transforms = {{0, "exp"}};
        n.propensity.sbar_transforms = {{0, "logit"}};
        n.propensity.ridge = 0.5;
        const NuisanceConfig back = nuisance_from_json(to_json(n), "n");
        CHECK(back.outcome.use_sbar == false);
        CHECK(back.outcome.x_transforms == n.outcome.x_transforms);
        CHECK(back.propensity.sbar_transforms == n.propensity.sbar_transforms);
        CHECK(back.propensity.ridge == 0.5);

        for (const auto& name : dgp_preset_names()) {
            const DgpConfig cfg = dgp_preset(name);
            CHECK(to_json(dgp_from_json(to_json(cfg), "dgp")) == to_json(cfg));
        }
        const DgpConfig tweaked = dgp_from_json(Json{{"preset", "nonlinear-u"}, {"c", 50}}, "dgp");
        CHECK(tweaked.c == 50);
        CHECK(tweaked.outcome.name == "exp-x");
        CHECK_THROWS_AS(dgp_from_json(Json{{"eta_map", {{"name", "normal-fixed"}, {"p_fixed", 2.0}}}, {"u_dim", 1}}, "dgp"),
                        InputError);
        CHECK_THROWS_AS(dgp_from_json(Json{{"sigmaa", 1.0}}, "dgp"), InputError);

        EstimatorConfig est;
        est.estimator = "qte";
        est.q = 0.25;
        est.spec = mundlak_spec(1);
        const EstimatorConfig eb = estimator_from_json(to_json(est), "e");
        CHECK(eb.estimator == "qte");
        CHECK(eb.q == 0.25);
        CHECK(eb.spec == est.spec);
        CHECK_THROWS_AS(estimator_from_json(Json{{"estimator", "nope"}}, "e"), InputError);
        CHECK_THROWS_AS(estimator_from_json(Json{{"folds", 1}}, "e"), InputError);
        CHECK_THROWS_AS(estimator_from_json(Json{{"eta", 0.5}}, "e"), InputError);
    }

    TEST_CASE("schema round-trip") {
        CsvSchema s;
        s.time = "period";
        s.covariates = {"a"};
        s.covariates_explicit = true;
        const CsvSchema b = csv_schema_from_json(to_json(s), "schema");
        CHECK(b.time == std::optional<std::string>("period"));
        CHECK(b.covariates == s.covariates);
        CHECK(b.covariates_explicit);
    }

    TEST_CASE("canonical body ignores the timestamp only") {
        Json a = {{"x", 1}, {"timestamp", "2020"}, {"nested", {{"b", 2}, {"a", 1}}}};
        Json b = a;
        b["timestamp"] = "2030";
        CHECK(canonical_body(a) == canonical_body(b));
        b["x"] = 2;
        CHECK(canonical_body(a) != canonical_body(b));
        CHECK(fnv1a_hex("") == "cbf29ce484222325");
        CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
        CHECK(config_hash(Json{{"a", 1}}).size() == 16);
    }

    TEST_CASE("non-finite numbers are written as null") {
        McReport r = summarize({});
        const Json j = to_json(r);
        CHECK(j["bias"].is_null());
    }

    TEST_CASE("cluster statistics CSV is matched by label") {
        const auto dir = testsupport::scratch_dir("io_stats");
        const Dataset d = testsupport::random_cross_section(1, 3, 2, 1);
        std::ofstream(dir / "s.csv") << "cluster,s1,s2\nc2,5,6\nc0,1,2\nc1,3,4\n";
        std::vector<std::string> names;
        const Eigen::MatrixXd m = read_cluster_stats_csv(d, (dir / "s.csv").string(), names);
        CHECK(names == std::vector<std::string>{"s1", "s2"});
        CHECK(m(0, 0) == 1.0);
        CHECK(m(2, 1) == 6.0);
        std::ofstream(dir / "t.csv") << "cluster,s1\nc0,1\n";
        CHECK_THROWS_AS(read_cluster_stats_csv(d, (dir / "t.csv").string(), names), InputError);
    }

    TEST_CASE("posterior and per-rep CSV writers") {
        const auto dir = testsupport::scratch_dir("io_csv");
        const Dataset d = testsupport::random_cross_section(2, 2, 2, 1);
        Eigen::MatrixXd post(2, 2);
        post << 0.25, 0.75, 1.0, 0.0;
        write_posterior_csv(d, post, (dir / "p.csv").string());
        std::ifstream in(dir / "p.csv");
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header == "cluster,post_1,post_2");
        CHECK(row.rfind("c0,0.25,0.75", 0) == 0);

        const McReport r = monte_carlo(dgp_preset("mundlak-linear"), {}, 2, 1);
        write_per_rep_csv(r, (dir / "r.csv").string());
        std::ifstream rin(dir / "r.csv");
        int lines = 0;
        for (std::string line; std::getline(rin, line);) ++lines;
        CHECK(lines == 3);
    }
}
