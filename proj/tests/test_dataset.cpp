#include "clusterdr/dataset.hpp"
#include "clusterdr/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <limits>

using namespace clusterdr;

namespace {

std::string write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream(path) << text;
    return path.string();
}

std::string error_of(const std::string& path, const CsvSchema& schema = {}) {
    try {
        load_csv(path, schema);
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("dataset") {
    TEST_CASE("clusters are indexed in order of first appearance") {
        const auto dir = testsupport::scratch_dir("order");
        const auto path = write_file(dir, "d.csv", "y,w,cluster,x\n1,0,b,0.5\n2,1,a,1.5\n3,1,b,2\n4,0,a,-1\n");
        const Dataset d = load_csv(path, {});
        REQUIRE(d.n() == 4);
        CHECK(d.c() == 2);
        CHECK(d.cluster_labels() == std::vector<std::string>{"b", "a"});
        CHECK(d.cluster_of() == std::vector<Index>{0, 1, 0, 1});
        CHECK(d.members()[1] == std::vector<Index>{1, 3});
        CHECK(d.covariate_names() == std::vector<std::string>{"x"});
        CHECK(d.x()(2, 0) == doctest::Approx(2.0));
        CHECK(d.cluster_sizes() == Eigen::Vector2i(2, 2));
    }

    TEST_CASE("write and reload round-trips bit-exactly") {
        const auto dir = testsupport::scratch_dir("roundtrip");
        const Dataset d = testsupport::random_cross_section(3, 7, 4, 2);
        write_csv(d, (dir / "d.csv").string());
        const Dataset e = load_csv((dir / "d.csv").string(), {});
        CHECK(e.y() == d.y());
        CHECK(e.w() == d.w());
        CHECK(e.x() == d.x());
        CHECK(e.cluster_of() == d.cluster_of());
        CHECK(e.cluster_labels() == d.cluster_labels());
    }

    TEST_CASE("panel time labels survive a round trip") {
        const auto dir = testsupport::scratch_dir("panel");
        const Dataset d = testsupport::random_panel(4, 3, 4, 1);
        write_csv(d, (dir / "p.csv").string());
        CsvSchema schema;
        schema.time = "time";
        const Dataset e = load_csv((dir / "p.csv").string(), schema);
        REQUIRE(e.has_time());
        CHECK(e.time_of() == d.time_of());
        CHECK(e.k() == 1);
    }

    TEST_CASE("quoted fields and explicit covariate lists") {
        const auto dir = testsupport::scratch_dir("quoted");
        const auto path = write_file(dir, "d.csv", "\"y\",w,g,a,b\n1,0,\"x,1\",5,6\n2,1,\"x,1\",7,8\n");
        CsvSchema schema;
        schema.cluster = "g";
        schema.covariates = {"b"};
        const Dataset d = load_csv(path, schema);
        CHECK(d.cluster_labels() == std::vector<std::string>{"x,1"});
        CHECK(d.k() == 1);
        CHECK(d.x()(1, 0) == 8.0);
    }

    TEST_CASE("missing column is named in the error") {
        const auto dir = testsupport::scratch_dir("missing");
        const auto path = write_file(dir, "d.csv", "y,w,x\n1,0,2\n");
        CHECK(error_of(path).find("'cluster'") != std::string::npos);
        CsvSchema schema;
        schema.covariates = {"z"};
        const auto path2 = write_file(dir, "e.csv", "y,w,cluster\n1,0,a\n");
        CHECK(error_of(path2, schema).find("'z'") != std::string::npos);
    }

    TEST_CASE("malformed rows are rejected") {
        const auto dir = testsupport::scratch_dir("malformed");
        CHECK(error_of(write_file(dir, "a.csv", "y,w,cluster\n1,2,a\n")).find("outside {0,1}") != std::string::npos);
        CHECK(error_of(write_file(dir, "b.csv", "y,w,cluster\n1,0\n")).find("expected 3 fields") != std::string::npos);
        CHECK(error_of(write_file(dir, "c.csv", "y,w,cluster\nabc,0,a\n")).find("row 1") != std::string::npos);
        CHECK(error_of(write_file(dir, "d.csv", "y,w,cluster\n")).find("no data rows") != std::string::npos);
        CHECK(error_of((dir / "absent.csv").string()).find("cannot open") != std::string::npos);
    }

    TEST_CASE("from_columns checks shapes and treatment values") {
        Eigen::VectorXd y(2);
        y << 1, 2;
        Eigen::VectorXi w(2);
        w << 0, 1;
        CHECK_THROWS_AS(Dataset::from_columns(y, w, Eigen::MatrixXd(3, 1), {"a", "b"}), InputError);
        CHECK_THROWS_AS(Dataset::from_columns(y, w, Eigen::MatrixXd(2, 1), {"a"}), InputError);
        w(1) = 3;
        CHECK_THROWS_AS(Dataset::from_columns(y, w, Eigen::MatrixXd(2, 1), {"a", "b"}), InputError);
    }

    TEST_CASE("validate reports non-finite values and degenerate clusters") {
        Eigen::VectorXd y(5);
        y << 1, std::numeric_limits<double>::quiet_NaN(), 3, 4, 5;
        Eigen::VectorXi w(5);
        w << 0, 1, 1, 1, 0;
        Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 1);
        x(3, 0) = std::numeric_limits<double>::infinity();
        const Dataset d = Dataset::from_columns(y, w, x, {"a", "a", "b", "b", "c"});
        const ValidationReport r = validate(d);
        CHECK_FALSE(r.accepted());
        REQUIRE(r.errors.size() == 2);
        CHECK(r.errors[0].first == 2);
        CHECK(r.errors[1].first == 4);
        CHECK(r.degenerate_clusters == std::vector<std::string>{"b", "c"});
        CHECK_THROWS_AS(require_valid(d), InputError);
    }

    TEST_CASE("subset rebuilds cluster indices") {
        const Dataset d = testsupport::random_cross_section(5, 4, 3, 1);
        const Dataset s = d.subset({9, 10, 0});
        CHECK(s.c() == 2);
        CHECK(s.cluster_labels() == std::vector<std::string>{"c3", "c0"});
        CHECK(s.y()(2) == d.y()(0));
        const Dataset t = d.with_outcome(Eigen::VectorXd::Zero(d.n()));
        CHECK(t.y().isZero());
        CHECK(t.x() == d.x());
    }

    TEST_CASE("group_by_size splits unequal clusters") {
        Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0, 4);
        Eigen::VectorXi w(5);
        w << 0, 1, 0, 1, 1;
        const Dataset d = Dataset::from_columns(y, w, Eigen::MatrixXd::Zero(5, 1), {"a", "b", "b", "a", "a"});
        const auto groups = group_by_size(d);
        REQUIRE(groups.size() == 2);
        CHECK(groups[0].first == 2);
        CHECK(groups[0].second.n() == 2);
        CHECK(groups[1].first == 3);
        CHECK(groups[1].second.n() == 3);
    }
}
