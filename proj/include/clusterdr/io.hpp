#pragma once

#include "clusterdr/dataset.hpp"
#include "clusterdr/estimators.hpp"
#include "clusterdr/glm.hpp"
#include "clusterdr/mixture.hpp"
#include "clusterdr/simulate.hpp"
#include "clusterdr/suffstats.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace clusterdr {

using Json = nlohmann::json;

// Strict reader for one JSON object: typed lookups, and finish() rejects any
// key that was never looked up. Errors are InputError naming the path.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string where);

    bool has(const std::string& key) const;
    const Json* raw(const std::string& key);

    template <typename T>
    std::optional<T> get(const std::string& key) {
        const Json* v = raw(key);
        if (v == nullptr || v->is_null()) return std::nullopt;
        try {
            return v->get<T>();
        } catch (const Json::exception&) {
            throw_type(key);
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        auto v = get<T>(key);
        return v ? *v : fallback;
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }
    void finish() const;

private:
    [[noreturn]] void throw_type(const std::string& key) const;

    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

// Report without wall-clock fields, dumped with sorted keys and indent 2.
std::string canonical_body(const Json& report);
std::string config_hash(const Json& effective_config);
std::string utc_timestamp();

// StatSpec as an array of terms, e.g. {"kind": "covariate_mean", "index": 0}.
Json to_json(const StatTerm& term);
Json to_json(const StatSpec& spec);
StatTerm stat_term_from_json(const Json& j, const std::string& where);
StatSpec stat_spec_from_json(const Json& j, const std::string& where);
std::vector<std::string> stat_names(const StatSpec& spec, const std::vector<std::string>& covariate_names);

Json to_json(const CsvSchema& schema);
CsvSchema csv_schema_from_json(const Json& j, const std::string& where);

Json to_json(const NuisanceConfig& cfg);
NuisanceConfig nuisance_from_json(const Json& j, const std::string& where);

Json to_json(const DgpConfig& cfg);
// Starts from the named preset when "preset" is present, else from defaults,
// then applies the remaining keys.
DgpConfig dgp_from_json(const Json& j, const std::string& where);

Json to_json(const EstimatorConfig& cfg);
EstimatorConfig estimator_from_json(const Json& j, const std::string& where);

Json to_json(const DrResult& r, const std::vector<std::string>& cluster_labels);
Json to_json(const RegressionEstimate& r);
Json to_json(const MundlakEstimate& r);
Json to_json(const MixtureModel& m, const std::vector<std::string>& covariate_names);
Json to_json(const McReport& r);
Json to_json(const GroupLassoFit& fit, const std::vector<std::string>& names);

void write_per_rep_csv(const McReport& r, const std::string& path);
// cluster,post_1..post_p
void write_posterior_csv(const Dataset& d, const Eigen::MatrixXd& posterior, const std::string& path);
// Reads a cluster-level CSV (first column cluster label, then statistics) and
// returns the c x m matrix ordered like d's clusters.
Eigen::MatrixXd read_cluster_stats_csv(const Dataset& d, const std::string& path, std::vector<std::string>& names);

}  // namespace clusterdr
