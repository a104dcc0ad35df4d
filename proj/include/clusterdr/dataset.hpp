#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clusterdr {

using Index = Eigen::Index;

// One observed unit: outcome, binary treatment, covariates and its cluster.
struct UnitRecord {
    double y = 0.0;
    int w = 0;
    Eigen::VectorXd x;
    std::string cluster_id;
};

// Column names used to read a CSV file. An empty covariate list means "every
// column that is not outcome, treatment, cluster or time".
struct CsvSchema {
    std::string outcome = "y";
    std::string treatment = "w";
    std::string cluster = "cluster";
    std::optional<std::string> time;
    std::vector<std::string> covariates;
    bool covariates_explicit = false;
};

// Clustered unit-level data, stored column-wise. Cluster labels are mapped to
// dense indices 0..c-1 in order of first appearance. Immutable once built.
class Dataset {
public:
    Dataset() = default;

    // Throws InputError on shape mismatch or treatment values outside {0,1}.
    // Non-finite outcomes and covariates are accepted here and reported by
    // validate().
    static Dataset from_columns(Eigen::VectorXd y, Eigen::VectorXi w, Eigen::MatrixXd x,
                                const std::vector<std::string>& cluster_labels,
                                std::vector<std::string> covariate_names = {},
                                std::optional<std::vector<std::string>> time_labels = std::nullopt);

    Index n() const { return y_.size(); }
    Index c() const { return static_cast<Index>(labels_.size()); }
    Index k() const { return x_.cols(); }

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXi& w() const { return w_; }
    Eigen::VectorXd w_real() const { return w_.cast<double>(); }
    const Eigen::MatrixXd& x() const { return x_; }

    // Dense cluster index of each unit.
    const std::vector<Index>& cluster_of() const { return cluster_of_; }
    const std::vector<std::string>& cluster_labels() const { return labels_; }
    const std::vector<std::vector<Index>>& members() const { return members_; }
    Index cluster_size(Index cluster) const {
        return static_cast<Index>(members_[static_cast<std::size_t>(cluster)].size());
    }
    Eigen::VectorXi cluster_sizes() const;
    std::optional<Index> find_cluster(const std::string& label) const;

    const std::vector<std::string>& covariate_names() const { return covariate_names_; }

    bool has_time() const { return !time_of_.empty(); }
    const std::vector<Index>& time_of() const { return time_of_; }
    const std::vector<std::string>& time_labels() const { return time_labels_; }

    UnitRecord unit(Index i) const;

    // Rows in the given order; cluster and time indices are rebuilt.
    Dataset subset(const std::vector<Index>& rows) const;

    // Same units with replaced outcomes.
    Dataset with_outcome(Eigen::VectorXd y) const;

private:
    Eigen::VectorXd y_;
    Eigen::VectorXi w_;
    Eigen::MatrixXd x_;
    std::vector<Index> cluster_of_;
    std::vector<std::string> labels_;
    std::vector<std::vector<Index>> members_;
    std::map<std::string, Index> label_index_;
    std::vector<std::string> covariate_names_;
    std::vector<Index> time_of_;
    std::vector<std::string> time_labels_;
};

struct ValidationReport {
    std::vector<std::pair<Index, std::string>> errors;          // (row, message)
    std::vector<std::pair<std::string, std::string>> warnings;  // (cluster, message)
    std::vector<std::string> degenerate_clusters;

    bool accepted() const { return errors.empty(); }
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(const Dataset& d, const std::string& path);

ValidationReport validate(const Dataset& d);

// Throws InputError with the first validation error.
void require_valid(const Dataset& d);

// Clusters partitioned by size, ordered by increasing size.
std::vector<std::pair<Index, Dataset>> group_by_size(const Dataset& d);

}  // namespace clusterdr
