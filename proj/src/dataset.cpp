#include "clusterdr/dataset.hpp"

#include "clusterdr/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace clusterdr {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    out.push_back(field);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string t = trim(cell);
    if (t.empty()) {
        throw InputError("row " + std::to_string(row) + ": empty cell in column '" + column + "'");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE) {
        throw InputError("row " + std::to_string(row) + ": non-numeric value '" + t + "' in column '" +
                         column + "'");
    }
    return v;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    return out + "\"";
}

}  // namespace

Dataset Dataset::from_columns(Eigen::VectorXd y, Eigen::VectorXi w, Eigen::MatrixXd x,
                              const std::vector<std::string>& cluster_labels,
                              std::vector<std::string> covariate_names,
                              std::optional<std::vector<std::string>> time_labels) {
    const Index n = y.size();
    if (w.size() != n || x.rows() != n || static_cast<Index>(cluster_labels.size()) != n) {
        throw InputError("dataset columns have inconsistent lengths");
    }
    if (n == 0) throw InputError("dataset has no rows");
    if (time_labels && static_cast<Index>(time_labels->size()) != n) {
        throw InputError("time column has inconsistent length");
    }
    for (Index i = 0; i < n; ++i) {
        if (w(i) != 0 && w(i) != 1) {
            throw InputError("row " + std::to_string(i + 1) + ": treatment value " + std::to_string(w(i)) +
                             " outside {0,1}");
        }
    }
    if (covariate_names.empty()) {
        for (Index j = 0; j < x.cols(); ++j) covariate_names.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Index>(covariate_names.size()) != x.cols()) {
        throw InputError("covariate name count does not match covariate columns");
    }

    Dataset d;
    d.y_ = std::move(y);
    d.w_ = std::move(w);
    d.x_ = std::move(x);
    d.covariate_names_ = std::move(covariate_names);
    d.cluster_of_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto& label = cluster_labels[static_cast<std::size_t>(i)];
        auto [it, inserted] = d.label_index_.emplace(label, d.c());
        if (inserted) {
            d.labels_.push_back(label);
            d.members_.emplace_back();
        }
        d.cluster_of_[static_cast<std::size_t>(i)] = it->second;
        d.members_[static_cast<std::size_t>(it->second)].push_back(i);
    }
    if (time_labels) {
        std::map<std::string, Index> time_index;
        d.time_of_.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const auto& label = (*time_labels)[static_cast<std::size_t>(i)];
            auto [it, inserted] = time_index.emplace(label, static_cast<Index>(d.time_labels_.size()));
            if (inserted) d.time_labels_.push_back(label);
            d.time_of_[static_cast<std::size_t>(i)] = it->second;
        }
    }
    return d;
}

Eigen::VectorXi Dataset::cluster_sizes() const {
    Eigen::VectorXi sizes(c());
    for (Index g = 0; g < c(); ++g) sizes(g) = static_cast<int>(cluster_size(g));
    return sizes;
}

std::optional<Index> Dataset::find_cluster(const std::string& label) const {
    const auto it = label_index_.find(label);
    if (it == label_index_.end()) return std::nullopt;
    return it->second;
}

UnitRecord Dataset::unit(Index i) const {
    return UnitRecord{y_(i), w_(i), x_.row(i).transpose(), labels_[static_cast<std::size_t>(cluster_of_[static_cast<std::size_t>(i)])]};
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
    const auto m = static_cast<Index>(rows.size());
    Eigen::VectorXd y(m);
    Eigen::VectorXi w(m);
    Eigen::MatrixXd x(m, k());
    std::vector<std::string> labels(rows.size());
    std::optional<std::vector<std::string>> times;
    if (has_time()) times.emplace(rows.size());
    for (Index r = 0; r < m; ++r) {
        const Index i = rows[static_cast<std::size_t>(r)];
        y(r) = y_(i);
        w(r) = w_(i);
        x.row(r) = x_.row(i);
        labels[static_cast<std::size_t>(r)] = labels_[static_cast<std::size_t>(cluster_of_[static_cast<std::size_t>(i)])];
        if (times) (*times)[static_cast<std::size_t>(r)] = time_labels_[static_cast<std::size_t>(time_of_[static_cast<std::size_t>(i)])];
    }
    return from_columns(std::move(y), std::move(w), std::move(x), labels, covariate_names_, std::move(times));
}

Dataset Dataset::with_outcome(Eigen::VectorXd y) const {
    if (y.size() != n()) throw InputError("replacement outcome has wrong length");
    Dataset d = *this;
    d.y_ = std::move(y);
    return d;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError("data file '" + path + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    auto column_of = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InputError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t y_col = column_of(schema.outcome);
    const std::size_t w_col = column_of(schema.treatment);
    const std::size_t c_col = column_of(schema.cluster);
    std::optional<std::size_t> t_col;
    if (schema.time) t_col = column_of(*schema.time);

    std::vector<std::string> cov_names;
    std::vector<std::size_t> cov_cols;
    if (schema.covariates_explicit || !schema.covariates.empty()) {
        for (const auto& name : schema.covariates) {
            cov_names.push_back(name);
            cov_cols.push_back(column_of(name));
        }
    } else {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == y_col || j == w_col || j == c_col || (t_col && j == *t_col)) continue;
            cov_names.push_back(header[j]);
            cov_cols.push_back(j);
        }
    }

    std::vector<double> ys;
    std::vector<int> ws;
    std::vector<double> xs;
    std::vector<std::string> clusters;
    std::vector<std::string> times;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty() || line == "\r") continue;
        ++row;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw InputError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(cells.size()));
        }
        ys.push_back(parse_number(cells[y_col], row, schema.outcome));
        const double wv = parse_number(cells[w_col], row, schema.treatment);
        if (wv != 0.0 && wv != 1.0) {
            throw InputError("row " + std::to_string(row) + ": treatment value '" + trim(cells[w_col]) +
                             "' outside {0,1}");
        }
        ws.push_back(static_cast<int>(wv));
        for (std::size_t j = 0; j < cov_cols.size(); ++j) {
            xs.push_back(parse_number(cells[cov_cols[j]], row, cov_names[j]));
        }
        const std::string cl = trim(cells[c_col]);
        if (cl.empty()) throw InputError("row " + std::to_string(row) + ": empty cluster id");
        clusters.push_back(cl);
        if (t_col) times.push_back(trim(cells[*t_col]));
    }
    if (ys.empty()) throw InputError("data file '" + path + "' has no data rows");

    const auto n = static_cast<Index>(ys.size());
    const auto k = static_cast<Index>(cov_cols.size());
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    Eigen::VectorXi w = Eigen::Map<Eigen::VectorXi>(ws.data(), n);
    Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, k);
    std::optional<std::vector<std::string>> time_labels;
    if (t_col) time_labels = std::move(times);
    return Dataset::from_columns(std::move(y), std::move(w), std::move(x), clusters, cov_names,
                                 std::move(time_labels));
}

void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << "cluster";
    if (d.has_time()) out << ",time";
    out << ",w,y";
    for (const auto& name : d.covariate_names()) out << ',' << csv_quote(name);
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index i = 0; i < d.n(); ++i) {
        out << csv_quote(d.cluster_labels()[static_cast<std::size_t>(d.cluster_of()[static_cast<std::size_t>(i)])]);
        if (d.has_time()) out << ',' << csv_quote(d.time_labels()[static_cast<std::size_t>(d.time_of()[static_cast<std::size_t>(i)])]);
        out << ',' << d.w()(i) << ',' << d.y()(i);
        for (Index j = 0; j < d.k(); ++j) out << ',' << d.x()(i, j);
        out << '\n';
    }
}

ValidationReport validate(const Dataset& d) {
    ValidationReport report;
    for (Index i = 0; i < d.n(); ++i) {
        if (!std::isfinite(d.y()(i))) {
            report.errors.emplace_back(i + 1, "non-finite outcome");
        }
        for (Index j = 0; j < d.k(); ++j) {
            if (!std::isfinite(d.x()(i, j))) {
                report.errors.emplace_back(i + 1, "non-finite covariate '" + d.covariate_names()[static_cast<std::size_t>(j)] + "'");
            }
        }
    }
    for (Index g = 0; g < d.c(); ++g) {
        const auto& rows = d.members()[static_cast<std::size_t>(g)];
        const auto& label = d.cluster_labels()[static_cast<std::size_t>(g)];
        int treated = 0;
        for (const Index i : rows) treated += d.w()(i);
        if (treated == 0 || treated == static_cast<int>(rows.size())) {
            report.degenerate_clusters.push_back(label);
            report.warnings.emplace_back(label, "no treatment variation within cluster");
        }
        if (rows.size() == 1) report.warnings.emplace_back(label, "single-unit cluster");
    }
    return report;
}

void require_valid(const Dataset& d) {
    const auto report = validate(d);
    if (!report.accepted()) {
        const auto& [row, message] = report.errors.front();
        throw InputError("row " + std::to_string(row) + ": " + message);
    }
}

std::vector<std::pair<Index, Dataset>> group_by_size(const Dataset& d) {
    std::map<Index, std::vector<Index>> clusters_by_size;
    for (Index g = 0; g < d.c(); ++g) clusters_by_size[d.cluster_size(g)].push_back(g);
    std::vector<std::pair<Index, Dataset>> groups;
    for (const auto& [size, clusters] : clusters_by_size) {
        if (clusters_by_size.size() == 1) {
            groups.emplace_back(size, d);
            break;
        }
        std::set<Index> keep(clusters.begin(), clusters.end());
        std::vector<Index> rows;
        for (Index i = 0; i < d.n(); ++i) {
            if (keep.count(d.cluster_of()[static_cast<std::size_t>(i)])) rows.push_back(i);
        }
        groups.emplace_back(size, d.subset(rows));
    }
    return groups;
}

}  // namespace clusterdr
