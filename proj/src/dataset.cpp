#include "grace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace grace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& column) {
    const std::string s = trim(raw);
    if (s.empty())
        throw DataError("missing value at row " + std::to_string(row) + ", column '" +
                        column + "'");
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != s.size() || !std::isfinite(value))
        throw DataError("non-numeric cell '" + s + "' at row " + std::to_string(row) +
                        ", column '" + column + "'");
    return value;
}

bool is_whole(double v) { return v == std::floor(v); }

DType parse_dtype(const std::string& s) {
    if (s == "int" || s == "integer") return DType::Integer;
    if (s == "real" || s == "float" || s == "double") return DType::Real;
    throw ConfigError("unknown dtype '" + s + "' (expected int or real)");
}

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.name = data.name;
    out.feature_names = data.feature_names;
    out.label_names = data.label_names;
    out.domains = data.domains;
    out.normalization = data.normalization;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
        out.y(static_cast<Eigen::Index>(i)) = data.y(rows[i]);
    }
    return out;
}

double class_entropy(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log2(p);
    }
    return h;
}

int distinct_classes(const std::vector<int>& counts) {
    int k = 0;
    for (int c : counts)
        if (c > 0) ++k;
    return k;
}

// Recursive Fayyad-Irani splitting over sorted (value, label) pairs.
// Appends accepted cut values to `cuts`.
void mdl_split(const std::vector<std::pair<double, int>>& sorted, std::size_t begin,
               std::size_t end, int num_classes, std::vector<double>& cuts) {
    const int n = static_cast<int>(end - begin);
    if (n < 2) return;

    std::vector<int> total_counts(num_classes, 0);
    for (std::size_t i = begin; i < end; ++i) total_counts[sorted[i].second] += 1;
    const double h_all = class_entropy(total_counts, n);
    if (h_all == 0.0) return;

    // Scan candidate boundaries between adjacent distinct values, tracking
    // left-side class counts incrementally.
    std::vector<int> left_counts(num_classes, 0);
    double best_gain = -1.0;
    std::size_t best_split = 0; // first index of the right part
    double best_h1 = 0.0, best_h2 = 0.0;
    for (std::size_t i = begin; i + 1 < end; ++i) {
        left_counts[sorted[i].second] += 1;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const int n1 = static_cast<int>(i - begin + 1);
        const int n2 = n - n1;
        std::vector<int> right_counts(num_classes, 0);
        for (int c = 0; c < num_classes; ++c)
            right_counts[c] = total_counts[c] - left_counts[c];
        const double h1 = class_entropy(left_counts, n1);
        const double h2 = class_entropy(right_counts, n2);
        const double gain = h_all - (n1 * h1 + n2 * h2) / n;
        if (gain > best_gain) {
            best_gain = gain;
            best_split = i + 1;
            best_h1 = h1;
            best_h2 = h2;
        }
    }
    if (best_gain < 0.0) return; // all values equal

    // MDL acceptance: gain > log2(n-1)/n + delta/n.
    std::vector<int> left(num_classes, 0), right(num_classes, 0);
    for (std::size_t i = begin; i < best_split; ++i) left[sorted[i].second] += 1;
    for (std::size_t i = best_split; i < end; ++i) right[sorted[i].second] += 1;
    const int k = distinct_classes(total_counts);
    const int k1 = distinct_classes(left);
    const int k2 = distinct_classes(right);
    const double delta = std::log2(std::pow(3.0, k) - 2.0) -
                         (k * h_all - k1 * best_h1 - k2 * best_h2);
    const double threshold = (std::log2(static_cast<double>(n - 1)) + delta) / n;
    if (best_gain <= threshold) return;

    cuts.push_back((sorted[best_split - 1].first + sorted[best_split].first) / 2.0);
    mdl_split(sorted, begin, best_split, num_classes, cuts);
    mdl_split(sorted, best_split, end, num_classes, cuts);
}

} // namespace

double NormalizationRecord::to_normalized(int feature, double raw) const {
    const double range = max(feature) - min(feature);
    if (range == 0.0) return 0.0;
    return (raw - min(feature)) / range;
}

double NormalizationRecord::to_raw(int feature, double normalized) const {
    const double range = max(feature) - min(feature);
    if (range == 0.0) return min(feature);
    return min(feature) + normalized * range;
}

Eigen::VectorXd NormalizationRecord::to_normalized(const Eigen::VectorXd& raw) const {
    if (raw.size() != min.size())
        throw ShapeError("normalization record: feature count mismatch");
    Eigen::VectorXd out(raw.size());
    for (int j = 0; j < raw.size(); ++j) out(j) = to_normalized(j, raw(j));
    return out;
}

Eigen::VectorXd NormalizationRecord::to_raw(const Eigen::VectorXd& normalized) const {
    if (normalized.size() != min.size())
        throw ShapeError("normalization record: feature count mismatch");
    Eigen::VectorXd out(normalized.size());
    for (int j = 0; j < normalized.size(); ++j) out(j) = to_raw(j, normalized(j));
    return out;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest '" + path + "' is not valid JSON: " + e.what());
    }

    DatasetManifest m;
    if (!doc.contains("csv") || !doc.contains("label_column"))
        throw DataError("manifest '" + path + "' needs 'csv' and 'label_column'");
    m.csv_path = doc.at("csv").get<std::string>();
    m.label_column = doc.at("label_column").get<std::string>();
    m.name = doc.value("name", std::filesystem::path(path).stem().string());

    // CSV path is relative to the manifest's own directory.
    std::filesystem::path csv(m.csv_path);
    if (csv.is_relative())
        m.csv_path = (std::filesystem::path(path).parent_path() / csv).string();

    if (doc.contains("dtypes"))
        for (const auto& [key, value] : doc.at("dtypes").items())
            m.dtype_hints[key] = parse_dtype(value.get<std::string>());

    if (doc.contains("domains")) {
        for (const auto& [key, value] : doc.at("domains").items()) {
            FeatureDomain d;
            d.name = key;
            d.min = value.at("min").get<double>();
            d.max = value.at("max").get<double>();
            d.dtype = value.contains("dtype") ? parse_dtype(value.at("dtype").get<std::string>())
                                              : DType::Real;
            if (d.min > d.max)
                throw DataError("manifest domain for '" + key + "' has min > max");
            if (d.dtype == DType::Integer && (!is_whole(d.min) || !is_whole(d.max)))
                throw DataError("manifest domain for '" + key +
                                "' is integer but bounds are not whole");
            m.domain_overrides[key] = std::move(d);
        }
    }
    return m;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::map<std::string, DType>& dtype_hints) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = i;
    if (label_idx == header.size())
        throw DataError("label column '" + label_column + "' not found in '" + path + "'");

    Dataset data;
    data.name = std::filesystem::path(path).stem().string();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_idx) data.feature_names.push_back(header[i]);

    for (const auto& hint : dtype_hints)
        if (std::find(header.begin(), header.end(), hint.first) == header.end())
            throw DataError("dtype hint names unknown column '" + hint.first + "'");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::map<std::string, int> label_ids;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        row_number += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row_number) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(header.size() - 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) {
                const std::string label = trim(cells[i]);
                if (label.empty())
                    throw DataError("missing label at row " + std::to_string(row_number));
                auto [it, inserted] =
                    label_ids.emplace(label, static_cast<int>(data.label_names.size()));
                if (inserted) data.label_names.push_back(label);
                labels.push_back(it->second);
                continue;
            }
            const double v = parse_cell(cells[i], row_number, header[i]);
            auto hint = dtype_hints.find(header[i]);
            if (hint != dtype_hints.end() && hint->second == DType::Integer && !is_whole(v))
                throw DataError("column '" + header[i] + "' is integer but row " +
                                std::to_string(row_number) + " holds " + cells[i]);
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("'" + path + "' has no data rows");

    data.X.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(data.feature_names.size()));
    data.y.resize(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            data.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        data.y(static_cast<Eigen::Index>(r)) = labels[r];
    }
    return data;
}

Dataset load_dataset(const DatasetManifest& manifest) {
    Dataset data = load_csv(manifest.csv_path, manifest.label_column, manifest.dtype_hints);
    if (!manifest.name.empty()) data.name = manifest.name;
    for (const auto& over : manifest.domain_overrides)
        if (std::find(data.feature_names.begin(), data.feature_names.end(), over.first) ==
            data.feature_names.end())
            throw DataError("domain override names unknown feature '" + over.first + "'");
    return data;
}

Splits split(const Dataset& data, SplitRatios ratios, std::uint64_t seed) {
    if (!(ratios.train > 0.0) || !(ratios.val > 0.0) || !(ratios.test > 0.0))
        throw ConfigError("split ratios must be positive");
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    const auto n = data.num_rows();
    auto n_train = static_cast<Eigen::Index>(std::llround(ratios.train * static_cast<double>(n)));
    auto n_val = static_cast<Eigen::Index>(std::llround(ratios.val * static_cast<double>(n)));
    const auto n_test = n - n_train - n_val;
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw DataError("split would leave an empty part (n=" + std::to_string(n) + ")");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(splitmix64(seed));
    std::shuffle(order.begin(), order.end(), rng);

    Splits out;
    out.train = take_rows(data, {order.begin(), order.begin() + n_train});
    out.val = take_rows(data, {order.begin() + n_train, order.begin() + n_train + n_val});
    out.test = take_rows(data, {order.begin() + n_train + n_val, order.end()});
    return out;
}

std::vector<FeatureDomain> infer_domains(const Dataset& train) {
    if (train.num_rows() == 0) throw DataError("infer_domains: empty split");
    std::vector<FeatureDomain> domains;
    for (Eigen::Index j = 0; j < train.num_features(); ++j) {
        FeatureDomain d;
        d.name = train.feature_names[static_cast<std::size_t>(j)];
        d.min = train.X.col(j).minCoeff();
        d.max = train.X.col(j).maxCoeff();
        bool whole = true;
        for (Eigen::Index i = 0; i < train.num_rows(); ++i)
            if (!is_whole(train.X(i, j))) {
                whole = false;
                break;
            }
        d.dtype = whole ? DType::Integer : DType::Real;
        domains.push_back(std::move(d));
    }
    return domains;
}

std::vector<FeatureDomain> resolve_domains(const Dataset& train,
                                           const DatasetManifest& manifest) {
    std::vector<FeatureDomain> domains = infer_domains(train);
    for (auto& d : domains) {
        auto it = manifest.domain_overrides.find(d.name);
        if (it == manifest.domain_overrides.end()) continue;
        d.min = it->second.min;
        d.max = it->second.max;
        d.dtype = it->second.dtype;
    }
    return domains;
}

std::pair<Dataset, NormalizationRecord> normalize(const Dataset& data) {
    if (data.num_rows() == 0) throw DataError("normalize: empty dataset");
    NormalizationRecord record;
    record.min = data.X.colwise().minCoeff();
    record.max = data.X.colwise().maxCoeff();
    return {apply_normalization(data, record), record};
}

Dataset apply_normalization(const Dataset& data, const NormalizationRecord& record) {
    if (record.min.size() != data.num_features())
        throw ShapeError("apply_normalization: feature count mismatch");
    Dataset out = data;
    for (Eigen::Index j = 0; j < data.num_features(); ++j)
        for (Eigen::Index i = 0; i < data.num_rows(); ++i)
            out.X(i, j) = record.to_normalized(static_cast<int>(j), data.X(i, j));
    out.normalization = record;
    return out;
}

DiscretizedColumn mdl_discretize(const std::vector<double>& values,
                                 const std::vector<int>& labels, int num_classes) {
    if (values.size() != labels.size())
        throw std::invalid_argument("mdl_discretize: values/labels length mismatch");
    if (values.empty()) throw std::invalid_argument("mdl_discretize: empty column");
    for (int label : labels)
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument("mdl_discretize: label out of range");

    std::vector<std::pair<double, int>> sorted(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sorted[i] = {values[i], labels[i]};
    std::sort(sorted.begin(), sorted.end());

    DiscretizedColumn out;
    mdl_split(sorted, 0, sorted.size(), num_classes, out.cut_points);
    std::sort(out.cut_points.begin(), out.cut_points.end());

    out.codes.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out.codes[i] = static_cast<int>(
            std::upper_bound(out.cut_points.begin(), out.cut_points.end(), values[i]) -
            out.cut_points.begin());
    return out;
}

} // namespace grace
