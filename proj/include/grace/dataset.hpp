#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "grace/errors.hpp"

namespace grace {

enum class DType { Integer, Real };

struct FeatureDomain {
    std::string name;
    DType dtype = DType::Real;
    double min = 0.0;
    double max = 0.0;
    std::vector<double> cut_points; // filled in by mdl_discretize
};

// Per-feature min/max captured from the training split; maps raw values
// into [0,1] and back. Constant columns map to 0.
struct NormalizationRecord {
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    double to_normalized(int feature, double raw) const;
    double to_raw(int feature, double normalized) const;
    Eigen::VectorXd to_normalized(const Eigen::VectorXd& raw) const;
    Eigen::VectorXd to_raw(const Eigen::VectorXd& normalized) const;
};

struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;
    Eigen::MatrixXd X; // N x M
    Eigen::VectorXi y; // N
    std::vector<FeatureDomain> domains;
    std::optional<NormalizationRecord> normalization;

    Eigen::Index num_rows() const { return X.rows(); }
    Eigen::Index num_features() const { return X.cols(); }
    int num_classes() const { return static_cast<int>(label_names.size()); }
};

// Sidecar description of a CSV: where it lives, which column holds the
// label, dtype hints, and optional manual domain overrides.
struct DatasetManifest {
    std::string name;
    std::string csv_path;
    std::string label_column;
    std::map<std::string, DType> dtype_hints;
    std::map<std::string, FeatureDomain> domain_overrides;
};

DatasetManifest load_manifest(const std::string& path);

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::map<std::string, DType>& dtype_hints = {});

Dataset load_dataset(const DatasetManifest& manifest);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

Splits split(const Dataset& data, SplitRatios ratios, std::uint64_t seed);

std::vector<FeatureDomain> infer_domains(const Dataset& train);

// infer_domains plus the manifest's manual overrides.
std::vector<FeatureDomain> resolve_domains(const Dataset& train,
                                           const DatasetManifest& manifest);

// Scales with statistics taken from `data` itself (call on the train split).
std::pair<Dataset, NormalizationRecord> normalize(const Dataset& data);

// Scales with a previously captured record (val/test splits, new instances).
Dataset apply_normalization(const Dataset& data, const NormalizationRecord& record);

struct DiscretizedColumn {
    std::vector<int> codes;
    std::vector<double> cut_points;
};

// Fayyad-Irani supervised discretization: recursive binary splits accepted
// only when information gain clears the MDL threshold.
DiscretizedColumn mdl_discretize(const std::vector<double>& values,
                                 const std::vector<int>& labels, int num_classes);

} // namespace grace
