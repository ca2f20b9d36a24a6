#pragma once

#include <vector>

#include "grace/dataset.hpp"
#include "grace/neural_net.hpp"

namespace grace {

enum class RankMode { Gradient, Local };

struct RankedFeatures {
    std::vector<int> order;     // feature indices, strongest first
    std::vector<double> scores; // aligned with order, non-increasing
    RankMode mode = RankMode::Gradient;
    bool fallback = false; // a degenerate case forced a weaker ranking
};

// W_Gradient: order by |df_v/dx_j| toward the nearest contrastive class.
RankedFeatures rank_gradient(const NeuralNet& net, const Eigen::VectorXd& x);

// The q nearest training rows (Euclidean, normalized space) from each class
// the model predicts on the training split; returns row indices.
std::vector<Eigen::Index> knn_neighborhood(const Dataset& normalized_train,
                                           const NeuralNet& net,
                                           const Eigen::VectorXd& x, int q);

struct LocalSurrogate {
    Eigen::MatrixXd weights; // Z x M
    Eigen::VectorXd bias;    // Z
    Eigen::MatrixXd Q;       // neighborhood rows the fit used
};

// Multinomial logistic fit to f's soft labels on Q; deterministic
// full-batch gradient descent from zero.
LocalSurrogate fit_local_surrogate(const Eigen::MatrixXd& Q, const NeuralNet& net);

// W_Local: order by the weight contrast |w_v - w_C|.
RankedFeatures rank_local(const LocalSurrogate& surrogate, int original_class,
                          int target_class);

// Mode dispatch with the documented fallbacks (degenerate surrogate ->
// gradient; degenerate gradient -> index order).
RankedFeatures rank_features(const NeuralNet& net, const Eigen::VectorXd& x,
                             RankMode mode, const Dataset& normalized_train, int q);

} // namespace grace
