#include "grace/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grace/generator.hpp"

namespace grace {

namespace {

// Sort indices by score descending, index ascending on ties.
RankedFeatures order_by_scores(const Eigen::VectorXd& scores, RankMode mode) {
    RankedFeatures ranked;
    ranked.mode = mode;
    ranked.order.resize(static_cast<std::size_t>(scores.size()));
    std::iota(ranked.order.begin(), ranked.order.end(), 0);
    std::stable_sort(ranked.order.begin(), ranked.order.end(),
                     [&](int a, int b) { return scores(a) > scores(b); });
    for (int j : ranked.order) ranked.scores.push_back(scores(j));
    return ranked;
}

RankedFeatures index_fallback(int num_features, RankMode mode) {
    RankedFeatures ranked;
    ranked.mode = mode;
    ranked.fallback = true;
    ranked.order.resize(static_cast<std::size_t>(num_features));
    std::iota(ranked.order.begin(), ranked.order.end(), 0);
    ranked.scores.assign(ranked.order.size(), 0.0);
    return ranked;
}

} // namespace

RankedFeatures rank_gradient(const NeuralNet& net, const Eigen::VectorXd& x) {
    int v = -1;
    try {
        v = contrastive_class(net, x);
    } catch (const GenerationError&) {
        return index_fallback(net.num_inputs(), RankMode::Gradient);
    }
    Eigen::VectorXd scores = class_gradient(net, x, v).cwiseAbs();
    if (scores.maxCoeff() == 0.0)
        return index_fallback(net.num_inputs(), RankMode::Gradient);
    return order_by_scores(scores, RankMode::Gradient);
}

std::vector<Eigen::Index> knn_neighborhood(const Dataset& normalized_train,
                                           const NeuralNet& net,
                                           const Eigen::VectorXd& x, int q) {
    if (q < 1) throw ConfigError("knn_neighborhood: q must be >= 1");
    if (normalized_train.num_rows() == 0)
        throw DataError("knn_neighborhood: empty training split");

    const Eigen::VectorXi pred = predict_batch(net, normalized_train.X);
    std::vector<Eigen::Index> picked;
    for (int c = 0; c < net.num_classes(); ++c) {
        std::vector<std::pair<double, Eigen::Index>> members;
        for (Eigen::Index i = 0; i < normalized_train.num_rows(); ++i)
            if (pred(i) == c)
                members.emplace_back(
                    (normalized_train.X.row(i).transpose() - x).squaredNorm(), i);
        if (members.empty()) continue;
        std::sort(members.begin(), members.end());
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(q), members.size());
        for (std::size_t i = 0; i < take; ++i) picked.push_back(members[i].second);
    }
    return picked;
}

LocalSurrogate fit_local_surrogate(const Eigen::MatrixXd& Q, const NeuralNet& net) {
    if (Q.rows() < 2) throw SurrogateDegenerate("neighborhood has fewer than 2 points");
    if (Q.cols() != net.num_inputs())
        throw ShapeError("fit_local_surrogate: feature count mismatch");

    const Eigen::VectorXi pred = predict_batch(net, Q);
    bool mixed = false;
    for (Eigen::Index i = 1; i < pred.size(); ++i)
        if (pred(i) != pred(0)) {
            mixed = true;
            break;
        }
    if (!mixed) throw SurrogateDegenerate("neighborhood is single-class");

    const int Z = net.num_classes();
    const auto n = Q.rows();
    const Eigen::MatrixXd F = forward_batch(net, Q); // n x Z soft labels

    LocalSurrogate s;
    s.Q = Q;
    s.weights = Eigen::MatrixXd::Zero(Z, Q.cols());
    s.bias = Eigen::VectorXd::Zero(Z);

    constexpr int kIterations = 500;
    constexpr double kStep = 0.1;
    for (int iter = 0; iter < kIterations; ++iter) {
        Eigen::MatrixXd logits = (s.weights * Q.transpose()).colwise() + s.bias; // Z x n
        Eigen::MatrixXd G(Z, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd col = logits.col(i);
            Eigen::VectorXd e = (col.array() - col.maxCoeff()).exp();
            G.col(i) = e / e.sum();
        }
        Eigen::MatrixXd dz = (G - F.transpose()) / static_cast<double>(n); // Z x n
        s.weights -= kStep * (dz * Q);
        s.bias -= kStep * dz.rowwise().sum();
    }
    return s;
}

RankedFeatures rank_local(const LocalSurrogate& surrogate, int original_class,
                          int target_class) {
    if (original_class == target_class)
        throw std::invalid_argument("rank_local: classes must differ");
    if (original_class < 0 || target_class < 0 || original_class >= surrogate.weights.rows() ||
        target_class >= surrogate.weights.rows())
        throw std::invalid_argument("rank_local: class index out of range");
    Eigen::VectorXd scores =
        (surrogate.weights.row(target_class) - surrogate.weights.row(original_class))
            .cwiseAbs()
            .transpose();
    return order_by_scores(scores, RankMode::Local);
}

RankedFeatures rank_features(const NeuralNet& net, const Eigen::VectorXd& x,
                             RankMode mode, const Dataset& normalized_train, int q) {
    if (mode == RankMode::Gradient) return rank_gradient(net, x);

    int v = -1;
    try {
        v = contrastive_class(net, x);
    } catch (const GenerationError&) {
        return index_fallback(net.num_inputs(), RankMode::Gradient);
    }

    try {
        std::vector<Eigen::Index> rows = knn_neighborhood(normalized_train, net, x, q);
        Eigen::MatrixXd Q(static_cast<Eigen::Index>(rows.size()), net.num_inputs());
        for (std::size_t i = 0; i < rows.size(); ++i)
            Q.row(static_cast<Eigen::Index>(i)) = normalized_train.X.row(rows[i]);
        LocalSurrogate surrogate = fit_local_surrogate(Q, net);
        return rank_local(surrogate, predict(net, x), v);
    } catch (const SurrogateDegenerate&) {
        RankedFeatures ranked = rank_gradient(net, x);
        ranked.fallback = true;
        return ranked;
    }
}

} // namespace grace
