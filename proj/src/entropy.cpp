#include "grace/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace grace {

namespace {

int code_range(const std::vector<int>& codes) {
    int hi = 0;
    for (int c : codes) {
        if (c < 0) throw std::invalid_argument("negative discrete code");
        hi = std::max(hi, c);
    }
    return hi + 1;
}

} // namespace

double entropy(const std::vector<int>& codes) {
    if (codes.empty()) throw std::invalid_argument("entropy: empty column");
    std::vector<int> counts(code_range(codes), 0);
    for (int c : codes) counts[c] += 1;
    const double n = static_cast<double>(codes.size());
    double h = 0.0;
    for (int c : counts) {
        if (c == 0) continue;
        const double p = c / n;
        h -= p * std::log2(p);
    }
    return h;
}

double info_gain(const std::vector<int>& codes_i, const std::vector<int>& codes_j) {
    if (codes_i.size() != codes_j.size())
        throw std::invalid_argument("info_gain: column length mismatch");
    if (codes_i.empty()) throw std::invalid_argument("info_gain: empty column");

    const int bi = code_range(codes_i);
    const int bj = code_range(codes_j);
    std::vector<int> joint(static_cast<std::size_t>(bi) * bj, 0);
    std::vector<int> marginal_j(bj, 0);
    for (std::size_t r = 0; r < codes_i.size(); ++r) {
        joint[static_cast<std::size_t>(codes_i[r]) * bj + codes_j[r]] += 1;
        marginal_j[codes_j[r]] += 1;
    }

    // H(i | j) = sum_j p_j H(i | J = j)
    const double n = static_cast<double>(codes_i.size());
    double h_cond = 0.0;
    for (int j = 0; j < bj; ++j) {
        if (marginal_j[j] == 0) continue;
        double h_given = 0.0;
        for (int i = 0; i < bi; ++i) {
            const int c = joint[static_cast<std::size_t>(i) * bj + j];
            if (c == 0) continue;
            const double p = static_cast<double>(c) / marginal_j[j];
            h_given -= p * std::log2(p);
        }
        h_cond += (marginal_j[j] / n) * h_given;
    }
    return std::max(0.0, entropy(codes_i) - h_cond);
}

double symmetrical_uncertainty(const std::vector<int>& codes_i,
                               const std::vector<int>& codes_j) {
    const double denom = entropy(codes_i) + entropy(codes_j);
    if (denom == 0.0) return 0.0;
    return 2.0 * info_gain(codes_i, codes_j) / denom;
}

SUCache::SUCache(std::vector<std::vector<int>> columns) : columns_(std::move(columns)) {
    for (const auto& col : columns_)
        if (col.size() != columns_.front().size())
            throw std::invalid_argument("SUCache: ragged columns");
    memo_.assign(columns_.size() * columns_.size(),
                 std::numeric_limits<double>::quiet_NaN());
}

SUCache SUCache::from_dataset(const Dataset& normalized_train) {
    std::vector<int> labels(normalized_train.y.data(),
                            normalized_train.y.data() + normalized_train.y.size());
    std::vector<std::vector<int>> columns;
    for (Eigen::Index j = 0; j < normalized_train.num_features(); ++j) {
        std::vector<double> values(normalized_train.num_rows());
        for (Eigen::Index i = 0; i < normalized_train.num_rows(); ++i)
            values[static_cast<std::size_t>(i)] = normalized_train.X(i, j);
        columns.push_back(
            mdl_discretize(values, labels, normalized_train.num_classes()).codes);
    }
    return SUCache(std::move(columns));
}

double SUCache::su(int i, int j) const {
    if (i < 0 || j < 0 || i >= num_features() || j >= num_features())
        throw std::invalid_argument("SUCache: feature index out of range");
    const std::size_t key = static_cast<std::size_t>(std::min(i, j)) * columns_.size() +
                            static_cast<std::size_t>(std::max(i, j));
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!std::isnan(memo_[key])) return memo_[key];
    }
    const double value = symmetrical_uncertainty(columns_[i], columns_[j]);
    std::lock_guard<std::mutex> lock(mutex_);
    memo_[key] = value;
    return value;
}

std::vector<int> entropy_filter(const std::vector<int>& ranked, double gamma,
                                const SUCache& su) {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("entropy_filter: gamma must lie in [0,1]");
    std::vector<int> kept;
    for (int candidate : ranked) {
        if (candidate < 0 || candidate >= su.num_features())
            throw std::invalid_argument("entropy_filter: feature index out of range");
        bool redundant = false;
        for (int existing : kept)
            if (su.su(candidate, existing) > gamma) {
                redundant = true;
                break;
            }
        if (!redundant) kept.push_back(candidate);
    }
    return kept;
}

} // namespace grace
