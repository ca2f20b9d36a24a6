#pragma once

#include <mutex>
#include <vector>

#include "grace/dataset.hpp"

namespace grace {

// Empirical entropy in bits over discrete codes; 0 for constant columns.
double entropy(const std::vector<int>& codes);

// IG(i | j) = H(i) - H(i | j), always >= 0 up to rounding.
double info_gain(const std::vector<int>& codes_i, const std::vector<int>& codes_j);

// SU = 2 IG / (H_i + H_j), guarded to 0 when the denominator vanishes.
double symmetrical_uncertainty(const std::vector<int>& codes_i,
                               const std::vector<int>& codes_j);

// Pairwise SU over the discretized training columns, memoized on demand.
class SUCache {
  public:
    explicit SUCache(std::vector<std::vector<int>> columns);

    // Discretizes every normalized training column against the labels.
    static SUCache from_dataset(const Dataset& normalized_train);

    double su(int i, int j) const;
    int num_features() const { return static_cast<int>(columns_.size()); }
    const std::vector<int>& codes(int feature) const { return columns_.at(feature); }

  private:
    std::vector<std::vector<int>> columns_;
    mutable std::vector<double> memo_; // NaN marks an unfilled entry
    mutable std::mutex mutex_;
};

// Forward redundancy filter: keep a feature iff its SU with every kept
// feature stays <= gamma. Preserves input order.
std::vector<int> entropy_filter(const std::vector<int>& ranked, double gamma,
                                const SUCache& su);

} // namespace grace
