#pragma once

#include <vector>

#include "grace/dataset.hpp"
#include "grace/entropy.hpp"
#include "grace/neural_net.hpp"
#include "grace/ranking.hpp"

namespace grace {

struct GenerationConfig {
    int K = 5;               // max perturbable features
    double gamma = 0.5;      // SU redundancy bound
    int steps = 200;         // projection iteration cap
    RankMode mode = RankMode::Gradient;
    double overshoot = 1.02; // scale on the projection vector
    bool anchor_original = true; // f_C taken at the original x, not the iterate
    int q = 4;               // neighborhood size per class for W_Local

    void validate() const;
};

struct ContrastiveResult {
    Eigen::VectorXd x_norm;
    Eigen::VectorXd x_raw;
    Eigen::VectorXd x_tilde_norm;
    Eigen::VectorXd x_tilde_raw;
    std::vector<int> S;       // attempted perturbation set, ranked order
    int original_class = -1;  // C
    int target_class = -1;    // v, or -1 when no contrastive class exists
    int new_class = -1;       // argmax f(x_tilde)
    bool success = false;
    int iterations = 0;
    int k_used = 0;
    bool ranking_fallback = false;
};

// Nearest contrastive class: argmin over c != C of |f_c - f_C| / ||grad
// difference||; ties to the smallest index.
int contrastive_class(const NeuralNet& net, const Eigen::VectorXd& x);

// The bare projection vector: overshoot * |f_v - f_C| / ||dg||^2 * dg with
// dg = grad_v - grad_C. Throws on a vanishing gradient difference.
Eigen::VectorXd projection_vector(double f_v, double f_C, const Eigen::VectorXd& grad_v,
                                  const Eigen::VectorXd& grad_C, double overshoot);

Eigen::VectorXd projection_step(const NeuralNet& net, const Eigen::VectorXd& x_tilde,
                                const Eigen::VectorXd& x_orig, int target_class,
                                int original_class, double overshoot,
                                bool anchor_original);

// Clamp to [min,max]; integer features round half away from zero, then
// re-clamp. Idempotent.
double project_domain(double value, const FeatureDomain& domain);
Eigen::VectorXd project_domain(const Eigen::VectorXd& raw,
                               const std::vector<FeatureDomain>& domains);

struct GenerateOutcome {
    Eigen::VectorXd x_tilde_norm;
    Eigen::VectorXd x_tilde_raw;
    int target_class = -1;
    int new_class = -1;
    bool success = false;
    int iterations = 0;
};

// One generation run with a fixed perturbation set S. Iterates projection steps
// masked to S, projecting onto the domain each round; degenerate geometry
// surfaces as a failed outcome, not an exception.
GenerateOutcome generate_contrastive(const NeuralNet& net, const Eigen::VectorXd& x_norm,
                                     const Eigen::VectorXd& x_raw, const std::vector<int>& S,
                                     const std::vector<FeatureDomain>& domains,
                                     const NormalizationRecord& record,
                                     const GenerationConfig& config);

// Immutable surroundings a generation run needs.
struct GraceContext {
    const NeuralNet* net = nullptr;
    const Dataset* train_norm = nullptr; // normalized training split
    const Dataset* train_raw = nullptr;  // same rows unscaled (NearestCT)
    const std::vector<FeatureDomain>* domains = nullptr;
    const NormalizationRecord* record = nullptr;
    const SUCache* su = nullptr;
};

// Full pipeline for one instance: rank, entropy-filter, escalate k = 1..K,
// return the first flip or the last failed attempt.
ContrastiveResult grace(const GraceContext& ctx, const Eigen::VectorXd& x_raw,
                        const GenerationConfig& config);

} // namespace grace
