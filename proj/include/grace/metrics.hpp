#pragma once

#include <string>
#include <vector>

#include "grace/generator.hpp"

namespace grace {

enum class Method { GraceGradient, GraceLocal, DeepFool, NearestCT };

std::string method_name(Method method);
Method parse_method(const std::string& name);

struct MetricsReport {
    std::string method;
    int n = 0;
    double fidelity = 0.0;
    double avg_num_feats = 0.0;
    double info_gain = 0.0;
    double info_gain_star = 0.0;
    double domain_rate = 0.0;
    double influence = 0.0;
};

// Fraction whose claimed label survives a forward replay and differs from
// the original prediction.
double fidelity_metric(const std::vector<ContrastiveResult>& results, const NeuralNet& net);

// Mean |S| over all results, success or not.
double avg_num_feats(const std::vector<ContrastiveResult>& results);

// 1 - mean pairwise-SU redundancy over S. The literal form sums the full
// |S| x |S| grid including the diagonal; offdiag drops it.
double info_gain_metric(const std::vector<ContrastiveResult>& results, const SUCache& su,
                        bool offdiag = false);

bool in_domain(const Eigen::VectorXd& raw, const std::vector<FeatureDomain>& domains);

double domain_rate(const std::vector<ContrastiveResult>& results,
                   const std::vector<FeatureDomain>& domains);

// fidelity * info_gain * domain / avg_num_feats.
double influence_metric(const MetricsReport& report);

MetricsReport compute_metrics(const std::string& method,
                              const std::vector<ContrastiveResult>& results,
                              const NeuralNet& net, const SUCache& su,
                              const std::vector<FeatureDomain>& domains, bool offdiag = false);

// Nearest differently-predicted training point; S is the exact set of
// differing features.
ContrastiveResult baseline_nearest_ct(const GraceContext& ctx, const Eigen::VectorXd& x_raw);

// The projection loop over all features with no domain projection; |S| is
// always M.
ContrastiveResult baseline_deepfool(const GraceContext& ctx, const Eigen::VectorXd& x_raw,
                                    const GenerationConfig& config);

// One result per test row; per-row degeneracies become failure records.
std::vector<ContrastiveResult> run_method(Method method, const GraceContext& ctx,
                                          const Dataset& test_raw,
                                          const GenerationConfig& config);

} // namespace grace
