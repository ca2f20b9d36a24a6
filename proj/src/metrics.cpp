#include "grace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace grace {

namespace {

ContrastiveResult failure_record(const GraceContext& ctx, const Eigen::VectorXd& x_raw) {
    ContrastiveResult r;
    r.x_raw = project_domain(x_raw, *ctx.domains);
    r.x_norm = ctx.record->to_normalized(r.x_raw);
    r.x_tilde_raw = r.x_raw;
    r.x_tilde_norm = r.x_norm;
    r.original_class = predict(*ctx.net, r.x_norm);
    r.new_class = r.original_class;
    return r;
}

} // namespace

std::string method_name(Method method) {
    switch (method) {
        case Method::GraceGradient: return "grace-gradient";
        case Method::GraceLocal: return "grace-local";
        case Method::DeepFool: return "deepfool";
        case Method::NearestCT: return "nearestct";
    }
    throw ConfigError("unknown method");
}

Method parse_method(const std::string& name) {
    if (name == "grace-gradient") return Method::GraceGradient;
    if (name == "grace-local") return Method::GraceLocal;
    if (name == "deepfool") return Method::DeepFool;
    if (name == "nearestct") return Method::NearestCT;
    throw ConfigError("unknown method '" + name +
                      "' (expected grace-gradient, grace-local, deepfool, nearestct)");
}

double fidelity_metric(const std::vector<ContrastiveResult>& results, const NeuralNet& net) {
    if (results.empty()) throw std::invalid_argument("fidelity: empty result set");
    double hits = 0.0;
    for (const auto& r : results) {
        const int replay = predict(net, r.x_tilde_norm);
        if (r.new_class == replay && r.new_class != r.original_class) hits += 1.0;
    }
    return hits / static_cast<double>(results.size());
}

double avg_num_feats(const std::vector<ContrastiveResult>& results) {
    if (results.empty()) throw std::invalid_argument("avg_num_feats: empty result set");
    double total = 0.0;
    for (const auto& r : results) total += static_cast<double>(r.S.size());
    return total / static_cast<double>(results.size());
}

double info_gain_metric(const std::vector<ContrastiveResult>& results, const SUCache& su,
                        bool offdiag) {
    if (results.empty()) throw std::invalid_argument("info_gain_metric: empty result set");
    double redundancy_sum = 0.0;
    for (const auto& r : results) {
        const auto s = r.S.size();
        if (s == 0 || (offdiag && s < 2)) continue;
        double pair_sum = 0.0;
        for (int i : r.S)
            for (int j : r.S) {
                if (offdiag && i == j) continue;
                pair_sum += su.su(i, j);
            }
        const double pairs = offdiag ? static_cast<double>(s) * (s - 1)
                                     : static_cast<double>(s) * s;
        redundancy_sum += pair_sum / pairs;
    }
    return 1.0 - redundancy_sum / static_cast<double>(results.size());
}

bool in_domain(const Eigen::VectorXd& raw, const std::vector<FeatureDomain>& domains) {
    if (static_cast<std::size_t>(raw.size()) != domains.size())
        throw ShapeError("in_domain: domain count mismatch");
    for (Eigen::Index j = 0; j < raw.size(); ++j) {
        const FeatureDomain& d = domains[static_cast<std::size_t>(j)];
        if (raw(j) < d.min || raw(j) > d.max) return false;
        if (d.dtype == DType::Integer && raw(j) != std::floor(raw(j))) return false;
    }
    return true;
}

double domain_rate(const std::vector<ContrastiveResult>& results,
                   const std::vector<FeatureDomain>& domains) {
    if (results.empty()) throw std::invalid_argument("domain_rate: empty result set");
    double hits = 0.0;
    for (const auto& r : results)
        if (in_domain(r.x_tilde_raw, domains)) hits += 1.0;
    return hits / static_cast<double>(results.size());
}

double influence_metric(const MetricsReport& report) {
    if (report.avg_num_feats == 0.0)
        throw std::invalid_argument("influence undefined: avg#Feats is 0");
    return report.fidelity * report.info_gain * report.domain_rate / report.avg_num_feats;
}

MetricsReport compute_metrics(const std::string& method,
                              const std::vector<ContrastiveResult>& results,
                              const NeuralNet& net, const SUCache& su,
                              const std::vector<FeatureDomain>& domains, bool offdiag) {
    MetricsReport report;
    report.method = method;
    report.n = static_cast<int>(results.size());
    report.fidelity = fidelity_metric(results, net);
    report.avg_num_feats = avg_num_feats(results);
    report.info_gain = info_gain_metric(results, su, offdiag);
    report.info_gain_star = report.info_gain * report.fidelity;
    report.domain_rate = domain_rate(results, domains);
    report.influence =
        report.avg_num_feats == 0.0 ? 0.0 : influence_metric(report);
    return report;
}

ContrastiveResult baseline_nearest_ct(const GraceContext& ctx, const Eigen::VectorXd& x_raw) {
    if (ctx.train_raw == nullptr) throw ConfigError("nearestct: raw training split missing");
    ContrastiveResult r = failure_record(ctx, x_raw);

    const Eigen::VectorXi pred = predict_batch(*ctx.net, ctx.train_norm->X);
    Eigen::Index best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ctx.train_norm->num_rows(); ++i) {
        if (pred(i) == r.original_class) continue;
        const double d = (ctx.train_norm->X.row(i).transpose() - r.x_norm).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    if (best < 0) throw GenerationError("nearestct: no differently-predicted training point");

    r.x_tilde_norm = ctx.train_norm->X.row(best).transpose();
    r.x_tilde_raw = ctx.train_raw->X.row(best).transpose();
    for (Eigen::Index j = 0; j < r.x_raw.size(); ++j)
        if (r.x_tilde_raw(j) != r.x_raw(j)) r.S.push_back(static_cast<int>(j));
    r.target_class = pred(best);
    r.new_class = pred(best);
    r.k_used = static_cast<int>(r.S.size());
    r.success = true;
    return r;
}

ContrastiveResult baseline_deepfool(const GraceContext& ctx, const Eigen::VectorXd& x_raw,
                                    const GenerationConfig& config) {
    ContrastiveResult r = failure_record(ctx, x_raw);

    const auto M = r.x_raw.size();
    std::vector<int> all(static_cast<std::size_t>(M));
    for (Eigen::Index j = 0; j < M; ++j) all[static_cast<std::size_t>(j)] = static_cast<int>(j);

    // Unbounded real domains: the loop runs with no domain projection.
    std::vector<FeatureDomain> free(static_cast<std::size_t>(M));
    for (Eigen::Index j = 0; j < M; ++j) {
        free[static_cast<std::size_t>(j)].name = (*ctx.domains)[static_cast<std::size_t>(j)].name;
        free[static_cast<std::size_t>(j)].dtype = DType::Real;
        free[static_cast<std::size_t>(j)].min = -std::numeric_limits<double>::infinity();
        free[static_cast<std::size_t>(j)].max = std::numeric_limits<double>::infinity();
    }

    GenerateOutcome outcome =
        generate_contrastive(*ctx.net, r.x_norm, r.x_raw, all, free, *ctx.record, config);
    r.S = all;
    r.k_used = static_cast<int>(M);
    r.target_class = outcome.target_class;
    r.x_tilde_norm = outcome.x_tilde_norm;
    r.x_tilde_raw = outcome.x_tilde_raw;
    r.new_class = outcome.new_class;
    r.iterations = outcome.iterations;
    r.success = outcome.success;
    return r;
}

std::vector<ContrastiveResult> run_method(Method method, const GraceContext& ctx,
                                          const Dataset& test_raw,
                                          const GenerationConfig& config) {
    std::vector<ContrastiveResult> out;
    out.reserve(static_cast<std::size_t>(test_raw.num_rows()));
    for (Eigen::Index i = 0; i < test_raw.num_rows(); ++i) {
        const Eigen::VectorXd x_raw = test_raw.X.row(i).transpose();
        switch (method) {
            case Method::GraceGradient: {
                GenerationConfig cfg = config;
                cfg.mode = RankMode::Gradient;
                out.push_back(grace(ctx, x_raw, cfg));
                break;
            }
            case Method::GraceLocal: {
                GenerationConfig cfg = config;
                cfg.mode = RankMode::Local;
                out.push_back(grace(ctx, x_raw, cfg));
                break;
            }
            case Method::DeepFool:
                try {
                    out.push_back(baseline_deepfool(ctx, x_raw, config));
                } catch (const GenerationError&) {
                    ContrastiveResult r = failure_record(ctx, x_raw);
                    r.S.resize(static_cast<std::size_t>(x_raw.size()));
                    for (int j = 0; j < static_cast<int>(x_raw.size()); ++j) r.S[j] = j;
                    r.k_used = static_cast<int>(x_raw.size());
                    out.push_back(std::move(r));
                }
                break;
            case Method::NearestCT:
                try {
                    out.push_back(baseline_nearest_ct(ctx, x_raw));
                } catch (const GenerationError&) {
                    out.push_back(failure_record(ctx, x_raw));
                }
                break;
        }
    }
    return out;
}

} // namespace grace
