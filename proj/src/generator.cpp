#include "grace/generator.hpp"

#include <algorithm>
#include <cmath>

namespace grace {

namespace {

constexpr double kDegenerateNorm = 1e-12;
// Small push along the gradient contrast so a step from the boundary
// itself (zero projection magnitude) still crosses.
constexpr double kMinStep = 1e-4;

} // namespace

void GenerationConfig::validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (overshoot < 1.0) throw ConfigError("overshoot must be >= 1");
    if (q < 1) throw ConfigError("q must be >= 1");
}

int contrastive_class(const NeuralNet& net, const Eigen::VectorXd& x) {
    const int Z = net.num_classes();
    if (Z < 2) throw GenerationError("need at least two classes");

    const Eigen::VectorXd p = forward(net, x);
    int C = 0;
    for (int c = 1; c < Z; ++c)
        if (p(c) > p(C)) C = c;
    const Eigen::VectorXd grad_C = class_gradient(net, x, C);

    int best = -1;
    double best_score = 0.0;
    for (int c = 0; c < Z; ++c) {
        if (c == C) continue;
        const double norm = (class_gradient(net, x, c) - grad_C).norm();
        if (norm < kDegenerateNorm) continue;
        const double score = std::abs(p(c) - p(C)) / norm;
        if (best < 0 || score < best_score) {
            best = c;
            best_score = score;
        }
    }
    if (best < 0) throw GenerationError("no contrastive class: all boundaries degenerate");
    return best;
}

Eigen::VectorXd projection_vector(double f_v, double f_C, const Eigen::VectorXd& grad_v,
                                  const Eigen::VectorXd& grad_C, double overshoot) {
    const Eigen::VectorXd dg = grad_v - grad_C;
    const double norm2 = dg.squaredNorm();
    if (std::sqrt(norm2) < kDegenerateNorm)
        throw GenerationError("degenerate projection step: gradients coincide");
    return (overshoot * std::abs(f_v - f_C) / norm2) * dg;
}

Eigen::VectorXd projection_step(const NeuralNet& net, const Eigen::VectorXd& x_tilde,
                                const Eigen::VectorXd& x_orig, int target_class,
                                int original_class, double overshoot,
                                bool anchor_original) {
    if (target_class == original_class)
        throw std::invalid_argument("projection_step: classes must differ");
    const Eigen::VectorXd& anchor = anchor_original ? x_orig : x_tilde;
    const double f_v = forward(net, x_tilde)(target_class);
    const double f_C = forward(net, anchor)(original_class);
    const Eigen::VectorXd grad_v = class_gradient(net, x_tilde, target_class);
    const Eigen::VectorXd grad_C = class_gradient(net, anchor, original_class);
    return projection_vector(f_v, f_C, grad_v, grad_C, overshoot);
}

double project_domain(double value, const FeatureDomain& domain) {
    double v = std::clamp(value, domain.min, domain.max);
    if (domain.dtype == DType::Integer)
        v = std::clamp(std::round(v), domain.min, domain.max);
    return v;
}

Eigen::VectorXd project_domain(const Eigen::VectorXd& raw,
                               const std::vector<FeatureDomain>& domains) {
    if (static_cast<std::size_t>(raw.size()) != domains.size())
        throw ShapeError("project_domain: domain count mismatch");
    Eigen::VectorXd out = raw;
    for (Eigen::Index j = 0; j < raw.size(); ++j)
        out(j) = project_domain(raw(j), domains[static_cast<std::size_t>(j)]);
    return out;
}

GenerateOutcome generate_contrastive(const NeuralNet& net, const Eigen::VectorXd& x_norm,
                                     const Eigen::VectorXd& x_raw, const std::vector<int>& S,
                                     const std::vector<FeatureDomain>& domains,
                                     const NormalizationRecord& record,
                                     const GenerationConfig& config) {
    config.validate();
    if (S.empty()) throw std::invalid_argument("generate_contrastive: S is empty");
    for (int j : S)
        if (j < 0 || j >= net.num_inputs())
            throw std::invalid_argument("generate_contrastive: feature index out of range");
    if (x_norm.size() != net.num_inputs() || x_raw.size() != net.num_inputs())
        throw ShapeError("generate_contrastive: feature count mismatch");

    const int C = predict(net, x_norm);
    const int v = contrastive_class(net, x_norm);

    // f_C and its gradient anchored at the original sample by default;
    // --anchor current re-evaluates them at the iterate.
    const double f_C0 = forward(net, x_norm)(C);
    const Eigen::VectorXd grad_C0 = class_gradient(net, x_norm, C);

    // Normalized-space bounds of the raw domain box.
    Eigen::VectorXd lo = x_norm, hi = x_norm;
    for (int j : S) {
        lo(j) = record.to_normalized(j, domains[static_cast<std::size_t>(j)].min);
        hi(j) = record.to_normalized(j, domains[static_cast<std::size_t>(j)].max);
    }

    GenerateOutcome out;
    out.target_class = v;
    out.x_tilde_norm = x_norm;
    out.x_tilde_raw = x_raw;
    out.new_class = C;

    // Steps accumulate in an unrounded shadow iterate; the emitted sample
    // is its domain projection, so integer features cannot stall progress.
    Eigen::VectorXd shadow = x_norm;
    for (int iter = 1; iter <= config.steps; ++iter) {
        const Eigen::VectorXd p = forward(net, shadow);
        const double f_v = p(v);
        const double f_C = config.anchor_original ? f_C0 : p(C);
        const Eigen::VectorXd grad_v = class_gradient(net, shadow, v);
        const Eigen::VectorXd grad_C =
            config.anchor_original ? grad_C0 : class_gradient(net, shadow, C);

        const Eigen::VectorXd dg = grad_v - grad_C;
        const double norm = dg.norm();
        if (norm < kDegenerateNorm) {
            out.iterations = iter - 1;
            return out; // geometry collapsed; report the attempt as failed
        }
        const Eigen::VectorXd r =
            (config.overshoot * std::abs(f_v - f_C) / (norm * norm) + kMinStep / norm) * dg;

        for (int j : S) {
            shadow(j) = std::clamp(shadow(j) + r(j), lo(j), hi(j));
            const double raw =
                project_domain(record.to_raw(j, shadow(j)), domains[static_cast<std::size_t>(j)]);
            out.x_tilde_raw(j) = raw;
            out.x_tilde_norm(j) = record.to_normalized(j, raw);
        }

        const int now = predict(net, out.x_tilde_norm);
        out.iterations = iter;
        if (now != C) {
            out.new_class = now;
            out.success = true;
            return out;
        }
    }
    return out;
}

ContrastiveResult grace(const GraceContext& ctx, const Eigen::VectorXd& x_raw,
                        const GenerationConfig& config) {
    config.validate();
    if (ctx.net == nullptr || ctx.train_norm == nullptr || ctx.domains == nullptr ||
        ctx.record == nullptr || ctx.su == nullptr)
        throw ConfigError("grace: incomplete context");

    ContrastiveResult result;
    result.x_raw = project_domain(x_raw, *ctx.domains);
    result.x_norm = ctx.record->to_normalized(result.x_raw);
    result.x_tilde_raw = result.x_raw;
    result.x_tilde_norm = result.x_norm;
    result.original_class = predict(*ctx.net, result.x_norm);
    result.new_class = result.original_class;

    RankedFeatures ranked =
        rank_features(*ctx.net, result.x_norm, config.mode, *ctx.train_norm, config.q);
    result.ranking_fallback = ranked.fallback;
    const std::vector<int> filtered = entropy_filter(ranked.order, config.gamma, *ctx.su);

    const int k_max = std::min<int>(config.K, static_cast<int>(filtered.size()));
    if (k_max == 0) {
        result.k_used = 0;
        return result;
    }

    for (int k = 1; k <= k_max; ++k) {
        const std::vector<int> S(filtered.begin(), filtered.begin() + k);
        GenerateOutcome outcome;
        try {
            outcome = generate_contrastive(*ctx.net, result.x_norm, result.x_raw, S,
                                           *ctx.domains, *ctx.record, config);
        } catch (const GenerationError&) {
            // No contrastive class at x; enlarging S cannot help.
            result.S.assign(filtered.begin(), filtered.begin() + k_max);
            result.k_used = k_max;
            return result;
        }
        result.S = S;
        result.k_used = k;
        result.target_class = outcome.target_class;
        result.x_tilde_norm = outcome.x_tilde_norm;
        result.x_tilde_raw = outcome.x_tilde_raw;
        result.new_class = outcome.new_class;
        result.iterations = outcome.iterations;
        if (outcome.success) {
            result.success = true;
            return result;
        }
    }
    return result;
}

} // namespace grace
