#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "grace/metrics.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

using namespace grace;
using testpipe::contrast_net;
using testpipe::Pipeline;
using testpipe::unit_square_train;

namespace {

// Minimal result with the fields the aggregate metrics read.
ContrastiveResult record(const Eigen::VectorXd& x_norm, const Eigen::VectorXd& xt_norm,
                         const Eigen::VectorXd& xt_raw, std::vector<int> S, int original,
                         int claimed) {
    ContrastiveResult r;
    r.x_norm = x_norm;
    r.x_raw = x_norm;
    r.x_tilde_norm = xt_norm;
    r.x_tilde_raw = xt_raw;
    r.S = std::move(S);
    r.original_class = original;
    r.new_class = claimed;
    r.success = claimed != original;
    return r;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("method names round-trip") {
    for (Method m : {Method::GraceGradient, Method::GraceLocal, Method::DeepFool,
                     Method::NearestCT})
        CHECK(parse_method(method_name(m)) == m);
    CHECK(method_name(Method::GraceGradient) == "grace-gradient");
    CHECK_THROWS_AS(parse_method("lime"), ConfigError);
}

TEST_CASE("fidelity replays the claimed flip through the model") {
    NeuralNet net = contrast_net((Eigen::VectorXd(1) << 10.0).finished(), -5.0);
    Eigen::VectorXd low = (Eigen::VectorXd(1) << 0.1).finished();
    Eigen::VectorXd high = (Eigen::VectorXd(1) << 0.9).finished();

    std::vector<ContrastiveResult> results;
    results.push_back(record(low, high, high, {0}, 0, 1));  // genuine flip
    results.push_back(record(low, low, low, {0}, 0, 0));    // no flip claimed
    results.push_back(record(low, low, low, {0}, 0, 1));    // claim fails the replay
    results.push_back(record(high, low, low, {0}, 1, 0));   // genuine flip downward
    CHECK(fidelity_metric(results, net) == doctest::Approx(0.5));
    CHECK_THROWS_AS(fidelity_metric({}, net), std::invalid_argument);
}

TEST_CASE("avg_num_feats counts every record, failed or not") {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    std::vector<ContrastiveResult> results;
    results.push_back(record(x, x, x, {0, 1}, 0, 1));
    results.push_back(record(x, x, x, {2}, 0, 0));
    results.push_back(record(x, x, x, {}, 0, 0));
    CHECK(avg_num_feats(results) == doctest::Approx(1.0));
    CHECK_THROWS_AS(avg_num_feats({}), std::invalid_argument);
}

TEST_CASE("info gain under the literal and off-diagonal redundancy forms") {
    // codes: feature 1 copies feature 0; feature 2 is exactly independent
    std::vector<int> a, b;
    for (int i = 0; i < 40; ++i) {
        a.push_back(i % 2);
        b.push_back((i / 2) % 2);
    }
    SUCache su({a, a, b});
    REQUIRE(su.su(0, 1) == doctest::Approx(1.0));
    REQUIRE(su.su(0, 2) == doctest::Approx(0.0));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    std::vector<ContrastiveResult> dup{record(x, x, x, {0, 1}, 0, 1)};
    CHECK(info_gain_metric(dup, su) == doctest::Approx(0.0));          // (1+1+1+1)/4
    CHECK(info_gain_metric(dup, su, true) == doctest::Approx(0.0));    // (1+1)/2

    std::vector<ContrastiveResult> indep{record(x, x, x, {0, 2}, 0, 1)};
    CHECK(info_gain_metric(indep, su) == doctest::Approx(0.5));        // diagonal half
    CHECK(info_gain_metric(indep, su, true) == doctest::Approx(1.0));  // no redundancy

    // a single feature is all diagonal: fully redundant literally, clean offdiag
    std::vector<ContrastiveResult> solo{record(x, x, x, {2}, 0, 1)};
    CHECK(info_gain_metric(solo, su) == doctest::Approx(0.0));
    CHECK(info_gain_metric(solo, su, true) == doctest::Approx(1.0));

    // an empty S contributes zero redundancy
    std::vector<ContrastiveResult> none{record(x, x, x, {}, 0, 0)};
    CHECK(info_gain_metric(none, su) == doctest::Approx(1.0));

    // averaging across mixed records
    std::vector<ContrastiveResult> both{dup[0], indep[0]};
    CHECK(info_gain_metric(both, su) == doctest::Approx(1.0 - (1.0 + 0.5) / 2.0));
}

TEST_CASE("in_domain checks bounds inclusively and integer typing") {
    std::vector<FeatureDomain> domains{{"i", DType::Integer, 0.0, 10.0, {}},
                                       {"r", DType::Real, -1.0, 1.0, {}}};
    CHECK(in_domain((Eigen::VectorXd(2) << 0.0, -1.0).finished(), domains));
    CHECK(in_domain((Eigen::VectorXd(2) << 10.0, 1.0).finished(), domains));
    CHECK_FALSE(in_domain((Eigen::VectorXd(2) << 10.5, 0.0).finished(), domains));
    CHECK_FALSE(in_domain((Eigen::VectorXd(2) << 3.5, 0.0).finished(), domains));
    CHECK_FALSE(in_domain((Eigen::VectorXd(2) << 3.0, 1.2).finished(), domains));
    CHECK_THROWS_AS(in_domain(Eigen::VectorXd::Zero(1), domains), ShapeError);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    std::vector<ContrastiveResult> results{
        record(x, x, (Eigen::VectorXd(2) << 3.0, 0.5).finished(), {0}, 0, 1),
        record(x, x, (Eigen::VectorXd(2) << 3.7, 0.5).finished(), {0}, 0, 1)};
    CHECK(domain_rate(results, domains) == doctest::Approx(0.5));
}

TEST_CASE("influence composes the other four metrics") {
    MetricsReport report;
    report.fidelity = 0.8;
    report.info_gain = 0.75;
    report.domain_rate = 0.9;
    report.avg_num_feats = 2.0;
    CHECK(influence_metric(report) == doctest::Approx(0.8 * 0.75 * 0.9 / 2.0));

    report.avg_num_feats = 0.0;
    CHECK_THROWS_AS(influence_metric(report), std::invalid_argument);
}

TEST_CASE("compute_metrics wires the report together") {
    Pipeline p(unit_square_train(),
               contrast_net((Eigen::VectorXd(2) << 6.0, 0.0).finished(), -3.0));
    GenerationConfig config;
    std::vector<ContrastiveResult> results =
        run_method(Method::GraceGradient, p.ctx, p.train_raw, config);
    MetricsReport report =
        compute_metrics("grace-gradient", results, p.net, p.su, p.domains);
    CHECK(report.n == 6);
    CHECK(report.method == "grace-gradient");
    CHECK(report.fidelity == doctest::Approx(1.0));
    CHECK(report.avg_num_feats == doctest::Approx(1.0));
    CHECK(report.domain_rate == doctest::Approx(1.0));
    CHECK(report.info_gain_star == doctest::Approx(report.info_gain * report.fidelity));
    CHECK(report.influence ==
          doctest::Approx(report.fidelity * report.info_gain * report.domain_rate /
                          report.avg_num_feats));

    // all-failure records leave S empty so influence degrades to zero
    Pipeline flat(unit_square_train(), contrast_net(Eigen::VectorXd::Zero(2)));
    std::vector<ContrastiveResult> failures =
        run_method(Method::NearestCT, flat.ctx, flat.train_raw, config);
    MetricsReport zero = compute_metrics("nearestct", failures, flat.net, flat.su,
                                         flat.domains);
    CHECK(zero.fidelity == 0.0);
    CHECK(zero.avg_num_feats == 0.0);
    CHECK(zero.influence == 0.0);
}

TEST_CASE("nearestct returns the closest differently-predicted training row") {
    // class 1 iff a > 0.5; normalization is identity on these rows
    Dataset train = oracle::make_dataset(
        "t", {"a", "b"}, {"n", "p"},
        {{0.0, 0.0}, {1.0, 1.0}, {0.3, 0.4}, {0.7, 0.4}, {0.8, 0.1}, {0.45, 0.4}},
        {0, 1, 0, 1, 1, 0});
    Pipeline p(train, contrast_net((Eigen::VectorXd(2) << 8.0, 0.0).finished(), -4.0));

    Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.4, 0.4).finished();
    REQUIRE(predict(p.net, p.record.to_normalized(x)) == 0);
    ContrastiveResult r = baseline_nearest_ct(p.ctx, x);

    // brute force over differently-predicted rows in normalized space
    Eigen::Index best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < train.num_rows(); ++i) {
        Eigen::VectorXd row_norm = p.train_norm.X.row(i).transpose();
        if (predict(p.net, row_norm) == 0) continue;
        const double d = (row_norm - p.record.to_normalized(x)).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    REQUIRE(best == 3); // (0.7, 0.4)
    CHECK(r.success);
    CHECK(r.new_class == 1);
    CHECK((r.x_tilde_raw.array() == train.X.row(best).transpose().array()).all());
    CHECK(r.S == std::vector<int>{0}); // only feature a differs from (0.4, 0.4)
    CHECK(r.k_used == 1);

    // from (0.4, 0.9) the nearest is still row 3 and both features differ
    Eigen::VectorXd x2 = (Eigen::VectorXd(2) << 0.4, 0.9).finished();
    ContrastiveResult r2 = baseline_nearest_ct(p.ctx, x2);
    CHECK(r2.S == std::vector<int>{0, 1});
    CHECK(r2.k_used == 2);
}

TEST_CASE("nearestct ties resolve to the earlier training row") {
    Dataset train = oracle::make_dataset("t", {"a"}, {"n", "p"},
                                         {{0.0}, {0.8}, {0.8}, {0.2}}, {0, 1, 1, 0});
    Pipeline p(train, contrast_net((Eigen::VectorXd(1) << 8.0).finished(), -4.0));
    ContrastiveResult r = baseline_nearest_ct(p.ctx, (Eigen::VectorXd(1) << 0.1).finished());
    CHECK(r.success);
    // rows 1 and 2 are equidistant duplicates; strict < keeps the first
    CHECK(r.x_tilde_raw(0) == 0.8);
}

TEST_CASE("nearestct without a differently-predicted row is a failure record") {
    // flat net predicts class 0 everywhere
    Pipeline p(unit_square_train(), contrast_net(Eigen::VectorXd::Zero(2)));
    CHECK_THROWS_AS(
        baseline_nearest_ct(p.ctx, (Eigen::VectorXd(2) << 0.4, 0.4).finished()),
        GenerationError);

    std::vector<ContrastiveResult> results =
        run_method(Method::NearestCT, p.ctx, p.train_raw, GenerationConfig{});
    REQUIRE(results.size() == 6);
    for (const auto& r : results) {
        CHECK_FALSE(r.success);
        CHECK(r.S.empty());
        CHECK((r.x_tilde_raw.array() == r.x_raw.array()).all());
    }
}

TEST_CASE("deepfool perturbs every feature and ignores the domain box") {
    // integer-only domain; deepfool still lands on fractional values
    Dataset train = oracle::make_dataset(
        "t", {"i", "j"}, {"n", "p"},
        {{0.0, 0.0}, {10.0, 10.0}, {2.0, 3.0}, {8.0, 7.0}, {3.0, 1.0}, {9.0, 9.0}},
        {0, 1, 0, 1, 0, 1});
    Pipeline p(train, contrast_net((Eigen::VectorXd(2) << 3.0, 3.0).finished(), -3.3));
    REQUIRE(p.domains[0].dtype == DType::Integer);

    std::vector<ContrastiveResult> results =
        run_method(Method::DeepFool, p.ctx, p.train_raw, GenerationConfig{});
    REQUIRE(results.size() == 6);
    CHECK(avg_num_feats(results) == doctest::Approx(2.0)); // |S| = M always
    for (const auto& r : results) {
        CHECK(r.S == std::vector<int>{0, 1});
        CHECK(r.k_used == 2);
        if (r.success) CHECK(predict(p.net, r.x_tilde_norm) != r.original_class);
    }
    CHECK(fidelity_metric(results, p.net) == doctest::Approx(1.0));

    // at least one success moved a feature off the integer grid
    bool fractional = false;
    for (const auto& r : results)
        for (Eigen::Index j = 0; j < 2; ++j)
            if (r.x_tilde_raw(j) != std::floor(r.x_tilde_raw(j))) fractional = true;
    CHECK(fractional);

    // the flat net cannot generate at all; the failure record keeps S = all
    Pipeline flat(train, contrast_net(Eigen::VectorXd::Zero(2)));
    std::vector<ContrastiveResult> failures =
        run_method(Method::DeepFool, flat.ctx, flat.train_raw, GenerationConfig{});
    for (const auto& r : failures) {
        CHECK_FALSE(r.success);
        CHECK(r.S == std::vector<int>{0, 1});
    }
    CHECK(avg_num_feats(failures) == doctest::Approx(2.0));
}

TEST_CASE("run_method emits one record per test row in order") {
    Pipeline p(unit_square_train(),
               contrast_net((Eigen::VectorXd(2) << 6.0, 0.0).finished(), -3.0));
    std::vector<ContrastiveResult> results =
        run_method(Method::GraceGradient, p.ctx, p.train_raw, GenerationConfig{});
    REQUIRE(results.size() == static_cast<std::size_t>(p.train_raw.num_rows()));
    for (Eigen::Index i = 0; i < p.train_raw.num_rows(); ++i)
        CHECK((results[static_cast<std::size_t>(i)].x_raw.array() ==
               p.train_raw.X.row(i).transpose().array())
                  .all());
}

} // TEST_SUITE
