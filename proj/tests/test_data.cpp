#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "grace/dataset.hpp"
#include "grace/model_io.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace grace;
using testutil::TempDir;
using testutil::write_file;

TEST_SUITE("data_io") {

TEST_CASE("CSV loads with trimming and first-appearance label ids") {
    TempDir dir("csv");
    write_file(dir.file("d.csv"),
               "a, b ,label\r\n"
               "1.5, 2 ,yes\n"
               "\n"
               " 0.25,-3,no\n"
               "2.5,4,yes\n");
    Dataset d = load_csv(dir.file("d.csv"), "label");
    CHECK(d.name == "d");
    REQUIRE(d.feature_names == std::vector<std::string>{"a", "b"});
    REQUIRE(d.label_names == std::vector<std::string>{"yes", "no"});
    REQUIRE(d.num_rows() == 3);
    CHECK(d.X(0, 0) == 1.5);
    CHECK(d.X(1, 1) == -3.0);
    CHECK(d.y(0) == 0);
    CHECK(d.y(1) == 1);
    CHECK(d.y(2) == 0);
}

TEST_CASE("label column may sit anywhere") {
    TempDir dir("csv");
    write_file(dir.file("d.csv"), "label,a,b\nx,1,2\ny,3,4\n");
    Dataset d = load_csv(dir.file("d.csv"), "label");
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(d.X(1, 0) == 3.0);
}

TEST_CASE("CSV failure modes raise DataError") {
    TempDir dir("csv");
    CHECK_THROWS_AS(load_csv(dir.file("absent.csv"), "y"), DataError);

    write_file(dir.file("empty.csv"), "");
    CHECK_THROWS_AS(load_csv(dir.file("empty.csv"), "y"), DataError);

    write_file(dir.file("headonly.csv"), "a,b,y\n");
    CHECK_THROWS_AS(load_csv(dir.file("headonly.csv"), "y"), DataError);

    write_file(dir.file("nolabel.csv"), "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(dir.file("nolabel.csv"), "y"), DataError);

    write_file(dir.file("ragged.csv"), "a,b,y\n1,2,x\n1,x\n");
    CHECK_THROWS_AS(load_csv(dir.file("ragged.csv"), "y"), DataError);

    write_file(dir.file("text.csv"), "a,b,y\n1,hello,x\n");
    CHECK_THROWS_AS(load_csv(dir.file("text.csv"), "y"), DataError);

    write_file(dir.file("gap.csv"), "a,b,y\n1,,x\n");
    CHECK_THROWS_AS(load_csv(dir.file("gap.csv"), "y"), DataError);

    write_file(dir.file("nolab.csv"), "a,b,y\n1,2,\n");
    CHECK_THROWS_AS(load_csv(dir.file("nolab.csv"), "y"), DataError);

    write_file(dir.file("frac.csv"), "a,b,y\n1,2.5,x\n");
    CHECK_THROWS_AS(load_csv(dir.file("frac.csv"), "y", {{"b", DType::Integer}}), DataError);
    CHECK_NOTHROW(load_csv(dir.file("frac.csv"), "y", {{"a", DType::Integer}}));
    CHECK_THROWS_AS(load_csv(dir.file("frac.csv"), "y", {{"zz", DType::Integer}}), DataError);
}

TEST_CASE("manifest resolves the csv path relative to itself") {
    TempDir dir("manifest");
    write_file(dir.file("d.csv"), "a,b,y\n1,2,p\n3,4.5,q\n");
    write_file(dir.file("d.json"), R"({
      "name": "renamed",
      "csv": "d.csv",
      "label_column": "y",
      "dtypes": {"a": "int", "b": "real"},
      "domains": {"a": {"min": 0, "max": 9, "dtype": "int"}}
    })");
    DatasetManifest manifest = load_manifest(dir.file("d.json"));
    CHECK(manifest.name == "renamed");
    CHECK(manifest.dtype_hints.at("a") == DType::Integer);
    CHECK(manifest.dtype_hints.at("b") == DType::Real);

    Dataset d = load_dataset(manifest);
    CHECK(d.name == "renamed");
    CHECK(d.num_rows() == 2);

    std::vector<FeatureDomain> domains = resolve_domains(d, manifest);
    CHECK(domains[0].min == 0.0);
    CHECK(domains[0].max == 9.0);
    CHECK(domains[0].dtype == DType::Integer);
    CHECK(domains[1].min == 2.0);
    CHECK(domains[1].max == 4.5);
    CHECK(domains[1].dtype == DType::Real);
}

TEST_CASE("manifest failure modes") {
    TempDir dir("manifest");
    CHECK_THROWS_AS(load_manifest(dir.file("absent.json")), DataError);

    write_file(dir.file("broken.json"), "{not json");
    CHECK_THROWS_AS(load_manifest(dir.file("broken.json")), DataError);

    write_file(dir.file("partial.json"), R"({"csv": "d.csv"})");
    CHECK_THROWS_AS(load_manifest(dir.file("partial.json")), DataError);

    write_file(dir.file("dtype.json"),
               R"({"csv": "d.csv", "label_column": "y", "dtypes": {"a": "float32"}})");
    CHECK_THROWS_AS(load_manifest(dir.file("dtype.json")), ConfigError);

    write_file(dir.file("minmax.json"),
               R"({"csv": "d.csv", "label_column": "y",
                   "domains": {"a": {"min": 9, "max": 0}}})");
    CHECK_THROWS_AS(load_manifest(dir.file("minmax.json")), DataError);

    write_file(dir.file("d.csv"), "a,y\n1,p\n2,q\n");
    write_file(dir.file("ghost.json"),
               R"({"csv": "d.csv", "label_column": "y",
                   "domains": {"zz": {"min": 0, "max": 1}}})");
    CHECK_THROWS_AS(load_dataset(load_manifest(dir.file("ghost.json"))), DataError);
}

TEST_CASE("split partitions the rows exactly and deterministically") {
    Dataset d = oracle::make_blobs(3, 60, 2);
    Splits s = split(d, SplitRatios{}, 17);
    CHECK(s.train.num_rows() == 96);
    CHECK(s.val.num_rows() == 12);
    CHECK(s.test.num_rows() == 12);
    CHECK(s.train.label_names == d.label_names);

    // every original row appears exactly once across the three parts
    auto key = [](const Dataset& part, Eigen::Index i) {
        std::string k;
        for (Eigen::Index j = 0; j < part.num_features(); ++j)
            k += std::to_string(part.X(i, j)) + "|";
        return k + std::to_string(part.y(i));
    };
    std::multiset<std::string> original, recombined;
    for (Eigen::Index i = 0; i < d.num_rows(); ++i) original.insert(key(d, i));
    for (const Dataset* part : {&s.train, &s.val, &s.test})
        for (Eigen::Index i = 0; i < part->num_rows(); ++i)
            recombined.insert(key(*part, i));
    CHECK(original == recombined);

    Splits again = split(d, SplitRatios{}, 17);
    CHECK((again.train.X.array() == s.train.X.array()).all());
    Splits other = split(d, SplitRatios{}, 18);
    CHECK((other.train.X.array() != s.train.X.array()).any());
}

TEST_CASE("split rejects bad ratios and too-small datasets") {
    Dataset d = oracle::make_blobs(3, 30, 2);
    CHECK_THROWS_AS(split(d, SplitRatios{0.9, 0.2, 0.1}, 0), ConfigError);
    CHECK_THROWS_AS(split(d, SplitRatios{0.8, -0.1, 0.3}, 0), ConfigError);

    Dataset tiny = oracle::make_blobs(3, 2, 2); // 4 rows: test part rounds to 0
    CHECK_THROWS_AS(split(tiny, SplitRatios{}, 0), DataError);
}

TEST_CASE("domains come from the training split only") {
    Dataset d = oracle::make_dataset("t", {"a", "b"}, {"x", "y"},
                                     {{1.0, 0.5}, {4.0, 2.5}, {2.0, 1.0}}, {0, 1, 0});
    std::vector<FeatureDomain> domains = infer_domains(d);
    CHECK(domains[0].name == "a");
    CHECK(domains[0].min == 1.0);
    CHECK(domains[0].max == 4.0);
    CHECK(domains[0].dtype == DType::Integer); // every value is whole
    CHECK(domains[1].dtype == DType::Real);
    CHECK(domains[1].min == 0.5);
    CHECK(domains[1].max == 2.5);
}

TEST_CASE("normalization maps train to [0,1] and round-trips") {
    Dataset d = oracle::make_dataset("t", {"a", "b", "const"}, {"x", "y"},
                                     {{2.0, -1.0, 7.0}, {6.0, 3.0, 7.0}, {4.0, 1.0, 7.0}},
                                     {0, 1, 0});
    auto [norm, record] = normalize(d);
    CHECK(norm.X.minCoeff() >= 0.0);
    CHECK(norm.X.maxCoeff() <= 1.0);
    CHECK(norm.X(0, 0) == 0.0);
    CHECK(norm.X(1, 0) == 1.0);
    CHECK(norm.X(2, 0) == doctest::Approx(0.5));
    CHECK(norm.X(0, 2) == 0.0); // constant column pins to 0
    CHECK(norm.X(1, 2) == 0.0);

    for (Eigen::Index i = 0; i < d.num_rows(); ++i) {
        Eigen::VectorXd back = record.to_raw(norm.X.row(i).transpose());
        for (Eigen::Index j = 0; j < 2; ++j)
            CHECK(back(j) == doctest::Approx(d.X(i, j)).epsilon(1e-12));
        CHECK(back(2) == 7.0); // constant column recovers its pinned value
    }

    // out-of-range values under a fixed record extrapolate linearly
    CHECK(record.to_normalized(0, 8.0) == doctest::Approx(1.5));
    CHECK(record.to_raw(0, -0.25) == doctest::Approx(1.0));

    Dataset wrong = oracle::make_dataset("w", {"a"}, {"x"}, {{1.0}}, {0});
    CHECK_THROWS_AS(apply_normalization(wrong, record), ShapeError);
}

TEST_CASE("apply_normalization reuses the captured record") {
    Dataset train = oracle::make_dataset("t", {"a"}, {"x", "y"}, {{0.0}, {10.0}}, {0, 1});
    auto [norm, record] = normalize(train);
    (void)norm;
    Dataset test = oracle::make_dataset("t", {"a"}, {"x", "y"}, {{5.0}, {20.0}}, {0, 1});
    Dataset scaled = apply_normalization(test, record);
    CHECK(scaled.X(0, 0) == doctest::Approx(0.5));
    CHECK(scaled.X(1, 0) == doctest::Approx(2.0)); // beyond the train max
    CHECK(scaled.normalization.has_value());
}

TEST_CASE("MDL discretization splits a cleanly separated column once") {
    std::vector<double> values{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
    DiscretizedColumn col = mdl_discretize(values, labels, 2);
    REQUIRE(col.cut_points.size() == 1);
    CHECK(col.cut_points[0] == doctest::Approx(4.5));
    CHECK(col.codes == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});
}

TEST_CASE("MDL rejects an alternating checkerboard") {
    std::vector<double> values, labels_d;
    std::vector<int> labels;
    for (int i = 0; i < 32; ++i) {
        values.push_back(i);
        labels.push_back(i % 2);
    }
    (void)labels_d;
    DiscretizedColumn col = mdl_discretize(values, labels, 2);
    CHECK(col.cut_points.empty());
    CHECK(std::all_of(col.codes.begin(), col.codes.end(), [](int c) { return c == 0; }));
}

TEST_CASE("MDL recurses into both halves when each is separable") {
    // three label bands over an increasing column
    std::vector<double> values;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        values.push_back(i);
        labels.push_back(i / 10);
    }
    DiscretizedColumn col = mdl_discretize(values, labels, 3);
    REQUIRE(col.cut_points.size() == 2);
    CHECK(col.cut_points[0] == doctest::Approx(9.5));
    CHECK(col.cut_points[1] == doctest::Approx(19.5));
    for (int i = 0; i < 30; ++i) CHECK(col.codes[static_cast<std::size_t>(i)] == i / 10);
}

TEST_CASE("MDL codes are monotone in the raw value regardless of row order") {
    std::mt19937_64 rng(5);
    std::vector<double> values;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        values.push_back(static_cast<double>(i % 10) + (i >= 20 ? 100.0 : 0.0));
        labels.push_back(i >= 20 ? 1 : 0);
    }
    std::vector<std::size_t> perm(values.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled_v(values.size());
    std::vector<int> shuffled_l(values.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled_v[i] = values[perm[i]];
        shuffled_l[i] = labels[perm[i]];
    }
    DiscretizedColumn a = mdl_discretize(values, labels, 2);
    DiscretizedColumn b = mdl_discretize(shuffled_v, shuffled_l, 2);
    CHECK(a.cut_points == b.cut_points);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(b.codes[i] == a.codes[perm[i]]);
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        if (values[i] <= values[i + 1]) CHECK(a.codes[i] <= a.codes[i + 1]);
}

TEST_CASE("MDL handles degenerate columns and bad input") {
    DiscretizedColumn constant = mdl_discretize({3, 3, 3, 3}, {0, 1, 0, 1}, 2);
    CHECK(constant.cut_points.empty());
    CHECK(constant.codes == std::vector<int>{0, 0, 0, 0});

    CHECK_THROWS_AS(mdl_discretize({}, {}, 2), std::invalid_argument);
    CHECK_THROWS_AS(mdl_discretize({1, 2}, {0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(mdl_discretize({1, 2}, {0, 5}, 2), std::invalid_argument);
}

TEST_CASE("model save/load round-trips every parameter bit-exactly") {
    TempDir dir("model");
    TrainedModel model;
    model.net = init_network({4, 9, 3}, 123);
    model.class_labels = {"low", "mid", "high"};
    model.normalization.min = (Eigen::VectorXd(4) << 0, -1, 2, 0.5).finished();
    model.normalization.max = (Eigen::VectorXd(4) << 1, 1, 9, 0.5).finished();

    const std::string path = dir.file("m.json");
    save_model(model, path);
    TrainedModel back = load_model(path);

    CHECK(back.class_labels == model.class_labels);
    CHECK(back.net.layer_dims == model.net.layer_dims);
    for (int l = 0; l < model.net.num_layers(); ++l) {
        CHECK((back.net.weights[static_cast<std::size_t>(l)].array() ==
               model.net.weights[static_cast<std::size_t>(l)].array())
                  .all());
        CHECK((back.net.biases[static_cast<std::size_t>(l)].array() ==
               model.net.biases[static_cast<std::size_t>(l)].array())
                  .all());
    }
    CHECK((back.normalization.min.array() == model.normalization.min.array()).all());
    CHECK((back.normalization.max.array() == model.normalization.max.array()).all());
}

TEST_CASE("model loader rejects malformed files") {
    TempDir dir("model");
    CHECK_THROWS_AS(load_model(dir.file("absent.json")), DataError);

    write_file(dir.file("garbage.json"), "not json");
    CHECK_THROWS_AS(load_model(dir.file("garbage.json")), DataError);

    write_file(dir.file("fields.json"), R"({"format_version": 1})");
    CHECK_THROWS_AS(load_model(dir.file("fields.json")), DataError);

    TrainedModel model;
    model.net = init_network({2, 2}, 0);
    model.class_labels = {"a", "b"};
    model.normalization.min = Eigen::VectorXd::Zero(2);
    model.normalization.max = Eigen::VectorXd::Ones(2);
    save_model(model, dir.file("ok.json"));
    std::string text = testutil::read_file(dir.file("ok.json"));
    const std::string needle = "\"format_version\": 1";
    text.replace(text.find(needle), needle.size(), "\"format_version\": 99");
    write_file(dir.file("futur.json"), text);
    CHECK_THROWS_AS(load_model(dir.file("futur.json")), DataError);
}

} // TEST_SUITE
