#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "grace/dataset.hpp"
#include "grace/explainer.hpp"
#include "grace/generator.hpp"
#include "grace/metrics.hpp"
#include "grace/model_io.hpp"
#include "grace/neural_net.hpp"

namespace {

using namespace grace;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct TrainOpts {
    std::vector<int> hidden{15, 7};
    int batch_size = 512;
    double learning_rate = 1e-3;
    int patience = 3;
    int max_epochs = 500;

    TrainConfig to_config(std::uint64_t seed) const {
        if (hidden.size() != 2) throw ConfigError("--hidden expects exactly two sizes");
        TrainConfig tc;
        tc.hidden_sizes = {hidden[0], hidden[1]};
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.patience = patience;
        tc.max_epochs = max_epochs;
        tc.seed = seed;
        tc.validate();
        return tc;
    }
};

void add_train_opts(CLI::App* cmd, TrainOpts& opts) {
    cmd->add_option("--hidden", opts.hidden, "hidden layer sizes")->expected(2);
    cmd->add_option("--batch", opts.batch_size, "minibatch size");
    cmd->add_option("--lr", opts.learning_rate, "Adam learning rate");
    cmd->add_option("--patience", opts.patience, "early-stopping patience (epochs)");
    cmd->add_option("--epochs", opts.max_epochs, "epoch cap");
}

struct GenOpts {
    int k = 5;
    double gamma = 0.5;
    int steps = 200;
    std::string mode = "gradient";
    std::string anchor = "original";
    int q = 4;

    GenerationConfig to_config() const {
        GenerationConfig cfg;
        cfg.K = k;
        cfg.gamma = gamma;
        cfg.steps = steps;
        if (mode == "gradient")
            cfg.mode = RankMode::Gradient;
        else if (mode == "local")
            cfg.mode = RankMode::Local;
        else
            throw ConfigError("unknown --mode '" + mode + "' (expected gradient or local)");
        if (anchor == "original")
            cfg.anchor_original = true;
        else if (anchor == "current")
            cfg.anchor_original = false;
        else
            throw ConfigError("unknown --anchor '" + anchor + "' (expected original or current)");
        cfg.q = q;
        cfg.validate();
        return cfg;
    }
};

void add_gen_opts(CLI::App* cmd, GenOpts& opts) {
    cmd->add_option("--k", opts.k, "max perturbable features K");
    cmd->add_option("--gamma", opts.gamma, "pairwise SU bound");
    cmd->add_option("--steps", opts.steps, "projection iteration cap");
    cmd->add_option("--mode", opts.mode, "feature ranking mode (gradient|local)");
    cmd->add_option("--anchor", opts.anchor, "f_C evaluation point (original|current)");
    cmd->add_option("--q", opts.q, "neighbors per class for local mode");
}

// Split + domains + scaling shared by explain/evaluate/rank.
struct Prepared {
    Dataset full;
    Splits splits;
    std::vector<FeatureDomain> domains;
    Dataset train_norm;
};

Prepared prepare(const std::string& data_path, std::uint64_t seed,
                 const NormalizationRecord& record) {
    DatasetManifest manifest = load_manifest(data_path);
    Prepared prep{load_dataset(manifest), {}, {}, {}};
    if (prep.full.num_features() != record.min.size())
        throw DataError("dataset has " + std::to_string(prep.full.num_features()) +
                        " features but the model expects " +
                        std::to_string(record.min.size()));
    prep.splits = split(prep.full, SplitRatios{}, seed);
    prep.domains = resolve_domains(prep.splits.train, manifest);
    prep.train_norm = apply_normalization(prep.splits.train, record);
    return prep;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

int cmd_train(const std::string& data_path, std::uint64_t seed, const std::string& out_path,
              const TrainOpts& opts) {
    DatasetManifest manifest = load_manifest(data_path);
    Dataset full = load_dataset(manifest);
    Splits splits = split(full, SplitRatios{}, seed);

    auto [train_norm, record] = normalize(splits.train);
    Dataset val_norm = apply_normalization(splits.val, record);
    Dataset test_norm = apply_normalization(splits.test, record);

    NeuralNet net = train(train_norm.X, train_norm.y, val_norm.X, val_norm.y,
                          full.num_classes(), opts.to_config(seed));
    save_model({net, full.label_names, record}, out_path);

    std::cout << "model written to " << out_path << "\n";
    std::cout << "test_accuracy=" << fmt6(accuracy(net, test_norm.X, test_norm.y)) << "\n";
    std::cout << "macro_f1=" << fmt6(macro_f1(net, test_norm.X, test_norm.y)) << "\n";
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& data_path,
                long long row, std::uint64_t seed, const GenOpts& gen_opts,
                const std::string& templates_path, const std::string& template_id,
                const std::string& degree_name) {
    TrainedModel model = load_model(model_path);
    Prepared prep = prepare(data_path, seed, model.normalization);
    if (row < 0 || row >= prep.full.num_rows())
        throw ConfigError("--row out of range (dataset has " +
                          std::to_string(prep.full.num_rows()) + " rows)");

    SUCache su = SUCache::from_dataset(prep.train_norm);
    GraceContext ctx{&model.net,    &prep.train_norm,     &prep.splits.train,
                     &prep.domains, &model.normalization, &su};
    GenerationConfig cfg = gen_opts.to_config();

    ContrastiveResult result = grace::grace(ctx, prep.full.X.row(row).transpose(), cfg);
    if (result.ranking_fallback)
        std::cerr << "warning: degenerate ranking input, fell back to gradient/index order\n";

    const auto label = [&](int c) {
        return c >= 0 && c < static_cast<int>(model.class_labels.size())
                   ? model.class_labels[static_cast<std::size_t>(c)]
                   : std::string("?");
    };

    nlohmann::json record;
    record["row"] = row;
    record["success"] = result.success;
    record["C"] = label(result.original_class);
    record["v"] = result.target_class >= 0 ? label(result.target_class) : "";
    record["y_tilde"] = label(result.new_class);
    record["iterations"] = result.iterations;
    record["k"] = result.k_used;
    record["S"] = result.S;
    nlohmann::json changed = nlohmann::json::array();
    for (int j : result.S) changed.push_back(prep.full.feature_names[static_cast<std::size_t>(j)]);
    record["S_names"] = changed;
    record["x"] = vector_json(result.x_raw);
    record["x_tilde"] = vector_json(result.x_tilde_raw);

    if (!result.success) {
        std::cout << record.dump(2) << "\n";
        std::cerr << "generation failed: prediction did not flip within the step budget\n";
        return 3;
    }

    TemplateSet templates =
        templates_path.empty() ? builtin_templates() : load_templates(templates_path);
    const TextTemplate& tmpl = template_id.empty() ? choose_template(templates, seed)
                                                   : find_template(templates, template_id);
    Predicate predicate =
        extract_predicate(result.x_raw, result.x_tilde_raw, prep.full.feature_names,
                          label(result.original_class), label(result.new_class), result.S);
    ExplanationText text =
        render_text(predicate, tmpl, {parse_degree(degree_name)}, templates);
    record["influence"] = influence_score(predicate, true, 1.0);
    record["template"] = tmpl.id;
    record["text"] = text.text;

    std::cout << record.dump(2) << "\n";
    std::cout << text.text << "\n";
    return 0;
}

int cmd_evaluate(const std::string& data_path, std::uint64_t seed, const GenOpts& gen_opts,
                 const TrainOpts& train_opts, std::vector<std::string> methods, int runs,
                 const std::string& sweep, const std::string& info_gain_variant,
                 const std::string& out_path) {
    if (runs < 1) throw ConfigError("--runs must be >= 1");
    bool offdiag = false;
    if (info_gain_variant == "offdiag")
        offdiag = true;
    else if (info_gain_variant != "literal")
        throw ConfigError("unknown --info-gain '" + info_gain_variant +
                          "' (expected literal or offdiag)");

    if (methods.empty())
        methods = {"grace-gradient", "grace-local", "deepfool", "nearestct"};
    std::vector<Method> parsed;
    for (const auto& m : methods) parsed.push_back(parse_method(m));

    const GenerationConfig base = gen_opts.to_config();
    std::vector<int> ks{base.K};
    std::vector<double> gammas{base.gamma};
    if (sweep == "k") {
        ks.clear();
        for (int k = 1; k <= 10; ++k) ks.push_back(k);
    } else if (sweep == "gamma") {
        gammas = {1.0, 0.7, 0.5, 0.3};
    } else if (!sweep.empty()) {
        throw ConfigError("unknown --sweep '" + sweep + "' (expected k or gamma)");
    }

    DatasetManifest manifest = load_manifest(data_path);
    Dataset full = load_dataset(manifest);

    // (method, K, gamma) -> accumulated stats across runs
    std::map<std::tuple<std::size_t, int, double>, MetricsReport> totals;
    int test_rows = 0;
    for (int run = 0; run < runs; ++run) {
        const std::uint64_t run_seed = seed + static_cast<std::uint64_t>(run);
        Splits splits = split(full, SplitRatios{}, run_seed);
        std::vector<FeatureDomain> domains = resolve_domains(splits.train, manifest);
        auto [train_norm, record] = normalize(splits.train);
        Dataset val_norm = apply_normalization(splits.val, record);
        NeuralNet net = train(train_norm.X, train_norm.y, val_norm.X, val_norm.y,
                              full.num_classes(), train_opts.to_config(run_seed));
        SUCache su = SUCache::from_dataset(train_norm);
        GraceContext ctx{&net, &train_norm, &splits.train, &domains, &record, &su};
        test_rows = static_cast<int>(splits.test.num_rows());

        for (std::size_t mi = 0; mi < parsed.size(); ++mi) {
            for (int k : ks) {
                for (double gamma : gammas) {
                    GenerationConfig cfg = base;
                    cfg.K = k;
                    cfg.gamma = gamma;
                    auto results = run_method(parsed[mi], ctx, splits.test, cfg);
                    MetricsReport report = compute_metrics(methods[mi], results, net, su,
                                                           domains, offdiag);
                    MetricsReport& total = totals[{mi, k, gamma}];
                    total.method = report.method;
                    total.n = report.n;
                    total.fidelity += report.fidelity;
                    total.avg_num_feats += report.avg_num_feats;
                    total.info_gain += report.info_gain;
                    total.info_gain_star += report.info_gain_star;
                    total.domain_rate += report.domain_rate;
                    total.influence += report.influence;
                }
            }
        }
    }

    std::ostringstream csv;
    csv << "dataset,method,k,gamma,runs,n,fidelity,avg_num_feats,info_gain,"
           "info_gain_star,domain_rate,influence\n";
    for (std::size_t mi = 0; mi < parsed.size(); ++mi) {
        for (int k : ks) {
            for (double gamma : gammas) {
                const MetricsReport& t = totals.at({mi, k, gamma});
                const double r = static_cast<double>(runs);
                csv << full.name << ',' << t.method << ',' << k << ',' << fmt2(gamma) << ','
                    << runs << ',' << test_rows << ',' << fmt6(t.fidelity / r) << ','
                    << fmt6(t.avg_num_feats / r) << ',' << fmt6(t.info_gain / r) << ','
                    << fmt6(t.info_gain_star / r) << ',' << fmt6(t.domain_rate / r) << ','
                    << fmt6(t.influence / r) << "\n";
            }
        }
    }

    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw DataError("cannot write report '" + out_path + "'");
        out << csv.str();
    }
    return 0;
}

int cmd_rank(const std::string& model_path, const std::string& data_path, long long row,
             std::uint64_t seed, const GenOpts& gen_opts, const std::string& dump_su_path) {
    TrainedModel model = load_model(model_path);
    Prepared prep = prepare(data_path, seed, model.normalization);
    if (row < 0 || row >= prep.full.num_rows())
        throw ConfigError("--row out of range (dataset has " +
                          std::to_string(prep.full.num_rows()) + " rows)");

    SUCache su = SUCache::from_dataset(prep.train_norm);
    GenerationConfig cfg = gen_opts.to_config();

    const Eigen::VectorXd x_raw =
        project_domain(prep.full.X.row(row).transpose(), prep.domains);
    const Eigen::VectorXd x_norm = model.normalization.to_normalized(x_raw);
    RankedFeatures ranked =
        rank_features(model.net, x_norm, cfg.mode, prep.train_norm, cfg.q);
    if (ranked.fallback)
        std::cerr << "warning: degenerate ranking input, fell back to gradient/index order\n";

    std::cout << "feature,score\n";
    for (std::size_t i = 0; i < ranked.order.size(); ++i)
        std::cout << prep.full.feature_names[static_cast<std::size_t>(ranked.order[i])] << ','
                  << fmt6(ranked.scores[i]) << "\n";

    std::vector<int> kept = entropy_filter(ranked.order, cfg.gamma, su);
    std::cout << "kept(gamma=" << fmt2(cfg.gamma) << "):";
    for (std::size_t i = 0; i < kept.size(); ++i)
        std::cout << (i == 0 ? " " : ", ")
                  << prep.full.feature_names[static_cast<std::size_t>(kept[i])];
    std::cout << "\n";

    if (!dump_su_path.empty()) {
        std::ofstream out(dump_su_path);
        if (!out) throw DataError("cannot write SU matrix '" + dump_su_path + "'");
        for (std::size_t j = 0; j < prep.full.feature_names.size(); ++j)
            out << (j == 0 ? "" : ",") << prep.full.feature_names[j];
        out << "\n";
        for (int i = 0; i < su.num_features(); ++i) {
            for (int j = 0; j < su.num_features(); ++j)
                out << (j == 0 ? "" : ",") << fmt6(su.su(i, j));
            out << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"contrastive explanations for tabular neural networks"};
    app.require_subcommand(1);

    std::string data_path, model_path, out_path;
    std::uint64_t seed = 0;
    long long row = 0;
    TrainOpts train_opts;
    GenOpts gen_opts;

    CLI::App* c_train = app.add_subcommand("train", "fit a model and write it to disk");
    c_train->add_option("--data", data_path, "dataset manifest")->required();
    c_train->add_option("--seed", seed, "rng seed")->envname("GRACE_SEED")->required();
    c_train->add_option("--out", out_path, "model output path")->required();
    add_train_opts(c_train, train_opts);

    std::string templates_path, template_id, degree_name = "exact";
    CLI::App* c_explain = app.add_subcommand("explain", "explain one prediction");
    c_explain->add_option("--model", model_path, "model file")->required();
    c_explain->add_option("--data", data_path, "dataset manifest")->required();
    c_explain->add_option("--row", row, "dataset row to explain")->required();
    c_explain->add_option("--seed", seed, "split seed (match training)")->envname("GRACE_SEED");
    add_gen_opts(c_explain, gen_opts);
    c_explain->add_option("--templates", templates_path, "template file (JSON)");
    c_explain->add_option("--template", template_id, "template id (default: seeded choice)");
    c_explain->add_option("--degree", degree_name, "obscurity degree (exact|magnitude|relative)");

    std::vector<std::string> methods;
    int runs = 1;
    std::string sweep, info_gain_variant = "literal";
    CLI::App* c_eval = app.add_subcommand("evaluate", "score methods on the test split");
    c_eval->add_option("--data", data_path, "dataset manifest")->required();
    c_eval->add_option("--seed", seed, "rng seed")->envname("GRACE_SEED")->required();
    c_eval->add_option("--methods", methods, "methods to score")->delimiter(',');
    c_eval->add_option("--runs", runs, "retrain/evaluate repetitions");
    c_eval->add_option("--sweep", sweep, "sweep K (k) or gamma");
    c_eval->add_option("--info-gain", info_gain_variant, "info-gain form (literal|offdiag)");
    c_eval->add_option("--out", out_path, "CSV report path (default stdout)");
    add_gen_opts(c_eval, gen_opts);
    add_train_opts(c_eval, train_opts);

    std::string dump_su_path;
    CLI::App* c_rank = app.add_subcommand("rank", "print the feature ranking for one row");
    c_rank->add_option("--model", model_path, "model file")->required();
    c_rank->add_option("--data", data_path, "dataset manifest")->required();
    c_rank->add_option("--row", row, "dataset row")->required();
    c_rank->add_option("--seed", seed, "split seed (match training)")->envname("GRACE_SEED");
    c_rank->add_option("--dump-su", dump_su_path, "write the SU matrix as CSV");
    add_gen_opts(c_rank, gen_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_train))
            return cmd_train(data_path, seed, out_path, train_opts);
        if (app.got_subcommand(c_explain))
            return cmd_explain(model_path, data_path, row, seed, gen_opts, templates_path,
                               template_id, degree_name);
        if (app.got_subcommand(c_eval))
            return cmd_evaluate(data_path, seed, gen_opts, train_opts, methods, runs, sweep,
                                info_gain_variant, out_path);
        if (app.got_subcommand(c_rank))
            return cmd_rank(model_path, data_path, row, seed, gen_opts, dump_su_path);
    } catch (const grace::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const grace::TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const grace::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const grace::GenerationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
