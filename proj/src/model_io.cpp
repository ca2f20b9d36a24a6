#include "grace/model_io.hpp"

#include <fstream>

#include <json.hpp>

namespace grace {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

} // namespace

void save_model(const TrainedModel& model, const std::string& path) {
    model.net.check_shapes();
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["layer_dims"] = model.net.layer_dims;
    doc["class_labels"] = model.class_labels;

    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (int l = 0; l < model.net.num_layers(); ++l) {
        const Eigen::MatrixXd& w = model.net.weights[l];
        nlohmann::json flat = nlohmann::json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
        weights.push_back(std::move(flat));
        biases.push_back(vector_to_json(model.net.biases[l]));
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
    doc["normalization"] = {{"min", vector_to_json(model.normalization.min)},
                            {"max", vector_to_json(model.normalization.max)}};

    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw DataError("failed writing model file '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path + "' is not valid JSON: " + e.what());
    }

    try {
        if (doc.at("format_version").get<int>() != kFormatVersion)
            throw DataError("model file '" + path + "' has unsupported format_version");

        TrainedModel model;
        model.net.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
        model.class_labels = doc.at("class_labels").get<std::vector<std::string>>();

        const auto& weights = doc.at("weights");
        const auto& biases = doc.at("biases");
        if (model.net.layer_dims.size() < 2 ||
            weights.size() != model.net.layer_dims.size() - 1 ||
            biases.size() != weights.size())
            throw DataError("model file '" + path + "' has inconsistent layer counts");

        for (std::size_t l = 0; l + 1 < model.net.layer_dims.size(); ++l) {
            const auto rows = static_cast<Eigen::Index>(model.net.layer_dims[l + 1]);
            const auto cols = static_cast<Eigen::Index>(model.net.layer_dims[l]);
            const auto& flat = weights[l];
            if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
                throw DataError("model file '" + path + "' has a malformed weight array");
            Eigen::MatrixXd w(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    w(r, c) = flat[static_cast<std::size_t>(r * cols + c)].get<double>();
            model.net.weights.push_back(std::move(w));
            model.net.biases.push_back(vector_from_json(biases[l]));
        }
        model.net.check_shapes();

        const auto& norm = doc.at("normalization");
        model.normalization.min = vector_from_json(norm.at("min"));
        model.normalization.max = vector_from_json(norm.at("max"));
        if (model.normalization.min.size() != model.net.num_inputs() ||
            model.normalization.max.size() != model.net.num_inputs())
            throw DataError("model file '" + path + "' normalization does not match inputs");
        if (static_cast<int>(model.class_labels.size()) != model.net.num_classes())
            throw DataError("model file '" + path + "' class labels do not match outputs");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path + "' is missing fields: " + std::string(e.what()));
    }
}

} // namespace grace
