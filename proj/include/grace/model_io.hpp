#pragma once

#include <string>
#include <vector>

#include "grace/dataset.hpp"
#include "grace/neural_net.hpp"

namespace grace {

// Everything needed to serve predictions and explanations: the network,
// the label strings, and the scaling captured at training time.
struct TrainedModel {
    NeuralNet net;
    std::vector<std::string> class_labels;
    NormalizationRecord normalization;
};

// JSON round-trip is value-exact for every weight and bias.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

} // namespace grace
