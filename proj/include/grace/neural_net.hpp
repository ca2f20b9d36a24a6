#ifndef GRACE_NEURAL_NET_HPP
#define GRACE_NEURAL_NET_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "grace/errors.hpp"

namespace grace {

/// Dense feed-forward classifier: ReLU hidden layers, softmax output.
/// weights[l] has shape layer_dims[l+1] x layer_dims[l]; biases[l] matches
/// the layer's output width.
struct NeuralNet {
    std::vector<int> layer_dims;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int num_inputs() const { return layer_dims.front(); }
    int num_classes() const { return layer_dims.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }

    // Throws ShapeError if the weight/bias shapes do not chain with layer_dims.
    void check_shapes() const;
};

struct TrainConfig {
    std::array<int, 2> hidden_sizes{15, 7};
    int batch_size = 512;
    double learning_rate = 1e-3;
    int patience = 3;
    int max_epochs = 500;
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

/// Softmax class probabilities for a single input.
Eigen::VectorXd forward(const NeuralNet& net, const Eigen::VectorXd& x);

/// Row-per-sample batch version of forward().
Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& X);

/// argmax of forward(); ties resolve to the smallest class index.
int predict(const NeuralNet& net, const Eigen::VectorXd& x);
Eigen::VectorXi predict_batch(const NeuralNet& net, const Eigen::MatrixXd& X);

/// d f_cls / d x, the input gradient of one softmax output.
Eigen::VectorXd class_gradient(const NeuralNet& net, const Eigen::VectorXd& x, int cls);

/// Glorot-uniform weights, constant 0.01 biases, layout fixed by the seed.
NeuralNet init_network(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Adam first/second moment buffers, one slot per parameter tensor.
struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step_count = 0;

    explicit AdamState(const NeuralNet& net);
};

/// One Adam update on a single batch (beta1=0.9, beta2=0.999, eps=1e-8).
/// Returns the batch cross-entropy before the update.
double adam_step(NeuralNet& net, AdamState& state, const Eigen::MatrixXd& X,
                 const Eigen::VectorXi& y, double learning_rate);

/// Minibatch Adam with early stopping on validation loss; returns the
/// snapshot with the best validation loss seen.
NeuralNet train(const Eigen::MatrixXd& train_X, const Eigen::VectorXi& train_y,
                const Eigen::MatrixXd& val_X, const Eigen::VectorXi& val_y,
                int num_classes, const TrainConfig& config);

double cross_entropy(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y);
double accuracy(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y);
double macro_f1(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y);

} // namespace grace

#endif
