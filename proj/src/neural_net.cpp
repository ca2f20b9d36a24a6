#include "grace/neural_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace grace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
    Eigen::VectorXd e = shifted.array().exp();
    return e / e.sum();
}

// Pre-activations z[l] and activations a[l] for one input; a.back() is the
// softmax output.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> z;
    std::vector<Eigen::VectorXd> a;
};

ForwardTrace run_forward(const NeuralNet& net, const Eigen::VectorXd& x) {
    ForwardTrace t;
    Eigen::VectorXd cur = x;
    const int L = net.num_layers();
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXd z = net.weights[l] * cur + net.biases[l];
        t.z.push_back(z);
        cur = (l + 1 < L) ? z.cwiseMax(0.0).eval() : softmax(z);
        t.a.push_back(cur);
    }
    return t;
}

// Column-per-sample batch forward up to the logits.
Eigen::MatrixXd batch_logits(const NeuralNet& net, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd cur = X.transpose();
    const int L = net.num_layers();
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (net.weights[l] * cur).colwise() + net.biases[l];
        cur = (l + 1 < L) ? z.cwiseMax(0.0).eval() : std::move(z);
    }
    return cur;
}

struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
};

// Batch cross-entropy and its parameter gradients in one pass.
double loss_and_gradients(const NeuralNet& net, const Eigen::MatrixXd& X,
                          const Eigen::VectorXi& y, Gradients& out) {
    const int L = net.num_layers();
    const auto B = X.rows();

    std::vector<Eigen::MatrixXd> zs(L), as(L);
    Eigen::MatrixXd cur = X.transpose();
    const Eigen::MatrixXd* prev = &cur;
    std::vector<const Eigen::MatrixXd*> inputs(L);
    for (int l = 0; l < L; ++l) {
        inputs[l] = prev;
        zs[l] = (net.weights[l] * (*prev)).colwise() + net.biases[l];
        if (l + 1 < L) {
            as[l] = zs[l].cwiseMax(0.0);
            prev = &as[l];
        }
    }

    // Stable log-softmax loss and softmax probabilities.
    Eigen::MatrixXd& logits = zs[L - 1];
    double loss = 0.0;
    Eigen::MatrixXd probs(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < B; ++i) {
        Eigen::VectorXd col = logits.col(i);
        double zmax = col.maxCoeff();
        Eigen::VectorXd e = (col.array() - zmax).exp();
        double sum = e.sum();
        probs.col(i) = e / sum;
        loss += std::log(sum) + zmax - col(y(i));
    }
    loss /= static_cast<double>(B);

    Eigen::MatrixXd dz = probs;
    for (Eigen::Index i = 0; i < B; ++i) dz(y(i), i) -= 1.0;
    dz /= static_cast<double>(B);

    out.w.resize(L);
    out.b.resize(L);
    for (int l = L - 1; l >= 0; --l) {
        out.w[l] = dz * inputs[l]->transpose();
        out.b[l] = dz.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd da = net.weights[l].transpose() * dz;
            dz = da.cwiseProduct((zs[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

} // namespace

void NeuralNet::check_shapes() const {
    if (layer_dims.size() < 2)
        throw ShapeError("network needs at least input and output dims");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
        throw ShapeError("layer count mismatch between dims and parameters");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l])
            throw ShapeError("weight matrix shape does not chain with layer_dims");
        if (biases[l].size() != layer_dims[l + 1])
            throw ShapeError("bias vector shape does not chain with layer_dims");
    }
}

void TrainConfig::validate() const {
    if (hidden_sizes[0] < 1 || hidden_sizes[1] < 1)
        throw ConfigError("hidden layer sizes must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (patience < 1) throw ConfigError("early-stopping patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
}

Eigen::VectorXd forward(const NeuralNet& net, const Eigen::VectorXd& x) {
    if (x.size() != net.num_inputs())
        throw ShapeError("forward: input has " + std::to_string(x.size()) +
                         " features, network expects " + std::to_string(net.num_inputs()));
    return run_forward(net, x).a.back();
}

Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& X) {
    if (X.cols() != net.num_inputs())
        throw ShapeError("forward_batch: feature count mismatch");
    Eigen::MatrixXd logits = batch_logits(net, X);
    Eigen::MatrixXd out(X.rows(), net.num_classes());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out.row(i) = softmax(logits.col(i)).transpose();
    return out;
}

int predict(const NeuralNet& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd p = forward(net, x);
    int best = 0;
    for (int c = 1; c < p.size(); ++c)
        if (p(c) > p(best)) best = c;
    return best;
}

Eigen::VectorXi predict_batch(const NeuralNet& net, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd logits = batch_logits(net, X);
    Eigen::VectorXi out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < logits.rows(); ++c)
            if (logits(c, i) > logits(best, i)) best = c;
        out(i) = best;
    }
    return out;
}

Eigen::VectorXd class_gradient(const NeuralNet& net, const Eigen::VectorXd& x, int cls) {
    if (cls < 0 || cls >= net.num_classes())
        throw std::invalid_argument("class_gradient: class index out of range");
    if (x.size() != net.num_inputs())
        throw ShapeError("class_gradient: feature count mismatch");

    ForwardTrace t = run_forward(net, x);
    const Eigen::VectorXd& p = t.a.back();
    const int L = net.num_layers();

    // d p_cls / d logits = p_cls * (e_cls - p)
    Eigen::VectorXd dz = -p(cls) * p;
    dz(cls) += p(cls);

    for (int l = L - 1; l > 0; --l) {
        Eigen::VectorXd da = net.weights[l].transpose() * dz;
        dz = da.cwiseProduct((t.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return net.weights[0].transpose() * dz;
}

NeuralNet init_network(const std::vector<int>& layer_dims, std::uint64_t seed) {
    NeuralNet net;
    net.layer_dims = layer_dims;
    std::mt19937_64 rng(splitmix64(seed));
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Constant(fan_out, 0.01));
    }
    net.check_shapes();
    return net;
}

AdamState::AdamState(const NeuralNet& net) {
    for (int l = 0; l < net.num_layers(); ++l) {
        m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
}

double adam_step(NeuralNet& net, AdamState& state, const Eigen::MatrixXd& X,
                 const Eigen::VectorXi& y, double learning_rate) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;

    Gradients g;
    double loss = loss_and_gradients(net, X, y, g);
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss");

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));

    for (int l = 0; l < net.num_layers(); ++l) {
        state.m_w[l] = beta1 * state.m_w[l] + (1.0 - beta1) * g.w[l];
        state.v_w[l] = beta2 * state.v_w[l] + (1.0 - beta2) * g.w[l].cwiseProduct(g.w[l]);
        net.weights[l].array() -= learning_rate * (state.m_w[l].array() / bc1) /
                                  ((state.v_w[l].array() / bc2).sqrt() + eps);

        state.m_b[l] = beta1 * state.m_b[l] + (1.0 - beta1) * g.b[l];
        state.v_b[l] = beta2 * state.v_b[l] + (1.0 - beta2) * g.b[l].cwiseProduct(g.b[l]);
        net.biases[l].array() -= learning_rate * (state.m_b[l].array() / bc1) /
                                 ((state.v_b[l].array() / bc2).sqrt() + eps);
    }
    return loss;
}

NeuralNet train(const Eigen::MatrixXd& train_X, const Eigen::VectorXi& train_y,
                const Eigen::MatrixXd& val_X, const Eigen::VectorXi& val_y,
                int num_classes, const TrainConfig& config) {
    config.validate();
    if (train_X.rows() == 0 || val_X.rows() == 0)
        throw DataError("train: empty split");
    if (train_X.rows() != train_y.size() || val_X.rows() != val_y.size())
        throw ShapeError("train: feature/label row count mismatch");
    if (num_classes < 2) throw ConfigError("train: need at least two classes");
    for (Eigen::Index i = 0; i < train_y.size(); ++i)
        if (train_y(i) < 0 || train_y(i) >= num_classes)
            throw DataError("train: label out of range");
    for (Eigen::Index i = 0; i < val_y.size(); ++i)
        if (val_y(i) < 0 || val_y(i) >= num_classes)
            throw DataError("train: validation label out of range");

    const int M = static_cast<int>(train_X.cols());
    NeuralNet net = init_network(
        {M, config.hidden_sizes[0], config.hidden_sizes[1], num_classes}, config.seed);
    AdamState adam(net);

    NeuralNet best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    const auto n = train_X.rows();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        // Minibatch order is a pure function of (seed, epoch).
        std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        for (Eigen::Index start = 0; start < n; start += config.batch_size) {
            const auto count = std::min<Eigen::Index>(config.batch_size, n - start);
            Eigen::MatrixXd xb(count, M);
            Eigen::VectorXi yb(count);
            for (Eigen::Index i = 0; i < count; ++i) {
                xb.row(i) = train_X.row(order[start + i]);
                yb(i) = train_y(order[start + i]);
            }
            adam_step(net, adam, xb, yb, config.learning_rate);
        }

        double val_loss = cross_entropy(net, val_X, val_y);
        if (!std::isfinite(val_loss)) throw TrainingDiverged("non-finite validation loss");
        if (val_loss < best_val) {
            best_val = val_loss;
            best = net;
            stale_epochs = 0;
        } else if (++stale_epochs >= config.patience) {
            break;
        }
    }
    return best;
}

double cross_entropy(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
    if (X.rows() == 0) throw DataError("cross_entropy: empty batch");
    Eigen::MatrixXd logits = batch_logits(net, X);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::VectorXd col = logits.col(i);
        double zmax = col.maxCoeff();
        loss += std::log((col.array() - zmax).exp().sum()) + zmax - col(y(i));
    }
    return loss / static_cast<double>(X.rows());
}

double accuracy(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
    if (X.rows() == 0) throw DataError("accuracy: empty batch");
    Eigen::VectorXi pred = predict_batch(net, X);
    double hits = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (pred(i) == y(i)) hits += 1.0;
    return hits / static_cast<double>(y.size());
}

double macro_f1(const NeuralNet& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
    if (X.rows() == 0) throw DataError("macro_f1: empty batch");
    const int Z = net.num_classes();
    Eigen::VectorXi pred = predict_batch(net, X);
    std::vector<double> tp(Z, 0), fp(Z, 0), fn(Z, 0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (pred(i) == y(i))
            tp[y(i)] += 1;
        else {
            fp[pred(i)] += 1;
            fn[y(i)] += 1;
        }
    }
    double f1_sum = 0.0;
    for (int c = 0; c < Z; ++c) {
        const double denom = 2 * tp[c] + fp[c] + fn[c];
        f1_sum += denom > 0 ? 2 * tp[c] / denom : 0.0;
    }
    return f1_sum / Z;
}

} // namespace grace
