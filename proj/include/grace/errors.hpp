#ifndef GRACE_ERRORS_HPP
#define GRACE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace grace {

// Bad user-supplied configuration (flags, hyperparameters, template ids).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV cells, manifests, model files).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Vector/matrix dimensions do not chain.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate geometry during sample generation (vanishing gradient
// difference, no contrastive class).
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Local surrogate cannot be fit (single-class neighborhood); callers fall
// back to gradient ranking.
struct SurrogateDegenerate : GenerationError {
    using GenerationError::GenerationError;
};

// Loss became non-finite while training.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace grace

#endif
