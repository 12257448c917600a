#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace rml {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Invalid shapes, out-of-range parameters, malformed configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API called in the wrong order (e.g. backward without a matching forward).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// NaN/Inf in parameters, gradients or losses.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A bridge asked to regenerate along a (from, to) pair it cannot produce.
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Too few samples for the requested estimator.
class InsufficientSamples : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// n vectors in R^d (rows), optionally paired with covariates in R^p.
struct SampleBatch {
    Matrix x;
    std::optional<Matrix> y;

    SampleBatch() = default;
    explicit SampleBatch(Matrix values) : x(std::move(values)) {}
    SampleBatch(Matrix values, Matrix covariates) : x(std::move(values)), y(std::move(covariates)) {
        if (y->rows() != x.rows())
            throw ConfigError("covariate rows (" + std::to_string(y->rows()) +
                              ") differ from sample rows (" + std::to_string(x.rows()) + ")");
    }

    Index size() const { return x.rows(); }
    Index dim() const { return x.cols(); }
    Index covariate_dim() const { return y ? y->cols() : 0; }
    const Matrix* covariates() const { return y ? &*y : nullptr; }
};

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
    if (a.cols() != b.cols())
        throw ConfigError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.cols()) + ")");
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace rml
