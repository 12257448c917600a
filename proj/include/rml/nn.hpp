#pragma once

// Feed-forward generator network with hand-written reverse-mode gradients
// and an Adam optimizer. Hidden layers use ReLU, the output layer is linear.

#include "rml/common.hpp"
#include "rml/random.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rml::nn {

// How the input vector of a generator is assembled:
// [state x_t | covariates y | time t/T (optional) | noise eps].
struct InputLayout {
    Index state_dim = 0;
    Index covariate_dim = 0;
    bool time_input = false;
    Index noise_dim = 0;

    Index width() const { return state_dim + covariate_dim + (time_input ? 1 : 0) + noise_dim; }
    bool operator==(const InputLayout&) const = default;
};

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

using Gradient = std::vector<Layer>;

class Mlp;

// Layer inputs recorded during a forward pass; consumed by Mlp::backward.
class Tape {
public:
    Index batch_size() const { return inputs_.empty() ? 0 : inputs_.front().rows(); }

private:
    friend class Mlp;
    std::vector<Matrix> inputs_;  // input of every layer (post-activation of the previous one)
    const Mlp* owner_ = nullptr;
    std::uint64_t version_ = 0;
    Index output_dim_ = 0;
};

class Mlp {
public:
    Mlp() = default;
    // All-zero parameters. widths = {input, hidden..., output}.
    explicit Mlp(std::vector<Index> widths, InputLayout layout = {});

    // He-scaled Gaussian weights, zero biases.
    static Mlp he_init(std::vector<Index> widths, InputLayout layout, Rng& rng);

    const std::vector<Index>& widths() const { return widths_; }
    const InputLayout& layout() const { return layout_; }
    Index input_dim() const { return widths_.front(); }
    Index output_dim() const { return widths_.back(); }
    std::size_t layer_count() const { return layers_.size(); }
    std::size_t parameter_count() const;

    const std::vector<Layer>& layers() const { return layers_; }
    // Mutable access invalidates outstanding tapes.
    std::vector<Layer>& mutable_layers() {
        ++version_;
        return layers_;
    }
    std::uint64_t version() const { return version_; }

    Matrix forward(const Matrix& batch) const;
    Matrix forward(const Matrix& batch, Tape& tape) const;

    // Gradient of sum_ij adjoint_ij * output_ij w.r.t. every parameter.
    Gradient backward(const Tape& tape, const Matrix& adjoint) const;

    Gradient zero_gradient() const;

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path);

private:
    void check_widths() const;

    std::vector<Index> widths_;
    InputLayout layout_;
    std::vector<Layer> layers_;
    std::uint64_t version_ = 0;
};

void accumulate(Gradient& into, const Gradient& other);
void scale(Gradient& g, double factor);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam update of a flat parameter block. `step` is the
// 1-based count of updates including this one.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& cfg);

struct AdamState {
    AdamConfig config;
    std::vector<Layer> m;
    std::vector<Layer> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(const Mlp& net, AdamConfig cfg);
};

// Throws NumericError naming the offending block if the gradient is not finite
// or if the update produces non-finite parameters.
void adam_step(Mlp& net, AdamState& state, const Gradient& grad);

// Plain Adam over a single parameter vector (used by the linear SEM estimators).
class VectorAdam {
public:
    VectorAdam(Index size, AdamConfig cfg) : cfg_(cfg), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}
    void step(Vector& param, const Vector& grad);
    std::int64_t steps() const { return step_; }

private:
    AdamConfig cfg_;
    Vector m_;
    Vector v_;
    std::int64_t step_ = 0;
};

// Assemble generator inputs [state | covariates | time | noise] row-wise.
Matrix assemble_input(const InputLayout& layout, const Matrix& state, const Matrix* covariates,
                      double time, const Matrix& noise);

}  // namespace rml::nn
