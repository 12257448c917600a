#pragma once

// Reverse Markov sampling, training, alternating generation, and the
// flow-matching / flow-ODE baseline.

#include "rml/bridge.hpp"
#include "rml/common.hpp"
#include "rml/nn.hpp"
#include "rml/random.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace rml::engine {

// Anything that draws X_{t-1} given X_t: a trained stack or an exact oracle.
class ReverseKernel {
public:
    virtual ~ReverseKernel() = default;
    virtual Index steps() const = 0;
    virtual Index dim(Index t) const = 0;
    // One draw of X_{t-1} per row of x_t (and of y, when given).
    virtual Matrix step(Index t, const Matrix& x_t, const Matrix* y, Rng& rng) const = 0;
};

enum class Sharing { automatic, shared, separate };

struct NetworkConfig {
    std::vector<Index> hidden{512, 512, 512, 512, 512};
    Index noise_dim = 0;  // 0: dim(t-1) at each step
    Sharing sharing = Sharing::automatic;

    void validate() const;
};

enum class LrDecay { none, cosine };

struct TrainConfig {
    Index iterations = 10000;
    Index batch_size = 256;
    double learning_rate = 1e-4;
    // Cosine decay runs from learning_rate down to learning_rate * final_fraction.
    LrDecay decay = LrDecay::none;
    double final_fraction = 0.01;

    double rate_at(Index iteration) const;

    void validate() const;
};

struct LossRecord {
    Index iteration = 0;
    Index t = 0;
    double loss = 0.0;
};

class GeneratorStack final : public ReverseKernel {
public:
    GeneratorStack(bridge::BridgePtr bridge, Index covariate_dim, const NetworkConfig& cfg, Rng& init_rng);

    Index steps() const override { return bridge_->steps(); }
    Index dim(Index t) const override { return bridge_->dim(t); }
    Matrix step(Index t, const Matrix& x_t, const Matrix* y, Rng& rng) const override;

    const bridge::BridgingProcess& bridge() const { return *bridge_; }
    bool shared() const { return shared_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }
    Index covariate_dim() const { return covariate_dim_; }
    Index noise_dim(Index t) const;

    nn::Mlp& network(Index t);
    const nn::Mlp& network(Index t) const;
    std::size_t network_count() const { return nets_.size(); }
    double time_input(Index t) const { return static_cast<double>(t) / static_cast<double>(steps()); }

    // One file per network plus manifest.json.
    void save(const std::filesystem::path& dir) const;
    static GeneratorStack load(const std::filesystem::path& dir, bridge::BridgePtr bridge);

private:
    GeneratorStack() = default;
    std::size_t slot(Index t) const;

    bridge::BridgePtr bridge_;
    Index covariate_dim_ = 0;
    bool shared_ = false;
    bool trained_ = false;
    std::vector<nn::Mlp> nets_;
};

// Thrown by train() on non-finite losses or gradients; carries the trace so far.
class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, std::vector<LossRecord> trace)
        : NumericError(what), trace(std::move(trace)) {}
    std::vector<LossRecord> trace;
};

// Each iteration draws t uniformly from {1..T}, a minibatch of data rows, a
// forward pair (x_{t-1}, x_t) per row, and takes one Adam step on g_t.
std::vector<LossRecord> train(GeneratorStack& stack, const SampleBatch& data, const TrainConfig& cfg, Rng& rng);

// X_T ~ q*, then X_{t-1} = kernel.step(t, X_t) for t = T..1.
Matrix reverse_markov_sample(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge, const Matrix* y,
                             Index n, Rng& rng);
// Same, returning every level: result[t] holds the X_t batch.
std::vector<Matrix> reverse_markov_path(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge,
                                        const Matrix* y, Index n, Rng& rng);

// s(t) in {0..t}; s(t) = t recovers plain reverse sampling.
using Schedule = std::function<Index(Index)>;
Schedule identity_schedule();
Schedule zero_schedule();

// For t = T..1: run the kernel from level t down to s(t-1), then regenerate
// level t-1 from level s(t-1) with the bridge.
Matrix alternating_generate(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge,
                            const Schedule& schedule, const Matrix* y, Index n, Rng& rng);

// ---------------------------------------------------------------------------
// Flow matching along h = (1 - s) x + s eps.

class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual Matrix velocity(const Matrix& x, const Matrix* y, double s) const = 0;
};

class MlpVelocity final : public VelocityField {
public:
    explicit MlpVelocity(const nn::Mlp& net) : net_(net) {}
    Matrix velocity(const Matrix& x, const Matrix* y, double s) const override;

private:
    const nn::Mlp& net_;
};

class ConstantVelocity final : public VelocityField {
public:
    explicit ConstantVelocity(RowVector c) : c_(std::move(c)) {}
    Matrix velocity(const Matrix& x, const Matrix*, double) const override { return c_.replicate(x.rows(), 1); }

private:
    RowVector c_;
};

// Exact E[eps - X | h = x] when X is a finite set of atoms with given weights.
class AtomicTargetField final : public VelocityField {
public:
    AtomicTargetField(Matrix atoms, Vector weights);
    Matrix velocity(const Matrix& x, const Matrix* y, double s) const override;

private:
    Matrix atoms_;
    Vector log_weights_;
};

// Network layout [x | y | s] -> velocity in R^d.
nn::Mlp make_velocity_net(Index d, Index covariate_dim, const std::vector<Index>& hidden, Rng& rng);

std::vector<LossRecord> fm_train(nn::Mlp& field, const SampleBatch& data, const TrainConfig& cfg, Rng& rng);

// Euler steps X_{t-1} = X_t - (1/T) v(X_t, y, t/T) from the given start.
Matrix flow_ode_integrate(const VelocityField& field, Matrix x_T, const Matrix* y, Index T_steps);
Matrix flow_ode_generate(const VelocityField& field, const Matrix* y, Index T_steps, Index n, Index d, Rng& rng);

}  // namespace rml::engine
