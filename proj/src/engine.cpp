#include "rml/engine.hpp"

#include "rml/scoring.hpp"

#include "json.hpp"

#include <cmath>
#include <numbers>
#include <fstream>

namespace rml::engine {

void NetworkConfig::validate() const {
    for (Index h : hidden)
        if (h <= 0) throw ConfigError("hidden layer widths must be positive");
    if (noise_dim < 0) throw ConfigError("noise dimension must be non-negative");
}

void TrainConfig::validate() const {
    if (iterations <= 0) throw ConfigError("train.iterations must be positive");
    if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(final_fraction > 0.0 && final_fraction <= 1.0)) throw ConfigError("train.final_fraction must lie in (0, 1]");
}

double TrainConfig::rate_at(Index iteration) const {
    if (decay == LrDecay::none || iterations <= 1) return learning_rate;
    const double progress = static_cast<double>(iteration) / static_cast<double>(iterations - 1);
    return learning_rate * (final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

// ---------------------------------------------------------------------------

GeneratorStack::GeneratorStack(bridge::BridgePtr bridge, Index covariate_dim, const NetworkConfig& cfg,
                               Rng& init_rng)
    : bridge_(std::move(bridge)), covariate_dim_(covariate_dim) {
    if (!bridge_) throw ConfigError("generator stack needs a bridge");
    cfg.validate();
    const Index T = bridge_->steps();
    bool uniform = true;
    for (Index t = 1; t <= T; ++t) uniform = uniform && bridge_->dim(t) == bridge_->dim(0);
    switch (cfg.sharing) {
        case Sharing::automatic: shared_ = uniform; break;
        case Sharing::shared:
            if (!uniform) throw ConfigError("a shared generator needs equal dimensions at every step");
            shared_ = true;
            break;
        case Sharing::separate: shared_ = false; break;
    }
    auto build = [&](Index t) {
        const Index out = bridge_->dim(t - 1);
        nn::InputLayout layout{.state_dim = bridge_->dim(t),
                               .covariate_dim = covariate_dim,
                               .time_input = shared_,
                               .noise_dim = cfg.noise_dim > 0 ? cfg.noise_dim : out};
        std::vector<Index> widths{layout.width()};
        widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
        widths.push_back(out);
        return nn::Mlp::he_init(widths, layout, init_rng);
    };
    if (shared_)
        nets_.push_back(build(T));
    else
        for (Index t = 1; t <= T; ++t) nets_.push_back(build(t));
}

std::size_t GeneratorStack::slot(Index t) const {
    if (t < 1 || t > steps()) throw ConfigError("generator index " + std::to_string(t) + " out of range");
    return shared_ ? 0 : static_cast<std::size_t>(t - 1);
}

nn::Mlp& GeneratorStack::network(Index t) { return nets_[slot(t)]; }
const nn::Mlp& GeneratorStack::network(Index t) const { return nets_[slot(t)]; }
Index GeneratorStack::noise_dim(Index t) const { return network(t).layout().noise_dim; }

Matrix GeneratorStack::step(Index t, const Matrix& x_t, const Matrix* y, Rng& rng) const {
    if (!trained_) throw UsageError("generator stack used for sampling before training");
    const nn::Mlp& net = network(t);
    Matrix noise = standard_normal(x_t.rows(), net.layout().noise_dim, rng);
    return net.forward(nn::assemble_input(net.layout(), x_t, y, time_input(t), noise));
}

void GeneratorStack::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        const std::string file = "g_" + std::to_string(i + 1) + ".json";
        nets_[i].save(dir / file);
        files.push_back(file);
    }
    std::vector<Index> dims;
    for (Index t = 0; t <= steps(); ++t) dims.push_back(dim(t));
    nlohmann::json manifest{{"bridge", bridge_->name()},
                            {"steps", steps()},
                            {"dims", dims},
                            {"covariate_dim", covariate_dim_},
                            {"shared", shared_},
                            {"trained", trained_},
                            {"networks", files}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

GeneratorStack GeneratorStack::load(const std::filesystem::path& dir, bridge::BridgePtr bridge) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("no manifest.json in " + dir.string());
    const auto manifest = nlohmann::json::parse(in);
    if (manifest.at("bridge").get<std::string>() != bridge->name() ||
        manifest.at("steps").get<Index>() != bridge->steps())
        throw ConfigError("checkpoint in " + dir.string() + " was written for a different bridge");
    GeneratorStack stack;
    stack.bridge_ = std::move(bridge);
    stack.covariate_dim_ = manifest.at("covariate_dim").get<Index>();
    stack.shared_ = manifest.at("shared").get<bool>();
    stack.trained_ = manifest.at("trained").get<bool>();
    for (const auto& f : manifest.at("networks")) stack.nets_.push_back(nn::Mlp::load(dir / f.get<std::string>()));
    return stack;
}

// ---------------------------------------------------------------------------

std::vector<LossRecord> train(GeneratorStack& stack, const SampleBatch& data, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto& bridge = stack.bridge();
    if (data.dim() != bridge.dim(0))
        throw ConfigError("training data dimension " + std::to_string(data.dim()) + " differs from bridge dim(0) " +
                          std::to_string(bridge.dim(0)));
    if (data.covariate_dim() != stack.covariate_dim()) throw ConfigError("covariate dimension mismatch");
    if (data.size() == 0) throw InsufficientSamples("no training data");

    std::vector<nn::AdamState> adam;
    for (std::size_t i = 0; i < stack.network_count(); ++i)
        adam.emplace_back(stack.network(stack.shared() ? 1 : static_cast<Index>(i + 1)),
                          nn::AdamConfig{.learning_rate = cfg.learning_rate});

    const Index T = bridge.steps();
    const Index m = cfg.batch_size;
    std::vector<LossRecord> trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations));
    Matrix x0(m, data.dim());
    Matrix y(m, data.covariate_dim());
    for (Index it = 0; it < cfg.iterations; ++it) {
        const Index t = 1 + uniform_index(T, rng);
        for (Index i = 0; i < m; ++i) {
            const Index row = uniform_index(data.size(), rng);
            x0.row(i) = data.x.row(row);
            if (data.y) y.row(i) = data.y->row(row);
        }
        const Matrix* yp = data.y ? &y : nullptr;
        auto [prev, cur] = bridge.sample_pair(t, x0, yp, rng);
        nn::Mlp& net = stack.network(t);
        auto& state = adam[stack.shared() ? 0 : static_cast<std::size_t>(t - 1)];
        state.config.learning_rate = cfg.rate_at(it);
        const Index q = net.layout().noise_dim;
        const Matrix e1 = standard_normal(m, q, rng);
        const Matrix e2 = standard_normal(m, q, rng);
        scoring::LossAndGradient lg;
        try {
            lg = scoring::engression_loss(net, prev, cur, yp, stack.time_input(t), e1, e2);
            adam_step(net, state, lg.gradient);
        } catch (const NumericError& e) {
            throw TrainingDiverged("training diverged at iteration " + std::to_string(it) +
                                       " (t=" + std::to_string(t) + "): " + e.what(),
                                   std::move(trace));
        }
        trace.push_back({it, t, lg.value});
    }
    stack.mark_trained();
    return trace;
}

// ---------------------------------------------------------------------------

namespace {
void check_kernel(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge) {
    if (kernel.steps() != bridge.steps())
        throw ConfigError("reverse kernel has " + std::to_string(kernel.steps()) + " steps, bridge has " +
                          std::to_string(bridge.steps()));
}
void check_y(const Matrix* y, Index n) {
    if (y && y->rows() != n) throw ConfigError("covariate rows must match the requested sample count");
}
}  // namespace

std::vector<Matrix> reverse_markov_path(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge,
                                        const Matrix* y, Index n, Rng& rng) {
    check_kernel(kernel, bridge);
    check_y(y, n);
    const Index T = bridge.steps();
    std::vector<Matrix> levels(static_cast<std::size_t>(T + 1));
    levels[static_cast<std::size_t>(T)] = bridge.sample_terminal(n, rng);
    for (Index t = T; t >= 1; --t)
        levels[static_cast<std::size_t>(t - 1)] = kernel.step(t, levels[static_cast<std::size_t>(t)], y, rng);
    return levels;
}

Matrix reverse_markov_sample(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge, const Matrix* y,
                             Index n, Rng& rng) {
    check_kernel(kernel, bridge);
    check_y(y, n);
    Matrix x = bridge.sample_terminal(n, rng);
    for (Index t = bridge.steps(); t >= 1; --t) x = kernel.step(t, x, y, rng);
    return x;
}

Schedule identity_schedule() {
    return [](Index t) { return t; };
}
Schedule zero_schedule() {
    return [](Index) { return Index{0}; };
}

Matrix alternating_generate(const ReverseKernel& kernel, const bridge::BridgingProcess& bridge,
                            const Schedule& schedule, const Matrix* y, Index n, Rng& rng) {
    check_kernel(kernel, bridge);
    check_y(y, n);
    const Index T = bridge.steps();
    for (Index t = 0; t < T; ++t) {
        const Index s = schedule(t);
        if (s < 0 || s > t)
            throw ConfigError("schedule s(" + std::to_string(t) + ") = " + std::to_string(s) + " outside [0, t]");
        if (!bridge.can_regenerate(s, t))
            throw CapabilityError(bridge.name() + " cannot regenerate step " + std::to_string(t) + " from step " +
                                  std::to_string(s));
    }
    Matrix x = bridge.sample_terminal(n, rng);
    for (Index t = T; t >= 1; --t) {
        const Index target = schedule(t - 1);
        for (Index s = t; s > target; --s) x = kernel.step(s, x, y, rng);
        x = bridge.regenerate(target, t - 1, x, y, rng);
    }
    return x;
}

// ---------------------------------------------------------------------------

Matrix MlpVelocity::velocity(const Matrix& x, const Matrix* y, double s) const {
    const Matrix none(x.rows(), 0);
    return net_.forward(nn::assemble_input(net_.layout(), x, y, s, none));
}

AtomicTargetField::AtomicTargetField(Matrix atoms, Vector weights) : atoms_(std::move(atoms)) {
    if (atoms_.rows() == 0 || weights.size() != atoms_.rows())
        throw ConfigError("atomic target needs one positive weight per atom");
    if ((weights.array() <= 0.0).any()) throw ConfigError("atom weights must be positive");
    log_weights_ = (weights / weights.sum()).array().log();
}

Matrix AtomicTargetField::velocity(const Matrix& x, const Matrix*, double s) const {
    if (!(s > 0.0)) throw ConfigError("atomic velocity field is singular at s = 0");
    require_same_dim(x, atoms_, "AtomicTargetField");
    const Index K = atoms_.rows();
    Matrix out(x.rows(), x.cols());
    Vector logits(K);
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index k = 0; k < K; ++k)
            logits[k] = log_weights_[k] - (x.row(i) - (1.0 - s) * atoms_.row(k)).squaredNorm() / (2.0 * s * s);
        const double top = logits.maxCoeff();
        const Vector w = (logits.array() - top).exp();
        // eps - x0 = (h - x0) / s for each atom.
        RowVector v = RowVector::Zero(x.cols());
        for (Index k = 0; k < K; ++k) v += w[k] * (x.row(i) - atoms_.row(k)) / s;
        out.row(i) = v / w.sum();
    }
    return out;
}

nn::Mlp make_velocity_net(Index d, Index covariate_dim, const std::vector<Index>& hidden, Rng& rng) {
    nn::InputLayout layout{.state_dim = d, .covariate_dim = covariate_dim, .time_input = true, .noise_dim = 0};
    std::vector<Index> widths{layout.width()};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(d);
    return nn::Mlp::he_init(widths, layout, rng);
}

std::vector<LossRecord> fm_train(nn::Mlp& field, const SampleBatch& data, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    if (data.size() == 0) throw InsufficientSamples("no training data");
    nn::AdamState adam(field, {.learning_rate = cfg.learning_rate});
    const Index m = cfg.batch_size;
    Matrix x0(m, data.dim());
    Matrix y(m, data.covariate_dim());
    Vector s(m);
    std::vector<LossRecord> trace;
    trace.reserve(static_cast<std::size_t>(cfg.iterations));
    for (Index it = 0; it < cfg.iterations; ++it) {
        for (Index i = 0; i < m; ++i) {
            const Index row = uniform_index(data.size(), rng);
            x0.row(i) = data.x.row(row);
            if (data.y) y.row(i) = data.y->row(row);
        }
        const Matrix eps = standard_normal(m, data.dim(), rng);
        for (Index i = 0; i < m; ++i) s[i] = uniform01(rng);
        scoring::LossAndGradient lg;
        try {
            lg = scoring::fm_regression_loss(field, x0, eps, s, data.y ? &y : nullptr);
            adam.config.learning_rate = cfg.rate_at(it);
            adam_step(field, adam, lg.gradient);
        } catch (const NumericError& e) {
            throw NumericError("flow-matching training diverged at iteration " + std::to_string(it) + ": " +
                               e.what());
        }
        trace.push_back({it, 0, lg.value});
    }
    return trace;
}

Matrix flow_ode_integrate(const VelocityField& field, Matrix x, const Matrix* y, Index T_steps) {
    if (T_steps < 1) throw ConfigError("flow ODE needs at least one step");
    const double h = 1.0 / static_cast<double>(T_steps);
    for (Index t = T_steps; t >= 1; --t) x -= h * field.velocity(x, y, static_cast<double>(t) * h);
    return x;
}

Matrix flow_ode_generate(const VelocityField& field, const Matrix* y, Index T_steps, Index n, Index d, Rng& rng) {
    if (T_steps < 1) throw ConfigError("flow ODE needs at least one step");
    return flow_ode_integrate(field, standard_normal(n, d, rng), y, T_steps);
}

}  // namespace rml::engine
