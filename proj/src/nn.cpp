#include "rml/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace rml::nn {

namespace {

std::string block_name(std::size_t layer, bool weight) {
    return "layer " + std::to_string(layer) + (weight ? " weight" : " bias");
}

template <typename Derived>
void check_finite_block(const Eigen::DenseBase<Derived>& block, std::size_t layer, bool weight,
                        const char* what) {
    if (!block.allFinite())
        throw NumericError(std::string("non-finite ") + what + " in " + block_name(layer, weight));
}

nlohmann::json array_json(const std::string& name, const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Matrix array_from_json(const nlohmann::json& j, const std::string& expected_name) {
    if (j.at("name").get<std::string>() != expected_name)
        throw ConfigError("checkpoint: expected array '" + expected_name + "', found '" +
                          j.at("name").get<std::string>() + "'");
    const auto shape = j.at("shape").get<std::vector<Index>>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Index>(data.size()))
        throw ConfigError("checkpoint: shape header of '" + expected_name + "' does not match data");
    return Eigen::Map<const Matrix>(data.data(), shape[0], shape[1]);
}

}  // namespace

Mlp::Mlp(std::vector<Index> widths, InputLayout layout) : widths_(std::move(widths)), layout_(layout) {
    check_widths();
    layers_.reserve(widths_.size() - 1);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
        layers_.push_back({Matrix::Zero(widths_[l + 1], widths_[l]), Vector::Zero(widths_[l + 1])});
}

Mlp Mlp::he_init(std::vector<Index> widths, InputLayout layout, Rng& rng) {
    Mlp net(std::move(widths), layout);
    for (auto& layer : net.layers_) {
        const double scale = std::sqrt(2.0 / static_cast<double>(layer.weight.cols()));
        fill_standard_normal(layer.weight, rng);
        layer.weight *= scale;
    }
    return net;
}

void Mlp::check_widths() const {
    if (widths_.size() < 2) throw ConfigError("Mlp needs at least an input and an output width");
    for (Index w : widths_)
        if (w <= 0) throw ConfigError("Mlp widths must be positive");
    if (layout_.width() != 0 && layout_.width() != widths_.front())
        throw ConfigError("Mlp input layout width " + std::to_string(layout_.width()) +
                          " does not match input width " + std::to_string(widths_.front()));
}

std::size_t Mlp::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_) count += layer.weight.size() + layer.bias.size();
    return count;
}

Matrix Mlp::forward(const Matrix& batch) const {
    if (batch.cols() != input_dim())
        throw ConfigError("Mlp::forward: batch has " + std::to_string(batch.cols()) +
                          " columns, network expects " + std::to_string(input_dim()));
    Matrix h;
    Matrix z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        z.noalias() = (l == 0 ? batch : h) * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < layers_.size()) h = z.cwiseMax(0.0);
    }
    return z;
}

Matrix Mlp::forward(const Matrix& batch, Tape& tape) const {
    if (batch.cols() != input_dim())
        throw ConfigError("Mlp::forward: batch has " + std::to_string(batch.cols()) +
                          " columns, network expects " + std::to_string(input_dim()));
    tape.inputs_.resize(layers_.size());
    tape.owner_ = this;
    tape.version_ = version_;
    tape.output_dim_ = output_dim();

    tape.inputs_[0] = batch;
    Matrix z;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        z.noalias() = tape.inputs_[l] * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < layers_.size()) tape.inputs_[l + 1] = z.cwiseMax(0.0);
    }
    return z;
}

Gradient Mlp::backward(const Tape& tape, const Matrix& adjoint) const {
    if (tape.owner_ != this || tape.version_ != version_ || tape.inputs_.size() != layers_.size())
        throw UsageError("Mlp::backward called without a matching forward pass");
    if (adjoint.rows() != tape.batch_size() || adjoint.cols() != tape.output_dim_)
        throw UsageError("Mlp::backward: adjoint shape " + std::to_string(adjoint.rows()) + "x" +
                         std::to_string(adjoint.cols()) + " does not match the recorded forward output " +
                         std::to_string(tape.batch_size()) + "x" + std::to_string(tape.output_dim_));

    Gradient grad(layers_.size());
    Matrix delta = adjoint;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Matrix& input = tape.inputs_[l];
        grad[l].weight.noalias() = delta.transpose() * input;
        grad[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            Matrix upstream = delta * layers_[l].weight;
            // ReLU derivative; the recorded input of layer l is relu(z_{l-1}).
            delta = upstream.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
        }
    }
    return grad;
}

Gradient Mlp::zero_gradient() const {
    Gradient g(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        g[l].weight = Matrix::Zero(layers_[l].weight.rows(), layers_[l].weight.cols());
        g[l].bias = Vector::Zero(layers_[l].bias.size());
    }
    return g;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json arrays = nlohmann::json::array();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        arrays.push_back(array_json("layer" + std::to_string(l) + ".weight", layers_[l].weight));
        arrays.push_back(array_json("layer" + std::to_string(l) + ".bias", layers_[l].bias));
    }
    return {{"format", "rml-mlp"},
            {"version", 1},
            {"activation", "relu"},
            {"widths", widths_},
            {"layout",
             {{"state_dim", layout_.state_dim},
              {"covariate_dim", layout_.covariate_dim},
              {"time_input", layout_.time_input},
              {"noise_dim", layout_.noise_dim}}},
            {"arrays", arrays}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "rml-mlp") throw ConfigError("checkpoint: not an rml-mlp document");
    InputLayout layout;
    const auto& lj = j.at("layout");
    layout.state_dim = lj.at("state_dim").get<Index>();
    layout.covariate_dim = lj.at("covariate_dim").get<Index>();
    layout.time_input = lj.at("time_input").get<bool>();
    layout.noise_dim = lj.at("noise_dim").get<Index>();
    Mlp net(j.at("widths").get<std::vector<Index>>(), layout);
    const auto& arrays = j.at("arrays");
    if (arrays.size() != 2 * net.layers_.size()) throw ConfigError("checkpoint: wrong number of arrays");
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
        Matrix w = array_from_json(arrays[2 * l], "layer" + std::to_string(l) + ".weight");
        Matrix b = array_from_json(arrays[2 * l + 1], "layer" + std::to_string(l) + ".bias");
        if (w.rows() != net.layers_[l].weight.rows() || w.cols() != net.layers_[l].weight.cols() ||
            b.size() != net.layers_[l].bias.size())
            throw ConfigError("checkpoint: layer " + std::to_string(l) + " shape disagrees with widths");
        net.layers_[l].weight = std::move(w);
        net.layers_[l].bias = b.reshaped();
    }
    return net;
}

void Mlp::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << to_json().dump() << '\n';
}

Mlp Mlp::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read checkpoint " + path.string());
    return from_json(nlohmann::json::parse(in));
}

void accumulate(Gradient& into, const Gradient& other) {
    if (into.size() != other.size()) throw ConfigError("gradient layer counts differ");
    for (std::size_t l = 0; l < into.size(); ++l) {
        into[l].weight += other[l].weight;
        into[l].bias += other[l].bias;
    }
}

void scale(Gradient& g, double factor) {
    for (auto& layer : g) {
        layer.weight *= factor;
        layer.bias *= factor;
    }
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamConfig& cfg) {
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        param[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

AdamState::AdamState(const Mlp& net, AdamConfig cfg) : config(cfg) {
    m = net.zero_gradient();
    v = net.zero_gradient();
}

void adam_step(Mlp& net, AdamState& state, const Gradient& grad) {
    const auto& layers = net.layers();
    if (grad.size() != layers.size() || state.m.size() != layers.size())
        throw ConfigError("adam_step: gradient/state do not match the network");
    for (std::size_t l = 0; l < grad.size(); ++l) {
        if (grad[l].weight.rows() != layers[l].weight.rows() || grad[l].weight.cols() != layers[l].weight.cols() ||
            grad[l].bias.size() != layers[l].bias.size())
            throw ConfigError("adam_step: gradient shape mismatch in " + block_name(l, true));
        check_finite_block(grad[l].weight, l, true, "gradient");
        check_finite_block(grad[l].bias, l, false, "gradient");
    }
    ++state.step;
    auto& params = net.mutable_layers();
    for (std::size_t l = 0; l < params.size(); ++l) {
        auto span_of = [](auto& x) { return std::span<double>(x.data(), static_cast<std::size_t>(x.size())); };
        auto cspan_of = [](const auto& x) {
            return std::span<const double>(x.data(), static_cast<std::size_t>(x.size()));
        };
        adam_update(span_of(params[l].weight), cspan_of(grad[l].weight), span_of(state.m[l].weight),
                    span_of(state.v[l].weight), state.step, state.config);
        adam_update(span_of(params[l].bias), cspan_of(grad[l].bias), span_of(state.m[l].bias),
                    span_of(state.v[l].bias), state.step, state.config);
        check_finite_block(params[l].weight, l, true, "parameter after update");
        check_finite_block(params[l].bias, l, false, "parameter after update");
    }
}

void VectorAdam::step(Vector& param, const Vector& grad) {
    if (grad.size() != param.size() || param.size() != m_.size())
        throw ConfigError("VectorAdam: size mismatch");
    if (!grad.allFinite()) throw NumericError("non-finite gradient in parameter vector");
    ++step_;
    adam_update({param.data(), static_cast<std::size_t>(param.size())},
                {grad.data(), static_cast<std::size_t>(grad.size())}, {m_.data(), static_cast<std::size_t>(m_.size())},
                {v_.data(), static_cast<std::size_t>(v_.size())}, step_, cfg_);
}

Matrix assemble_input(const InputLayout& layout, const Matrix& state, const Matrix* covariates, double time,
                      const Matrix& noise) {
    const Index n = state.rows();
    if (state.cols() != layout.state_dim)
        throw ConfigError("generator input: state has " + std::to_string(state.cols()) + " columns, expected " +
                          std::to_string(layout.state_dim));
    if (noise.rows() != n || noise.cols() != layout.noise_dim)
        throw ConfigError("generator input: noise dimension mismatch (got " + std::to_string(noise.cols()) +
                          ", expected " + std::to_string(layout.noise_dim) + ")");
    const Index p = covariates ? covariates->cols() : 0;
    if (p != layout.covariate_dim || (covariates && covariates->rows() != n))
        throw ConfigError("generator input: covariate dimension mismatch");
    Matrix in(n, layout.width());
    Index col = 0;
    in.middleCols(col, layout.state_dim) = state;
    col += layout.state_dim;
    if (p > 0) {
        in.middleCols(col, p) = *covariates;
        col += p;
    }
    if (layout.time_input) {
        in.col(col).setConstant(time);
        ++col;
    }
    in.middleCols(col, layout.noise_dim) = noise;
    return in;
}

}  // namespace rml::nn
