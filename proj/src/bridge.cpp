#include "rml/bridge.hpp"

#include <cmath>

namespace rml::bridge {

void BridgingProcess::check_step(Index t, Index lo) const {
    if (t < lo || t > steps())
        throw ConfigError(name() + ": step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(steps()) + "]");
}

void BridgingProcess::check_input(const Matrix& x0) const {
    if (x0.cols() != dim(0))
        throw ConfigError(name() + ": data has dimension " + std::to_string(x0.cols()) + ", bridge expects " +
                          std::to_string(dim(0)));
}

std::pair<Matrix, Matrix> BridgingProcess::sample_pair(Index t, const Matrix& x0, const Matrix* y, Rng& rng) const {
    check_step(t);
    auto path = sample_path(x0, y, rng);
    return {std::move(path[static_cast<std::size_t>(t - 1)]), std::move(path[static_cast<std::size_t>(t)])};
}

Matrix BridgingProcess::sample_terminal(Index n, Rng& rng) const { return standard_normal(n, dim(steps()), rng); }

Matrix BridgingProcess::regenerate(Index s, Index t, const Matrix& xs, const Matrix*, Rng&) const {
    check_step(s, 0);
    check_step(t, 0);
    if (!can_regenerate(s, t))
        throw CapabilityError(name() + " cannot regenerate step " + std::to_string(t) + " from step " +
                              std::to_string(s));
    if (s != t) throw CapabilityError(name() + ": regeneration hook missing for (" + std::to_string(s) + ", " +
                                      std::to_string(t) + ")");
    return xs;
}

std::string_view scheme_name(Scheme s) {
    switch (s) {
        case Scheme::flow_matching: return "flow-matching";
        case Scheme::diffusion: return "diffusion";
        case Scheme::x_process: return "x-process";
    }
    return "?";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "flow-matching" || name == "linear") return Scheme::flow_matching;
    if (name == "diffusion") return Scheme::diffusion;
    if (name == "x-process") return Scheme::x_process;
    throw ConfigError("unknown forward scheme '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

MatchedMarginalBridge::MatchedMarginalBridge(Scheme scheme, Index T, Index d) : scheme_(scheme), T_(T), d_(d) {
    if (T < 1) throw ConfigError("bridge needs T >= 1, got " + std::to_string(T));
    if (d < 1) throw ConfigError("bridge needs dimension >= 1");
}

std::string MatchedMarginalBridge::name() const { return std::string(scheme_name(scheme_)); }

double MatchedMarginalBridge::noise_covariance(Index t) const {
    check_step(t);
    const double T = static_cast<double>(T_);
    const double tt = static_cast<double>(t);
    switch (scheme_) {
        case Scheme::flow_matching: return (tt - 1.0) * tt / (T * T);
        case Scheme::diffusion: return (tt - 1.0) * (tt - 1.0) / (T * T);
        case Scheme::x_process: return 0.0;
    }
    return 0.0;
}

std::vector<Matrix> MatchedMarginalBridge::sample_path(const Matrix& x0, const Matrix*, Rng& rng) const {
    check_input(x0);
    const double T = static_cast<double>(T_);
    std::vector<Matrix> path;
    path.reserve(static_cast<std::size_t>(T_ + 1));
    path.push_back(x0);
    Matrix shared;
    Matrix eps = Matrix::Zero(x0.rows(), d_);
    if (scheme_ == Scheme::flow_matching) shared = standard_normal(x0.rows(), d_, rng);
    for (Index t = 1; t <= T_; ++t) {
        const double r = static_cast<double>(t) / T;
        switch (scheme_) {
            case Scheme::flow_matching: eps = r * shared; break;
            case Scheme::diffusion:
                eps += std::sqrt(2.0 * static_cast<double>(t) - 1.0) / T * standard_normal(x0.rows(), d_, rng);
                break;
            case Scheme::x_process: eps = r * standard_normal(x0.rows(), d_, rng); break;
        }
        path.push_back((1.0 - r) * x0 + eps);
    }
    return path;
}

std::pair<Matrix, Matrix> MatchedMarginalBridge::sample_pair(Index t, const Matrix& x0, const Matrix*,
                                                             Rng& rng) const {
    check_step(t);
    check_input(x0);
    const double T = static_cast<double>(T_);
    const double r_prev = static_cast<double>(t - 1) / T;
    const double r = static_cast<double>(t) / T;
    const Index n = x0.rows();
    Matrix eps_prev;
    Matrix eps;
    switch (scheme_) {
        case Scheme::flow_matching: {
            Matrix eta = standard_normal(n, d_, rng);
            eps_prev = r_prev * eta;
            eps = r * eta;
            break;
        }
        case Scheme::diffusion:
            // eps_{t-1} ~ N(0, ((t-1)/T)^2) collapses the first t-1 increments.
            eps_prev = r_prev * standard_normal(n, d_, rng);
            eps = eps_prev + std::sqrt(2.0 * static_cast<double>(t) - 1.0) / T * standard_normal(n, d_, rng);
            break;
        case Scheme::x_process:
            eps_prev = r_prev * standard_normal(n, d_, rng);
            eps = r * standard_normal(n, d_, rng);
            break;
    }
    return {(1.0 - r_prev) * x0 + eps_prev, (1.0 - r) * x0 + eps};
}

Matrix MatchedMarginalBridge::regenerate(Index s, Index t, const Matrix& xs, const Matrix* y, Rng& rng) const {
    check_step(s, 0);
    check_step(t, 0);
    if (s == t) return xs;
    if (s != 0)
        throw CapabilityError(name() + " regenerates only from step 0 (asked " + std::to_string(s) + " -> " +
                              std::to_string(t) + ")");
    (void)y;
    const double r = static_cast<double>(t) / static_cast<double>(T_);
    return (1.0 - r) * xs + r * standard_normal(xs.rows(), xs.cols(), rng);
}

// ---------------------------------------------------------------------------

MarkovDiffusionBridge::MarkovDiffusionBridge(Index T, Index d, std::vector<double> schedule)
    : T_(T), d_(d), schedule_(std::move(schedule)) {
    if (T < 1) throw ConfigError("bridge needs T >= 1");
    if (schedule_.empty())
        for (Index t = 1; t <= T; ++t) schedule_.push_back(static_cast<double>(t) / static_cast<double>(T));
    if (static_cast<Index>(schedule_.size()) != T)
        throw ConfigError("variance schedule must have T = " + std::to_string(T) + " entries");
    for (std::size_t i = 0; i < schedule_.size(); ++i) {
        if (!(schedule_[i] > 0.0 && schedule_[i] <= 1.0)) throw ConfigError("schedule entries must lie in (0, 1]");
        if (i > 0 && schedule_[i] < schedule_[i - 1]) throw ConfigError("schedule must be non-decreasing");
    }
    if (schedule_.back() != 1.0) throw ConfigError("schedule must end at sigma_T = 1");
}

Matrix MarkovDiffusionBridge::step(Index t, const Matrix& prev, Rng& rng) const {
    const double s = sigma(t);
    return std::sqrt(1.0 - s) * prev + s * standard_normal(prev.rows(), prev.cols(), rng);
}

std::vector<Matrix> MarkovDiffusionBridge::sample_path(const Matrix& x0, const Matrix*, Rng& rng) const {
    check_input(x0);
    std::vector<Matrix> path{x0};
    for (Index t = 1; t <= T_; ++t) path.push_back(step(t, path.back(), rng));
    return path;
}

Matrix MarkovDiffusionBridge::regenerate(Index s, Index t, const Matrix& xs, const Matrix*, Rng& rng) const {
    check_step(s, 0);
    check_step(t, 0);
    if (s > t) throw CapabilityError("markov-diffusion cannot run backwards (" + std::to_string(s) + " -> " +
                                     std::to_string(t) + ")");
    Matrix x = xs;
    for (Index k = s + 1; k <= t; ++k) x = step(k, x, rng);
    return x;
}

// ---------------------------------------------------------------------------

DimensionDropBridge::DimensionDropBridge(Index d) : d_(d) {
    if (d < 1) throw ConfigError("dimension-drop bridge needs d >= 1");
}

Index DimensionDropBridge::dim(Index t) const {
    check_step(t, 0);
    return t < d_ ? d_ - t : 1;
}

std::vector<Matrix> DimensionDropBridge::sample_path(const Matrix& x0, const Matrix*, Rng& rng) const {
    check_input(x0);
    std::vector<Matrix> path;
    for (Index t = 0; t < d_; ++t) path.push_back(x0.leftCols(d_ - t));
    path.push_back(standard_normal(x0.rows(), 1, rng));
    return path;
}

// ---------------------------------------------------------------------------

Matrix average_pool(const Matrix& fields, Index side, Index kernel) {
    if (fields.cols() != side * side) throw ConfigError("average_pool: field size does not match side^2");
    if (kernel < 1 || side % kernel != 0)
        throw ConfigError("kernel size " + std::to_string(kernel) + " does not divide grid side " +
                          std::to_string(side));
    const Index out_side = side / kernel;
    const double inv = 1.0 / static_cast<double>(kernel * kernel);
    Matrix out = Matrix::Zero(fields.rows(), out_side * out_side);
    for (Index i = 0; i < side; ++i)
        for (Index j = 0; j < side; ++j) out.col((i / kernel) * out_side + j / kernel) += fields.col(i * side + j);
    out *= inv;
    return out;
}

PoolingBridge::PoolingBridge(Index side, Index kernel) : kernel_(kernel) {
    if (kernel < 2) throw ConfigError("pooling kernel must be >= 2, got " + std::to_string(kernel));
    if (side < kernel || side % kernel != 0)
        throw ConfigError("kernel size " + std::to_string(kernel) + " does not divide grid side " +
                          std::to_string(side));
    Index s = side;
    sides_.push_back(s);
    while (s % kernel == 0) {
        s /= kernel;
        sides_.push_back(s);
    }
}

Index PoolingBridge::side(Index t) const {
    check_step(t, 0);
    if (t == steps()) throw ConfigError("the terminal step of a pooling bridge is not a grid");
    return sides_[static_cast<std::size_t>(t)];
}

Index PoolingBridge::dim(Index t) const {
    check_step(t, 0);
    const Index s = t == steps() ? sides_.back() : sides_[static_cast<std::size_t>(t)];
    return s * s;
}

std::vector<Matrix> PoolingBridge::sample_path(const Matrix& x0, const Matrix*, Rng& rng) const {
    check_input(x0);
    std::vector<Matrix> path{x0};
    for (std::size_t t = 1; t < sides_.size(); ++t) path.push_back(average_pool(path.back(), sides_[t - 1], kernel_));
    path.push_back(standard_normal(x0.rows(), dim(steps()), rng));
    return path;
}

}  // namespace rml::bridge
