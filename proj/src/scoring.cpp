#include "rml/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rml::scoring {

namespace {

// sum_{i,j} |a_i - b_j| for scalars, via sorting and prefix sums.
double sorted_abs_sum(const Matrix& a, const Matrix& b) {
    std::vector<double> sa(a.data(), a.data() + a.rows());
    std::vector<double> sb(b.data(), b.data() + b.rows());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<double> prefix(sb.size() + 1, 0.0);
    for (std::size_t j = 0; j < sb.size(); ++j) prefix[j + 1] = prefix[j] + sb[j];
    const double total_b = prefix.back();
    const double m = static_cast<double>(sb.size());
    double total = 0.0;
    std::size_t k = 0;
    for (double x : sa) {
        while (k < sb.size() && sb[k] <= x) ++k;
        const double below = static_cast<double>(k);
        total += x * below - prefix[k] + (total_b - prefix[k]) - x * (m - below);
    }
    return total;
}

constexpr double kSortedPathThreshold = 4.0e6;

// Sum over (i, j) of ||a_i - b_j||^beta, skipping i == j when requested.
// Evaluated column-wise so the inner loop runs over contiguous b entries.
double pair_power_sum(const Matrix& a, const Matrix& b, bool skip_diagonal, double beta) {
    const Index n = a.rows();
    const Index m = b.rows();
    const Index d = a.cols();
    if (d == 1 && beta == 1.0 && static_cast<double>(n) * static_cast<double>(m) > kSortedPathThreshold) {
        double total = sorted_abs_sum(a, b);
        if (skip_diagonal)
            for (Index i = 0; i < std::min(n, m); ++i) total -= std::abs(a(i, 0) - b(i, 0));
        return total;
    }
    Eigen::ArrayXd acc(m);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        acc = (b.col(0).array() - a(i, 0)).square();
        for (Index k = 1; k < d; ++k) acc += (b.col(k).array() - a(i, k)).square();
        if (beta == 1.0)
            acc = acc.sqrt();
        else
            acc = acc.pow(0.5 * beta);
        if (skip_diagonal && i < m) acc(i) = 0.0;
        total += acc.sum();
    }
    return total;
}

bool lexicographically_less(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.rows() != rhs.rows()) return lhs.rows() < rhs.rows();
    if (lhs.cols() != rhs.cols()) return lhs.cols() < rhs.cols();
    return std::lexicographical_compare(lhs.data(), lhs.data() + lhs.size(), rhs.data(), rhs.data() + rhs.size());
}

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 2.0)) throw ConfigError("energy score exponent beta must lie in (0, 2)");
}

}  // namespace

void EnergyScoreConfig::validate() const {
    check_beta(beta);
    if (samples < 0) throw ConfigError("energy score sample count must be non-negative");
}

double energy_score(const Matrix& samples, const Vector& x, const EnergyScoreConfig& cfg) {
    cfg.validate();
    const Index m = samples.rows();
    if (m < 2) throw InsufficientSamples("energy_score needs at least 2 samples, got " + std::to_string(m));
    if (samples.cols() != x.size()) throw ConfigError("energy_score: dimension mismatch");
    const double pairwise = pair_power_sum(samples, samples, true, cfg.beta);
    const double to_obs = pair_power_sum(x.transpose(), samples, false, cfg.beta);
    const double md = static_cast<double>(m);
    return pairwise / (2.0 * md * (md - 1.0)) - to_obs / md;
}

double energy_distance(const Matrix& a_in, const Matrix& b_in, double beta) {
    check_beta(beta);
    require_same_dim(a_in, b_in, "energy_distance");
    if (a_in.rows() < 2 || b_in.rows() < 2)
        throw InsufficientSamples("energy_distance needs at least 2 samples per batch");
    // Canonical argument order gives bitwise symmetry.
    const bool swap = lexicographically_less(b_in, a_in);
    const Matrix& a = swap ? b_in : a_in;
    const Matrix& b = swap ? a_in : b_in;

    const double n = static_cast<double>(a.rows());
    const double m = static_cast<double>(b.rows());
    const bool paired = a.rows() == b.rows();
    const double cross = pair_power_sum(a, b, paired, beta) / (paired ? n * (n - 1.0) : n * m);
    const double within_a = pair_power_sum(a, a, true, beta) / (n * (n - 1.0));
    const double within_b = pair_power_sum(b, b, true, beta) / (m * (m - 1.0));
    return 2.0 * cross - within_a - within_b;
}

EnergyLoss energy_loss(const Matrix& target, const Matrix& first, const Matrix& second) {
    if (first.rows() != target.rows() || second.rows() != target.rows() || first.cols() != target.cols() ||
        second.cols() != target.cols())
        throw ConfigError("energy_loss: target and generator outputs must share shape");
    const Index n = target.rows();
    if (n == 0) throw InsufficientSamples("energy_loss on an empty batch");
    const double inv_n = 1.0 / static_cast<double>(n);

    EnergyLoss out;
    out.d_first.resize(n, target.cols());
    out.d_second.resize(n, target.cols());
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const RowVector fit = first.row(i) - target.row(i);
        const RowVector spread = first.row(i) - second.row(i);
        const double fit_norm = fit.norm();
        const double spread_norm = spread.norm();
        total += fit_norm - 0.5 * spread_norm;
        // Subgradient 0 at the origin.
        const RowVector u = fit_norm > 0.0 ? RowVector(fit / fit_norm) : RowVector::Zero(fit.size());
        const RowVector w = spread_norm > 0.0 ? RowVector(spread / spread_norm) : RowVector::Zero(spread.size());
        out.d_first.row(i) = inv_n * (u - 0.5 * w);
        out.d_second.row(i) = inv_n * 0.5 * w;
    }
    out.value = total * inv_n;
    return out;
}

LossAndGradient engression_loss(const nn::Mlp& gen, const Matrix& target, const Matrix& state,
                                const Matrix* covariates, double time, const Matrix& noise,
                                const Matrix& noise_prime) {
    const nn::InputLayout& layout = gen.layout();
    if (noise.cols() != layout.noise_dim || noise_prime.cols() != layout.noise_dim)
        throw ConfigError("engression_loss: noise dimension " + std::to_string(noise.cols()) +
                          " does not match generator noise dimension " + std::to_string(layout.noise_dim));
    const Index n = target.rows();
    Matrix input(2 * n, layout.width());
    input.topRows(n) = nn::assemble_input(layout, state, covariates, time, noise);
    input.bottomRows(n) = nn::assemble_input(layout, state, covariates, time, noise_prime);

    nn::Tape tape;
    const Matrix out = gen.forward(input, tape);
    EnergyLoss loss = energy_loss(target, out.topRows(n), out.bottomRows(n));
    Matrix adjoint(2 * n, out.cols());
    adjoint.topRows(n) = loss.d_first;
    adjoint.bottomRows(n) = loss.d_second;
    if (!std::isfinite(loss.value)) throw NumericError("engression loss is not finite");
    return {loss.value, gen.backward(tape, adjoint)};
}

LossAndGradient fm_regression_loss(const nn::Mlp& field, const Matrix& x0, const Matrix& eps, const Vector& s,
                                   const Matrix* covariates) {
    if (eps.rows() != x0.rows() || eps.cols() != x0.cols() || s.size() != x0.rows())
        throw ConfigError("fm_regression_loss: x0, eps and s must describe the same rows");
    const nn::InputLayout& layout = field.layout();
    if (!layout.time_input || layout.noise_dim != 0 || layout.state_dim != x0.cols())
        throw ConfigError("fm_regression_loss: field layout must be [x | y | s] with no noise input");
    const Index n = x0.rows();
    Matrix input(n, layout.width());
    input.leftCols(x0.cols()) = (1.0 - s.array()).matrix().asDiagonal() * x0 + s.asDiagonal() * eps;
    Index col = x0.cols();
    if (layout.covariate_dim > 0) {
        if (!covariates || covariates->cols() != layout.covariate_dim || covariates->rows() != n)
            throw ConfigError("fm_regression_loss: covariate dimension mismatch");
        input.middleCols(col, layout.covariate_dim) = *covariates;
        col += layout.covariate_dim;
    }
    input.col(col) = s;

    nn::Tape tape;
    const Matrix out = field.forward(input, tape);
    const Matrix residual = out - (eps - x0);
    const double inv_n = 1.0 / static_cast<double>(n);
    LossAndGradient result;
    result.value = residual.squaredNorm() * inv_n;
    result.gradient = field.backward(tape, 2.0 * inv_n * residual);
    return result;
}

double folded_normal_mean(double mu, double sd) {
    if (sd <= 0.0) return std::abs(mu);
    return sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mu * mu / (2.0 * sd * sd)) +
           mu * std::erf(mu / (sd * std::numbers::sqrt2));
}

double gaussian_energy_distance_1d(double mean_diff, double sd) {
    const double pair_sd = std::numbers::sqrt2 * sd;
    return 2.0 * folded_normal_mean(mean_diff, pair_sd) - 2.0 * folded_normal_mean(0.0, pair_sd);
}

}  // namespace rml::scoring
