#pragma once

// Energy score, energy distance and the two training losses built on them:
// the engression (energy) loss and the flow-matching regression loss.

#include "rml/common.hpp"
#include "rml/nn.hpp"

namespace rml::scoring {

struct EnergyScoreConfig {
    double beta = 1.0;  // exponent, 0 < beta < 2
    Index samples = 0;  // Monte Carlo sample count (0 = use what is given)

    void validate() const;
};

// S(p, x) estimated from `samples` (rows) drawn from p; unbiased pairwise term.
double energy_score(const Matrix& samples, const Vector& x, const EnergyScoreConfig& cfg = {});

// 2 E|X - X~| - E|X - X'| - E|X~ - X~'| with unbiased within-sample means.
// When both batches have the same size the cross term also averages over i != j,
// which makes ED(a, a) exactly zero. Symmetric in (a, b) bit for bit.
double energy_distance(const Matrix& a, const Matrix& b, double beta = 1.0);

// Per-sample energy loss ||x_i - g1_i|| - 0.5 ||g1_i - g2_i|| averaged over rows, where g1/g2
// are generator outputs for two independent noise draws. Adjoints are d loss / d g1, d g2.
struct EnergyLoss {
    double value = 0.0;
    Matrix d_first;
    Matrix d_second;
};
EnergyLoss energy_loss(const Matrix& target, const Matrix& first, const Matrix& second);

struct LossAndGradient {
    double value = 0.0;
    nn::Gradient gradient;
};

// Engression objective of one generator: inputs are assembled from the generator's layout.
// `state` may be empty (0 columns) for unconditional one-step engression.
LossAndGradient engression_loss(const nn::Mlp& gen, const Matrix& target, const Matrix& state,
                                const Matrix* covariates, double time, const Matrix& noise,
                                const Matrix& noise_prime);

// (1/m) sum_i || field((1-s_i) x0_i + s_i eps_i, y_i, s_i) - (eps_i - x0_i) ||^2.
LossAndGradient fm_regression_loss(const nn::Mlp& field, const Matrix& x0, const Matrix& eps,
                                   const Vector& s, const Matrix* covariates = nullptr);

// E|N(mu, s^2)|, the folded-normal mean.
double folded_normal_mean(double mu, double sd);

// Energy distance between N(m1, sd^2) and N(m2, sd^2) in one dimension.
double gaussian_energy_distance_1d(double mean_diff, double sd = 1.0);

}  // namespace rml::scoring
