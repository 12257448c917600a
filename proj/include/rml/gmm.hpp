#pragma once

// Isotropic Gaussian mixtures and the exact reverse conditionals of the
// matched-marginal bridges started from them.

#include "rml/bridge.hpp"
#include "rml/common.hpp"
#include "rml/engine.hpp"
#include "rml/random.hpp"

namespace rml::gmm {

using bridge::Scheme;

struct GmmSpec {
    Matrix means;    // K x d
    Vector weights;  // K, positive, sums to 1
    double sigma = 0.25;  // component standard deviation

    void validate() const;
    Index dim() const { return means.cols(); }
    Index components() const { return means.rows(); }

    Matrix sample(Index n, Rng& rng) const;
    double density(const RowVector& x) const;
    Vector density(const Matrix& x) const;
    double peak_density() const;  // max over component means, refined locally

    // +-1 with equal weights in one dimension.
    static GmmSpec symmetric_1d(double sigma);
    // (0,0), (5,5), (6,-1) with weight 1/3 each and sigma 0.1.
    static GmmSpec three_component_2d();
};

struct ReverseParams {
    Scheme scheme = Scheme::x_process;
    Index t = 1;
    Index T = 1;
    double sigma = 0.25;
    double a = 0.0;     // slope of E[X_{t-1} | X_t, s] in X_t
    double tau2 = 0.0;  // conditional variance of X_{t-1} | X_t, s
    double var_t = 1.0;  // Var(X_t | s) per coordinate

    // b_s = s (1 - (t-1)/T - a (1 - t/T)) for a component centred at s.
    double intercept(double s) const;
    // Logistic posterior weight of component s in {+1, -1} at x for the symmetric 1-D mixture.
    double weight(double s, double x) const;
};

ReverseParams reverse_params(Scheme scheme, double sigma, Index t, Index T);

// Posterior-component-then-Gaussian draw for the symmetric 1-D mixture.
double sample_reverse(const ReverseParams& p, double x_t, Rng& rng);

// Exact reverse kernel for any isotropic mixture under a matched-marginal
// bridge applied coordinatewise.
class GmmOracle final : public engine::ReverseKernel {
public:
    GmmOracle(GmmSpec spec, Scheme scheme, Index T);

    Index steps() const override { return T_; }
    Index dim(Index) const override { return spec_.dim(); }
    Matrix step(Index t, const Matrix& x_t, const Matrix* y, Rng& rng) const override;

    const ReverseParams& params(Index t) const { return params_.at(static_cast<std::size_t>(t - 1)); }
    const GmmSpec& spec() const { return spec_; }

private:
    GmmSpec spec_;
    Scheme scheme_;
    Index T_;
    std::vector<ReverseParams> params_;
};

// Fraction of rows whose mixture density is below `relative` times the peak density.
double low_density_fraction(const GmmSpec& spec, const Matrix& samples, double relative = 0.01);

// Quantile function of a 1-D mixture (bisection on the CDF).
double mixture_quantile(const GmmSpec& spec, double u);

}  // namespace rml::gmm
