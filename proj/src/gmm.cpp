#include "rml/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rml::gmm {

void GmmSpec::validate() const {
    if (means.rows() == 0 || means.cols() == 0) throw ConfigError("mixture needs at least one component");
    if (weights.size() != means.rows()) throw ConfigError("mixture needs one weight per component");
    if ((weights.array() <= 0.0).any()) throw ConfigError("mixture weights must be positive");
    if (std::abs(weights.sum() - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
    if (!(sigma > 0.0)) throw ConfigError("mixture sigma must be positive");
}

GmmSpec GmmSpec::symmetric_1d(double sigma) {
    GmmSpec s;
    s.means = Matrix{{1.0}, {-1.0}};
    s.weights = Vector::Constant(2, 0.5);
    s.sigma = sigma;
    s.validate();
    return s;
}

GmmSpec GmmSpec::three_component_2d() {
    GmmSpec s;
    s.means = Matrix{{0.0, 0.0}, {5.0, 5.0}, {6.0, -1.0}};
    s.weights = Vector::Constant(3, 1.0 / 3.0);
    s.sigma = 0.1;
    s.validate();
    return s;
}

Matrix GmmSpec::sample(Index n, Rng& rng) const {
    validate();
    Matrix out(n, dim());
    for (Index i = 0; i < n; ++i) {
        double u = uniform01(rng);
        Index k = 0;
        while (k + 1 < components() && u >= weights[k]) u -= weights[k++];
        for (Index j = 0; j < dim(); ++j) out(i, j) = means(k, j) + sigma * standard_normal(rng);
    }
    return out;
}

double GmmSpec::density(const RowVector& x) const {
    const double d = static_cast<double>(dim());
    const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * d);
    double p = 0.0;
    for (Index k = 0; k < components(); ++k)
        p += weights[k] * norm * std::exp(-(x - means.row(k)).squaredNorm() / (2.0 * sigma * sigma));
    return p;
}

Vector GmmSpec::density(const Matrix& x) const {
    Vector out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) out[i] = density(RowVector(x.row(i)));
    return out;
}

double GmmSpec::peak_density() const {
    // Start at every mean and follow the mean-shift fixed point, which climbs the density.
    double best = 0.0;
    for (Index k = 0; k < components(); ++k) {
        RowVector x = means.row(k);
        for (int it = 0; it < 200; ++it) {
            RowVector num = RowVector::Zero(dim());
            double den = 0.0;
            for (Index j = 0; j < components(); ++j) {
                const double w = weights[j] * std::exp(-(x - means.row(j)).squaredNorm() / (2.0 * sigma * sigma));
                num += w * means.row(j);
                den += w;
            }
            const RowVector next = num / den;
            const bool done = (next - x).norm() < 1e-14;
            x = next;
            if (done) break;
        }
        best = std::max(best, density(x));
    }
    return best;
}

// ---------------------------------------------------------------------------

ReverseParams reverse_params(Scheme scheme, double sigma, Index t, Index T) {
    if (T < 1 || t < 1 || t > T)
        throw ConfigError("reverse conditional needs 1 <= t <= T (t=" + std::to_string(t) + ", T=" +
                          std::to_string(T) + ")");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    const double TT = static_cast<double>(T);
    const double r_prev = static_cast<double>(t - 1) / TT;
    const double r = static_cast<double>(t) / TT;
    const double s2 = sigma * sigma;
    double cov_eps = 0.0;
    switch (scheme) {
        case Scheme::flow_matching: cov_eps = r_prev * r; break;
        case Scheme::diffusion: cov_eps = r_prev * r_prev; break;
        case Scheme::x_process: cov_eps = 0.0; break;
    }
    const double var_prev = (1.0 - r_prev) * (1.0 - r_prev) * s2 + r_prev * r_prev;
    const double var_t = (1.0 - r) * (1.0 - r) * s2 + r * r;
    const double cov = (1.0 - r_prev) * (1.0 - r) * s2 + cov_eps;
    ReverseParams p;
    p.scheme = scheme;
    p.t = t;
    p.T = T;
    p.sigma = sigma;
    p.var_t = var_t;
    p.a = cov / var_t;
    p.tau2 = std::max(0.0, var_prev - cov * cov / var_t);
    return p;
}

double ReverseParams::intercept(double s) const {
    const double TT = static_cast<double>(T);
    return s * (1.0 - static_cast<double>(t - 1) / TT - a * (1.0 - static_cast<double>(t) / TT));
}

double ReverseParams::weight(double s, double x) const {
    const double c = 1.0 - static_cast<double>(t) / static_cast<double>(T);
    return 1.0 / (1.0 + std::exp(-2.0 * s * x * c / var_t));
}

double sample_reverse(const ReverseParams& p, double x_t, Rng& rng) {
    const double s = uniform01(rng) < p.weight(1.0, x_t) ? 1.0 : -1.0;
    return p.a * x_t + p.intercept(s) + std::sqrt(p.tau2) * standard_normal(rng);
}

// ---------------------------------------------------------------------------

GmmOracle::GmmOracle(GmmSpec spec, Scheme scheme, Index T) : spec_(std::move(spec)), scheme_(scheme), T_(T) {
    spec_.validate();
    for (Index t = 1; t <= T; ++t) params_.push_back(reverse_params(scheme, spec_.sigma, t, T));
}

Matrix GmmOracle::step(Index t, const Matrix& x_t, const Matrix*, Rng& rng) const {
    const ReverseParams& p = params(t);
    if (x_t.cols() != spec_.dim()) throw ConfigError("oracle input dimension mismatch");
    const double TT = static_cast<double>(T_);
    const double c_t = 1.0 - static_cast<double>(t) / TT;
    const double c_prev = 1.0 - static_cast<double>(t - 1) / TT;
    const double tau = std::sqrt(p.tau2);
    const Index K = spec_.components();
    Vector logits(K);
    Matrix out(x_t.rows(), x_t.cols());
    for (Index i = 0; i < x_t.rows(); ++i) {
        for (Index k = 0; k < K; ++k)
            logits[k] = std::log(spec_.weights[k]) - (x_t.row(i) - c_t * spec_.means.row(k)).squaredNorm() /
                                                         (2.0 * p.var_t);
        const Vector w = (logits.array() - logits.maxCoeff()).exp();
        double u = uniform01(rng) * w.sum();
        Index k = 0;
        while (k + 1 < K && u >= w[k]) u -= w[k++];
        // E[X_{t-1} | x_t, k] = c_prev mu_k + a (x_t - c_t mu_k).
        for (Index j = 0; j < x_t.cols(); ++j)
            out(i, j) = c_prev * spec_.means(k, j) + p.a * (x_t(i, j) - c_t * spec_.means(k, j)) +
                        tau * standard_normal(rng);
    }
    return out;
}

double low_density_fraction(const GmmSpec& spec, const Matrix& samples, double relative) {
    if (samples.rows() == 0) throw InsufficientSamples("low_density_fraction on an empty batch");
    const double threshold = relative * spec.peak_density();
    Index low = 0;
    for (Index i = 0; i < samples.rows(); ++i)
        if (spec.density(RowVector(samples.row(i))) < threshold) ++low;
    return static_cast<double>(low) / static_cast<double>(samples.rows());
}

double mixture_quantile(const GmmSpec& spec, double u) {
    if (spec.dim() != 1) throw ConfigError("mixture_quantile needs a one-dimensional mixture");
    if (!(u > 0.0 && u < 1.0)) throw ConfigError("quantile level must lie in (0, 1)");
    auto cdf = [&](double x) {
        double c = 0.0;
        for (Index k = 0; k < spec.components(); ++k)
            c += spec.weights[k] * 0.5 * std::erfc(-(x - spec.means(k, 0)) / (spec.sigma * std::numbers::sqrt2));
        return c;
    };
    double lo = spec.means.minCoeff() - 40.0 * spec.sigma;
    double hi = spec.means.maxCoeff() + 40.0 * spec.sigma;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace rml::gmm
