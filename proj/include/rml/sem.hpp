#pragma once

// Linear Gaussian structural equation model X = B X + eps with strictly lower
// triangular B, and three estimators of B.

#include "rml/common.hpp"
#include "rml/random.hpp"

#include <string>
#include <vector>

namespace rml::sem {

struct SemSpec {
    Matrix B;  // d x d, strictly lower triangular

    Index dim() const { return B.rows(); }
    void validate() const;
    Index free_parameters() const { return dim() * (dim() - 1) / 2; }

    static SemSpec zero(Index d);
    // i.i.d. Uniform(-1, 1) on the strictly lower triangle.
    static SemSpec random(Index d, Rng& rng);
};

// X = (I - B)^{-1} eps, eps ~ N(0, I), via a unit-lower-triangular solve.
Matrix sem_sample(const SemSpec& spec, Index n, Rng& rng);

struct Estimate {
    Matrix B;
    bool converged = true;
    Index iterations = 0;
};

// Row-wise least squares. Throws NumericError on a singular Gram matrix.
Estimate estimate_mle(const Matrix& data);

struct RmlConfig {
    Index max_iterations = 100;
    double tolerance = 1e-10;  // on the gradient norm
};

// Per-coordinate minimiser of mean rho(x_k - b^T x_{<k}) with
// rho(u) = E|u - N(0,1)| = u (2 Phi(u) - 1) + 2 phi(u).
// Damped Newton from a Uniform(-0.1, 0.1) start.
Estimate estimate_rml(const Matrix& data, Rng& rng, const RmlConfig& cfg = {});

// Empirical per-coordinate RML objective and its gradient at b.
double rml_objective(const Matrix& data, Index k, const Vector& b, Vector* gradient = nullptr);

struct EngressionConfig {
    Index warmup = 500;     // Adam iterations before averaging starts
    Index averaged = 2500;  // Adam iterations whose iterates are averaged
    double learning_rate = 1e-2;
    Index batch_size = 0;  // observations per iteration; 0 uses all of them
};

// Joint energy loss mean_i ||x_i - M e_i|| - 0.5 ||M (e_i - e'_i)||, M = (I - B)^{-1},
// minimised by minibatch Adam with iterate averaging; every sampled observation
// gets a fresh (e_i, e'_i) pair at every iteration.
Estimate estimate_engression(const Matrix& data, Rng& rng, const EngressionConfig& cfg = {});

// The Monte Carlo engression loss and its gradient w.r.t. the lower triangle of B.
double engression_objective(const Matrix& B, const Matrix& data, const Matrix& eps, const Matrix& eps_prime,
                            Matrix* gradient = nullptr);

enum class Method { engression, rml, mle };
std::string method_name(Method m);

// Trace of the asymptotic covariance of sqrt(n) (B_hat - B*) over the free entries.
double asymptotic_variance(Method method, const SemSpec& spec);

struct MethodSummary {
    Method method = Method::mle;
    Index d = 0;
    Index n = 0;
    Index replications = 0;
    double bias_sq_sum = 0.0;
    double variance_sum = 0.0;
    double ratio_vs_mle = 0.0;
    Index nonconverged = 0;
};

struct StudyConfig {
    std::vector<Index> sample_sizes{100, 1000, 10000};
    Index replications = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<Method> methods{Method::engression, Method::rml, Method::mle};
    EngressionConfig engression;
    RmlConfig rml;
};

// Bias^2 and variance sums over the free entries for every (n, method).
std::vector<MethodSummary> efficiency_study(const SemSpec& spec, const StudyConfig& cfg);

// Same statistics from raw estimates (one matrix per replication).
MethodSummary summarize(const SemSpec& spec, const std::vector<Matrix>& estimates);

}  // namespace rml::sem
