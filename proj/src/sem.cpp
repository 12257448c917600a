#include "rml/sem.hpp"

#include "rml/nn.hpp"
#include "rml/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rml::sem {

namespace {

double std_normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }
double std_normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

void check_data(const Matrix& data) {
    if (data.cols() < 1) throw ConfigError("SEM data needs at least one column");
    if (data.rows() <= data.cols())
        throw InsufficientSamples("SEM estimators need n > d (n=" + std::to_string(data.rows()) +
                                  ", d=" + std::to_string(data.cols()) + ")");
}

Vector lower_to_vector(const Matrix& B) {
    const Index d = B.rows();
    Vector v(d * (d - 1) / 2);
    Index p = 0;
    for (Index i = 1; i < d; ++i)
        for (Index j = 0; j < i; ++j) v[p++] = B(i, j);
    return v;
}

Matrix vector_to_lower(const Vector& v, Index d) {
    Matrix B = Matrix::Zero(d, d);
    Index p = 0;
    for (Index i = 1; i < d; ++i)
        for (Index j = 0; j < i; ++j) B(i, j) = v[p++];
    return B;
}

Matrix unit_lower_inverse(const Matrix& B) {
    const Matrix IminusB = Matrix::Identity(B.rows(), B.cols()) - B;
    return IminusB.triangularView<Eigen::UnitLower>().solve(Matrix::Identity(B.rows(), B.cols()));
}

Vector uniform_start(Index size, Rng& rng) {
    Vector v(size);
    for (Index i = 0; i < size; ++i) v[i] = -0.1 + 0.2 * uniform01(rng);
    return v;
}

}  // namespace

void SemSpec::validate() const {
    if (B.rows() != B.cols() || B.rows() < 1) throw ConfigError("SEM adjacency must be a non-empty square matrix");
    for (Index i = 0; i < B.rows(); ++i)
        for (Index j = i; j < B.cols(); ++j)
            if (B(i, j) != 0.0) throw ConfigError("SEM adjacency must be strictly lower triangular");
    if (!B.allFinite()) throw ConfigError("SEM adjacency must be finite");
}

SemSpec SemSpec::zero(Index d) { return {Matrix::Zero(d, d)}; }

SemSpec SemSpec::random(Index d, Rng& rng) {
    SemSpec s{Matrix::Zero(d, d)};
    for (Index i = 1; i < d; ++i)
        for (Index j = 0; j < i; ++j) s.B(i, j) = -1.0 + 2.0 * uniform01(rng);
    return s;
}

Matrix sem_sample(const SemSpec& spec, Index n, Rng& rng) {
    spec.validate();
    const Index d = spec.dim();
    const Matrix eps = standard_normal(n, d, rng);
    const Matrix IminusB = Matrix::Identity(d, d) - spec.B;
    // Rows x_i solve (I - B) x_i = eps_i.
    return IminusB.triangularView<Eigen::UnitLower>().solve(eps.transpose()).transpose();
}

// ---------------------------------------------------------------------------

Estimate estimate_mle(const Matrix& data) {
    check_data(data);
    const Index d = data.cols();
    Estimate est{Matrix::Zero(d, d), true, 1};
    for (Index k = 1; k < d; ++k) {
        const auto Z = data.leftCols(k);
        Eigen::ColPivHouseholderQR<Matrix> qr(Z);
        if (qr.rank() < k)
            throw NumericError("singular Gram matrix for coordinate " + std::to_string(k + 1) +
                               ": regressors are collinear");
        est.B.row(k).head(k) = qr.solve(data.col(k)).transpose();
    }
    return est;
}

double rml_objective(const Matrix& data, Index k, const Vector& b, Vector* gradient) {
    const auto Z = data.leftCols(k);
    const Vector u = data.col(k) - Z * b;
    const double n = static_cast<double>(data.rows());
    double value = 0.0;
    Vector score(u.size());
    for (Index i = 0; i < u.size(); ++i) {
        const double c = std_normal_cdf(u[i]);
        value += u[i] * (2.0 * c - 1.0) + 2.0 * std_normal_pdf(u[i]);
        score[i] = 2.0 * c - 1.0;
    }
    if (gradient) *gradient = -(Z.transpose() * score) / n;
    return value / n;
}

Estimate estimate_rml(const Matrix& data, Rng& rng, const RmlConfig& cfg) {
    check_data(data);
    const Index d = data.cols();
    const double n = static_cast<double>(data.rows());
    Estimate est{Matrix::Zero(d, d), true, 0};
    for (Index k = 1; k < d; ++k) {
        const auto Z = data.leftCols(k);
        Vector b = uniform_start(k, rng);
        Vector grad;
        double value = rml_objective(data, k, b, &grad);
        bool done = grad.norm() < cfg.tolerance;
        Index it = 0;
        for (; it < cfg.max_iterations && !done; ++it) {
            const Vector u = data.col(k) - Z * b;
            Vector w(u.size());
            for (Index i = 0; i < u.size(); ++i) w[i] = 2.0 * std_normal_pdf(u[i]);
            const Matrix H = Z.transpose() * w.asDiagonal() * Z / n;
            const Vector direction = -H.ldlt().solve(grad);
            // Backtracking keeps the convex objective decreasing far from the optimum.
            double step = 1.0;
            Vector candidate_grad;
            double candidate = 0.0;
            for (int half = 0; half < 40; ++half, step *= 0.5) {
                candidate = rml_objective(data, k, b + step * direction, &candidate_grad);
                if (candidate <= value + 1e-4 * step * grad.dot(direction)) break;
            }
            b += step * direction;
            value = candidate;
            grad = candidate_grad;
            done = grad.norm() < cfg.tolerance || step * direction.norm() < 1e-15;
        }
        est.iterations = std::max(est.iterations, it);
        est.converged = est.converged && done;
        est.B.row(k).head(k) = b.transpose();
    }
    return est;
}

// ---------------------------------------------------------------------------

double engression_objective(const Matrix& B, const Matrix& data, const Matrix& eps, const Matrix& eps_prime,
                            Matrix* gradient) {
    const Index n = data.rows();
    const Matrix M = unit_lower_inverse(B);
    const Matrix g1 = eps * M.transpose();
    const Matrix g2 = eps_prime * M.transpose();
    const Matrix r = data - g1;
    const Matrix q = g1 - g2;
    const Eigen::ArrayXd rn = r.rowwise().norm().array();
    const Eigen::ArrayXd qn = q.rowwise().norm().array();
    const double value = rn.sum() - 0.5 * qn.sum();
    // Subgradient 0 where a norm vanishes.
    const Eigen::ArrayXd inv_r = (rn > 0.0).select(rn.inverse(), 0.0);
    const Eigen::ArrayXd half_inv_q = (qn > 0.0).select(0.5 * qn.inverse(), 0.0);
    const Matrix a2 = (q.array().colwise() * half_inv_q).matrix();
    const Matrix a1 = -(r.array().colwise() * inv_r).matrix() - a2;
    const double inv_n = 1.0 / static_cast<double>(n);
    if (gradient) {
        // g = M e and dM = M dB M, so dL/dB = M^T sum_i adj_i g_i^T.
        const Matrix full = M.transpose() * (a1.transpose() * g1 + a2.transpose() * g2) * inv_n;
        *gradient = full.triangularView<Eigen::StrictlyLower>();
    }
    return value * inv_n;
}

Estimate estimate_engression(const Matrix& data, Rng& rng, const EngressionConfig& cfg) {
    check_data(data);
    if (cfg.warmup < 0 || cfg.averaged < 1) throw ConfigError("engression needs averaged >= 1 and warmup >= 0");
    const Index d = data.cols();
    const Index n = data.rows();
    Vector theta = uniform_start(d * (d - 1) / 2, rng);
    Vector sum = Vector::Zero(theta.size());
    nn::VectorAdam adam(theta.size(), {.learning_rate = cfg.learning_rate});
    const Index m = cfg.batch_size > 0 ? std::min(cfg.batch_size, n) : n;
    Matrix batch(m, d);
    Matrix eps(m, d);
    Matrix eps_prime(m, d);
    Matrix grad;
    const Index total = cfg.warmup + cfg.averaged;
    for (Index it = 0; it < total; ++it) {
        if (m < n)
            for (Index i = 0; i < m; ++i) batch.row(i) = data.row(uniform_index(n, rng));
        fill_standard_normal(eps, rng);
        fill_standard_normal(eps_prime, rng);
        engression_objective(vector_to_lower(theta, d), m < n ? batch : data, eps, eps_prime, &grad);
        adam.step(theta, lower_to_vector(grad));
        if (it >= cfg.warmup) sum += theta;
    }
    Estimate est{vector_to_lower(sum / static_cast<double>(cfg.averaged), d), true, total};
    est.converged = est.B.allFinite();
    return est;
}

// ---------------------------------------------------------------------------

std::string method_name(Method m) {
    switch (m) {
        case Method::engression: return "engression";
        case Method::rml: return "rml";
        case Method::mle: return "mle";
    }
    return "?";
}

double asymptotic_variance(Method method, const SemSpec& spec) {
    spec.validate();
    const Index d = spec.dim();
    double sum = static_cast<double>(d * (d - 1) / 2);
    // Row i (1-based) of B carries weight d - i.
    for (Index i = 1; i < d; ++i)
        for (Index j = 0; j < i; ++j) sum += static_cast<double>(d - (i + 1)) * spec.B(i, j) * spec.B(i, j);
    switch (method) {
        case Method::rml: return std::numbers::pi / 3.0 * sum;
        case Method::mle: return sum;
        case Method::engression: break;
    }
    throw ConfigError("no closed-form asymptotic variance for the engression estimator");
}

MethodSummary summarize(const SemSpec& spec, const std::vector<Matrix>& estimates) {
    if (estimates.empty()) throw InsufficientSamples("no estimates to summarise");
    const Vector truth = lower_to_vector(spec.B);
    const Index p = truth.size();
    const double r = static_cast<double>(estimates.size());
    Vector mean = Vector::Zero(p);
    for (const auto& e : estimates) mean += lower_to_vector(e);
    mean /= r;
    Vector var = Vector::Zero(p);
    if (estimates.size() > 1) {
        for (const auto& e : estimates) var += (lower_to_vector(e) - mean).array().square().matrix();
        var /= r - 1.0;
    }
    MethodSummary s;
    s.d = spec.dim();
    s.replications = static_cast<Index>(estimates.size());
    s.bias_sq_sum = (mean - truth).squaredNorm();
    s.variance_sum = var.sum();
    return s;
}

std::vector<MethodSummary> efficiency_study(const SemSpec& spec, const StudyConfig& cfg) {
    spec.validate();
    if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
    std::vector<MethodSummary> out;
    for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
        const Index n = cfg.sample_sizes[ni];
        const std::size_t reps = static_cast<std::size_t>(cfg.replications);
        std::vector<std::vector<Matrix>> est(cfg.methods.size(), std::vector<Matrix>(reps));
        std::vector<std::vector<char>> flags(cfg.methods.size(), std::vector<char>(reps, 1));
        parallel_for(reps, cfg.threads, [&](std::size_t r) {
            Rng data_rng = make_rng(cfg.seed, (static_cast<std::uint64_t>(n) << 20) + r);
            const Matrix X = sem_sample(spec, n, data_rng);
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                Rng fit_rng = make_rng(cfg.seed ^ 0x5EEDULL, (static_cast<std::uint64_t>(n) << 24) + (r << 3) + m);
                Estimate e;
                switch (cfg.methods[m]) {
                    case Method::engression: e = estimate_engression(X, fit_rng, cfg.engression); break;
                    case Method::rml: e = estimate_rml(X, fit_rng, cfg.rml); break;
                    case Method::mle: e = estimate_mle(X); break;
                }
                est[m][r] = std::move(e.B);
                flags[m][r] = e.converged ? 1 : 0;
            }
        });
        double mle_var = 0.0;
        std::vector<MethodSummary> block;
        for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
            MethodSummary s = summarize(spec, est[m]);
            s.method = cfg.methods[m];
            s.n = n;
            for (char f : flags[m]) s.nonconverged += f ? 0 : 1;
            if (s.method == Method::mle) mle_var = s.variance_sum;
            block.push_back(s);
        }
        for (auto& s : block) {
            s.ratio_vs_mle = mle_var > 0.0 ? s.variance_sum / mle_var : std::nan("");
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace rml::sem
