#include "rml/spatial.hpp"

#include "rml/bridge.hpp"
#include "rml/metrics.hpp"
#include "rml/parallel.hpp"
#include "rml/scoring.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace rml::spatial {

namespace {

// Periodic 1-D Gaussian with unit l2 norm; the 2-D kernel is its outer product.
Vector periodic_profile(Index side, double smoothing) {
    Vector g = Vector::Zero(side);
    if (smoothing <= 0.0) {
        g[0] = 1.0;
        return g;
    }
    for (Index k = 0; k < side; ++k) {
        const double dist = static_cast<double>(std::min(k, side - k));
        g[k] = std::exp(-dist * dist / (2.0 * smoothing * smoothing));
    }
    return g / g.norm();
}

// Circular convolution of one row-major field with g along both axes.
void smooth_field(RowVector& field, const Vector& g, Index side, Matrix& tmp) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(field.data(), side,
                                                                                                  side);
    tmp.setZero(side, side);
    for (Index i = 0; i < side; ++i)
        for (Index j = 0; j < side; ++j) {
            double s = 0.0;
            for (Index b = 0; b < side; ++b) s += g[b] * z(i, (j - b + side) % side);
            tmp(i, j) = s;
        }
    for (Index i = 0; i < side; ++i)
        for (Index j = 0; j < side; ++j) {
            double s = 0.0;
            for (Index a = 0; a < side; ++a) s += g[a] * tmp((i - a + side) % side, j);
            field[i * side + j] = s;
        }
}

}  // namespace

void SpatialFieldSpec::validate() const {
    if (side < 2 || (side & (side - 1)) != 0)
        throw ConfigError("grid side must be a power of 2 >= 2, got " + std::to_string(side));
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw ConfigError("smoothing must be finite and >= 0");
    if (!(mode_scale >= 0.0) || !std::isfinite(mode_scale)) throw ConfigError("mode scale must be finite and >= 0");
}

Matrix smoothing_kernel(const SpatialFieldSpec& spec) {
    spec.validate();
    const Vector g = periodic_profile(spec.side, spec.smoothing);
    return g * g.transpose();
}

SampleBatch synth_fields(const SpatialFieldSpec& spec, Index n, Rng& rng) {
    spec.validate();
    if (n < 0) throw ConfigError("negative field count");
    const Index r = spec.side;
    Matrix x = standard_normal(n, r * r, rng);
    const Matrix coef = standard_normal(n, 4, rng) * spec.mode_scale;
    const Vector g = periodic_profile(r, spec.smoothing);
    Matrix tmp;
    const double w = 2.0 * std::numbers::pi / static_cast<double>(r);
    for (Index f = 0; f < n; ++f) {
        RowVector row = x.row(f);
        if (spec.smoothing > 0.0) smooth_field(row, g, r, tmp);
        if (spec.mode_scale > 0.0)
            for (Index i = 0; i < r; ++i)
                for (Index j = 0; j < r; ++j)
                    row[i * r + j] += coef(f, 0) * std::cos(w * j) + coef(f, 1) * std::sin(w * j) +
                                      coef(f, 2) * std::cos(w * i) + coef(f, 3) * std::sin(w * i);
        x.row(f) = row;
    }
    return SampleBatch(std::move(x));
}

double lag1_autocorrelation(const Matrix& fields, Index side) {
    if (fields.cols() != side * side) throw ConfigError("lag1_autocorrelation: field size does not match side^2");
    if (fields.rows() == 0 || side < 2) throw InsufficientSamples("lag1_autocorrelation needs fields of side >= 2");
    double su = 0, sv = 0, suu = 0, svv = 0, suv = 0, count = 0;
    for (Index f = 0; f < fields.rows(); ++f)
        for (Index i = 0; i < side; ++i)
            for (Index j = 0; j + 1 < side; ++j) {
                const double u = fields(f, i * side + j);
                const double v = fields(f, i * side + j + 1);
                su += u;
                sv += v;
                suu += u * u;
                svv += v * v;
                suv += u * v;
                count += 1;
            }
    const double cov = suv / count - (su / count) * (sv / count);
    const double vu = suu / count - (su / count) * (su / count);
    const double vv = svv / count - (sv / count) * (sv / count);
    return cov / std::sqrt(vu * vv);
}

double kernel_lag1_autocorrelation(const SpatialFieldSpec& spec) {
    spec.validate();
    const Vector g = periodic_profile(spec.side, spec.smoothing);
    double s = 0.0;
    for (Index k = 0; k < spec.side; ++k) s += g[k] * g[(k + 1) % spec.side];
    return s;
}

const std::vector<std::string>& MetricPanel::names() {
    static const std::vector<std::string> n{"joint_energy_distance", "marginal_energy_mean", "marginal_energy_max",
                                            "marginal_w2_mean",      "marginal_w2_max",      "rank_histogram_tv"};
    return n;
}

std::vector<double> MetricPanel::values() const {
    return {joint_energy, marginal_energy_mean, marginal_energy_max, marginal_w2_mean, marginal_w2_max, rank_tv};
}

MetricPanel evaluate_panel(const Matrix& truth, const Matrix& generated, Index ensemble, Rng& rng) {
    require_same_dim(truth, generated, "evaluate_panel");
    const Index n = truth.rows();
    if (ensemble < 1) throw ConfigError("ensemble size must be >= 1");
    if (generated.rows() < n * ensemble || generated.rows() < n)
        throw InsufficientSamples("evaluate_panel needs truth rows x ensemble generated rows");
    const Matrix head = generated.topRows(n);
    MetricPanel p;
    p.joint_energy = scoring::energy_distance(truth, head);
    const auto me = metrics::marginal_energy_distance(truth, head);
    const auto mw = metrics::marginal_wasserstein(truth, head);
    p.marginal_energy_mean = me.mean;
    p.marginal_energy_max = me.max;
    p.marginal_w2_mean = mw.mean;
    p.marginal_w2_max = mw.max;

    metrics::RankHistogram pooled;
    pooled.counts.assign(static_cast<std::size_t>(ensemble + 1), 0);
    Matrix members(n, ensemble);
    for (Index j = 0; j < truth.cols(); ++j) {
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < ensemble; ++k) members(i, k) = generated(i * ensemble + k, j);
        const auto h = metrics::rank_histogram(truth.col(j), members, rng);
        for (std::size_t b = 0; b < h.counts.size(); ++b) pooled.counts[b] += h.counts[b];
        pooled.tallies += h.tallies;
    }
    p.rank_tv = metrics::rank_histogram_tv(pooled);
    return p;
}

void PoolingStudyConfig::validate() const {
    field.validate();
    if (kernels.empty()) throw ConfigError("pooling study needs at least one kernel size");
    for (Index k : kernels)
        if (k < 2 || field.side % k != 0)
            throw ConfigError("kernel size " + std::to_string(k) + " does not divide grid side " +
                              std::to_string(field.side));
    if (n_train < 1 || n_eval < 2) throw ConfigError("pooling study needs n_train >= 1 and n_eval >= 2");
    if (ensemble < 1) throw ConfigError("ensemble size must be >= 1");
    network.validate();
    train.validate();
}

StudyReport pooling_study(const PoolingStudyConfig& cfg) {
    cfg.validate();
    Rng data_rng = make_rng(cfg.seed, 0);
    const SampleBatch train_set = synth_fields(cfg.field, cfg.n_train, data_rng);
    const Matrix eval_truth = synth_fields(cfg.field, cfg.n_eval, data_rng).x;
    const Matrix held_out = synth_fields(cfg.field, cfg.n_eval * cfg.ensemble, data_rng).x;

    StudyReport report;
    {
        Rng rng = make_rng(cfg.seed, 1);
        report.truth_baseline = evaluate_panel(eval_truth, held_out, cfg.ensemble, rng);
    }

    report.results.resize(cfg.kernels.size());
    parallel_for(cfg.kernels.size(), cfg.threads, [&](std::size_t c) {
        const auto start = std::chrono::steady_clock::now();
        PoolingResult& res = report.results[c];
        res.kernel = cfg.kernels[c];
        auto bridge = std::make_shared<const bridge::PoolingBridge>(cfg.field.side, res.kernel);
        res.steps = bridge->steps();
        Rng rng = make_rng(cfg.seed, 100 + c);
        try {
            engine::GeneratorStack stack(bridge, 0, cfg.network, rng);
            engine::TrainConfig tc = cfg.train;
            if (cfg.budget == Budget::per_step) tc.iterations *= res.steps;
            res.losses = engine::train(stack, train_set, tc, rng);
            const Matrix gen =
                engine::reverse_markov_sample(stack, *bridge, nullptr, cfg.n_eval * cfg.ensemble, rng);
            if (!gen.allFinite()) throw NumericError("non-finite generated fields");
            res.metrics = evaluate_panel(eval_truth, gen, cfg.ensemble, rng);
        } catch (const NumericError& e) {
            if (const auto* d = dynamic_cast<const engine::TrainingDiverged*>(&e)) res.losses = d->trace;
            res.diverged = true;
            res.message = e.what();
            const double nan = std::numeric_limits<double>::quiet_NaN();
            res.metrics = {nan, nan, nan, nan, nan, nan};
        }
        res.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return report;
}

}  // namespace rml::spatial
