#pragma once

// Synthetic spatial fields and the pooling-bridge study across kernel sizes.

#include "rml/common.hpp"
#include "rml/engine.hpp"
#include "rml/random.hpp"

#include <string>
#include <vector>

namespace rml::spatial {

// Each field: i.i.d. N(0, 1) noise circularly convolved with a Gaussian kernel
// of standard deviation `smoothing` pixels (0 = identity), normalised to unit
// pointwise variance, plus the fundamental cosine and sine along each axis
// with i.i.d. N(0, mode_scale^2) coefficients.
struct SpatialFieldSpec {
    Index side = 16;
    double smoothing = 1.5;
    double mode_scale = 1.0;

    void validate() const;
    Index dim() const { return side * side; }
};

// Kernel weights w(dx, dy) on the periodic grid with sum w^2 = 1.
Matrix smoothing_kernel(const SpatialFieldSpec& spec);

SampleBatch synth_fields(const SpatialFieldSpec& spec, Index n, Rng& rng);

// Horizontal lag-1 correlation pooled over all rows, locations and fields.
double lag1_autocorrelation(const Matrix& fields, Index side);
// Exact lag-1 correlation of the smoothed noise alone (mode_scale = 0).
double kernel_lag1_autocorrelation(const SpatialFieldSpec& spec);

struct MetricPanel {
    double joint_energy = 0.0;
    double marginal_energy_mean = 0.0;
    double marginal_energy_max = 0.0;
    double marginal_w2_mean = 0.0;
    double marginal_w2_max = 0.0;
    double rank_tv = 0.0;

    static const std::vector<std::string>& names();
    std::vector<double> values() const;
};

// `generated` must hold at least truth.rows() * ensemble rows; the first
// truth.rows() rows feed the distances, consecutive blocks of `ensemble` rows
// form the per-truth ensembles of the rank histogram.
MetricPanel evaluate_panel(const Matrix& truth, const Matrix& generated, Index ensemble, Rng& rng);

// per_step: train.iterations counts updates per generator, so a configuration
// with T steps runs T * train.iterations iterations. total: every
// configuration runs train.iterations iterations.
enum class Budget { per_step, total };

struct PoolingStudyConfig {
    SpatialFieldSpec field;
    std::vector<Index> kernels{2, 4};
    Index n_train = 2000;
    Index n_eval = 1000;
    Index ensemble = 19;
    engine::NetworkConfig network;
    engine::TrainConfig train;
    Budget budget = Budget::per_step;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
};

struct PoolingResult {
    Index kernel = 0;
    Index steps = 0;
    MetricPanel metrics;
    double runtime_seconds = 0.0;
    bool diverged = false;
    std::string message;
    std::vector<engine::LossRecord> losses;
};

struct StudyReport {
    std::vector<PoolingResult> results;
    MetricPanel truth_baseline;  // held-out truth against the evaluation truth
};

StudyReport pooling_study(const PoolingStudyConfig& cfg);

}  // namespace rml::spatial
