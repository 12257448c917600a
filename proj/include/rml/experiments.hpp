#pragma once

// Study drivers shared by the command-line runner and the acceptance suite.

#include "rml/bridge.hpp"
#include "rml/engine.hpp"
#include "rml/gmm.hpp"

#include <cstdint>
#include <vector>

namespace rml::experiments {

struct SampleQuality {
    double energy_distance = 0.0;  // joint, to a fresh truth batch
    double low_density = 0.0;      // fraction below 1% of the peak density
};

SampleQuality assess(const gmm::GmmSpec& target, const Matrix& samples, const Matrix& truth);

struct GmmStudyConfig {
    gmm::GmmSpec target = gmm::GmmSpec::three_component_2d();
    bridge::Scheme scheme = bridge::Scheme::x_process;
    Index steps = 10;
    Index n_train = 10000;
    Index n_generate = 10000;
    engine::NetworkConfig network;
    engine::TrainConfig train;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
};

// Trains a stack of `steps` steps over the matched-marginal bridge on
// n_train target draws.
struct TrainedStack {
    bridge::BridgePtr bridge;
    std::unique_ptr<engine::GeneratorStack> stack;
    std::vector<engine::LossRecord> losses;
};
TrainedStack train_gmm_stack(const GmmStudyConfig& cfg, bridge::Scheme scheme, Index steps, std::uint64_t stream);

// Multi-step RML against single-step engression on the same data.
struct GmmComparison {
    SampleQuality rml;
    SampleQuality engression;
    double truth_baseline = 0.0;  // energy distance between two truth batches
    Matrix rml_samples;
    Matrix engression_samples;
    Matrix truth;
    std::vector<engine::LossRecord> rml_losses;
    std::vector<engine::LossRecord> engression_losses;
};
GmmComparison gmm_comparison(const GmmStudyConfig& cfg);

// Plain reverse generation against alternating generation with s(t) = 0.
struct AlternatingComparison {
    SampleQuality plain;
    SampleQuality alternating;
    Matrix plain_samples;
    Matrix alternating_samples;
    std::vector<engine::LossRecord> losses;
};
AlternatingComparison alternating_comparison(const GmmStudyConfig& cfg);

// Identical stacks trained under each forward scheme, repeated over seeds.
struct ForwardCompareConfig {
    GmmStudyConfig base;
    std::vector<bridge::Scheme> schemes{bridge::Scheme::flow_matching, bridge::Scheme::diffusion,
                                        bridge::Scheme::x_process};
    Index repetitions = 5;
};
struct ForwardCompareResult {
    std::vector<bridge::Scheme> schemes;
    // energy[r][k]: repetition r, scheme k.
    std::vector<std::vector<double>> energy;
    std::vector<std::vector<double>> low_density;
    std::vector<Index> wins;  // per scheme, repetitions with the smallest energy distance
};
ForwardCompareResult forward_compare(const ForwardCompareConfig& cfg);

// Exact reverse sampling with the mixture oracle over a grid of T.
struct OracleCheck {
    Index steps = 0;
    bridge::Scheme scheme = bridge::Scheme::x_process;
    double energy_distance = 0.0;
};
std::vector<OracleCheck> oracle_check(const gmm::GmmSpec& target, const std::vector<bridge::Scheme>& schemes,
                                      const std::vector<Index>& steps, Index n, std::uint64_t seed);

// Stratified standard normal draws Phi^{-1}((i + U_i) / n), shuffled.
Matrix stratified_normal(Index n, Rng& rng);

// Two-atom target at +-1: flow-ODE generation with the exact velocity field
// versus reverse Markov generation with the mixture oracle (tiny sigma) under
// the flow-matching bridge. The deterministic ODE starts from stratified
// normal draws; the oracle chain from i.i.d. ones. Errors are 1-D W2 to the
// target quantiles, averaged over seeds.
struct FmCompareConfig {
    std::vector<Index> steps{2, 5, 10, 50};
    Index n = 2000;
    Index seeds = 20;
    double oracle_sigma = 1e-3;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
};
struct FmComparePoint {
    Index steps = 0;
    double flow_error = 0.0;
    double oracle_error = 0.0;
};
std::vector<FmComparePoint> fm_compare(const FmCompareConfig& cfg);

}  // namespace rml::experiments
