#include "rml/experiments.hpp"

#include "rml/metrics.hpp"
#include "rml/parallel.hpp"
#include "rml/scoring.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <numeric>

namespace rml::experiments {

SampleQuality assess(const gmm::GmmSpec& target, const Matrix& samples, const Matrix& truth) {
    return {scoring::energy_distance(samples, truth), gmm::low_density_fraction(target, samples, 0.01)};
}

void GmmStudyConfig::validate() const {
    target.validate();
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (n_train < 1 || n_generate < 2) throw ConfigError("gmm study needs n_train >= 1 and n_generate >= 2");
    network.validate();
    train.validate();
}

TrainedStack train_gmm_stack(const GmmStudyConfig& cfg, bridge::Scheme scheme, Index steps, std::uint64_t stream) {
    cfg.validate();
    Rng data_rng = make_rng(cfg.seed, 0);
    const SampleBatch data(cfg.target.sample(cfg.n_train, data_rng));
    TrainedStack out;
    out.bridge = std::make_shared<const bridge::MatchedMarginalBridge>(scheme, steps, cfg.target.dim());
    Rng rng = make_rng(cfg.seed, stream);
    out.stack = std::make_unique<engine::GeneratorStack>(out.bridge, 0, cfg.network, rng);
    out.losses = engine::train(*out.stack, data, cfg.train, rng);
    return out;
}

GmmComparison gmm_comparison(const GmmStudyConfig& cfg) {
    cfg.validate();
    GmmComparison res;
    TrainedStack multi, single;
    // Stream 10 for the multi-step stack, 11 for engression.
    parallel_for(2, cfg.threads, [&](std::size_t i) {
        if (i == 0)
            multi = train_gmm_stack(cfg, cfg.scheme, cfg.steps, 10);
        else
            single = train_gmm_stack(cfg, cfg.scheme, 1, 11);
    });
    Rng rng = make_rng(cfg.seed, 20);
    res.truth = cfg.target.sample(cfg.n_generate, rng);
    const Matrix truth2 = cfg.target.sample(cfg.n_generate, rng);
    res.truth_baseline = scoring::energy_distance(res.truth, truth2);
    res.rml_samples = engine::reverse_markov_sample(*multi.stack, *multi.bridge, nullptr, cfg.n_generate, rng);
    res.engression_samples =
        engine::reverse_markov_sample(*single.stack, *single.bridge, nullptr, cfg.n_generate, rng);
    res.rml = assess(cfg.target, res.rml_samples, res.truth);
    res.engression = assess(cfg.target, res.engression_samples, res.truth);
    res.rml_losses = std::move(multi.losses);
    res.engression_losses = std::move(single.losses);
    return res;
}

AlternatingComparison alternating_comparison(const GmmStudyConfig& cfg) {
    cfg.validate();
    TrainedStack trained = train_gmm_stack(cfg, cfg.scheme, cfg.steps, 30);
    Rng rng = make_rng(cfg.seed, 31);
    const Matrix truth = cfg.target.sample(cfg.n_generate, rng);
    AlternatingComparison res;
    res.plain_samples = engine::reverse_markov_sample(*trained.stack, *trained.bridge, nullptr, cfg.n_generate, rng);
    res.alternating_samples = engine::alternating_generate(*trained.stack, *trained.bridge, engine::zero_schedule(),
                                                           nullptr, cfg.n_generate, rng);
    res.plain = assess(cfg.target, res.plain_samples, truth);
    res.alternating = assess(cfg.target, res.alternating_samples, truth);
    res.losses = std::move(trained.losses);
    return res;
}

ForwardCompareResult forward_compare(const ForwardCompareConfig& cfg) {
    cfg.base.validate();
    if (cfg.schemes.empty() || cfg.repetitions < 1) throw ConfigError("forward comparison needs schemes and repetitions");
    const auto K = cfg.schemes.size();
    const auto R = static_cast<std::size_t>(cfg.repetitions);
    ForwardCompareResult res;
    res.schemes = cfg.schemes;
    res.energy.assign(R, std::vector<double>(K, 0.0));
    res.low_density.assign(R, std::vector<double>(K, 0.0));
    parallel_for(R * K, cfg.base.threads, [&](std::size_t job) {
        const std::size_t r = job / K;
        const std::size_t k = job % K;
        GmmStudyConfig c = cfg.base;
        // Each repetition has its own data and initialisation, shared by all schemes.
        c.seed = mix64(cfg.base.seed + 1000 * r);
        TrainedStack trained = train_gmm_stack(c, cfg.schemes[k], c.steps, 40);
        Rng rng = make_rng(c.seed, 41 + k);
        const Matrix samples = engine::reverse_markov_sample(*trained.stack, *trained.bridge, nullptr, c.n_generate, rng);
        Rng truth_rng = make_rng(c.seed, 50);
        const Matrix truth = c.target.sample(c.n_generate, truth_rng);
        const SampleQuality q = assess(c.target, samples, truth);
        res.energy[r][k] = q.energy_distance;
        res.low_density[r][k] = q.low_density;
    });
    res.wins.assign(K, 0);
    for (const auto& row : res.energy)
        ++res.wins[static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin())];
    return res;
}

std::vector<OracleCheck> oracle_check(const gmm::GmmSpec& target, const std::vector<bridge::Scheme>& schemes,
                                      const std::vector<Index>& steps, Index n, std::uint64_t seed) {
    std::vector<OracleCheck> out;
    std::uint64_t stream = 0;
    for (auto scheme : schemes)
        for (Index T : steps) {
            Rng rng = make_rng(seed, 60 + stream++);
            const bridge::MatchedMarginalBridge b(scheme, T, target.dim());
            const gmm::GmmOracle oracle(target, scheme, T);
            const Matrix x = engine::reverse_markov_sample(oracle, b, nullptr, n, rng);
            const Matrix truth = target.sample(n, rng);
            out.push_back({T, scheme, scoring::energy_distance(x, truth)});
        }
    return out;
}

Matrix stratified_normal(Index n, Rng& rng) {
    if (n < 1) throw ConfigError("stratified_normal needs n >= 1");
    const boost::math::normal_distribution<double> std_normal;
    Matrix z(n, 1);
    for (Index i = 0; i < n; ++i) {
        double u = (static_cast<double>(i) + uniform01(rng)) / static_cast<double>(n);
        u = std::clamp(u, 1e-300, 1.0 - 1e-16);
        z(i, 0) = boost::math::quantile(std_normal, u);
    }
    for (Index i = n - 1; i > 0; --i) std::swap(z(i, 0), z(uniform_index(i + 1, rng), 0));
    return z;
}

void FmCompareConfig::validate() const {
    if (steps.empty()) throw ConfigError("fm-compare needs a step grid");
    for (Index T : steps)
        if (T < 1) throw ConfigError("fm-compare steps must be >= 1");
    if (n < 2 || seeds < 1) throw ConfigError("fm-compare needs n >= 2 and seeds >= 1");
    if (!(oracle_sigma > 0.0)) throw ConfigError("oracle sigma must be positive");
}

std::vector<FmComparePoint> fm_compare(const FmCompareConfig& cfg) {
    cfg.validate();
    const Matrix atoms{{-1.0}, {1.0}};
    const Vector weights = Vector::Constant(2, 0.5);
    const engine::AtomicTargetField field(atoms, weights);
    const gmm::GmmSpec near_atoms = gmm::GmmSpec::symmetric_1d(cfg.oracle_sigma);
    auto atom_quantile = [](double u) { return u < 0.5 ? -1.0 : 1.0; };
    auto w2 = [&](const Matrix& x) {
        return metrics::wasserstein2_to_quantiles(std::vector<double>(x.data(), x.data() + x.size()), atom_quantile);
    };

    const auto G = cfg.steps.size();
    const auto S = static_cast<std::size_t>(cfg.seeds);
    std::vector<double> flow(G * S), oracle(G * S);
    parallel_for(G * S, cfg.threads, [&](std::size_t job) {
        const std::size_t g = job / S;
        const Index T = cfg.steps[g];
        Rng rng = make_rng(cfg.seed, 70 + job);
        const Matrix start = stratified_normal(cfg.n, rng);
        flow[job] = w2(engine::flow_ode_integrate(field, start, nullptr, T));
        const gmm::GmmOracle kernel(near_atoms, bridge::Scheme::flow_matching, T);
        // The oracle chain is stochastic: i.i.d. terminal draws keep its output i.i.d.
        Matrix x = standard_normal(cfg.n, 1, rng);
        for (Index t = T; t >= 1; --t) x = kernel.step(t, x, nullptr, rng);
        oracle[job] = w2(x);
    });
    std::vector<FmComparePoint> out;
    for (std::size_t g = 0; g < G; ++g) {
        FmComparePoint p;
        p.steps = cfg.steps[g];
        for (std::size_t s = 0; s < S; ++s) {
            p.flow_error += flow[g * S + s] / static_cast<double>(S);
            p.oracle_error += oracle[g * S + s] / static_cast<double>(S);
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace rml::experiments
