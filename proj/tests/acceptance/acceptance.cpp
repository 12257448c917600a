// One PASS/FAIL line per acceptance criterion. `--only N` runs a single one.
// Tolerances and sizes are fixed here; the master seed is 1 throughout.

#include "rml/config.hpp"
#include "rml/engine.hpp"
#include "rml/experiments.hpp"
#include "rml/gmm.hpp"
#include "rml/metrics.hpp"
#include "rml/nn.hpp"
#include "rml/runner.hpp"
#include "rml/scoring.hpp"
#include "rml/sem.hpp"
#include "rml/spatial.hpp"
#include "rml/twosample.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace rml;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

config::ConfigFile parse(const std::string& text) {
    std::istringstream in(text);
    return config::ConfigFile::parse(in, "acceptance");
}

// Study settings come from the runner defaults, i.e. what `rml_lab run` uses
// for a config that only names the experiment and the seed.
template <typename Study>
Study desk_plan(const std::string& tag) {
    return std::get<Study>(runner::plan(parse("experiment = " + tag + "\nseed = " + std::to_string(kSeed) + "\n")).study);
}

// ---------------------------------------------------------------------------

Outcome c1() {
    const auto target = gmm::GmmSpec::symmetric_1d(0.25);
    const std::vector<bridge::Scheme> schemes{bridge::Scheme::flow_matching, bridge::Scheme::diffusion,
                                              bridge::Scheme::x_process};
    const auto checks = experiments::oracle_check(target, schemes, {1, 2, 5, 10}, 10000, kSeed);
    double baseline = 0.0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        Rng rng = make_rng(kSeed, 900 + i);
        const Matrix a = target.sample(10000, rng);
        baseline = std::max(baseline, std::abs(scoring::energy_distance(a, target.sample(10000, rng))));
    }
    double worst = 0.0;
    for (const auto& c : checks) worst = std::max(worst, std::abs(c.energy_distance));
    return {worst <= 1.5 * baseline,
            fmt("max |ED| oracle %.2e over %zu runs, truth-vs-truth max %.2e, limit %.2e", worst, checks.size(),
                baseline, 1.5 * baseline)};
}

Outcome c2() {
    sem::StudyConfig cfg;
    cfg.sample_sizes = {10000};
    cfg.replications = 200;
    cfg.seed = kSeed;
    const auto rows = sem::efficiency_study(sem::SemSpec::zero(2), cfg);
    double rml = 0, mle = 0, eng = 0;
    for (const auto& r : rows) {
        const double nv = static_cast<double>(r.n) * r.variance_sum;
        if (r.method == sem::Method::rml) rml = nv;
        if (r.method == sem::Method::mle) mle = nv;
        if (r.method == sem::Method::engression) eng = nv;
    }
    const bool ok = rml >= 0.89 && rml <= 1.20 && mle >= 0.90 && mle <= 1.10 && eng >= 0.93 && eng <= 1.55;
    return {ok, fmt("n*Var rml %.4f [0.89,1.20] mle %.4f [0.90,1.10] engression %.4f [0.93,1.55]", rml, mle, eng)};
}

Outcome c3() {
    sem::StudyConfig cfg;
    cfg.sample_sizes = {100, 1000, 10000};
    cfg.replications = 100;
    cfg.seed = kSeed;
    const auto rows = sem::efficiency_study(sem::SemSpec::zero(5), cfg);
    bool ok = true;
    std::string detail;
    for (Index n : cfg.sample_sizes) {
        double rml = 0, mle = 0, eng = 0;
        for (const auto& r : rows) {
            if (r.n != n) continue;
            if (r.method == sem::Method::rml) rml = r.variance_sum;
            if (r.method == sem::Method::mle) mle = r.variance_sum;
            if (r.method == sem::Method::engression) eng = r.variance_sum;
        }
        const bool rml_ok = rml <= 1.3 * mle;
        const bool eng_ok = n < 1000 || eng > 10.0 * rml;
        ok = ok && rml_ok && eng_ok;
        detail += fmt("n=%ld rml/mle %.3f%s eng/rml %.2f%s; ", static_cast<long>(n), rml / mle, rml_ok ? "" : "!",
                      eng / rml, eng_ok ? "" : "!");
    }
    return {ok, detail + "need rml/mle <= 1.3, eng/rml > 10 at n >= 1000"};
}

Outcome c4() {
    const auto r = experiments::gmm_comparison(desk_plan<experiments::GmmStudyConfig>("gmm"));
    const bool ldf = r.rml.low_density <= 0.5 * r.engression.low_density;
    const bool ed = r.rml.energy_distance <= 0.5 * r.engression.energy_distance;
    return {ldf && ed, fmt("LDF rml %.4f vs engression %.4f; ED rml %.5f vs engression %.5f (truth %.5f)",
                           r.rml.low_density, r.engression.low_density, r.rml.energy_distance,
                           r.engression.energy_distance, r.truth_baseline)};
}

Outcome c5() {
    const auto c = desk_plan<experiments::GmmStudyConfig>("gmm-alternating");
    const auto r = experiments::alternating_comparison(c);
    return {r.alternating.low_density < r.plain.low_density,
            fmt("LDF alternating %.4f vs plain %.4f (ED %.5f vs %.5f)", r.alternating.low_density,
                r.plain.low_density, r.alternating.energy_distance, r.plain.energy_distance)};
}

Outcome c6() {
    const auto c = desk_plan<experiments::ForwardCompareConfig>("gmm-forward-compare");
    const auto r = experiments::forward_compare(c);
    Index xp = 0;
    std::string detail;
    for (std::size_t k = 0; k < r.schemes.size(); ++k) {
        if (r.schemes[k] == bridge::Scheme::x_process) xp = r.wins[k];
        detail += fmt("%s wins %ld; ", std::string(bridge::scheme_name(r.schemes[k])).c_str(), static_cast<long>(r.wins[k]));
    }
    return {xp >= 4, detail + "need x-process >= 4 of 5"};
}

// Slopes are checked relatively (2%) where |a| >= 0.05. Below that a relative
// check needs more Monte Carlo pairs than is practical, and a = 0 exactly for
// the x-process terminal step, so the estimate must lie within 3 standard
// errors of the closed form instead.
Outcome c7() {
    const double sigma = 0.25;
    const Index T = 5, n = 1000000;
    double worst_a = 0.0, worst_tau = 0.0, worst_z = 0.0;
    for (auto scheme : {bridge::Scheme::flow_matching, bridge::Scheme::diffusion, bridge::Scheme::x_process})
        for (Index t = 1; t <= T; ++t) {
            const auto p = gmm::reverse_params(scheme, sigma, t, T);
            const bridge::MatchedMarginalBridge b(scheme, T, 1);
            Rng rng = make_rng(kSeed, 700 + 10 * static_cast<std::uint64_t>(scheme) + t);
            const Matrix x0 = (1.0 + sigma * standard_normal(n, 1, rng).array()).matrix();
            auto [prev, cur] = b.sample_pair(t, x0, nullptr, rng);
            const double mp = prev.mean(), mc = cur.mean();
            const double cov = ((prev.array() - mp) * (cur.array() - mc)).mean();
            const double var = (cur.array() - mc).square().mean();
            const double slope = cov / var;
            const double resid = ((prev.array() - mp) - slope * (cur.array() - mc)).square().mean();
            if (std::abs(p.a) >= 0.05) {
                worst_a = std::max(worst_a, std::abs(slope - p.a) / std::abs(p.a));
            } else {
                const double se = std::sqrt(resid / (static_cast<double>(n) * var));
                worst_z = std::max(worst_z, std::abs(slope - p.a) / se);
            }
            worst_tau = std::max(worst_tau, std::abs(resid - p.tau2) / p.tau2);
        }
    double worst_limit = 0.0;
    const double Td = static_cast<double>(T);
    for (Index t = 1; t <= T; ++t) {
        const double td = static_cast<double>(t);
        const auto fm = gmm::reverse_params(bridge::Scheme::flow_matching, 1e-4, t, T);
        const auto df = gmm::reverse_params(bridge::Scheme::diffusion, 1e-4, t, T);
        const auto xp = gmm::reverse_params(bridge::Scheme::x_process, 1e-4, t, T);
        worst_limit = std::max({worst_limit, std::abs(fm.a - (td - 1) / td), std::abs(fm.tau2),
                                std::abs(df.a - (td - 1) * (td - 1) / (td * td)),
                                std::abs(df.tau2 - (2 * td - 1) * (td - 1) * (td - 1) / (td * td * Td * Td)),
                                std::abs(xp.a), std::abs(xp.tau2 - (td - 1) * (td - 1) / (Td * Td))});
    }
    return {worst_a < 0.02 && worst_z < 3.0 && worst_tau < 0.05 && worst_limit < 1e-3,
            fmt("max rel err slope %.4f (< 0.02), near-zero slopes %.2f SE (< 3), tau2 %.4f (< 0.05); max limit "
                "gap %.2e (< 1e-3)",
                worst_a, worst_z, worst_tau, worst_limit)};
}

Outcome c8() {
    twosample::TestSpec spec;
    spec.seed = kSeed;
    const auto s = twosample::power_study(spec);
    auto power = [&](double sep, twosample::Family f) {
        for (const auto& p : s.points)
            if (p.separation == sep && p.family == f) return p.power;
        throw UsageError("missing power point");
    };
    using twosample::Family;
    const double size_plain = power(0.0, Family::plain), size_rml = power(0.0, Family::rml);
    bool sizes = size_plain >= 0.02 && size_plain <= 0.08 && size_rml >= 0.02 && size_rml <= 0.08;
    double best_gap = -1.0, worst_gap = 1.0;
    for (double sep : spec.separations) {
        const double gap = power(sep, Family::rml) - power(sep, Family::plain);
        worst_gap = std::min(worst_gap, gap);
        if (sep >= 0.02 && sep <= 0.2) best_gap = std::max(best_gap, gap);
    }
    return {sizes && best_gap >= 0.15 && worst_gap >= -0.02,
            fmt("size plain %.3f rml %.3f [0.02,0.08]; best gap in [0.02,0.2] %.3f (>= 0.15); worst gap %.3f "
                "(>= -0.02)",
                size_plain, size_rml, best_gap, worst_gap)};
}

Outcome c9() {
    experiments::FmCompareConfig c;
    c.seed = kSeed;
    const auto pts = experiments::fm_compare(c);
    bool decreasing = true;
    double lo = 1e300, hi = 0.0;
    std::string detail = "flow W2";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0 && !(pts[i].flow_error < pts[i - 1].flow_error)) decreasing = false;
        lo = std::min(lo, pts[i].oracle_error);
        hi = std::max(hi, pts[i].oracle_error);
        detail += fmt(" T%ld:%.4f", static_cast<long>(pts[i].steps), pts[i].flow_error);
    }
    detail += "; oracle W2";
    for (const auto& p : pts) detail += fmt(" %.4f", p.oracle_error);
    return {decreasing && hi / lo < 1.5, detail + fmt("; oracle max/min %.3f (< 1.5)", hi / lo)};
}

Outcome c10() {
    const auto r = spatial::pooling_study(desk_plan<spatial::PoolingStudyConfig>("spatial"));
    const spatial::PoolingResult* many = nullptr;
    const spatial::PoolingResult* few = nullptr;
    for (const auto& res : r.results) {
        if (res.diverged) return {false, "kernel " + std::to_string(res.kernel) + " diverged: " + res.message};
        if (!many || res.steps > many->steps) many = &res;
        if (!few || res.steps < few->steps) few = &res;
    }
    const auto a = many->metrics.values(), b = few->metrics.values();
    int wins = 0;
    std::string detail;
    for (std::size_t i = 0; i < a.size(); ++i) {
        wins += a[i] < b[i] ? 1 : 0;
        detail += fmt("%s %.4g/%.4g; ", spatial::MetricPanel::names()[i].c_str(), a[i], b[i]);
    }
    return {wins >= 4, fmt("T=%ld vs T=%ld: ", static_cast<long>(many->steps), static_cast<long>(few->steps)) +
                           detail + fmt("more-steps wins %d of 6 (need 4)", wins)};
}

// Largest relative error between an analytic gradient and central differences.
double relative_error(double analytic, double numeric) {
    return std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
}

template <typename Loss>
double mlp_gradient_error(nn::Mlp& net, Loss loss_of) {
    const auto lg = loss_of();
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t l = 0; l < lg.gradient.size(); ++l) {
        auto probe = [&](double& p, double analytic) {
            const double saved = p;
            p = saved + h;
            const double up = loss_of().value;
            p = saved - h;
            const double down = loss_of().value;
            p = saved;
            worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
        };
        auto& layer = net.mutable_layers()[l];
        for (Index i = 0; i < layer.weight.size(); ++i) probe(layer.weight.data()[i], lg.gradient[l].weight.data()[i]);
        for (Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias[i], lg.gradient[l].bias[i]);
    }
    return worst;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome c11() {
    Rng rng = make_rng(kSeed, 1100);
    double grad = 0.0;

    {
        nn::InputLayout layout{.state_dim = 2, .covariate_dim = 1, .time_input = true, .noise_dim = 2};
        nn::Mlp gen = nn::Mlp::he_init({layout.width(), 12, 12, 2}, layout, rng);
        const Matrix target = standard_normal(9, 2, rng), state = standard_normal(9, 2, rng);
        const Matrix cov = standard_normal(9, 1, rng);
        const Matrix e1 = standard_normal(9, 2, rng), e2 = standard_normal(9, 2, rng);
        grad = std::max(grad, mlp_gradient_error(gen, [&] {
                            return scoring::engression_loss(gen, target, state, &cov, 0.4, e1, e2);
                        }));
    }
    {
        nn::InputLayout layout{.state_dim = 2, .covariate_dim = 0, .time_input = true, .noise_dim = 0};
        nn::Mlp field = nn::Mlp::he_init({3, 16, 2}, layout, rng);
        const Matrix x0 = standard_normal(8, 2, rng), eps = standard_normal(8, 2, rng);
        Vector s(8);
        for (Index i = 0; i < 8; ++i) s[i] = uniform01(rng);
        grad = std::max(grad, mlp_gradient_error(field, [&] { return scoring::fm_regression_loss(field, x0, eps, s); }));
    }
    {
        const auto spec = sem::SemSpec::random(4, rng);
        const Matrix x = sem::sem_sample(spec, 300, rng);
        const Vector b = 0.3 * standard_normal(3, 1, rng).col(0);
        Vector g;
        sem::rml_objective(x, 3, b, &g);
        for (Index j = 0; j < 3; ++j) {
            Vector bp = b, bm = b;
            bp[j] += 1e-6;
            bm[j] -= 1e-6;
            grad = std::max(grad, relative_error(g[j], (sem::rml_objective(x, 3, bp) - sem::rml_objective(x, 3, bm)) / 2e-6));
        }
        const Matrix e1 = standard_normal(300, 4, rng), e2 = standard_normal(300, 4, rng);
        Matrix G;
        sem::engression_objective(spec.B, x, e1, e2, &G);
        for (Index i = 1; i < 4; ++i)
            for (Index j = 0; j < i; ++j) {
                Matrix bp = spec.B, bm = spec.B;
                bp(i, j) += 1e-6;
                bm(i, j) -= 1e-6;
                const double fd = (sem::engression_objective(bp, x, e1, e2) - sem::engression_objective(bm, x, e1, e2)) / 2e-6;
                grad = std::max(grad, relative_error(G(i, j), fd));
            }
    }

    // Energy distance: exact symmetry and exact zero on identical inputs.
    bool ed_ok = true;
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix a = standard_normal(50 + rep, 3, rng), b = standard_normal(70, 3, rng);
        ed_ok = ed_ok && scoring::energy_distance(a, b) == scoring::energy_distance(b, a) &&
                scoring::energy_distance(a, a) == 0.0;
    }

    // Rank TV stays in [0, m/(m+1)] and reaches the upper bound for a truth above every member.
    const Index m = 9, n = 5000;
    const Vector truths = standard_normal(n, 1, rng).col(0);
    const double calibrated = metrics::rank_histogram_tv(metrics::rank_histogram(truths, standard_normal(n, m, rng), rng));
    const double extreme =
        metrics::rank_histogram_tv(metrics::rank_histogram(Vector::Constant(n, 50.0), standard_normal(n, m, rng), rng));
    const double upper = static_cast<double>(m) / static_cast<double>(m + 1);
    const bool tv_ok = calibrated >= 0.0 && calibrated < 0.05 && std::abs(extreme - upper) < 1e-12;

    // Determinism: two runs with the same seed write byte-identical CSVs.
    const fs::path root = fs::temp_directory_path() / "rml_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::string> configs{
        "experiment = two-sample\nseed = 3\n[twosample]\nd = 3\nn = 40\nnull_simulations = 100\nreplications = 20\n"
        "separations = 0,0.3\n",
        "experiment = gmm\nseed = 3\n[gmm]\nsteps = 3\nn_train = 300\nn_generate = 300\n[network]\nhidden = 16,16\n"
        "[train]\niterations = 200\nbatch_size = 32\n",
        "experiment = spatial\nseed = 3\n[spatial]\nn_train = 60\nn_eval = 10\nensemble = 3\n[network]\nhidden = 8\n"
        "[train]\niterations = 10\nbatch_size = 8\n"};
    bool det_ok = true;
    Index files = 0;
    for (std::size_t k = 0; k < configs.size(); ++k) {
        std::vector<fs::path> outs;
        for (int run = 0; run < 2; ++run) {
            runner::Overrides ov;
            ov.out = root / (std::to_string(k) + "_" + std::to_string(run));
            outs.push_back(runner::execute(runner::plan(parse(configs[k]), ov)).out);
        }
        for (const auto& entry : fs::directory_iterator(outs[0])) {
            if (entry.path().extension() != ".csv") continue;
            ++files;
            det_ok = det_ok && slurp(entry.path()) == slurp(outs[1] / entry.path().filename());
        }
    }
    fs::remove_all(root);

    return {grad < 1e-4 && ed_ok && tv_ok && det_ok && files > 0,
            fmt("max gradient rel err %.2e (< 1e-4); ED symmetry/zero %s; rank TV calibrated %.4f, extreme %.4f "
                "(bound %.4f); %ld CSVs byte-identical %s",
                grad, ed_ok ? "exact" : "BROKEN", calibrated, extreme, upper, static_cast<long>(files),
                det_ok ? "yes" : "NO")};
}

struct Criterion {
    int id;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, 30, c1},    {2, 600, c2},   {3, 1200, c3}, {4, 900, c4},  {5, 300, c5},  {6, 2700, c6},
        {7, 120, c7},   {8, 1800, c8},  {9, 600, c9},  {10, 1800, c10}, {11, 120, c11},
    };
    int failures = 0;
    for (const auto& c : all) {
        if (only && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("C%d %s: %s [%.1fs, limit %.0fs%s]\n", c.id, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                    c.limit_seconds, in_time ? "" : ", OVER TIME");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
