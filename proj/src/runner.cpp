#include "rml/runner.hpp"

#include "rml/report.hpp"
#include "rml/version.hpp"

#include "json.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace rml::runner {

namespace fs = std::filesystem;
using report::Cell;
using report::Table;

const std::vector<std::string>& experiment_tags() {
    static const std::vector<std::string> tags{"gmm",          "gmm-forward-compare", "gmm-alternating", "sem-efficiency",
                                               "two-sample",   "fm-compare",          "spatial"};
    return tags;
}

namespace {

Index positive(const config::ConfigFile& c, const std::string& key, Index fallback) {
    const auto v = c.integer(key, fallback);
    if (v < 1) throw ConfigError(c.where(key) + "field '" + key + "' must be >= 1, got " + std::to_string(v));
    return v;
}

std::vector<Index> to_index(const std::vector<std::int64_t>& v) { return {v.begin(), v.end()}; }

engine::NetworkConfig network_section(const config::ConfigFile& c, const engine::NetworkConfig& d) {
    engine::NetworkConfig n = d;
    n.hidden = to_index(c.integers("network.hidden", {d.hidden.begin(), d.hidden.end()}));
    n.noise_dim = c.integer("network.noise_dim", d.noise_dim);
    n.validate();
    return n;
}

engine::TrainConfig train_section(const config::ConfigFile& c, const engine::TrainConfig& d) {
    engine::TrainConfig t;
    t.iterations = positive(c, "train.iterations", d.iterations);
    t.batch_size = positive(c, "train.batch_size", d.batch_size);
    t.learning_rate = c.number("train.learning_rate", d.learning_rate);
    const std::string decay = c.text("train.decay", d.decay == engine::LrDecay::cosine ? "cosine" : "none");
    if (decay == "cosine")
        t.decay = engine::LrDecay::cosine;
    else if (decay != "none")
        throw ConfigError(c.where("train.decay") + "field 'train.decay' must be none or cosine, got '" + decay + "'");
    t.final_fraction = c.number("train.final_fraction", d.final_fraction);
    t.validate();
    return t;
}

bridge::Scheme scheme_of(const config::ConfigFile& c, const std::string& key, const std::string& fallback) {
    const std::string name = c.text(key, fallback);
    try {
        return bridge::parse_scheme(name);
    } catch (const ConfigError& e) {
        throw ConfigError(c.where(key) + e.what());
    }
}

// Desk defaults: small MLPs and a larger learning rate than the 5x512 / 1e-4
// setting, so every study finishes within minutes on one core.
engine::NetworkConfig desk_network() {
    engine::NetworkConfig n;
    n.hidden = {128, 128, 128};
    return n;
}

experiments::GmmStudyConfig gmm_section(const config::ConfigFile& c, std::uint64_t seed, unsigned threads,
                                        Index default_steps, Index default_iterations) {
    experiments::GmmStudyConfig g;
    const std::string target = c.text("gmm.target", "three-component");
    if (target == "three-component") {
        g.target = gmm::GmmSpec::three_component_2d();
    } else if (target == "symmetric-1d") {
        g.target = gmm::GmmSpec::symmetric_1d(c.number("gmm.sigma", 0.25));
    } else {
        throw ConfigError(c.where("gmm.target") + "unknown target '" + target +
                          "' (expected three-component or symmetric-1d)");
    }
    g.scheme = scheme_of(c, "gmm.scheme", "x-process");
    g.steps = positive(c, "gmm.steps", default_steps);
    g.n_train = positive(c, "gmm.n_train", 10000);
    g.n_generate = positive(c, "gmm.n_generate", 10000);
    g.network = network_section(c, desk_network());
    engine::TrainConfig tdef;
    tdef.iterations = default_iterations;
    tdef.learning_rate = 3e-3;
    tdef.decay = engine::LrDecay::cosine;
    g.train = train_section(c, tdef);
    g.seed = seed;
    g.threads = threads;
    g.validate();
    return g;
}

std::vector<sem::Method> methods_of(const config::ConfigFile& c) {
    std::vector<sem::Method> out;
    const std::string list = c.text("sem.methods", "engression,rml,mle");
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const auto comma = std::min(list.find(',', pos), list.size());
        std::string item = list.substr(pos, comma - pos);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (item == "engression")
            out.push_back(sem::Method::engression);
        else if (item == "rml")
            out.push_back(sem::Method::rml);
        else if (item == "mle")
            out.push_back(sem::Method::mle);
        else
            throw ConfigError(c.where("sem.methods") + "unknown estimator '" + item + "'");
        pos = comma + 1;
    }
    if (std::find(out.begin(), out.end(), sem::Method::mle) == out.end())
        throw ConfigError(c.where("sem.methods") + "sem.methods must include mle (the ratio reference)");
    return out;
}

}  // namespace

Plan plan(const config::ConfigFile& c, const Overrides& ov) {
    Plan p;
    p.tag = c.text("experiment");
    const auto& tags = experiment_tags();
    if (std::find(tags.begin(), tags.end(), p.tag) == tags.end()) {
        std::string known;
        for (const auto& t : tags) known += (known.empty() ? "" : ", ") + t;
        throw ConfigError(c.where("experiment") + "unknown experiment tag '" + p.tag + "' (known: " + known + ")");
    }
    p.seed = ov.seed ? *ov.seed : c.seed("seed");
    if (ov.seed && c.has("seed")) (void)c.text("seed");
    const auto threads = c.integer("threads", 1);
    if (threads < 1) throw ConfigError(c.where("threads") + "field 'threads' must be >= 1");
    p.threads = ov.threads ? *ov.threads : static_cast<unsigned>(threads);
    p.out = ov.out ? *ov.out : fs::path(c.text("output", "runs/" + p.tag));

    if (p.tag == "gmm") {
        p.study = gmm_section(c, p.seed, p.threads, 10, 30000);
    } else if (p.tag == "gmm-alternating") {
        p.study = gmm_section(c, p.seed, p.threads, 5, 30000);
    } else if (p.tag == "gmm-forward-compare") {
        experiments::ForwardCompareConfig f;
        // Fifteen trainings: a smaller budget per stack keeps the study under 45 minutes.
        f.base = gmm_section(c, p.seed, p.threads, 10, 20000);
        f.repetitions = positive(c, "gmm.repetitions", 5);
        f.schemes.clear();
        const std::string list = c.text("gmm.schemes", "flow-matching,diffusion,x-process");
        std::size_t pos = 0;
        while (pos <= list.size()) {
            const auto comma = std::min(list.find(',', pos), list.size());
            std::string item = list.substr(pos, comma - pos);
            item.erase(0, item.find_first_not_of(' '));
            item.erase(item.find_last_not_of(' ') + 1);
            try {
                f.schemes.push_back(bridge::parse_scheme(item));
            } catch (const ConfigError& e) {
                throw ConfigError(c.where("gmm.schemes") + e.what());
            }
            pos = comma + 1;
        }
        p.study = f;
    } else if (p.tag == "sem-efficiency") {
        SemPlan s;
        const Index d = positive(c, "sem.d", 5);
        if (d < 2) throw ConfigError(c.where("sem.d") + "field 'sem.d' must be >= 2");
        const std::string truth = c.text("sem.truth", "zero");
        if (truth == "zero") {
            s.spec = sem::SemSpec::zero(d);
        } else if (truth == "random") {
            Rng rng = make_rng(p.seed, 7);
            s.spec = sem::SemSpec::random(d, rng);
        } else {
            throw ConfigError(c.where("sem.truth") + "unknown truth '" + truth + "' (expected zero or random)");
        }
        s.study.sample_sizes = to_index(c.integers("sem.sample_sizes", {100, 1000, 10000}));
        for (Index n : s.study.sample_sizes)
            if (n <= d)
                throw ConfigError(c.where("sem.sample_sizes") + "every sample size must exceed d = " +
                                  std::to_string(d) + ", got " + std::to_string(n));
        s.study.replications = positive(c, "sem.replications", 100);
        s.study.methods = methods_of(c);
        s.study.engression.warmup = c.integer("engression.warmup", s.study.engression.warmup);
        s.study.engression.averaged = positive(c, "engression.averaged", s.study.engression.averaged);
        s.study.engression.learning_rate = c.number("engression.learning_rate", s.study.engression.learning_rate);
        s.study.engression.batch_size = c.integer("engression.batch_size", 0);
        s.study.seed = p.seed;
        s.study.threads = p.threads;
        p.study = s;
    } else if (p.tag == "two-sample") {
        twosample::TestSpec t;
        t.d = positive(c, "twosample.d", t.d);
        t.n = positive(c, "twosample.n", t.n);
        t.null_simulations = positive(c, "twosample.null_simulations", t.null_simulations);
        t.replications = positive(c, "twosample.replications", t.replications);
        t.level = c.number("twosample.level", t.level);
        t.separations = c.numbers("twosample.separations", t.separations);
        t.seed = p.seed;
        t.threads = p.threads;
        t.validate();
        p.study = t;
    } else if (p.tag == "fm-compare") {
        experiments::FmCompareConfig f;
        f.steps = to_index(c.integers("fm.steps", {f.steps.begin(), f.steps.end()}));
        f.n = positive(c, "fm.n", f.n);
        f.seeds = positive(c, "fm.seeds", f.seeds);
        f.oracle_sigma = c.number("fm.oracle_sigma", f.oracle_sigma);
        f.seed = p.seed;
        f.threads = p.threads;
        f.validate();
        p.study = f;
    } else {
        spatial::PoolingStudyConfig s;
        s.field.side = positive(c, "spatial.side", s.field.side);
        s.field.smoothing = c.number("spatial.smoothing", s.field.smoothing);
        s.field.mode_scale = c.number("spatial.mode_scale", s.field.mode_scale);
        s.kernels = to_index(c.integers("spatial.kernels", {s.kernels.begin(), s.kernels.end()}));
        s.n_train = positive(c, "spatial.n_train", s.n_train);
        s.n_eval = positive(c, "spatial.n_eval", s.n_eval);
        s.ensemble = positive(c, "spatial.ensemble", s.ensemble);
        s.network = network_section(c, desk_network());
        engine::TrainConfig tdef;
        tdef.iterations = 6000;
        tdef.learning_rate = 1e-3;
        tdef.decay = engine::LrDecay::cosine;
        s.train = train_section(c, tdef);
        const std::string budget = c.text("spatial.budget", "per-step");
        if (budget == "total")
            s.budget = spatial::Budget::total;
        else if (budget != "per-step")
            throw ConfigError(c.where("spatial.budget") + "field 'spatial.budget' must be per-step or total, got '" +
                              budget + "'");
        s.seed = p.seed;
        s.threads = p.threads;
        try {
            s.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(c.where("spatial.kernels") + e.what());
        }
        p.study = s;
    }

    const auto unused = c.unused();
    if (!unused.empty()) throw ConfigError(c.where(unused.front()) + "unknown field '" + unused.front() + "'");
    p.resolved = c.echo();
    return p;
}

// ---------------------------------------------------------------------------

namespace {

class Writer {
public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

    void csv(const std::string& name, const Table& t) { put(name, report::to_csv(t)); }
    void svg(const std::string& name, const report::Plot& p) { put(name, report::to_svg(p)); }
    void losses(const std::string& name, const std::vector<engine::LossRecord>& trace) { csv(name, loss_table(trace)); }
    void put(const std::string& name, const std::string& contents) {
        artifacts_.push_back({name, report::write_file(dir_ / name, contents)});
    }

    static Table loss_table(const std::vector<engine::LossRecord>& trace) {
        Table t{{"iteration", "t", "loss"}, {}};
        for (const auto& r : trace) t.add({Cell(std::int64_t(r.iteration)), Cell(std::int64_t(r.t)), Cell(r.loss)});
        return t;
    }

    // Wall-clock figures go to the manifest only, so the CSVs stay reproducible.
    void timing(const std::string& label, double seconds) { timings_.emplace_back(label, seconds); }

    const fs::path& dir() const { return dir_; }
    std::vector<Artifact>& artifacts() { return artifacts_; }
    const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

private:
    fs::path dir_;
    std::vector<Artifact> artifacts_;
    std::vector<std::pair<std::string, double>> timings_;
};

report::Series column_series(const std::string& label, const Matrix& m) {
    report::Series s{label, {}, {}};
    for (Index i = 0; i < m.rows(); ++i) {
        s.x.push_back(m(i, 0));
        s.y.push_back(m.cols() > 1 ? m(i, 1) : 0.0);
    }
    return s;
}

Table labelled_samples(const std::vector<std::pair<std::string, const Matrix*>>& sets) {
    Table t;
    t.header.push_back("source");
    const Index d = sets.front().second->cols();
    for (Index j = 0; j < d; ++j) t.header.push_back("x" + std::to_string(j));
    for (const auto& [label, m] : sets)
        for (Index i = 0; i < m->rows(); ++i) {
            std::vector<Cell> row{Cell(label)};
            for (Index j = 0; j < d; ++j) row.emplace_back((*m)(i, j));
            t.rows.push_back(std::move(row));
        }
    return t;
}

void run_gmm(const experiments::GmmStudyConfig& cfg, Writer& w) {
    const auto r = experiments::gmm_comparison(cfg);
    Table m{{"method", "steps", "energy_distance", "low_density_fraction", "truth_baseline"}, {}};
    m.add({Cell("rml"), Cell(std::int64_t(cfg.steps)), Cell(r.rml.energy_distance), Cell(r.rml.low_density),
           Cell(r.truth_baseline)});
    m.add({Cell("engression"), Cell(std::int64_t(1)), Cell(r.engression.energy_distance),
           Cell(r.engression.low_density), Cell(r.truth_baseline)});
    w.csv("metrics.csv", m);
    w.csv("samples.csv",
          labelled_samples({{"truth", &r.truth}, {"rml", &r.rml_samples}, {"engression", &r.engression_samples}}));
    w.losses("losses_rml.csv", r.rml_losses);
    w.losses("losses_engression.csv", r.engression_losses);
    const bool two_d = cfg.target.dim() >= 2;
    report::Plot p{"Generated samples", "x0", two_d ? "x1" : "", {}, true, false};
    p.series = {column_series("truth", r.truth), column_series("rml", r.rml_samples),
                column_series("engression", r.engression_samples)};
    w.svg("samples.svg", p);
}

void run_alternating(const experiments::GmmStudyConfig& cfg, Writer& w) {
    const auto r = experiments::alternating_comparison(cfg);
    Table m{{"sampler", "steps", "energy_distance", "low_density_fraction"}, {}};
    m.add({Cell("reverse-markov"), Cell(std::int64_t(cfg.steps)), Cell(r.plain.energy_distance),
           Cell(r.plain.low_density)});
    m.add({Cell("alternating"), Cell(std::int64_t(cfg.steps)), Cell(r.alternating.energy_distance),
           Cell(r.alternating.low_density)});
    w.csv("metrics.csv", m);
    w.csv("samples.csv",
          labelled_samples({{"reverse-markov", &r.plain_samples}, {"alternating", &r.alternating_samples}}));
    w.losses("losses.csv", r.losses);
    report::Plot p{"Reverse Markov vs alternating generation", "x0", "x1", {}, true, false};
    p.series = {column_series("reverse-markov", r.plain_samples), column_series("alternating", r.alternating_samples)};
    w.svg("samples.svg", p);
}

void run_forward(const experiments::ForwardCompareConfig& cfg, Writer& w) {
    const auto r = experiments::forward_compare(cfg);
    Table m{{"repetition", "scheme", "energy_distance", "low_density_fraction", "best"}, {}};
    for (std::size_t rep = 0; rep < r.energy.size(); ++rep) {
        const auto best = std::min_element(r.energy[rep].begin(), r.energy[rep].end()) - r.energy[rep].begin();
        for (std::size_t k = 0; k < r.schemes.size(); ++k)
            m.add({Cell(std::int64_t(rep)), Cell(std::string(bridge::scheme_name(r.schemes[k]))),
                   Cell(r.energy[rep][k]), Cell(r.low_density[rep][k]),
                   Cell(std::int64_t(static_cast<std::ptrdiff_t>(k) == best))});
    }
    w.csv("metrics.csv", m);
    report::Plot p{"Energy distance by forward scheme", "repetition", "energy distance", {}, false, false};
    for (std::size_t k = 0; k < r.schemes.size(); ++k) {
        report::Series s{std::string(bridge::scheme_name(r.schemes[k])), {}, {}};
        for (std::size_t rep = 0; rep < r.energy.size(); ++rep) {
            s.x.push_back(static_cast<double>(rep));
            s.y.push_back(r.energy[rep][k]);
        }
        p.series.push_back(std::move(s));
    }
    w.svg("energy_by_scheme.svg", p);
}

void run_sem(const SemPlan& s, Writer& w) {
    const auto rows = sem::efficiency_study(s.spec, s.study);
    Table m{{"method", "d", "n", "replications", "bias_sq_sum", "variance_sum", "n_variance_sum", "ratio",
             "asymptotic_n_variance", "nonconverged"},
            {}};
    for (const auto& r : rows) {
        double asym = std::nan("");
        if (r.method != sem::Method::engression) asym = sem::asymptotic_variance(r.method, s.spec);
        m.add({Cell(sem::method_name(r.method)), Cell(std::int64_t(r.d)), Cell(std::int64_t(r.n)),
               Cell(std::int64_t(r.replications)), Cell(r.bias_sq_sum), Cell(r.variance_sum),
               Cell(static_cast<double>(r.n) * r.variance_sum), Cell(r.ratio_vs_mle), Cell(asym),
               Cell(std::int64_t(r.nonconverged))});
    }
    w.csv("metrics.csv", m);
    report::Plot p{"Variance sum by sample size", "n", "sum of variances", {}, false, true};
    for (auto method : s.study.methods) {
        report::Series series{sem::method_name(method), {}, {}};
        for (const auto& r : rows)
            if (r.method == method) {
                series.x.push_back(static_cast<double>(r.n));
                series.y.push_back(r.variance_sum);
            }
        p.series.push_back(std::move(series));
    }
    w.svg("variance.svg", p);
}

void run_twosample(const twosample::TestSpec& spec, Writer& w) {
    const auto study = twosample::power_study(spec);
    Table m{{"separation", "family", "power", "n", "d", "replications", "critical_value"}, {}};
    for (const auto& pt : study.points)
        m.add({Cell(pt.separation), Cell(twosample::family_name(pt.family)), Cell(pt.power),
               Cell(std::int64_t(spec.n)), Cell(std::int64_t(spec.d)), Cell(std::int64_t(spec.replications)),
               Cell(pt.critical)});
    w.csv("metrics.csv", m);
    Table nulls{{"simulation", "energy_distance", "rml_energy_distance"}, {}};
    for (std::size_t i = 0; i < study.null_plain.size(); ++i)
        nulls.add({Cell(std::int64_t(i)), Cell(study.null_plain[i]), Cell(study.null_rml[i])});
    w.csv("null_statistics.csv", nulls);
    report::Plot p{"Power against separation", "||A - B||_F", "rejection rate", {}, false, false};
    for (auto fam : {twosample::Family::plain, twosample::Family::rml}) {
        report::Series s{twosample::family_name(fam), {}, {}};
        for (const auto& pt : study.points)
            if (pt.family == fam) {
                s.x.push_back(pt.separation);
                s.y.push_back(pt.power);
            }
        p.series.push_back(std::move(s));
    }
    w.svg("power.svg", p);
}

void run_fm(const experiments::FmCompareConfig& cfg, Writer& w) {
    const auto pts = experiments::fm_compare(cfg);
    Table m{{"steps", "flow_ode_w2", "oracle_w2", "seeds", "n"}, {}};
    report::Series flow{"flow ODE", {}, {}}, oracle{"reverse Markov oracle", {}, {}};
    for (const auto& p : pts) {
        m.add({Cell(std::int64_t(p.steps)), Cell(p.flow_error), Cell(p.oracle_error), Cell(std::int64_t(cfg.seeds)),
               Cell(std::int64_t(cfg.n))});
        flow.x.push_back(static_cast<double>(p.steps));
        flow.y.push_back(p.flow_error);
        oracle.x.push_back(static_cast<double>(p.steps));
        oracle.y.push_back(p.oracle_error);
    }
    w.csv("metrics.csv", m);
    w.svg("w2_by_steps.svg", {"W2 error against step count", "T", "W2", {flow, oracle}, false, true});
}

void run_spatial(const spatial::PoolingStudyConfig& cfg, Writer& w) {
    const auto rep = spatial::pooling_study(cfg);
    Table m{{"metric", "kernel", "steps", "value"}, {}};
    const auto& names = spatial::MetricPanel::names();
    const auto base = rep.truth_baseline.values();
    for (std::size_t j = 0; j < names.size(); ++j)
        m.add({Cell(names[j]), Cell(std::int64_t(0)), Cell(std::int64_t(0)), Cell(base[j])});
    for (const auto& r : rep.results) {
        const auto v = r.metrics.values();
        for (std::size_t j = 0; j < names.size(); ++j)
            m.add({Cell(names[j]), Cell(std::int64_t(r.kernel)), Cell(std::int64_t(r.steps)), Cell(v[j])});
        w.timing("kernel_" + std::to_string(r.kernel), r.runtime_seconds);
    }
    w.csv("metrics.csv", m);
    for (const auto& r : rep.results) w.losses("losses_k" + std::to_string(r.kernel) + ".csv", r.losses);
    for (std::size_t j = 0; j < names.size(); ++j) {
        report::Series s{"rml", {}, {}};
        for (const auto& r : rep.results) {
            s.x.push_back(static_cast<double>(r.steps));
            s.y.push_back(r.metrics.values()[j]);
        }
        w.svg(names[j] + ".svg", {names[j] + " against step count", "steps", names[j], {s}, false, false});
    }
    for (const auto& r : rep.results)
        if (r.diverged)
            throw DivergenceError("training diverged for kernel " + std::to_string(r.kernel) + ": " + r.message,
                                  w.dir() / ("losses_k" + std::to_string(r.kernel) + ".csv"));
}

}  // namespace

RunSummary execute(const Plan& p) {
    const auto start = std::chrono::steady_clock::now();
    Writer w(p.out);
    try {
        std::visit(
            [&](const auto& study) {
                using S = std::decay_t<decltype(study)>;
                if constexpr (std::is_same_v<S, experiments::GmmStudyConfig>) {
                    if (p.tag == "gmm")
                        run_gmm(study, w);
                    else
                        run_alternating(study, w);
                } else if constexpr (std::is_same_v<S, experiments::ForwardCompareConfig>) {
                    run_forward(study, w);
                } else if constexpr (std::is_same_v<S, SemPlan>) {
                    run_sem(study, w);
                } else if constexpr (std::is_same_v<S, twosample::TestSpec>) {
                    run_twosample(study, w);
                } else if constexpr (std::is_same_v<S, experiments::FmCompareConfig>) {
                    run_fm(study, w);
                } else {
                    run_spatial(study, w);
                }
            },
            p.study);
    } catch (const engine::TrainingDiverged& e) {
        w.losses("losses_diverged.csv", e.trace);
        throw DivergenceError(e.what(), p.out / "losses_diverged.csv");
    }

    RunSummary summary;
    summary.out = p.out;
    summary.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    summary.artifacts = w.artifacts();

    nlohmann::ordered_json manifest;
    manifest["experiment"] = p.tag;
    manifest["seed"] = p.seed;
    manifest["threads"] = p.threads;
    manifest["config"] = p.resolved;
    manifest["versions"] = {{"rmlab", version},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"boost", BOOST_LIB_VERSION},
                            {"compiler", __VERSION__}};
    manifest["runtime_seconds"] = summary.runtime_seconds;
    if (!w.timings().empty()) {
        auto& t = manifest["timings_seconds"] = nlohmann::ordered_json::object();
        for (const auto& [label, secs] : w.timings()) t[label] = secs;
    }
    auto& arts = manifest["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& a : summary.artifacts) arts.push_back({{"file", a.name}, {"fnv1a64", report::hex64(a.checksum)}});
    report::write_file(p.out / "manifest.json", manifest.dump(2) + "\n");
    return summary;
}

}  // namespace rml::runner
