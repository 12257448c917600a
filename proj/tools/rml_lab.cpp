#include "rml/runner.hpp"
#include "rml/version.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

constexpr int exit_config = 2;
constexpr int exit_diverged = 3;

rml::runner::Overrides overrides(const CLI::Option* seed, std::uint64_t seed_value, const CLI::Option* out,
                                 const std::string& out_value, const CLI::Option* threads, unsigned threads_value) {
    rml::runner::Overrides o;
    if (seed->count()) o.seed = seed_value;
    if (out->count()) o.out = out_value;
    if (threads->count()) o.threads = threads_value;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reverse Markov learning experiments"};
    app.set_version_flag("--version", std::string(rml::version));
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 1;
    auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
    auto* out_opt = app.add_option("--out", out, "Override the output directory");
    auto* threads_opt = app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "Config file")->required();
    auto* validate = app.add_subcommand("validate", "Check a config file without running it");
    validate->add_option("config", config_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    rml::runner::Plan plan;
    try {
        const auto cfg = rml::config::ConfigFile::load(config_path);
        plan = rml::runner::plan(cfg, overrides(seed_opt, seed, out_opt, out, threads_opt, threads));
    } catch (const rml::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }

    if (validate->parsed()) {
        std::cout << "OK " << plan.tag << " -> " << plan.out.string() << '\n' << plan.resolved;
        return 0;
    }

    try {
        const auto summary = rml::runner::execute(plan);
        std::cout << plan.tag << ": wrote " << summary.artifacts.size() + 1 << " files to " << summary.out.string()
                  << " in " << summary.runtime_seconds << " s\n";
        return 0;
    } catch (const rml::runner::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\nloss trace: " << e.trace_path.string() << '\n';
        return exit_diverged;
    } catch (const rml::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
