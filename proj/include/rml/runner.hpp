#pragma once

// Config-driven experiment runs: one tag per study, deterministic artifacts
// and a manifest with checksums.

#include "rml/config.hpp"
#include "rml/experiments.hpp"
#include "rml/sem.hpp"
#include "rml/spatial.hpp"
#include "rml/twosample.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rml::runner {

const std::vector<std::string>& experiment_tags();

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<unsigned> threads;
};

struct SemPlan {
    sem::SemSpec spec;
    sem::StudyConfig study;
};

using StudyPlan = std::variant<experiments::GmmStudyConfig,           // gmm, gmm-alternating
                               experiments::ForwardCompareConfig,     // gmm-forward-compare
                               SemPlan,                               // sem-efficiency
                               twosample::TestSpec,                   // two-sample
                               experiments::FmCompareConfig,          // fm-compare
                               spatial::PoolingStudyConfig>;          // spatial

struct Plan {
    std::string tag;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::filesystem::path out;
    StudyPlan study;
    std::string resolved;  // key = value echo including defaults
};

// Parses and checks without running. Throws ConfigError naming the field
// (and line, when it came from the file).
Plan plan(const config::ConfigFile& cfg, const Overrides& overrides = {});

// Raised when training produced non-finite values; the loss trace written so
// far is in `trace_path`.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::filesystem::path trace)
        : NumericError(what), trace_path(std::move(trace)) {}
    std::filesystem::path trace_path;
};

struct Artifact {
    std::string name;
    std::uint64_t checksum = 0;
};

struct RunSummary {
    std::filesystem::path out;
    std::vector<Artifact> artifacts;
    double runtime_seconds = 0.0;
};

RunSummary execute(const Plan& p);

}  // namespace rml::runner
