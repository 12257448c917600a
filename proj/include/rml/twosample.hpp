#pragma once

// Two-sample tests on SEM data: the plain energy distance and the
// dimension-drop RML-enhanced energy distance with Gaussian conditionals.

#include "rml/common.hpp"
#include "rml/random.hpp"
#include "rml/sem.hpp"

#include <string>
#include <vector>

namespace rml::twosample {

enum class Family { plain, rml };
std::string family_name(Family f);

double plain_statistic(const Matrix& a, const Matrix& b);

// (1/d) sum over steps of the pooled-point average of the closed-form energy
// distance between N(a_k^T x, 1) and N(b_k^T x, 1), where a_k, b_k are least
// squares fits of coordinate k on the preceding coordinates in each sample.
// The first coordinate has no regressors and contributes zero; the terminal
// Gaussian step likewise contributes zero.
double rml_statistic(const Matrix& a, const Matrix& b);

double statistic(Family f, const Matrix& a, const Matrix& b);

// Nearest-rank (1 - level) quantile: the ceil((1 - level) * N)-th order statistic.
double critical_value(std::vector<double> null_statistics, double level);

struct TestSpec {
    Index d = 5;
    Index n = 200;
    Index null_simulations = 500;
    Index replications = 200;
    double level = 0.05;
    std::vector<double> separations{0.0, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5};
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
};

struct TestResult {
    double statistic = 0.0;
    double critical = 0.0;
    bool reject = false;
    Family family = Family::plain;
};

TestResult run_test(Family f, const Matrix& a, const Matrix& b, double critical);

// Null statistics from pairs of datasets both drawn from `null_spec`.
std::vector<double> simulate_null(Family f, const sem::SemSpec& null_spec, const TestSpec& spec, Rng& rng);

struct PowerPoint {
    double separation = 0.0;
    Family family = Family::plain;
    double power = 0.0;
    double critical = 0.0;
};

struct PowerStudy {
    sem::SemSpec base;   // A
    Matrix direction;    // unit-Frobenius strictly lower triangular; B = A + sep * direction
    std::vector<PowerPoint> points;
    std::vector<double> null_plain;
    std::vector<double> null_rml;
};

PowerStudy power_study(const TestSpec& spec);

}  // namespace rml::twosample
