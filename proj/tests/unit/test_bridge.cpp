#include "doctest.h"
#include "rml/bridge.hpp"

#include <cmath>

using namespace rml;
using namespace rml::bridge;

namespace {
double mean_of(const Matrix& m) { return m.mean(); }
double cov_of(const Matrix& a, const Matrix& b) {
    return ((a.array() - a.mean()) * (b.array() - b.mean())).mean();
}
}  // namespace

TEST_CASE("matched-marginal bridges share marginals and differ in noise covariance") {
    const Index T = 5, n = 200000;
    const Matrix x0 = Matrix::Constant(n, 1, 2.0);
    for (Scheme scheme : {Scheme::flow_matching, Scheme::diffusion, Scheme::x_process}) {
        CAPTURE(scheme_name(scheme));
        MatchedMarginalBridge b(scheme, T, 1);
        Rng rng = make_rng(3);
        const auto path = b.sample_path(x0, nullptr, rng);
        REQUIRE(path.size() == static_cast<std::size_t>(T + 1));
        CHECK(path[0] == x0);
        for (Index t = 1; t <= T; ++t) {
            const double r = static_cast<double>(t) / T;
            const Matrix eps = path[t] - (1.0 - r) * x0;
            CHECK(std::abs(mean_of(eps)) < 0.01);
            CHECK(cov_of(eps, eps) == doctest::Approx(r * r).epsilon(0.02));
            const Matrix eps_prev = path[t - 1] - (1.0 - (t - 1.0) / T) * x0;
            CHECK(std::abs(cov_of(eps_prev, eps) - b.noise_covariance(t)) < 0.01);
        }
        // sample_pair reproduces the joint law of adjacent path entries.
        for (Index t = 1; t <= T; ++t) {
            auto [prev, cur] = b.sample_pair(t, x0, nullptr, rng);
            const Matrix e_prev = prev - (1.0 - (t - 1.0) / T) * x0;
            const Matrix e = cur - (1.0 - static_cast<double>(t) / T) * x0;
            CHECK(std::abs(cov_of(e_prev, e) - b.noise_covariance(t)) < 0.01);
        }
    }
}

TEST_CASE("matched-marginal regeneration") {
    MatchedMarginalBridge b(Scheme::x_process, 4, 2);
    CHECK(b.can_regenerate(0, 3));
    CHECK(b.can_regenerate(2, 2));
    CHECK_FALSE(b.can_regenerate(1, 3));
    Rng rng = make_rng(5);
    const Matrix x0 = Matrix::Constant(100000, 2, -1.0);
    const Matrix x3 = b.regenerate(0, 3, x0, nullptr, rng);
    CHECK(x3.mean() == doctest::Approx(-0.25).epsilon(0.02));
    CHECK(cov_of(x3, x3) == doctest::Approx(0.5625).epsilon(0.02));
    CHECK(b.regenerate(2, 2, x0, nullptr, rng) == x0);
    CHECK_THROWS_AS(b.regenerate(1, 3, x0, nullptr, rng), CapabilityError);
    CHECK_THROWS_AS(MatchedMarginalBridge(Scheme::diffusion, 0, 1), ConfigError);
    CHECK(parse_scheme("linear") == Scheme::flow_matching);
    CHECK_THROWS_AS(parse_scheme("ddpm"), ConfigError);
}

TEST_CASE("terminal law is independent of the data") {
    MatchedMarginalBridge b(Scheme::flow_matching, 3, 1);
    Rng rng = make_rng(8);
    const auto path = b.sample_path(Matrix::Constant(100000, 1, 7.0), nullptr, rng);
    CHECK(std::abs(path.back().mean()) < 0.01);
    CHECK(cov_of(path.back(), path.back()) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("markov diffusion bridge") {
    MarkovDiffusionBridge b(4, 1);
    CHECK(b.sigma(4) == 1.0);
    CHECK(b.can_regenerate(1, 3));
    CHECK_FALSE(b.can_regenerate(3, 1));
    Rng rng = make_rng(1);
    const Matrix x0 = Matrix::Constant(10, 1, 1.0);
    CHECK_THROWS_AS(b.regenerate(3, 1, x0, nullptr, rng), CapabilityError);
    CHECK_THROWS_AS(MarkovDiffusionBridge(2, 1, {0.5, 0.9}), ConfigError);
    CHECK_THROWS_AS(MarkovDiffusionBridge(2, 1, {0.5}), ConfigError);
    CHECK_THROWS_AS(MarkovDiffusionBridge(2, 1, {0.7, 0.5}), ConfigError);
}

TEST_CASE("dimension-drop bridge removes one coordinate per step") {
    DimensionDropBridge b(4);
    CHECK(b.steps() == 4);
    CHECK(b.dim(0) == 4);
    CHECK(b.dim(3) == 1);
    CHECK(b.dim(4) == 1);
    Rng rng = make_rng(2);
    const Matrix x0 = standard_normal(50, 4, rng);
    const auto path = b.sample_path(x0, nullptr, rng);
    for (Index t = 1; t < 4; ++t) CHECK(path[t] == x0.leftCols(4 - t));
    CHECK(path[4].cols() == 1);
    CHECK(path[4] != x0.leftCols(1));
}

TEST_CASE("pooling bridge step counts and exact mean preservation") {
    CHECK(PoolingBridge(16, 2).steps() == 5);
    CHECK(PoolingBridge(16, 4).steps() == 3);
    PoolingBridge b(16, 2);
    CHECK(b.dim(0) == 256);
    CHECK(b.dim(1) == 64);
    CHECK(b.dim(4) == 1);
    CHECK(b.dim(5) == 1);
    CHECK(b.side(2) == 4);
    CHECK_THROWS_AS(b.side(5), ConfigError);

    Rng rng = make_rng(4);
    const Matrix x0 = standard_normal(20, 256, rng);
    const auto path = b.sample_path(x0, nullptr, rng);
    for (Index t = 1; t < 5; ++t)
        for (Index i = 0; i < 20; ++i) CHECK(path[t].row(i).mean() == doctest::Approx(x0.row(i).mean()).epsilon(1e-12));

    try {
        PoolingBridge(16, 3);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find('3') != std::string::npos);
        CHECK(msg.find("16") != std::string::npos);
    }
}

TEST_CASE("average pooling on a known field") {
    Matrix f(1, 16);
    for (Index i = 0; i < 16; ++i) f(0, i) = static_cast<double>(i);
    const Matrix p = average_pool(f, 4, 2);
    REQUIRE(p.cols() == 4);
    CHECK(p(0, 0) == 2.5);  // (0 + 1 + 4 + 5) / 4
    CHECK(p(0, 1) == 4.5);
    CHECK(p(0, 2) == 10.5);
    CHECK(p(0, 3) == 12.5);
    CHECK_THROWS_AS(average_pool(f, 5, 2), ConfigError);
}
