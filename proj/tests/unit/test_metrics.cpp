#include "doctest.h"
#include "rml/metrics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

using namespace rml;
using namespace rml::metrics;

TEST_CASE("one-dimensional W2 basics") {
    Rng rng = make_rng(1);
    const Vector a = standard_normal(500, 1, rng).col(0);
    const Vector b = standard_normal(700, 1, rng).col(0);
    const Vector c = (standard_normal(600, 1, rng).array() * 2.0 + 1.0).matrix().col(0);
    CHECK(wasserstein2_1d(a, a) == 0.0);
    CHECK(wasserstein2_1d(a, b) == doctest::Approx(wasserstein2_1d(b, a)).epsilon(1e-12));
    CHECK(wasserstein2_1d(a, c) <= wasserstein2_1d(a, b) + wasserstein2_1d(b, c) + 1e-12);
    const Vector shifted = (a.array() + 0.75).matrix();
    CHECK(wasserstein2_1d(a, shifted) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(wasserstein2_1d(Vector(), a), InsufficientSamples);
}

TEST_CASE("W2 to a quantile function") {
    const boost::math::normal_distribution<double> nd;
    std::vector<double> grid;
    for (int i = 0; i < 1000; ++i) grid.push_back(boost::math::quantile(nd, (i + 0.5) / 1000.0));
    const auto q = [&](double u) { return boost::math::quantile(nd, u); };
    CHECK(wasserstein2_to_quantiles(grid, q) < 1e-12);
    for (double& g : grid) g += 0.3;
    CHECK(wasserstein2_to_quantiles(grid, q) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("sliced W2 and marginal summaries") {
    Rng rng = make_rng(2);
    const Matrix a = standard_normal(400, 3, rng);
    CHECK(sliced_wasserstein(a, a, 20, rng) < 1e-12);
    Matrix b = a;
    b.col(2).array() += 1.0;
    const auto w = marginal_wasserstein(a, b);
    CHECK(w.max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.mean == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const auto e = marginal_energy_distance(a, b);
    CHECK(e.max > 0.1);
    CHECK(e.mean == doctest::Approx(e.max / 3.0).epsilon(1e-9));
}

TEST_CASE("rank histogram") {
    Rng rng = make_rng(3);
    const Index n = 20000, m = 19;
    const Vector truths = standard_normal(n, 1, rng).col(0);
    const Matrix members = standard_normal(n, m, rng);
    const auto h = rank_histogram(truths, members, rng);
    CHECK(h.ensemble_size() == m);
    CHECK(h.tallies == n);
    CHECK(rank_histogram_tv(h) < 0.05);

    const Vector above = Vector::Constant(n, 100.0);
    CHECK(rank_histogram_tv(rank_histogram(above, members, rng)) == doctest::Approx(19.0 / 20.0));

    // Every member tied with the truth spreads ranks uniformly.
    const auto ties = rank_histogram(Vector::Zero(n), Matrix::Zero(n, m), rng);
    CHECK(rank_histogram_tv(ties) < 0.05);
    CHECK_THROWS_AS(rank_histogram(truths, Matrix::Zero(n - 1, m), rng), ConfigError);
}
