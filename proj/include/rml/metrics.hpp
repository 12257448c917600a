#pragma once

#include "rml/common.hpp"
#include "rml/random.hpp"

#include <functional>
#include <vector>

namespace rml::metrics {

// Order-statistic coupling; unequal sizes are matched by linear quantile
// interpolation of the larger sample onto the smaller sample's grid.
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);
double wasserstein2_1d(const Vector& a, const Vector& b);

// W2 between a sample and a law given by its quantile function, evaluated at
// the mid-point levels (i + 0.5) / n of the sorted sample.
double wasserstein2_to_quantiles(std::vector<double> a, const std::function<double(double)>& quantile);

// RMS of 1-D W2 over random unit projections.
double sliced_wasserstein(const Matrix& a, const Matrix& b, Index projections, Rng& rng);

struct RankHistogram {
    std::vector<Index> counts;  // m + 1 bins
    Index tallies = 0;

    Index ensemble_size() const { return static_cast<Index>(counts.size()) - 1; }
};

// Rank = number of members strictly below the truth, plus a uniform share of ties.
// ensembles: one row of m members per truth.
RankHistogram rank_histogram(const Vector& truths, const Matrix& ensembles, Rng& rng);
double rank_histogram_tv(const RankHistogram& h);

// Per-coordinate 1-D distances between two batches.
struct MarginalSummary {
    double mean = 0.0;
    double max = 0.0;
};
MarginalSummary marginal_energy_distance(const Matrix& a, const Matrix& b);
MarginalSummary marginal_wasserstein(const Matrix& a, const Matrix& b);

}  // namespace rml::metrics
