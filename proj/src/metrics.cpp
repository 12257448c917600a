#include "rml/metrics.hpp"

#include "rml/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rml::metrics {

namespace {

// Linear interpolation of the sorted sample's quantile at level u, with
// order statistic i placed at level (i + 0.5) / n.
double interpolated_quantile(const std::vector<double>& sorted, double u) {
    const double n = static_cast<double>(sorted.size());
    const double pos = std::clamp(u * n - 0.5, 0.0, n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InsufficientSamples("wasserstein2_1d on an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Symmetric by construction: the coarser grid is always the reference.
    if (b.size() < a.size()) std::swap(a, b);
    double total = 0.0;
    if (a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
    } else {
        const double n = static_cast<double>(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double q = interpolated_quantile(b, (static_cast<double>(i) + 0.5) / n);
            total += (a[i] - q) * (a[i] - q);
        }
    }
    return std::sqrt(total / static_cast<double>(a.size()));
}

double wasserstein2_1d(const Vector& a, const Vector& b) { return wasserstein2_1d(to_vector(a), to_vector(b)); }

double wasserstein2_to_quantiles(std::vector<double> a, const std::function<double(double)>& quantile) {
    if (a.empty()) throw InsufficientSamples("wasserstein2_to_quantiles on an empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double q = quantile((static_cast<double>(i) + 0.5) / n);
        total += (a[i] - q) * (a[i] - q);
    }
    return std::sqrt(total / n);
}

double sliced_wasserstein(const Matrix& a, const Matrix& b, Index projections, Rng& rng) {
    require_same_dim(a, b, "sliced_wasserstein");
    if (projections < 1) throw ConfigError("sliced_wasserstein needs at least one projection");
    double total = 0.0;
    for (Index p = 0; p < projections; ++p) {
        Vector dir = standard_normal(a.cols(), 1, rng);
        dir /= dir.norm();
        const double w = wasserstein2_1d(Vector(a * dir), Vector(b * dir));
        total += w * w;
    }
    return std::sqrt(total / static_cast<double>(projections));
}

RankHistogram rank_histogram(const Vector& truths, const Matrix& ensembles, Rng& rng) {
    if (truths.size() == 0) throw InsufficientSamples("rank_histogram needs at least one tally");
    if (ensembles.rows() != truths.size()) throw ConfigError("rank_histogram: one ensemble per truth required");
    const Index m = ensembles.cols();
    RankHistogram h;
    h.counts.assign(static_cast<std::size_t>(m + 1), 0);
    for (Index i = 0; i < truths.size(); ++i) {
        Index below = 0;
        Index ties = 0;
        for (Index j = 0; j < m; ++j) {
            if (ensembles(i, j) < truths[i])
                ++below;
            else if (ensembles(i, j) == truths[i])
                ++ties;
        }
        const Index rank = below + (ties > 0 ? uniform_index(ties + 1, rng) : 0);
        ++h.counts[static_cast<std::size_t>(rank)];
        ++h.tallies;
    }
    return h;
}

double rank_histogram_tv(const RankHistogram& h) {
    if (h.tallies <= 0) throw InsufficientSamples("rank histogram has no tallies");
    const double bins = static_cast<double>(h.counts.size());
    double tv = 0.0;
    for (Index c : h.counts) tv += std::abs(static_cast<double>(c) / static_cast<double>(h.tallies) - 1.0 / bins);
    return 0.5 * tv;
}

MarginalSummary marginal_energy_distance(const Matrix& a, const Matrix& b) {
    require_same_dim(a, b, "marginal_energy_distance");
    MarginalSummary s{0.0, -std::numeric_limits<double>::infinity()};
    for (Index j = 0; j < a.cols(); ++j) {
        const double e = scoring::energy_distance(a.col(j), b.col(j));
        s.mean += e;
        s.max = std::max(s.max, e);
    }
    s.mean /= static_cast<double>(a.cols());
    return s;
}

MarginalSummary marginal_wasserstein(const Matrix& a, const Matrix& b) {
    require_same_dim(a, b, "marginal_wasserstein");
    MarginalSummary s{0.0, 0.0};
    for (Index j = 0; j < a.cols(); ++j) {
        const double w = wasserstein2_1d(Vector(a.col(j)), Vector(b.col(j)));
        s.mean += w;
        s.max = std::max(s.max, w);
    }
    s.mean /= static_cast<double>(a.cols());
    return s;
}

}  // namespace rml::metrics
