#pragma once

// Forward bridging processes from the data law (step 0) to an easy terminal
// law (step T). All samplers work on batches: one row per path.

#include "rml/common.hpp"
#include "rml/random.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rml::bridge {

class BridgingProcess {
public:
    virtual ~BridgingProcess() = default;

    virtual std::string name() const = 0;
    virtual Index steps() const = 0;          // T
    virtual Index dim(Index t) const = 0;     // state dimension at step t

    // (x_0, ..., x_T) for every row of x0. y is accepted for conditional
    // bridges; none of the shipped processes depend on it.
    virtual std::vector<Matrix> sample_path(const Matrix& x0, const Matrix* y, Rng& rng) const = 0;

    // Joint draw of (x_{t-1}, x_t) given x_0.
    virtual std::pair<Matrix, Matrix> sample_pair(Index t, const Matrix& x0, const Matrix* y, Rng& rng) const;

    // n draws from q*, the law of X_T.
    virtual Matrix sample_terminal(Index n, Rng& rng) const;

    // Whether X_t with the right marginal can be produced from X_s (s <= t).
    virtual bool can_regenerate(Index s, Index t) const { return s == t; }
    virtual Matrix regenerate(Index s, Index t, const Matrix& xs, const Matrix* y, Rng& rng) const;

protected:
    void check_step(Index t, Index lo = 1) const;
    void check_input(const Matrix& x0) const;
};

using BridgePtr = std::shared_ptr<const BridgingProcess>;

enum class Scheme { flow_matching, diffusion, x_process };

std::string_view scheme_name(Scheme s);
Scheme parse_scheme(std::string_view name);

// X_t = (1 - t/T) X_0 + eps_t with Var(eps_t) = (t/T)^2 under all three schemes,
// applied coordinatewise with independent noise:
//   flow matching  eps_t = (t/T) eta              (one eta per path)
//   diffusion      eps_t = eps_{t-1} + sqrt(2t-1)/T eta_t
//   x-process      eps_t = (t/T) eta_t            (fresh eta_t per step)
// The flow-matching scheme is also the straight linear interpolation bridge.
class MatchedMarginalBridge final : public BridgingProcess {
public:
    MatchedMarginalBridge(Scheme scheme, Index T, Index d);

    std::string name() const override;
    Index steps() const override { return T_; }
    Index dim(Index) const override { return d_; }
    Scheme scheme() const { return scheme_; }

    std::vector<Matrix> sample_path(const Matrix& x0, const Matrix* y, Rng& rng) const override;
    std::pair<Matrix, Matrix> sample_pair(Index t, const Matrix& x0, const Matrix* y, Rng& rng) const override;

    // s = 0: x_t = (1 - t/T) x_0 + (t/T) eta. s = t: identity.
    bool can_regenerate(Index s, Index t) const override { return s == t || s == 0; }
    Matrix regenerate(Index s, Index t, const Matrix& xs, const Matrix* y, Rng& rng) const override;

    // Cov(eps_{t-1}, eps_t) for one coordinate.
    double noise_covariance(Index t) const;

private:
    Scheme scheme_;
    Index T_;
    Index d_;
};

// X_t | X_{t-1} ~ N(sqrt(1 - sigma_t) X_{t-1}, sigma_t^2 I), sigma_t = t/T by default.
class MarkovDiffusionBridge final : public BridgingProcess {
public:
    MarkovDiffusionBridge(Index T, Index d, std::vector<double> schedule = {});

    std::string name() const override { return "markov-diffusion"; }
    Index steps() const override { return T_; }
    Index dim(Index) const override { return d_; }
    double sigma(Index t) const { return schedule_.at(static_cast<std::size_t>(t - 1)); }

    std::vector<Matrix> sample_path(const Matrix& x0, const Matrix* y, Rng& rng) const override;
    bool can_regenerate(Index s, Index t) const override { return s <= t; }
    Matrix regenerate(Index s, Index t, const Matrix& xs, const Matrix* y, Rng& rng) const override;

private:
    Matrix step(Index t, const Matrix& prev, Rng& rng) const;

    Index T_;
    Index d_;
    std::vector<double> schedule_;
};

// Drops the last coordinate each step: X_t = X_0[0 : d-t] for t < d, X_d ~ N(0, 1).
class DimensionDropBridge final : public BridgingProcess {
public:
    explicit DimensionDropBridge(Index d);

    std::string name() const override { return "dimension-drop"; }
    Index steps() const override { return d_; }
    Index dim(Index t) const override;

    std::vector<Matrix> sample_path(const Matrix& x0, const Matrix* y, Rng& rng) const override;

private:
    Index d_;
};

// Fields of side r stored row-major per row. Each step average-pools with a
// k x k kernel while the side stays divisible; the final step replaces the
// coarsest field by i.i.d. N(0, 1) of the same size.
class PoolingBridge final : public BridgingProcess {
public:
    PoolingBridge(Index side, Index kernel);

    std::string name() const override { return "pooling-k" + std::to_string(kernel_); }
    Index steps() const override { return static_cast<Index>(sides_.size()); }
    Index dim(Index t) const override;
    Index side(Index t) const;  // grid side at step t (< T)
    Index kernel() const { return kernel_; }

    std::vector<Matrix> sample_path(const Matrix& x0, const Matrix* y, Rng& rng) const override;

private:
    Index kernel_;
    std::vector<Index> sides_;  // sides_[t] for t = 0..T-1
};

// k x k average pooling of row-major square fields (one field per row).
Matrix average_pool(const Matrix& fields, Index side, Index kernel);

}  // namespace rml::bridge
