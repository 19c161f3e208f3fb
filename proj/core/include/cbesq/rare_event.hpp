#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbesq/grid.hpp"
#include "cbesq/parallel.hpp"
#include "cbesq/rate.hpp"

// Monte Carlo probes of the large deviation structure: ball probabilities
// (direct and Girsanov-tilted), the eps^2 log p slope, convergence of the
// shifted process, the exponential supermartingale, pathwise root bounds and
// Hoelder-norm tails.
//
// Path i of an ensemble always uses stream id i, so every estimate is a
// function of (seed, n, grid) only; the pool changes wall time, not results.
namespace cbesq {

enum class SamplingMode { direct, tilted };

std::string to_string(SamplingMode mode);

/// Girsanov tilt: simulate Z^{eps,h} and reweight by
/// exp(-(1/eps) int hdot dB - (1/(2 eps^2)) int hdot^2 dt).
struct TiltSpec {
    Control h;
    double epsilon = 0.0;
};

struct MCReport {
    std::size_t n = 0;
    std::size_t hits = 0;
    SamplingMode mode = SamplingMode::direct;
    double epsilon = 0.0;
    double radius = 0.0;
    double p_hat = 0.0;
    double ci95 = 0.0;        // half-width
    double eps2_log_p = 0.0;  // eps^2 log p_hat, or eps^2 log of the zero-hit bound
    double eps2_log_ci = 0.0; // delta-method half-width of eps2_log_p
    bool zero_hits = false;   // eps2_log_p then uses the Clopper-Pearson upper bound
    double ess = 0.0;         // effective sample size of the hit weights (tilted)
};

/// Smallest eps accepted in direct mode.
inline constexpr double kDirectEpsilonFloor = 0.05;

/// P(sup_k |Z_{t_k} - target_k| < r), estimated on target.grid.
MCReport estimate_ball_prob(const ComplexPath& target, double r, double epsilon, std::size_t n,
                            const std::optional<TiltSpec>& tilt, std::uint64_t seed,
                            const WorkerPool& pool = WorkerPool::serial());

struct SlopeRow {
    MCReport report;
    double neg_I = 0.0;
    double gap = 0.0;  // |eps^2 log p_hat + I|
};

/// One MC estimate per eps (decreasing). Rows with eps below
/// `tilted_below` (or all rows when it is +inf) use the tilt with h.
std::vector<SlopeRow> ldp_slope(const ComplexPath& target, const Control& h, double r,
                                const std::vector<double>& eps_list, std::size_t n, std::uint64_t seed,
                                double tilted_below, const WorkerPool& pool = WorkerPool::serial());

struct QuantileRow {
    double epsilon = 0.0;
    double q50 = 0.0, q90 = 0.0, q99 = 0.0;
    double mean_square = 0.0;  // E sup_k |Z - phi|^2
};

/// Quantiles of sup_k |Z^{eps,h}_{t_k} - phi^h_{t_k}| for each eps.
std::vector<QuantileRow> convergence_probe(const Control& h, const std::vector<double>& eps_list, std::size_t n,
                                           std::uint64_t seed, const WorkerPool& pool = WorkerPool::serial());

struct SupermartingaleReport {
    std::size_t n = 0;
    double epsilon = 0.0;
    double mean = 0.0;
    double stderr = 0.0;
    double ess = 0.0;
    double max_identity_gap = 0.0;  // max over paths |log M (Ito sums) - J(Z)/eps^2|
    bool degenerate = false;        // ess below 1% of n
    bool within_bound() const { return mean <= 1.0 + 3.0 * stderr; }
};

inline constexpr double kSupermartingaleEpsilonFloor = 0.1;

/// E[M^eps_{f,g}(Z^eps)] with M built from Ito sums of (f U + g V) dB.
SupermartingaleReport supermartingale_check(const TestField& field, double epsilon, std::size_t n, std::uint64_t seed,
                                            const WorkerPool& pool = WorkerPool::serial());

struct BoundsReport {
    std::size_t paths = 0;
    std::size_t pairs = 0;  // (path, node) pairs checked
    std::size_t u_violations = 0;
    std::size_t v_violations = 0;
    double slack = 0.0;
    double max_u_excess = 0.0;  // max of |U| - bound (can be negative)
    double max_v_excess = 0.0;
    double violation_fraction() const {
        return pairs == 0 ? 0.0 : static_cast<double>(u_violations + v_violations) / static_cast<double>(pairs);
    }
};

/// Checks |U_t| <= 2 sup_{s<=t}(eps|B_s| + |h_s|) and V_t <= sqrt((eps^2 + 1) t)
/// on every node of n paths of Z^{eps,h}; slack defaults to grid_slack.
BoundsReport pathwise_bounds_check(double epsilon, const Control& h, std::size_t n, std::uint64_t seed,
                                   std::optional<double> slack = std::nullopt,
                                   const WorkerPool& pool = WorkerPool::serial());

struct TailRow {
    double epsilon = 0.0;
    double radius = 0.0;
    std::size_t n = 0;
    std::size_t hits = 0;
    double tail = 0.0;
    double eps2_log_tail = 0.0;  // -kInfiniteRate when hits == 0
};

/// Discrete Hoelder seminorm over node pairs with t - s >= 4 max dt.
double holder_seminorm(const ComplexPath& z, double alpha);

/// Empirical P(||Z^eps||_alpha >= R) for each (eps, R).
std::vector<TailRow> holder_tail_probe(const std::vector<double>& eps_list, double alpha,
                                       const std::vector<double>& radii, std::size_t n, std::uint64_t seed,
                                       const TimeGrid& grid, const WorkerPool& pool = WorkerPool::serial());

/// Per-eps seed so that different rows of a table use independent noise.
std::uint64_t row_seed(std::uint64_t seed, std::size_t row);

}  // namespace cbesq
