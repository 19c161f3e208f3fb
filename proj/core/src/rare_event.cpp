#include "cbesq/rare_event.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"
#include "cbesq/stats.hpp"

namespace cbesq {

std::string to_string(SamplingMode mode) { return mode == SamplingMode::direct ? "direct" : "tilted"; }

std::uint64_t row_seed(std::uint64_t seed, std::size_t row) {
    return seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(row);
}

namespace {

constexpr double kZ95 = 1.959963984540054;

SimParams params_for(const TimeGrid& grid, double epsilon, std::uint64_t seed) {
    SimParams p;
    p.epsilon = epsilon;
    p.grid = grid;
    p.seed = seed;
    return p;
}

}  // namespace

MCReport estimate_ball_prob(const ComplexPath& target, double r, double epsilon, std::size_t n,
                            const std::optional<TiltSpec>& tilt, std::uint64_t seed, const WorkerPool& pool) {
    if (n == 0) throw ConfigError("estimate_ball_prob: n must be > 0");
    if (!(r > 0.0)) throw DomainError("estimate_ball_prob: radius must be > 0");
    if (!(epsilon > 0.0)) throw DomainError("estimate_ball_prob: epsilon must be > 0");
    const auto& grid = target.grid;
    if (tilt) {
        if (!(tilt->h.grid() == grid)) throw ConfigError("estimate_ball_prob: tilt control grid differs from target grid");
        if (tilt->epsilon != epsilon) throw ConfigError("estimate_ball_prob: tilt epsilon differs from epsilon");
    } else if (epsilon < kDirectEpsilonFloor) {
        throw DomainError("estimate_ball_prob: direct mode needs epsilon >= 0.05; use the tilted estimator");
    }

    const auto base = params_for(grid, epsilon, seed);
    // log weight of each hit path, -inf for a miss
    std::vector<double> log_w(n);
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        const auto noise = sample_noise(p);
        if (!tilt) {
            const auto z = simulate_z(p, noise);
            log_w[i] = sup_distance(z, target) < r ? 0.0 : -std::numeric_limits<double>::infinity();
            return;
        }
        const auto z = simulate_z_h(p, tilt->h, noise);
        if (!(sup_distance(z, target) < r)) {
            log_w[i] = -std::numeric_limits<double>::infinity();
            return;
        }
        double stoch = 0.0, energy = 0.0;
        for (std::size_t k = 0; k < grid.intervals(); ++k) {
            const double rate = tilt->h.rate(k);
            stoch += rate * noise.increments[k];
            energy += rate * rate * grid.step(k);
        }
        log_w[i] = -stoch / epsilon - energy / (2.0 * epsilon * epsilon);
    });

    MCReport rep;
    rep.n = n;
    rep.mode = tilt ? SamplingMode::tilted : SamplingMode::direct;
    rep.epsilon = epsilon;
    rep.radius = r;
    std::vector<double> hit_logs;
    for (double lw : log_w) {
        if (std::isfinite(lw)) hit_logs.push_back(lw);
    }
    rep.hits = hit_logs.size();
    const double eps2 = epsilon * epsilon;
    if (rep.hits == 0) {
        rep.zero_hits = true;
        rep.p_hat = 0.0;
        rep.ci95 = stats::clopper_pearson_zero_upper(n);
        rep.eps2_log_p = eps2 * std::log(rep.ci95);
        return rep;
    }

    // Work relative to the largest log weight so tiny probabilities stay representable.
    const double shift = *std::max_element(hit_logs.begin(), hit_logs.end());
    std::vector<double> scaled(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - shift) : 0.0;
    const double mean_scaled = stats::mean(scaled);
    const double se_scaled = n > 1 ? stats::stderr_mean(scaled) : 0.0;
    const double log_p = shift + std::log(mean_scaled);
    rep.p_hat = std::exp(log_p);
    rep.ci95 = kZ95 * se_scaled * std::exp(shift);
    rep.eps2_log_p = eps2 * log_p;
    rep.eps2_log_ci = eps2 * kZ95 * se_scaled / mean_scaled;

    double s1 = 0.0, s2 = 0.0;
    for (double w : scaled) {
        s1 += w;
        s2 += w * w;
    }
    rep.ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    return rep;
}

std::vector<SlopeRow> ldp_slope(const ComplexPath& target, const Control& h, double r,
                                const std::vector<double>& eps_list, std::size_t n, std::uint64_t seed,
                                double tilted_below, const WorkerPool& pool) {
    if (eps_list.empty()) throw ConfigError("ldp_slope: empty eps list");
    for (std::size_t j = 1; j < eps_list.size(); ++j) {
        if (!(eps_list[j] < eps_list[j - 1])) throw ConfigError("ldp_slope: eps list must be strictly decreasing");
    }
    const auto rate = eval_I(target);
    if (!rate.finite()) throw DomainError("ldp_slope: target has infinite rate");

    std::vector<SlopeRow> rows;
    for (std::size_t j = 0; j < eps_list.size(); ++j) {
        const double eps = eps_list[j];
        std::optional<TiltSpec> tilt;
        if (eps < tilted_below || j + 1 == eps_list.size()) tilt = TiltSpec{h, eps};
        SlopeRow row;
        row.report = estimate_ball_prob(target, r, eps, n, tilt, row_seed(seed, j), pool);
        row.neg_I = -rate.value;
        row.gap = std::abs(row.report.eps2_log_p + rate.value);
        rows.push_back(row);
    }
    return rows;
}

std::vector<QuantileRow> convergence_probe(const Control& h, const std::vector<double>& eps_list, std::size_t n,
                                           std::uint64_t seed, const WorkerPool& pool) {
    if (n == 0) throw ConfigError("convergence_probe: n must be > 0");
    const auto& grid = h.grid();
    const auto phi = solve_phi(h, OdeScheme{grid, 1, 1e-6}).path;
    std::vector<QuantileRow> rows;
    for (std::size_t j = 0; j < eps_list.size(); ++j) {
        const double eps = eps_list[j];
        if (!(eps >= 0.0)) throw DomainError("convergence_probe: epsilon must be >= 0");
        const auto base = params_for(grid, eps, row_seed(seed, j));
        std::vector<double> dist(n);
        pool.for_each(n, [&](std::size_t i) {
            const auto p = base.with_stream(i);
            dist[i] = sup_distance(simulate_z_h(p, h, sample_noise(p)), phi);
        });
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[i] = dist[i] * dist[i];
        rows.push_back(QuantileRow{eps, stats::quantile(dist, 0.5), stats::quantile(dist, 0.9),
                                   stats::quantile(dist, 0.99), stats::mean(sq)});
    }
    return rows;
}

SupermartingaleReport supermartingale_check(const TestField& field, double epsilon, std::size_t n, std::uint64_t seed,
                                            const WorkerPool& pool) {
    if (n < 2) throw ConfigError("supermartingale_check: n must be >= 2");
    if (!(epsilon >= kSupermartingaleEpsilonFloor)) {
        throw DomainError("supermartingale_check: epsilon must be >= 0.1 (weights degenerate below)");
    }
    const auto& grid = field.grid;
    const auto base = params_for(grid, epsilon, seed);
    std::vector<double> log_m(n), gap(n);
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        const auto noise = sample_noise(p);
        const auto z = simulate_z(p, noise);
        double stoch = 0.0, quad = 0.0;
        for (std::size_t k = 0; k < grid.intervals(); ++k) {
            const complex root = branch_sqrt(z[k]);
            const double a = field.f[k] * root.real() + field.g[k] * root.imag();
            stoch += a * noise.increments[k];
            quad += a * a * grid.step(k);
        }
        const double ito = stoch / epsilon - quad / (2.0 * epsilon * epsilon);
        const double path_form = eval_J(field, z, Quadrature::left_point) / (epsilon * epsilon);
        log_m[i] = ito;
        gap[i] = std::abs(ito - path_form);
    });

    SupermartingaleReport rep;
    rep.n = n;
    rep.epsilon = epsilon;
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = std::exp(log_m[i]);
    rep.mean = stats::mean(m);
    rep.stderr = stats::stderr_mean(m);
    double s1 = 0.0, s2 = 0.0;
    for (double v : m) {
        s1 += v;
        s2 += v * v;
    }
    rep.ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    rep.degenerate = rep.ess < 0.01 * static_cast<double>(n);
    rep.max_identity_gap = *std::max_element(gap.begin(), gap.end());
    return rep;
}

BoundsReport pathwise_bounds_check(double epsilon, const Control& h, std::size_t n, std::uint64_t seed,
                                   std::optional<double> slack, const WorkerPool& pool) {
    if (!(epsilon >= 0.0)) throw DomainError("pathwise_bounds_check: epsilon must be >= 0");
    const auto& grid = h.grid();
    const double delta = slack.value_or(grid_slack(grid));
    if (!(delta >= 0.0)) throw DomainError("pathwise_bounds_check: slack must be >= 0");
    const auto base = params_for(grid, epsilon, seed);

    struct PathCount {
        std::size_t u = 0, v = 0;
        double u_excess = -std::numeric_limits<double>::infinity();
        double v_excess = -std::numeric_limits<double>::infinity();
    };
    std::vector<PathCount> counts(n);
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        const auto noise = sample_noise(p);
        const auto z = simulate_z_h(p, h, noise);
        PathCount c;
        double running = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            running = std::max(running, epsilon * std::abs(noise.values[k]) + std::abs(h.value(k)));
            const complex root = branch_sqrt(z[k]);
            const double u_excess = std::abs(root.real()) - 2.0 * running;
            const double v_excess = root.imag() - std::sqrt((epsilon * epsilon + 1.0) * grid[k]);
            c.u_excess = std::max(c.u_excess, u_excess);
            c.v_excess = std::max(c.v_excess, v_excess);
            if (u_excess > delta) ++c.u;
            if (v_excess > delta) ++c.v;
        }
        counts[i] = c;
    });

    BoundsReport rep;
    rep.paths = n;
    rep.pairs = n * grid.size();
    rep.slack = delta;
    rep.max_u_excess = -std::numeric_limits<double>::infinity();
    rep.max_v_excess = -std::numeric_limits<double>::infinity();
    for (const auto& c : counts) {
        rep.u_violations += c.u;
        rep.v_violations += c.v;
        rep.max_u_excess = std::max(rep.max_u_excess, c.u_excess);
        rep.max_v_excess = std::max(rep.max_v_excess, c.v_excess);
    }
    return rep;
}

double holder_seminorm(const ComplexPath& z, double alpha) {
    const auto& grid = z.grid;
    const double min_gap = 4.0 * grid.max_step();
    double best = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        // first j with t_j - t_i >= min_gap
        std::size_t j = i + 1;
        while (j < grid.size() && grid[j] - grid[i] < min_gap) ++j;
        for (; j < grid.size(); ++j) {
            const double q = std::abs(z[j] - z[i]) / std::pow(grid[j] - grid[i], alpha);
            best = std::max(best, q);
        }
    }
    return best;
}

std::vector<TailRow> holder_tail_probe(const std::vector<double>& eps_list, double alpha,
                                       const std::vector<double>& radii, std::size_t n, std::uint64_t seed,
                                       const TimeGrid& grid, const WorkerPool& pool) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("holder_tail_probe: alpha must lie in (0, 1/2)");
    if (n == 0) throw ConfigError("holder_tail_probe: n must be > 0");
    std::vector<TailRow> rows;
    for (std::size_t j = 0; j < eps_list.size(); ++j) {
        const double eps = eps_list[j];
        if (!(eps > 0.0)) throw DomainError("holder_tail_probe: epsilon must be > 0");
        const auto base = params_for(grid, eps, row_seed(seed, j));
        std::vector<double> norms(n);
        pool.for_each(n, [&](std::size_t i) {
            const auto p = base.with_stream(i);
            norms[i] = holder_seminorm(simulate_z(p, sample_noise(p)), alpha);
        });
        for (double radius : radii) {
            TailRow row;
            row.epsilon = eps;
            row.radius = radius;
            row.n = n;
            row.hits = static_cast<std::size_t>(std::count_if(norms.begin(), norms.end(), [&](double v) { return v >= radius; }));
            row.tail = static_cast<double>(row.hits) / static_cast<double>(n);
            row.eps2_log_tail = row.hits == 0 ? -kInfiniteRate : eps * eps * std::log(row.tail);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace cbesq
