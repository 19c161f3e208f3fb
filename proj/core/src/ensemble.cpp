#include "cbesq/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"

namespace cbesq {

namespace {

SimParams base_params(const TimeGrid& grid, double epsilon, std::uint64_t seed) {
    SimParams p;
    p.grid = grid;
    p.epsilon = epsilon;
    p.seed = seed;
    return p;
}

std::size_t nearest_node(const TimeGrid& grid, double t) {
    const auto nodes = grid.nodes();
    auto it = std::lower_bound(nodes.begin(), nodes.end(), t);
    if (it == nodes.end()) return grid.size() - 1;
    auto k = static_cast<std::size_t>(it - nodes.begin());
    if (k > 0 && std::abs(nodes[k - 1] - t) < std::abs(nodes[k] - t)) --k;
    return k;
}

}  // namespace

FluctuationReport fluctuation_probe(const TimeGrid& grid, double epsilon, double s, double t, std::size_t n,
                                    std::uint64_t seed, const WorkerPool& pool) {
    if (!(epsilon > 0.0)) throw DomainError("fluctuation_probe: epsilon must be > 0");
    if (!(s > 0.0 && s <= t && t <= grid.horizon())) throw DomainError("fluctuation_probe: need 0 < s <= t <= T");
    if (n < 3) throw ConfigError("fluctuation_probe: n must be >= 3");
    const auto ks = nearest_node(grid, s);
    const auto kt = nearest_node(grid, t);
    const auto base = base_params(grid, epsilon, seed);
    std::vector<double> im_s(n), im_t(n), re_end(n);
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        const auto f = fluctuation_path(simulate_z(p, sample_noise(p)), epsilon);
        im_s[i] = f[ks].imag();
        im_t[i] = f[kt].imag();
        re_end[i] = f.values.back().real();
    });
    FluctuationReport rep;
    rep.epsilon = epsilon;
    rep.n = n;
    rep.s = grid[ks];
    rep.t = grid[kt];
    rep.cov_im = stats::covariance(im_s, im_t);
    rep.var_im_s = stats::variance_estimate(im_s);
    rep.var_im_t = stats::variance_estimate(im_t);
    rep.var_re_end = stats::variance_estimate(re_end);
    return rep;
}

BesselReport bessel_probe(const TimeGrid& grid, double delta, double x0, std::size_t n, std::uint64_t seed,
                          const WorkerPool& pool) {
    if (!(delta > 0.0)) throw DomainError("bessel_probe: delta must be > 0");
    if (n < 3) throw ConfigError("bessel_probe: n must be >= 3");
    const auto base = base_params(grid, 0.0, seed);
    std::vector<double> end(n), normalized(n);
    std::vector<std::size_t> clamps(n);
    const double T = grid.horizon();
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        const auto x = simulate_x_delta(delta, x0, p, sample_noise(p));
        end[i] = x.values.back();
        normalized[i] = std::sqrt(delta) * (end[i] / delta - T);
        clamps[i] = x.clamp_count;
    });
    BesselReport rep;
    rep.delta = delta;
    rep.x0 = x0;
    rep.n = n;
    rep.mean_end = {stats::mean(end), stats::stderr_mean(end)};
    rep.var_normalized = stats::variance_estimate(normalized);
    for (auto c : clamps) rep.clamps += c;
    return rep;
}

std::vector<double> zero_energy_deviations(const TimeGrid& grid, double epsilon, std::size_t n, std::uint64_t seed,
                                           const WorkerPool& pool) {
    const auto base = base_params(grid, epsilon, seed);
    const auto limit = ComplexPath::zero_energy(grid);
    std::vector<double> out(n);
    pool.for_each(n, [&](std::size_t i) {
        const auto p = base.with_stream(i);
        out[i] = sup_distance(simulate_z(p, sample_noise(p)), limit);
    });
    return out;
}

std::vector<complex> sle_tip_ensemble(double kappa, const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                      const WorkerPool& pool) {
    const auto base = base_params(grid, 0.0, seed);
    std::vector<complex> out(n);
    pool.for_each(n, [&](std::size_t i) { out[i] = sle_tip_sample(kappa, grid.horizon(), base.with_stream(i)); });
    return out;
}

}  // namespace cbesq
