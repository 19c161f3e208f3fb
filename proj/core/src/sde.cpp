#include "cbesq/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "cbesq/error.hpp"

namespace cbesq {

namespace {

std::atomic<std::uint64_t> g_slit_hits{0};

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
    if (!(a == b)) throw ConfigError(std::string(what) + ": noise grid differs from simulation grid");
}

// Shared Euler-Maruyama loop. `drive(k)` is the increment multiplying
// 2 sqrt(Z_k); `drift_scale` multiplies -dt_k. The deviation D = Z + c t is
// accumulated instead of Z, so the drift line itself is reproduced exactly.
template <typename Drive>
std::vector<complex> euler_complex(const TimeGrid& grid, double drift_scale, Drive&& drive) {
    std::vector<complex> z(grid.size());
    z[0] = 0.0;
    z[1] = complex(-drift_scale * grid[1], 0.0);
    complex dev = 0.0;
    for (std::size_t k = 1; k < grid.intervals(); ++k) {
        dev += 2.0 * branch_sqrt(z[k]) * drive(k);
        z[k + 1] = complex(-drift_scale * grid[k + 1], 0.0) + dev;
    }
    return z;
}

}  // namespace

complex branch_sqrt(complex z) {
    if (z.imag() == 0.0 && z.real() >= 0.0) {
        if (z.real() > 0.0) g_slit_hits.fetch_add(1, std::memory_order_relaxed);
        return complex(std::sqrt(z.real()), 0.0);
    }
    complex w = std::sqrt(z);
    if (w.imag() < 0.0) w = -w;
    // z on the negative axis with a -0 imaginary part comes back as -i sqrt|z|.
    return complex(w.real(), std::abs(w.imag()));
}

std::uint64_t slit_hits() { return g_slit_hits.load(); }
void reset_slit_hits() { g_slit_hits.store(0); }

NoisePath sample_noise(const SimParams& params) {
    const auto& grid = params.grid;
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(params.stream),
                      static_cast<std::uint32_t>(params.stream >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    NoisePath noise{grid, std::vector<double>(grid.intervals()), std::vector<double>(grid.size(), 0.0)};
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        noise.increments[k] = std::sqrt(grid.step(k)) * normal(rng);
        noise.values[k + 1] = noise.values[k] + noise.increments[k];
    }
    return noise;
}

ComplexPath simulate_z(const SimParams& params, const NoisePath& noise) {
    require_same_grid(params.grid, noise.grid, "simulate_z");
    if (!(params.epsilon >= 0.0)) throw DomainError("simulate_z: epsilon must be >= 0");
    const double eps = params.epsilon;
    return ComplexPath(params.grid,
                       euler_complex(params.grid, 1.0, [&](std::size_t k) { return eps * noise.increments[k]; }));
}

ComplexPath simulate_z_h(const SimParams& params, const Control& h, const NoisePath& noise) {
    require_same_grid(params.grid, noise.grid, "simulate_z_h");
    require_same_grid(params.grid, h.grid(), "simulate_z_h (control)");
    if (!(params.epsilon >= 0.0)) throw DomainError("simulate_z_h: epsilon must be >= 0");
    const double eps = params.epsilon;
    const auto& grid = params.grid;
    return ComplexPath(grid, euler_complex(grid, 1.0, [&](std::size_t k) {
                           return eps * noise.increments[k] + h.rate(k) * grid.step(k);
                       }));
}

ComplexPath simulate_y_eta(double eta, const NoisePath& noise) {
    if (!(eta > 0.0)) throw DomainError("simulate_y_eta: eta must be > 0");
    return ComplexPath(noise.grid,
                       euler_complex(noise.grid, eta, [&](std::size_t k) { return noise.increments[k]; }));
}

RealPath simulate_x_delta(double delta, double x0, const SimParams& params, const NoisePath& noise) {
    if (!(delta >= 0.0)) throw DomainError("simulate_x_delta: delta must be >= 0 (use simulate_z for the complex case)");
    if (!(x0 >= 0.0)) throw DomainError("simulate_x_delta: x0 must be >= 0");
    require_same_grid(params.grid, noise.grid, "simulate_x_delta");
    const auto& grid = params.grid;
    RealPath x{grid, std::vector<double>(grid.size()), 0};
    x.values[0] = x0;
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        const double next = x.values[k] + 2.0 * std::sqrt(x.values[k]) * noise.increments[k] + delta * grid.step(k);
        if (next < 0.0) {
            ++x.clamp_count;
            x.values[k + 1] = 0.0;
        } else {
            x.values[k + 1] = next;
        }
    }
    return x;
}

ComplexPath fluctuation_path(const ComplexPath& z, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("fluctuation_path: epsilon must be > 0");
    std::vector<complex> f(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) f[k] = (z[k] + z.grid[k]) / epsilon;
    return ComplexPath(z.grid, std::move(f));
}

complex sle_tip_sample(double kappa, double horizon, const SimParams& params) {
    if (!(kappa > 0.0 && kappa < 4.0)) throw DomainError("sle_tip_sample: kappa must lie in (0, 4)");
    if (!(horizon > 0.0)) throw DomainError("sle_tip_sample: T must be > 0");
    const double eta = 4.0 / kappa - 1.0;
    SimParams p = params;
    p.epsilon = 1.0 / std::sqrt(eta);
    if (p.grid.horizon() != horizon) {
        std::vector<double> nodes(p.grid.nodes().begin(), p.grid.nodes().end());
        const double scale = horizon / p.grid.horizon();
        for (double& t : nodes) t *= scale;
        nodes.back() = horizon;
        p.grid = TimeGrid::from_nodes(std::move(nodes));
    }
    const auto z = simulate_z(p, sample_noise(p));
    return branch_sqrt(kappa * eta * z.values.back());
}

double grid_slack(const TimeGrid& grid) { return 4.0 * std::sqrt(grid.max_step()); }

}  // namespace cbesq
