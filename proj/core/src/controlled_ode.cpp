#include "cbesq/controlled_ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"

namespace cbesq {

namespace {

constexpr int kMaxFixedPointIters = 200;

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGaussX = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                           -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                           0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussW = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                           0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

complex startup_value(double t, double rate0) {
    return complex(-t, (4.0 / 3.0) * rate0 * t * std::sqrt(t));
}

// int_a^b sqrt(phi_exp(r)) dr with r = u^2, which removes the sqrt(r) cusp at 0.
complex startup_root_integral(double a, double b, double rate0) {
    const double ua = std::sqrt(a);
    const double ub = std::sqrt(b);
    const double half = 0.5 * (ub - ua);
    const double mid = 0.5 * (ub + ua);
    complex sum = 0.0;
    for (std::size_t i = 0; i < kGaussX.size(); ++i) {
        const double u = mid + half * kGaussX[i];
        sum += kGaussW[i] * branch_sqrt(startup_value(u * u, rate0)) * (2.0 * u);
    }
    return sum * half;
}

// Control increment 2 sqrt((phi + phi_next) / 2) dh of one step, where
// phi_next = phi - dt + (the increment); found by fixed-point iteration.
complex midpoint_increment(complex phi, double dt, double dh) {
    if (dh == 0.0) return 0.0;
    const complex half = phi - 0.5 * dt + branch_sqrt(phi) * dh;  // explicit midpoint predictor
    complex inc = 2.0 * branch_sqrt(half) * dh;
    for (int it = 0; it < kMaxFixedPointIters; ++it) {
        const complex updated = 2.0 * branch_sqrt(phi + 0.5 * (inc - dt)) * dh;
        const double change = std::abs(updated - inc);
        inc = updated;
        if (change <= 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(phi) + dt)) return inc;
    }
    throw NonConvergence("solve_phi: midpoint iteration did not settle; refine the grid");
}

}  // namespace

OdeSolution solve_phi(const Control& h, const OdeScheme& scheme) {
    const auto& grid = scheme.grid;
    if (!(h.grid() == grid)) throw ConfigError("solve_phi: control grid differs from scheme grid");
    if (scheme.startup_nodes < 1 || scheme.startup_nodes >= grid.intervals()) {
        throw ConfigError("solve_phi: startup_nodes must lie in [1, N)");
    }
    if (!(scheme.tolerance > 0.0)) throw ConfigError("solve_phi: tolerance must be > 0");

    const std::size_t s = scheme.startup_nodes;
    const double rate0 = h.rate(0);
    std::vector<complex> phi(grid.size());
    phi[0] = 0.0;
    for (std::size_t k = 1; k <= s; ++k) phi[k] = startup_value(grid[k], rate0);

    complex control_term = 0.0;
    for (std::size_t k = 0; k < s; ++k) {
        control_term += 2.0 * h.rate(k) * startup_root_integral(grid[k], grid[k + 1], rate0);
    }
    const double residual = std::abs(phi[s] + grid[s] - control_term);
    if (!(residual <= scheme.tolerance)) {
        throw RefinementError("solve_phi: startup residual " + std::to_string(residual) + " at t = " +
                              std::to_string(grid[s]) + " exceeds tolerance; increase N or reduce startup_nodes");
    }

    // phi = -t + dev, with dev accumulated so that h = 0 gives -t exactly
    complex dev = phi[s] + grid[s];
    for (std::size_t k = s; k < grid.intervals(); ++k) {
        dev += midpoint_increment(phi[k], grid.step(k), h.rate(k) * grid.step(k));
        phi[k + 1] = complex(-grid[k + 1], 0.0) + dev;
    }

    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < grid.size(); ++k) {
        ratio = std::min(ratio, branch_sqrt(phi[k]).imag() / std::sqrt(grid[k]));
    }
    return OdeSolution{ComplexPath(grid, std::move(phi)), ratio, residual};
}

std::vector<double> continuity_probe(const std::vector<Control>& h_seq, const Control& h_limit,
                                     const OdeScheme& scheme) {
    const auto limit = solve_phi(h_limit, scheme).path;
    std::vector<double> out;
    out.reserve(h_seq.size());
    for (const auto& h : h_seq) {
        if (!(h.grid() == scheme.grid)) throw ConfigError("continuity_probe: incompatible control grid");
        out.push_back(sup_distance(solve_phi(h, scheme).path, limit));
    }
    return out;
}

bool off_slit(const ComplexPath& phi) {
    for (std::size_t k = 1; k < phi.size(); ++k) {
        if (phi[k].imag() == 0.0 && phi[k].real() >= 0.0) return false;
    }
    return true;
}

}  // namespace cbesq
