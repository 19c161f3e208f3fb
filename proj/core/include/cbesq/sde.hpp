#pragma once

#include <cstdint>
#include <vector>

#include "cbesq/grid.hpp"

// Euler-Maruyama simulation of the complex squared Bessel SDE
//
//     dZ = -dt + 2 eps sqrt(Z) (dB + dh / eps),   Z_0 = 0,
//
// its unscaled form dY = 2 sqrt(Y) dB - eta dt, the classical real process
// dX = 2 sqrt(X) dB + delta dt, and the quantities derived from them.
namespace cbesq {

struct SimParams {
    double epsilon = 0.0;  // noise scale, eps = 1/sqrt(eta)
    TimeGrid grid = TimeGrid::graded(1.0, 4096, 2.0);
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;  // per-path substream

    SimParams with_stream(std::uint64_t s) const {
        SimParams p = *this;
        p.stream = s;
        return p;
    }
};

/// Square root with Im >= 0.
///
/// Off the slit [0, inf) this is the conformal root onto the upper half-plane.
/// On the slit it returns the nonnegative real root and, for z > 0, bumps the
/// process-wide slit counter.
complex branch_sqrt(complex z);

/// Number of branch_sqrt calls that landed on (0, inf) since the last reset.
std::uint64_t slit_hits();
void reset_slit_hits();

/// Brownian increments dB_k ~ N(0, dt_k), reproducible from (seed, stream).
NoisePath sample_noise(const SimParams& params);

/// Euler-Maruyama path of dZ = -dt + 2 eps sqrt(Z) dB. The first step is pure
/// drift, which puts Z_{t_1} = -t_1 on the negative axis where sqrt is i sqrt(t).
ComplexPath simulate_z(const SimParams& params, const NoisePath& noise);

/// Cameron-Martin shifted path: the increment is eps dB_k + hdot_k dt_k.
ComplexPath simulate_z_h(const SimParams& params, const Control& h, const NoisePath& noise);

/// The unscaled process dY = 2 sqrt(Y) dB - eta dt on the same scheme.
ComplexPath simulate_y_eta(double eta, const NoisePath& noise);

struct RealPath {
    TimeGrid grid;
    std::vector<double> values;
    std::size_t clamp_count = 0;  // steps whose Euler update went negative
};

/// dX = 2 sqrt(X) dB + delta dt from X_0 = x0, clamped at 0.
RealPath simulate_x_delta(double delta, double x0, const SimParams& params, const NoisePath& noise);

/// F_t = (Z_t + t) / eps.
ComplexPath fluctuation_path(const ComplexPath& z, double epsilon);

/// One draw of the SLE_kappa tip at capacity time T: sqrt(kappa Y_T) with
/// eta = 4/kappa - 1. params.grid is rescaled to horizon T; params.epsilon is
/// ignored (it is fixed by kappa).
complex sle_tip_sample(double kappa, double horizon, const SimParams& params);

/// One-step discretization slack for the pathwise bounds, 4 sqrt(max dt).
double grid_slack(const TimeGrid& grid);

}  // namespace cbesq
