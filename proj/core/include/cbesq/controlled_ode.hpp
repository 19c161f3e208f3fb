#pragma once

#include <cstddef>
#include <vector>

#include "cbesq/grid.hpp"

namespace cbesq {

struct OdeScheme {
    TimeGrid grid = TimeGrid::graded(1.0, 4096, 2.0);
    std::size_t startup_nodes = 1;  // nodes seeded by the small-t expansion
    double tolerance = 1e-6;        // bound on the absolute handoff residual
};

struct OdeSolution {
    ComplexPath path;
    /// min over k >= 1 of Im(sqrt(phi_{t_k})) / sqrt(t_k)
    double min_sqrt_ratio = 0.0;
    /// |phi_s + t_s - 2 int_0^{t_s} sqrt(phi) dh| for the expansion at the handoff node s
    double handoff_residual = 0.0;
};

/// Solves d(phi) = -dt + 2 sqrt(phi) dh from phi_0 = 0.
///
/// The first `startup_nodes` nodes come from phi_t ~ -t + (4/3) i hdot(0) t^{3/2},
/// with hdot(0) the first interval's value. After the handoff each interval is
/// advanced by the midpoint rule
///
///     phi_{k+1} = phi_k - dt_k + 2 sqrt((phi_k + phi_{k+1}) / 2) hdot_k dt_k,
///
/// solved by fixed-point iteration. The drift is integrated exactly, and the
/// rule makes (dphi/dt + 1) / (2 sqrt(phi_mid)) equal hdot_k on every step.
///
/// Throws RefinementError when the handoff residual exceeds scheme.tolerance.
OdeSolution solve_phi(const Control& h, const OdeScheme& scheme);

/// Uniform distances sup_k |phi^{h_n}(t_k) - phi^{h}(t_k)| for each h_n.
std::vector<double> continuity_probe(const std::vector<Control>& h_seq, const Control& h_limit,
                                     const OdeScheme& scheme);

/// True when phi_{t_k} lies off [0, inf) for every k >= 1 (exact test).
bool off_slit(const ComplexPath& phi);

}  // namespace cbesq
