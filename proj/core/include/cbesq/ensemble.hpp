#pragma once

#include <cstdint>
#include <vector>

#include "cbesq/grid.hpp"
#include "cbesq/parallel.hpp"
#include "cbesq/stats.hpp"

// Ensemble statistics of the simulated processes. Each path is reduced to a
// few scalars inside its job, so memory stays O(n) whatever the grid size.
namespace cbesq {

struct FluctuationReport {
    double epsilon = 0.0;
    std::size_t n = 0;
    double s = 0.0, t = 0.0;
    stats::Estimate cov_im;     // Cov(Im F_s, Im F_t)
    stats::Estimate var_im_s;   // Var(Im F_s)
    stats::Estimate var_im_t;   // Var(Im F_t)
    stats::Estimate var_re_end; // Var(Re F_T)
};

/// Statistics of F = (Z^eps + t)/eps at two times s <= t (snapped to nodes).
FluctuationReport fluctuation_probe(const TimeGrid& grid, double epsilon, double s, double t, std::size_t n,
                                    std::uint64_t seed, const WorkerPool& pool = WorkerPool::serial());

struct BesselReport {
    double delta = 0.0;
    double x0 = 0.0;
    std::size_t n = 0;
    stats::Estimate mean_end;        // E X_T
    stats::Estimate var_normalized;  // Var(sqrt(delta) (X_T / delta - T))
    std::size_t clamps = 0;
};

BesselReport bessel_probe(const TimeGrid& grid, double delta, double x0, std::size_t n, std::uint64_t seed,
                          const WorkerPool& pool = WorkerPool::serial());

/// sup_k |Z_{t_k} + t_k| for each of n paths.
std::vector<double> zero_energy_deviations(const TimeGrid& grid, double epsilon, std::size_t n, std::uint64_t seed,
                                           const WorkerPool& pool = WorkerPool::serial());

/// n tip samples sqrt(kappa Y_T).
std::vector<complex> sle_tip_ensemble(double kappa, const TimeGrid& grid, std::size_t n, std::uint64_t seed,
                                      const WorkerPool& pool = WorkerPool::serial());

}  // namespace cbesq
