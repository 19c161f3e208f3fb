#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbesq/grid.hpp"
#include "cbesq/parallel.hpp"

namespace cbesq {

/// Minimal energy 1/2 ||hdot||^2 over controls whose path phi^h ends at z^2.
struct GeodesicProblem {
    complex target;          // z, Im z > 0
    double horizon = 0.0;    // T; 0 selects T = |z|^2
    std::size_t pieces = 64;          // control dimension m
    std::size_t intervals = 1024;     // ODE grid size N
    double gamma = 2.0;               // ODE grid grading
    std::vector<double> penalties;    // lambda_j, strictly increasing; empty selects 10^0 .. 10^6
    std::size_t multistart = 2;       // 1: hdot = 0 only, 2: also the straight-line heuristic
    std::size_t max_iterations = 400; // quasi-Newton iterations per penalty stage
    double defect_tolerance = 1e-4;   // required |phi_T - z^2| / |z^2|
};

struct GeodesicResult {
    std::vector<double> pieces;  // hdot on each of the m equal sub-intervals
    Control control;             // the same control on the ODE grid
    double energy = 0.0;         // 1/2 sum hdot_k^2 dt_k
    double horizon = 0.0;
    complex endpoint;            // phi^h_T
    double defect = 0.0;         // |phi_T - z^2| / |z^2|
    bool converged = false;
    double closed_form = 0.0;
    double relative_error = 0.0;  // (energy - closed_form) / closed_form, or absolute when closed_form = 0
    std::vector<double> start_energies;
    std::size_t evaluations = 0;
};

/// -8 log(sin(arg z)) for 0 < arg z < pi.
double tip_rate_closed_form(complex z);

/// Penalty continuation over lambda_j with BFGS (central finite-difference
/// gradients) from each start; multistarts run on `pool`. The best start that
/// meets the endpoint defect wins; if none does the result has converged = false
/// and carries the best iterate.
GeodesicResult min_energy_to_point(const GeodesicProblem& problem, const WorkerPool& pool = WorkerPool::serial());

struct HorizonScan {
    std::vector<GeodesicResult> runs;  // one per horizon, in input order
    std::optional<std::size_t> best;   // lowest-energy converged run
};

/// Re-solves the problem at each horizon. The minimal energy depends on T, so
/// the infimum over all paths joining 0 to z^2 is the minimum over this scan.
HorizonScan scan_horizon(const GeodesicProblem& problem, std::span<const double> horizons,
                         const WorkerPool& pool = WorkerPool::serial());

}  // namespace cbesq
