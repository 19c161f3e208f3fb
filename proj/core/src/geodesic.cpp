#include "cbesq/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"

namespace cbesq {

double tip_rate_closed_form(complex z) {
    const double theta = std::arg(z);
    if (!(theta > 0.0 && theta < std::numbers::pi)) throw DomainError("tip_rate_closed_form: arg z must lie in (0, pi)");
    return -8.0 * std::log(std::sin(theta));
}

namespace {

struct Evaluation {
    double energy = 0.0;
    complex endpoint;
};

class EndpointMap {
public:
    EndpointMap(const GeodesicProblem& p, double horizon)
        : scheme_{TimeGrid::graded(horizon, p.intervals, p.gamma), 1, 1e-6} {}

    Control control(const Eigen::VectorXd& x) const {
        return Control::piecewise(scheme_.grid, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

    Evaluation operator()(const Eigen::VectorXd& x) const {
        ++calls;
        const auto h = control(x);
        try {
            const auto sol = solve_phi(h, scheme_);
            return {h.energy(), sol.path.values.back()};
        } catch (const RefinementError&) {
        } catch (const NonConvergence&) {
        }
        // unresolvable controls are rejected by the line search
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, complex(inf, inf)};
    }

    const OdeScheme& scheme() const { return scheme_; }
    mutable std::size_t calls = 0;

private:
    OdeScheme scheme_;
};

struct Objective {
    const EndpointMap& map;
    complex goal;
    double lambda;

    double operator()(const Eigen::VectorXd& x) const {
        const auto e = map(x);
        return e.energy + lambda * std::norm(e.endpoint - goal);
    }
};

Eigen::VectorXd fd_gradient(const Objective& obj, Eigen::VectorXd x) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double xj = x[j];
        const double step = 1e-6 * (1.0 + std::abs(xj));
        x[j] = xj + step;
        const double up = obj(x);
        x[j] = xj - step;
        const double down = obj(x);
        x[j] = xj;
        g[j] = (up - down) / (2.0 * step);
    }
    return g;
}

// Dense BFGS on the inverse Hessian with Armijo backtracking.
Eigen::VectorXd bfgs(const Objective& obj, Eigen::VectorXd x, std::size_t max_iters) {
    const auto n = x.size();
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    double f = obj(x);
    Eigen::VectorXd g = fd_gradient(obj, x);
    bool scaled = false;
    int stalls = 0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + std::abs(f))) break;
        Eigen::VectorXd p = -H * g;
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            H.setIdentity();
            p = -g;
            slope = -g.squaredNorm();
        }
        double alpha = 1.0;
        Eigen::VectorXd trial;
        double f_trial = f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            trial = x + alpha * p;
            f_trial = obj(trial);
            if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (H.isIdentity()) break;
            H.setIdentity();
            continue;
        }
        const Eigen::VectorXd g_new = fd_gradient(obj, trial);
        const Eigen::VectorXd s = trial - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            if (!scaled) {
                H *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        const double decrease = f - f_trial;
        x = trial;
        g = g_new;
        f = f_trial;
        stalls = decrease <= 1e-15 * (1.0 + std::abs(f)) ? stalls + 1 : 0;
        if (stalls >= 3) break;
    }
    return x;
}

Eigen::VectorXd straight_line_start(complex goal, double horizon, std::size_t m) {
    // hdot = Re((phi' + 1) / (2 sqrt(phi))) along phi_t = (t / T) z^2
    Eigen::VectorXd x(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const double t = (static_cast<double>(j) + 0.5) * horizon / static_cast<double>(m);
        const complex phi = goal * (t / horizon);
        x[static_cast<Eigen::Index>(j)] = ((goal / horizon + 1.0) / (2.0 * branch_sqrt(phi))).real();
    }
    return x;
}

struct StartOutcome {
    Eigen::VectorXd x;
    Evaluation eval;
    std::size_t calls = 0;
};

}  // namespace

GeodesicResult min_energy_to_point(const GeodesicProblem& problem, const WorkerPool& pool) {
    const complex z = problem.target;
    if (!(z.imag() > 0.0)) throw DomainError("min_energy_to_point: target must have Im z > 0");
    if (problem.pieces < 1) throw ConfigError("min_energy_to_point: need at least one control piece");
    if (problem.multistart < 1 || problem.multistart > 2) throw ConfigError("min_energy_to_point: multistart must be 1 or 2");
    std::vector<double> lambdas = problem.penalties;
    if (lambdas.empty()) {
        for (int j = 0; j <= 6; ++j) lambdas.push_back(std::pow(10.0, j));
    }
    for (std::size_t j = 1; j < lambdas.size(); ++j) {
        if (!(lambdas[j] > lambdas[j - 1])) throw ConfigError("min_energy_to_point: penalties must increase strictly");
    }

    const double horizon = problem.horizon > 0.0 ? problem.horizon : std::norm(z);
    const complex goal = z * z;

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.pieces)));
    if (problem.multistart > 1) starts.push_back(straight_line_start(goal, horizon, problem.pieces));

    std::vector<StartOutcome> outcomes(starts.size());
    pool.for_each(starts.size(), [&](std::size_t s) {
        EndpointMap map(problem, horizon);
        Eigen::VectorXd x = starts[s];
        for (double lambda : lambdas) {
            Objective obj{map, goal, lambda};
            x = bfgs(obj, std::move(x), problem.max_iterations);
        }
        outcomes[s] = StartOutcome{x, map(x), map.calls};
    });

    std::size_t best = 0;
    bool best_ok = false;
    std::vector<double> start_energies;
    std::size_t evaluations = 0;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        const auto& o = outcomes[s];
        start_energies.push_back(o.eval.energy);
        evaluations += o.calls;
        const bool ok = std::abs(o.eval.endpoint - goal) <= problem.defect_tolerance * std::abs(goal);
        const bool better = (ok && !best_ok) || (ok == best_ok && o.eval.energy < outcomes[best].eval.energy);
        if (s == 0 || better) {
            best = s;
            best_ok = ok;
        }
    }
    const auto& win = outcomes[best];
    EndpointMap map(problem, horizon);
    GeodesicResult res{
        .pieces = std::vector<double>(win.x.data(), win.x.data() + win.x.size()),
        .control = map.control(win.x),
        .energy = win.eval.energy,
        .horizon = horizon,
        .endpoint = win.eval.endpoint,
        .defect = std::abs(win.eval.endpoint - goal) / std::abs(goal),
        .converged = best_ok,
        .closed_form = tip_rate_closed_form(z),
        .relative_error = 0.0,
        .start_energies = std::move(start_energies),
        .evaluations = evaluations,
    };
    res.relative_error = res.closed_form > 0.0 ? (res.energy - res.closed_form) / res.closed_form
                                               : res.energy - res.closed_form;
    return res;
}

HorizonScan scan_horizon(const GeodesicProblem& problem, std::span<const double> horizons, const WorkerPool& pool) {
    HorizonScan scan;
    for (double T : horizons) {
        if (!(T > 0.0)) throw ConfigError("scan_horizon: horizons must be > 0");
        auto p = problem;
        p.horizon = T;
        scan.runs.push_back(min_energy_to_point(p, pool));
        const auto& r = scan.runs.back();
        if (r.converged && (!scan.best || r.energy < scan.runs[*scan.best].energy)) scan.best = scan.runs.size() - 1;
    }
    return scan;
}

}  // namespace cbesq
