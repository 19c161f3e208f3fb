#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cbesq {

using complex = std::complex<double>;

/// Time nodes 0 = t_0 < t_1 < ... < t_N = T.
///
/// The graded family places t_k = T (k/N)^gamma, which clusters nodes near
/// t = 0 where Im(sqrt(Z_t)) behaves like sqrt(t). gamma = 1 is uniform.
class TimeGrid {
public:
    static TimeGrid graded(double horizon, std::size_t intervals, double gamma = 2.0);
    static TimeGrid uniform(double horizon, std::size_t intervals) {
        return graded(horizon, intervals, 1.0);
    }
    /// Arbitrary nodes; validated (t_0 = 0, strictly increasing, N >= 2).
    static TimeGrid from_nodes(std::vector<double> nodes);

    double horizon() const { return nodes_.back(); }
    double gamma() const { return gamma_; }
    std::size_t intervals() const { return nodes_.size() - 1; }
    std::size_t size() const { return nodes_.size(); }

    double operator[](std::size_t k) const { return nodes_[k]; }
    double step(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }
    double midpoint(std::size_t k) const { return 0.5 * (nodes_[k] + nodes_[k + 1]); }
    double max_step() const;
    std::span<const double> nodes() const { return nodes_; }

    /// Interval index containing t (clamped to [0, N-1]).
    std::size_t locate(double t) const;

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) { return a.nodes_ == b.nodes_; }

private:
    TimeGrid(std::vector<double> nodes, double gamma) : nodes_(std::move(nodes)), gamma_(gamma) {}

    std::vector<double> nodes_;
    double gamma_ = 1.0;
};

/// A complex path sampled on a grid; values[0] is the starting point 0.
struct ComplexPath {
    TimeGrid grid;
    std::vector<complex> values;

    ComplexPath(TimeGrid g, std::vector<complex> v);

    std::size_t size() const { return values.size(); }
    const complex& operator[](std::size_t k) const { return values[k]; }

    /// The deterministic small-noise limit phi_t = -t.
    static ComplexPath zero_energy(const TimeGrid& grid);
    /// Sample a closed-form path t -> f(t).
    static ComplexPath from_function(const TimeGrid& grid, const std::function<complex(double)>& f);
};

/// Uniform (sup over grid nodes) distance between two paths on the same grid.
double sup_distance(const ComplexPath& a, const ComplexPath& b);

/// Brownian increments on a grid, with the cumulative values B_{t_k}.
struct NoisePath {
    TimeGrid grid;
    std::vector<double> increments;  // one per interval
    std::vector<double> values;      // one per node, values[0] = 0
};

/// A Cameron-Martin direction h with piecewise-constant derivative.
class Control {
public:
    Control(TimeGrid grid, std::vector<double> rate);

    /// Zero control.
    static Control zero(const TimeGrid& grid);
    /// hdot sampled at interval midpoints.
    static Control from_rate(const TimeGrid& grid, const std::function<double(double)>& hdot);
    /// Piecewise constant on `pieces` equal sub-intervals of [0, T]; each grid
    /// interval takes the value of the piece containing its midpoint.
    static Control piecewise(const TimeGrid& grid, std::span<const double> piece_values);

    const TimeGrid& grid() const { return grid_; }
    std::span<const double> rate() const { return rate_; }
    double rate(std::size_t k) const { return rate_[k]; }
    std::span<const double> values() const { return values_; }
    double value(std::size_t k) const { return values_[k]; }

    /// sqrt(sum_k hdot_k^2 dt_k)
    double h1_norm() const;
    /// 1/2 ||h||^2, the energy of the controlled path.
    double energy() const { const double n = h1_norm(); return 0.5 * n * n; }

    /// Sup distance between the cumulative values of two controls on one grid.
    friend double sup_distance(const Control& a, const Control& b);

private:
    TimeGrid grid_;
    std::vector<double> rate_;
    std::vector<double> values_;
};

}  // namespace cbesq
