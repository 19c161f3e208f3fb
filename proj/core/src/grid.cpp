#include "cbesq/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbesq/error.hpp"

namespace cbesq {

TimeGrid TimeGrid::graded(double horizon, std::size_t intervals, double gamma) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ConfigError("time grid: horizon T must be positive and finite");
    }
    if (intervals < 2) {
        throw ConfigError("time grid: need at least 2 intervals");
    }
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
        throw ConfigError("time grid: grading exponent gamma must be >= 1");
    }
    std::vector<double> nodes(intervals + 1);
    const double n = static_cast<double>(intervals);
    for (std::size_t k = 0; k <= intervals; ++k) {
        nodes[k] = horizon * std::pow(static_cast<double>(k) / n, gamma);
    }
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes), gamma);
}

TimeGrid TimeGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 3) {
        throw ConfigError("time grid: need at least 3 nodes");
    }
    if (nodes.front() != 0.0) {
        throw ConfigError("time grid: first node must be 0");
    }
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        if (!(nodes[k] > nodes[k - 1]) || !std::isfinite(nodes[k])) {
            throw ConfigError("time grid: nodes must be finite and strictly increasing (node " +
                              std::to_string(k) + ")");
        }
    }
    return TimeGrid(std::move(nodes), 0.0);
}

double TimeGrid::max_step() const {
    double m = 0.0;
    for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) m = std::max(m, step(k));
    return m;
}

std::size_t TimeGrid::locate(double t) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.begin()) return 0;
    const auto k = static_cast<std::size_t>(std::distance(nodes_.begin(), it)) - 1;
    return std::min(k, intervals() - 1);
}

ComplexPath::ComplexPath(TimeGrid g, std::vector<complex> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size()) {
        throw ConfigError("path: " + std::to_string(values.size()) + " values for " +
                          std::to_string(grid.size()) + " grid nodes");
    }
}

ComplexPath ComplexPath::zero_energy(const TimeGrid& grid) {
    std::vector<complex> v(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) v[k] = complex(-grid[k], 0.0);
    return ComplexPath(grid, std::move(v));
}

ComplexPath ComplexPath::from_function(const TimeGrid& grid, const std::function<complex(double)>& f) {
    std::vector<complex> v(grid.size());
    v[0] = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) v[k] = f(grid[k]);
    return ComplexPath(grid, std::move(v));
}

double sup_distance(const ComplexPath& a, const ComplexPath& b) {
    if (!(a.grid == b.grid)) throw ConfigError("sup_distance: paths live on different grids");
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

Control::Control(TimeGrid grid, std::vector<double> rate)
    : grid_(std::move(grid)), rate_(std::move(rate)), values_(grid_.size(), 0.0) {
    if (rate_.size() != grid_.intervals()) {
        throw ConfigError("control: " + std::to_string(rate_.size()) + " derivative values for " +
                          std::to_string(grid_.intervals()) + " intervals");
    }
    for (std::size_t k = 0; k < rate_.size(); ++k) {
        if (!std::isfinite(rate_[k])) throw ConfigError("control: non-finite derivative");
        values_[k + 1] = values_[k] + rate_[k] * grid_.step(k);
    }
}

Control Control::zero(const TimeGrid& grid) {
    return Control(grid, std::vector<double>(grid.intervals(), 0.0));
}

Control Control::from_rate(const TimeGrid& grid, const std::function<double(double)>& hdot) {
    std::vector<double> r(grid.intervals());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = hdot(grid.midpoint(k));
    return Control(grid, std::move(r));
}

Control Control::piecewise(const TimeGrid& grid, std::span<const double> piece_values) {
    if (piece_values.empty()) throw ConfigError("control: no pieces");
    const auto m = piece_values.size();
    std::vector<double> r(grid.intervals());
    for (std::size_t k = 0; k < r.size(); ++k) {
        auto j = static_cast<std::size_t>(grid.midpoint(k) / grid.horizon() * static_cast<double>(m));
        r[k] = piece_values[std::min(j, m - 1)];
    }
    return Control(grid, std::move(r));
}

double Control::h1_norm() const {
    double s = 0.0;
    for (std::size_t k = 0; k < rate_.size(); ++k) s += rate_[k] * rate_[k] * grid_.step(k);
    return std::sqrt(s);
}

double sup_distance(const Control& a, const Control& b) {
    if (!(a.grid_ == b.grid_)) throw ConfigError("sup_distance: controls live on different grids");
    double d = 0.0;
    for (std::size_t k = 0; k < a.values_.size(); ++k) d = std::max(d, std::abs(a.values_[k] - b.values_[k]));
    return d;
}

}  // namespace cbesq
