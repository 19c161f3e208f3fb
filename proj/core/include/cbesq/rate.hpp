#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cbesq/grid.hpp"

namespace cbesq {

/// Reserved value standing for +infinity; always paired with a flag.
inline constexpr double kInfiniteRate = std::numeric_limits<double>::max();

struct RateResult {
    bool h1_ok = false;  // phi_t off [0, inf) for t > 0
    bool h2_ok = false;  // discrete absolute continuity, sum |dphi|^2 / dt finite
    bool h3_ok = false;  // (dphi/dt + 1) / (2 sqrt(phi)) real at interval midpoints
    double value = kInfiniteRate;
    std::optional<Control> recovered_control;

    double h2_energy = 0.0;       // sum |dphi_k|^2 / dt_k
    double max_h3_defect = 0.0;   // max |Im r_k| / (1 + |Re r_k|) over checked intervals
    std::size_t h3_first_bad = 0;  // first failing interval when !h3_ok

    bool finite() const { return h1_ok && h2_ok && h3_ok; }
};

inline constexpr double kH3Tolerance = 1e-6;

/// Midpoint-rule value of int (phi' + 1)^2 / (8 phi) dt with the H1-H3 checks.
///
/// With r_k = (dphi_k/dt_k + 1) / (2 sqrt((phi_k + phi_{k+1}) / 2)) the value is
/// 1/2 sum r_k^2 dt_k and the recovered control is hdot_k = Re r_k. The first
/// interval is exempt from the H3 check: its quotient is 0/0 in the limit.
RateResult eval_I(const ComplexPath& phi);

/// A pair of real test functions (f, g) on a grid: node values and one
/// derivative per interval with f_{k+1} - f_k = fdot_k dt_k.
struct TestField {
    TimeGrid grid;
    std::vector<double> f, fdot;
    std::vector<double> g, gdot;

    /// Validating constructor; derivatives must integrate to the node values
    /// within 1e-10 (relative to the field scale).
    TestField(TimeGrid grid, std::vector<double> f, std::vector<double> fdot, std::vector<double> g,
              std::vector<double> gdot);

    /// Samples f and g at the nodes and takes the exact difference quotients.
    static TestField from_functions(const TimeGrid& grid, const std::function<double(double)>& f,
                                    const std::function<double(double)>& g);
    static TestField from_nodes(const TimeGrid& grid, std::vector<double> f, std::vector<double> g);

    /// f, g = a0 + a1 t/T + a2 sin(pi t/T) + a3 cos(pi t/T) with coefficients
    /// drawn uniformly from [-amplitude, amplitude].
    static TestField random_smooth(const TimeGrid& grid, std::uint64_t seed, double amplitude = 1.0);
};

enum class Quadrature {
    midpoint,   // deterministic paths; (xi_k + xi_{k+1}) / 2 on each interval
    left_point  // Ito sums: fields and path taken at the left node
};

/// J_{f,g}(xi) = 1/2 (int f d(Re xi + r) + int g d(Im xi))
///             - 1/2 int (f^2 (|xi| + Re xi)/2 + g^2 (|xi| - Re xi)/2 + f g Im xi) dr,
/// with both Stieltjes integrals taken after integration by parts so only the
/// fields are differentiated.
double eval_J(const TestField& field, const ComplexPath& xi, Quadrature rule = Quadrature::midpoint);

/// Piecewise-linear hats on `elements` equal sub-intervals of [0, T]
/// (elements + 1 functions), sampled at the grid nodes.
class HatBasis {
public:
    HatBasis(const TimeGrid& grid, std::size_t elements);

    std::size_t size() const { return count_; }
    std::size_t elements() const { return count_ - 1; }
    double value(std::size_t j, std::size_t node) const;
    /// Field f = sum a_j psi_j, g = sum c_j psi_j.
    TestField field(std::span<const double> f_coeffs, std::span<const double> g_coeffs) const;

    const TimeGrid& grid() const { return grid_; }
    /// Hats that do not vanish at node k: at most two consecutive indices.
    std::pair<std::size_t, std::size_t> support_at(std::size_t node) const;

private:
    TimeGrid grid_;
    std::size_t count_;
    double width_;
};

/// J restricted to span(basis) x span(basis): J(c) = b.c - 1/2 c^T Q c with
/// c = (f coefficients, g coefficients).
struct DualProgram {
    Eigen::VectorXd linear;     // b
    Eigen::MatrixXd quadratic;  // Q, symmetric PSD
    double cutoff_ratio = 1e-13;  // applied to the Jacobi-scaled program
};

DualProgram assemble_dual(const ComplexPath& xi, const HatBasis& basis);

struct DualSolution {
    double value = kInfiniteRate;
    bool finite = false;
    double null_projection = 0.0;  // |P_null b| / |b| in scaled coordinates
    std::size_t rank = 0;
    std::size_t elements = 0;
    Eigen::VectorXd argmax;  // maximizing coefficients over the retained eigenspace
};

/// Relative size of the component of b along the near-null eigenspace above
/// which the program is declared unbounded.
inline constexpr double kNullProjectionTolerance = 1e-6;

/// max_c b.c - 1/2 c^T Q c by eigendecomposition of the Jacobi-scaled
/// program. Eigenvalues below cutoff_ratio * lambda_max are treated as null; when b has a component along
/// them the supremum is +infinity and the sentinel is returned.
DualSolution solve_dual(const DualProgram& program);

/// sup of J_{f,g}(xi) over hat fields with `elements` elements.
DualSolution sup_J(const ComplexPath& xi, std::size_t elements);

}  // namespace cbesq
