#include "cbesq/rate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"

namespace cbesq {

RateResult eval_I(const ComplexPath& phi) {
    if (phi[0] != complex(0.0, 0.0)) throw ConfigError("eval_I: path must start at 0");
    const auto& grid = phi.grid;
    RateResult res;

    res.h1_ok = true;
    for (std::size_t k = 1; k < phi.size(); ++k) {
        if (!std::isfinite(phi[k].real()) || !std::isfinite(phi[k].imag()) ||
            (phi[k].imag() == 0.0 && phi[k].real() >= 0.0)) {
            res.h1_ok = false;
            break;
        }
    }

    double h2 = 0.0;
    std::vector<double> rate(grid.intervals());
    res.h3_ok = true;
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        const double dt = grid.step(k);
        const complex dphi = phi[k + 1] - phi[k];
        h2 += std::norm(dphi) / dt;

        const complex num = dphi / dt + 1.0;
        const complex root = branch_sqrt(0.5 * (phi[k] + phi[k + 1]));
        complex r = 0.0;
        if (root != complex(0.0, 0.0)) {
            r = num / (2.0 * root);
        } else if (num != complex(0.0, 0.0)) {
            r = complex(std::numeric_limits<double>::infinity(), 0.0);
        }
        rate[k] = r.real();
        if (!std::isfinite(r.real()) || !std::isfinite(r.imag())) {
            if (res.h3_ok) res.h3_first_bad = k;
            res.h3_ok = false;
            continue;
        }
        if (k == 0) continue;
        const double defect = std::abs(r.imag()) / (1.0 + std::abs(r.real()));
        res.max_h3_defect = std::max(res.max_h3_defect, defect);
        if (defect > kH3Tolerance && res.h3_ok) {
            res.h3_ok = false;
            res.h3_first_bad = k;
        }
    }
    res.h2_energy = h2;
    res.h2_ok = std::isfinite(h2);

    if (res.finite()) {
        double value = 0.0;
        for (std::size_t k = 0; k < rate.size(); ++k) value += rate[k] * rate[k] * grid.step(k);
        res.value = 0.5 * value;
        res.recovered_control.emplace(grid, std::move(rate));
    }
    return res;
}

TestField::TestField(TimeGrid grid_, std::vector<double> f_, std::vector<double> fdot_, std::vector<double> g_,
                     std::vector<double> gdot_)
    : grid(std::move(grid_)), f(std::move(f_)), fdot(std::move(fdot_)), g(std::move(g_)), gdot(std::move(gdot_)) {
    if (f.size() != grid.size() || g.size() != grid.size() || fdot.size() != grid.intervals() ||
        gdot.size() != grid.intervals()) {
        throw ConfigError("test field: sizes do not match the grid");
    }
    auto check = [&](const std::vector<double>& v, const std::vector<double>& dv, const char* name) {
        double scale = 1.0;
        for (double x : v) scale = std::max(scale, std::abs(x));
        for (std::size_t k = 0; k < dv.size(); ++k) {
            if (std::abs(v[k + 1] - v[k] - dv[k] * grid.step(k)) > 1e-10 * scale) {
                throw ConfigError(std::string("test field: derivative of ") + name +
                                  " inconsistent with its values at interval " + std::to_string(k));
            }
        }
    };
    check(f, fdot, "f");
    check(g, gdot, "g");
}

TestField TestField::from_nodes(const TimeGrid& grid, std::vector<double> f, std::vector<double> g) {
    if (f.size() != grid.size() || g.size() != grid.size()) throw ConfigError("test field: sizes do not match");
    std::vector<double> fd(grid.intervals()), gd(grid.intervals());
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
        fd[k] = (f[k + 1] - f[k]) / grid.step(k);
        gd[k] = (g[k + 1] - g[k]) / grid.step(k);
    }
    return TestField(grid, std::move(f), std::move(fd), std::move(g), std::move(gd));
}

TestField TestField::from_functions(const TimeGrid& grid, const std::function<double(double)>& f,
                                    const std::function<double(double)>& g) {
    std::vector<double> fv(grid.size()), gv(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        fv[k] = f(grid[k]);
        gv[k] = g(grid[k]);
    }
    return from_nodes(grid, std::move(fv), std::move(gv));
}

TestField TestField::random_smooth(const TimeGrid& grid, std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-amplitude, amplitude);
    auto draw = [&] {
        std::array<double, 4> a{};
        for (auto& c : a) c = coef(rng);
        const double T = grid.horizon();
        return [a, T](double t) {
            const double u = t / T;
            return a[0] + a[1] * u + a[2] * std::sin(std::numbers::pi * u) + a[3] * std::cos(std::numbers::pi * u);
        };
    };
    const auto f = draw();
    const auto g = draw();
    return from_functions(grid, f, g);
}

double eval_J(const TestField& field, const ComplexPath& xi, Quadrature rule) {
    if (!(field.grid == xi.grid)) throw ConfigError("eval_J: field and path live on different grids");
    const auto& grid = xi.grid;
    const std::size_t n = grid.intervals();
    const double T = grid.horizon();

    // x = Re xi + t, y = Im xi; both vanish at t = 0.
    auto x = [&](std::size_t k) { return xi[k].real() + grid[k]; };
    auto y = [&](std::size_t k) { return xi[k].imag(); };

    double linear = field.f[n] * (xi[n].real() + T) + field.g[n] * xi[n].imag();
    double quad = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dt = grid.step(k);
        double xs, ys, fs, gs;
        complex z;
        if (rule == Quadrature::midpoint) {
            xs = 0.5 * (x(k) + x(k + 1));
            ys = 0.5 * (y(k) + y(k + 1));
            fs = 0.5 * (field.f[k] + field.f[k + 1]);
            gs = 0.5 * (field.g[k] + field.g[k + 1]);
            z = 0.5 * (xi[k] + xi[k + 1]);
        } else {
            // sum f_k dx_k = f_N x_N - sum x_{k+1} df_k
            xs = x(k + 1);
            ys = y(k + 1);
            fs = field.f[k];
            gs = field.g[k];
            z = xi[k];
        }
        linear -= (xs * field.fdot[k] + ys * field.gdot[k]) * dt;
        const double modulus = std::abs(z);
        quad += (fs * fs * 0.5 * (modulus + z.real()) + gs * gs * 0.5 * (modulus - z.real()) + fs * gs * z.imag()) * dt;
    }
    return 0.5 * linear - 0.5 * quad;
}

HatBasis::HatBasis(const TimeGrid& grid, std::size_t elements)
    : grid_(grid), count_(elements + 1), width_(grid.horizon() / static_cast<double>(elements)) {
    if (elements < 1) throw ConfigError("hat basis: need at least one element");
}

std::pair<std::size_t, std::size_t> HatBasis::support_at(std::size_t node) const {
    const double t = grid_[node];
    auto j = static_cast<std::size_t>(std::floor(t / width_));
    j = std::min(j, count_ - 2);
    return {j, j + 1};
}

double HatBasis::value(std::size_t j, std::size_t node) const {
    const double u = grid_[node] / width_ - static_cast<double>(j);
    return std::max(0.0, 1.0 - std::abs(u));
}

TestField HatBasis::field(std::span<const double> f_coeffs, std::span<const double> g_coeffs) const {
    if (f_coeffs.size() != count_ || g_coeffs.size() != count_) throw ConfigError("hat basis: wrong coefficient count");
    std::vector<double> f(grid_.size(), 0.0), g(grid_.size(), 0.0);
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        const auto [a, b] = support_at(k);
        for (std::size_t j : {a, b}) {
            const double psi = value(j, k);
            f[k] += f_coeffs[j] * psi;
            g[k] += g_coeffs[j] * psi;
        }
    }
    return TestField::from_nodes(grid_, std::move(f), std::move(g));
}

DualProgram assemble_dual(const ComplexPath& xi, const HatBasis& basis) {
    if (!(basis.grid() == xi.grid)) throw ConfigError("assemble_dual: basis and path live on different grids");
    const auto& grid = xi.grid;
    const std::size_t m = basis.size();
    const std::size_t n = grid.intervals();
    DualProgram prog;
    prog.linear = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * m));
    prog.quadratic = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * m), static_cast<Eigen::Index>(2 * m));
    auto& b = prog.linear;
    auto& Q = prog.quadratic;
    const auto gi = [m](std::size_t j) { return static_cast<Eigen::Index>(m + j); };
    const auto fi = [](std::size_t j) { return static_cast<Eigen::Index>(j); };

    // boundary terms of the integration by parts
    const double xT = xi[n].real() + grid.horizon();
    const double yT = xi[n].imag();
    {
        const auto [a, c] = basis.support_at(n);
        for (std::size_t j : {a, c}) {
            b[fi(j)] += 0.5 * basis.value(j, n) * xT;
            b[gi(j)] += 0.5 * basis.value(j, n) * yT;
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        const double dt = grid.step(k);
        const double xs = 0.5 * (xi[k].real() + grid[k] + xi[k + 1].real() + grid[k + 1]);
        const double ys = 0.5 * (xi[k].imag() + xi[k + 1].imag());
        const complex z = 0.5 * (xi[k] + xi[k + 1]);
        const double modulus = std::abs(z);
        const double pu = 0.5 * (modulus + z.real());  // U^2
        const double pv = 0.5 * (modulus - z.real());  // V^2
        const double puv = 0.5 * z.imag();             // U V

        // hats touching interval k: union of the supports at both ends
        const auto [a0, a1] = basis.support_at(k);
        const auto [b0, b1] = basis.support_at(k + 1);
        std::size_t idx[4] = {a0, a1, b0, b1};
        std::sort(idx, idx + 4);
        const auto last = std::unique(idx, idx + 4);
        const auto count = static_cast<std::size_t>(last - idx);

        double mid[4];
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = idx[i];
            const double v0 = basis.value(j, k);
            const double v1 = basis.value(j, k + 1);
            mid[i] = 0.5 * (v0 + v1);
            const double slope = v1 - v0;  // = psidot * dt
            b[fi(j)] -= 0.5 * xs * slope;
            b[gi(j)] -= 0.5 * ys * slope;
        }
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t l = 0; l < count; ++l) {
                const double w = mid[i] * mid[l] * dt;
                Q(fi(idx[i]), fi(idx[l])) += w * pu;
                Q(gi(idx[i]), gi(idx[l])) += w * pv;
                Q(fi(idx[i]), gi(idx[l])) += w * puv;
                Q(gi(idx[l]), fi(idx[i])) += w * puv;
            }
        }
    }
    return prog;
}

DualSolution solve_dual(const DualProgram& program) {
    const auto& b = program.linear;
    const auto& Q = program.quadratic;
    if (Q.rows() != Q.cols() || Q.rows() != b.size() || b.size() == 0) {
        throw ConfigError("solve_dual: inconsistent program dimensions");
    }
    // Hats near t = 0 carry weights of order t^2, so the raw spectrum spans
    // far more than the cutoff ratio. Jacobi scaling c = D y leaves the
    // supremum unchanged and puts the cutoff on a well-scaled program.
    const double diag_max = Q.diagonal().maxCoeff();
    Eigen::VectorXd scale(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double d = Q(i, i);
        scale[i] = d > 1e-14 * diag_max ? 1.0 / std::sqrt(d) : 1.0;
    }
    const Eigen::MatrixXd Qs = scale.asDiagonal() * Q * scale.asDiagonal();
    const Eigen::VectorXd bs = scale.cwiseProduct(b);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Qs);
    if (eig.info() != Eigen::Success) throw NonConvergence("solve_dual: eigendecomposition failed");
    const auto& lambda = eig.eigenvalues();
    const auto& vecs = eig.eigenvectors();
    const double lambda_max = lambda.maxCoeff();
    const double cutoff = program.cutoff_ratio * std::max(lambda_max, 0.0);

    DualSolution sol;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(b.size());
    const Eigen::VectorXd proj = vecs.transpose() * bs;
    double value = 0.0;
    double null_sq = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] > cutoff && lambda[i] > 0.0) {
            value += proj[i] * proj[i] / (2.0 * lambda[i]);
            y += (proj[i] / lambda[i]) * vecs.col(i);
            ++sol.rank;
        } else {
            null_sq += proj[i] * proj[i];
        }
    }
    sol.argmax = scale.cwiseProduct(y);
    const double bnorm = bs.norm();
    sol.null_projection = bnorm > 0.0 ? std::sqrt(null_sq) / bnorm : 0.0;
    sol.finite = sol.null_projection <= kNullProjectionTolerance;
    sol.value = sol.finite ? value : kInfiniteRate;
    return sol;
}

DualSolution sup_J(const ComplexPath& xi, std::size_t elements) {
    HatBasis basis(xi.grid, elements);
    auto sol = solve_dual(assemble_dual(xi, basis));
    sol.elements = elements;
    return sol;
}

}  // namespace cbesq
