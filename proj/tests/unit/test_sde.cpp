#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/ensemble.hpp"
#include "cbesq/error.hpp"
#include "cbesq/sde.hpp"
#include "cbesq/stats.hpp"

using namespace cbesq;

namespace {

SimParams params(double eps, const TimeGrid& grid, std::uint64_t seed = 11, std::uint64_t stream = 0) {
    SimParams p;
    p.epsilon = eps;
    p.grid = grid;
    p.seed = seed;
    p.stream = stream;
    return p;
}

}  // namespace

TEST_CASE("branch_sqrt examples") {
    CHECK(branch_sqrt({-1.0, 0.0}) == complex(0.0, 1.0));
    const auto w = branch_sqrt({0.0, 2.0});
    CHECK(w.real() == doctest::Approx(1.0));
    CHECK(w.imag() == doctest::Approx(1.0));
    reset_slit_hits();
    CHECK(branch_sqrt({4.0, 0.0}) == complex(2.0, 0.0));
    CHECK(slit_hits() == 1);
    CHECK(branch_sqrt({0.0, 0.0}) == complex(0.0, 0.0));
    CHECK(slit_hits() == 1);
}

TEST_CASE("branch_sqrt squares back with Im >= 0") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 20000; ++i) {
        const complex z(u(rng), u(rng));
        const complex w = branch_sqrt(z);
        CHECK(w.imag() >= 0.0);
        CHECK(std::abs(w * w - z) <= 1e-12 * std::abs(z));
    }
    // just below the slit the root jumps to the other side, still with Im >= 0
    const complex w = branch_sqrt({4.0, -1e-300});
    CHECK(w.imag() >= 0.0);
    CHECK(w.real() < 0.0);
}

TEST_CASE("sample_noise is reproducible and has the right variance") {
    const auto grid = TimeGrid::graded(1.0, 256, 2.0);
    const auto a = sample_noise(params(0.1, grid, 5, 2));
    const auto b = sample_noise(params(0.1, grid, 5, 2));
    const auto c = sample_noise(params(0.1, grid, 5, 3));
    CHECK(a.increments == b.increments);
    CHECK(a.increments != c.increments);
    CHECK(a.values[0] == 0.0);
    for (std::size_t k = 0; k < grid.intervals(); ++k) CHECK(a.values[k + 1] == doctest::Approx(a.values[k] + a.increments[k]));

    const auto uni = TimeGrid::uniform(1.0, 100000);
    const auto n = sample_noise(params(0.0, uni, 9));
    std::vector<double> std_normal(n.increments.size());
    for (std::size_t k = 0; k < std_normal.size(); ++k) std_normal[k] = n.increments[k] / std::sqrt(uni.step(k));
    const auto v = stats::variance_estimate(std_normal);
    CHECK(std::abs(v.value - 1.0) <= 3.0 * v.stderr);

    // graded grid: Var(dB_k) = dt_k, checked over many streams on a few intervals
    const auto g2 = TimeGrid::graded(1.0, 8, 2.0);
    for (std::size_t k : {0u, 3u, 7u}) {
        std::vector<double> samples(20000);
        for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = sample_noise(params(0.0, g2, 4, i)).increments[k];
        const auto e = stats::variance_estimate(samples);
        CHECK(std::abs(e.value - g2.step(k)) <= 3.0 * e.stderr);
    }
}

TEST_CASE("eps = 0 simulation is exactly -t") {
    const auto grid = TimeGrid::graded(1.0, 4096, 2.0);
    const auto p = params(0.0, grid);
    const auto z = simulate_z(p, sample_noise(p));
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(z[k] == complex(-grid[k], 0.0));
}

TEST_CASE("first step is pure drift") {
    const auto grid = TimeGrid::graded(1.0, 64, 2.0);
    const auto p = params(0.7, grid);
    const auto z = simulate_z(p, sample_noise(p));
    CHECK(z[1] == complex(-grid[1], 0.0));
}

TEST_CASE("zero control reproduces the untilted path bitwise") {
    const auto grid = TimeGrid::graded(1.0, 1024, 2.0);
    const auto p = params(0.2, grid);
    const auto noise = sample_noise(p);
    const auto a = simulate_z(p, noise);
    const auto b = simulate_z_h(p, Control::zero(grid), noise);
    CHECK(a.values == b.values);
}

TEST_CASE("mismatched noise grid is rejected") {
    const auto p = params(0.1, TimeGrid::uniform(1.0, 16));
    const auto noise = sample_noise(params(0.1, TimeGrid::uniform(1.0, 32)));
    CHECK_THROWS_AS(simulate_z(p, noise), ConfigError);
    CHECK_THROWS_AS(simulate_z_h(p, Control::zero(p.grid), noise), ConfigError);
}

TEST_CASE("eps = 0 shifted simulation matches the controlled ODE") {
    const auto grid = TimeGrid::graded(1.0, 4096, 2.0);
    const auto h = Control::from_rate(grid, [](double) { return 1.0; });
    const auto p = params(0.0, grid);
    const auto z = simulate_z_h(p, h, sample_noise(p));
    const auto phi = solve_phi(h, OdeScheme{grid, 1, 1e-6}).path;
    CHECK(sup_distance(z, phi) < 1e-3);
}

TEST_CASE("Y^eta / eta equals Z^eps on the same noise") {
    const auto grid = TimeGrid::graded(1.0, 2048, 2.0);
    for (double eta : {4.0, 25.0, 100.0}) {
        const auto p = params(1.0 / std::sqrt(eta), grid, 21);
        const auto noise = sample_noise(p);
        const auto z = simulate_z(p, noise);
        const auto y = simulate_y_eta(eta, noise);
        double worst = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) worst = std::max(worst, std::abs(y[k] / eta - z[k]) / (1.0 + std::abs(z[k])));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("median sup distance to -t shrinks with eps") {
    const auto grid = TimeGrid::graded(1.0, 1024, 2.0);
    double prev = 1e300;
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto d = zero_energy_deviations(grid, eps, 1000, 8);
        const double med = stats::quantile(d, 0.5);
        CHECK(med < prev);
        prev = med;
    }
}

TEST_CASE("pathwise root bounds hold with one-step slack") {
    const auto grid = TimeGrid::graded(1.0, 1024, 2.0);
    const auto h = Control::from_rate(grid, [](double) { return 1.0; });
    const double slack = grid_slack(grid);
    CHECK(slack == doctest::Approx(4.0 * std::sqrt(grid.max_step())));
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto p = params(0.1, grid, 13, i);
        const auto noise = sample_noise(p);
        const auto z = simulate_z(p, noise);
        const auto zh = simulate_z_h(p, h, noise);
        double sup_b = 0.0, sup_bh = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            sup_b = std::max(sup_b, 0.1 * std::abs(noise.values[k]));
            sup_bh = std::max(sup_bh, 0.1 * std::abs(noise.values[k]) + std::abs(h.value(k)));
            const double vbound = std::sqrt(1.01 * grid[k]) + slack;
            CHECK(branch_sqrt(z[k]).imag() <= vbound);
            CHECK(std::abs(branch_sqrt(zh[k]).real()) <= 2.0 * sup_bh + slack);
            CHECK(std::abs(branch_sqrt(z[k]).real()) <= 2.0 * sup_b + slack);
        }
    }
}

TEST_CASE("real squared Bessel process") {
    const auto grid = TimeGrid::graded(1.0, 512, 2.0);
    const auto p = params(0.0, grid);
    const auto x = simulate_x_delta(0.0, 0.0, p, sample_noise(p));
    for (double v : x.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(simulate_x_delta(-1.0, 0.0, p, sample_noise(p)), DomainError);
    CHECK_THROWS_AS(simulate_x_delta(1.0, -1.0, p, sample_noise(p)), DomainError);

    const auto drift = bessel_probe(grid, 2.0, 1.0, 10000, 17);
    CHECK(std::abs(drift.mean_end.value - 3.0) <= 3.0 * drift.mean_end.stderr);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto pi = params(0.0, grid, 17, i);
        for (double v : simulate_x_delta(2.0, 1.0, pi, sample_noise(pi)).values) CHECK(v >= 0.0);
    }
}

TEST_CASE("Bessel CLT: Var(sqrt(delta)(X_T/delta - T)) -> 2 T^2") {
    const auto grid = TimeGrid::uniform(1.0, 1024);
    const auto rep = bessel_probe(grid, 100.0, 0.0, 10000, 23);
    CHECK(std::abs(rep.var_normalized.value - 2.0) <= 3.0 * rep.var_normalized.stderr);
}

TEST_CASE("fluctuation path") {
    const auto grid = TimeGrid::graded(1.0, 64, 2.0);
    const auto f = fluctuation_path(ComplexPath::zero_energy(grid), 0.3);
    for (const auto& v : f.values) CHECK(v == complex(0.0, 0.0));
    CHECK_THROWS_AS(fluctuation_path(ComplexPath::zero_energy(grid), 0.0), DomainError);
}

TEST_CASE("complex CLT: Cov(Im F_s, Im F_t) -> 2 min(s,t)^2, Re F vanishes") {
    const auto grid = TimeGrid::graded(1.0, 2048, 2.0);
    const auto rep = fluctuation_probe(grid, 0.05, 0.5, 1.0, 10000, 29);
    CHECK(rep.s == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(rep.t == 1.0);
    CHECK(std::abs(rep.cov_im.value - 2.0 * rep.s * rep.s) <= 3.0 * rep.cov_im.stderr);
    CHECK(std::abs(rep.var_im_t.value - 2.0) <= 3.0 * rep.var_im_t.stderr);
    double prev = 1e300;
    for (double eps : {0.2, 0.1, 0.05}) {
        const auto r = fluctuation_probe(grid, eps, 0.5, 1.0, 4000, 31);
        CHECK(r.var_re_end.value < prev);
        prev = r.var_re_end.value;
    }
}

TEST_CASE("SLE tip samples") {
    const auto grid = TimeGrid::graded(1.0, 512, 2.0);
    SimParams p;
    p.grid = grid;
    p.seed = 37;
    CHECK_THROWS_AS(sle_tip_sample(4.0, 1.0, p), DomainError);
    CHECK_THROWS_AS(sle_tip_sample(0.0, 1.0, p), DomainError);

    // small kappa: tips concentrate on the imaginary axis, spread shrinks with kappa
    auto spread = [&](double kappa) {
        const auto tips = sle_tip_ensemble(kappa, grid, 1000, 41);
        std::vector<double> dev(tips.size());
        for (std::size_t i = 0; i < tips.size(); ++i) {
            CHECK(tips[i].imag() >= 0.0);
            dev[i] = std::abs(std::arg(tips[i]) - std::numbers::pi / 2);
        }
        return stats::quantile(dev, 0.9);
    };
    const double s_small = spread(0.05);
    const double s_mid = spread(0.5);
    CHECK(s_small < 0.15);
    CHECK(s_small < s_mid);

    // kappa = 2: arguments avoid the real axis
    const auto tips = sle_tip_ensemble(2.0, grid, 10000, 43);
    std::size_t near_axis = 0;
    for (const auto& z : tips) {
        CHECK(z.imag() >= 0.0);
        const double a = std::arg(z);
        if (a < 0.02 || a > std::numbers::pi - 0.02) ++near_axis;
    }
    // a uniform density of arg would put about 1.3% of samples in these bands
    CHECK(near_axis < 40);
}

TEST_CASE("SLE tip horizon rescales the grid") {
    SimParams p;
    p.grid = TimeGrid::graded(1.0, 256, 2.0);
    p.seed = 3;
    const auto a = sle_tip_sample(1.0, 4.0, p);
    CHECK(a.imag() >= 0.0);
    CHECK(std::isfinite(a.real()));
}
