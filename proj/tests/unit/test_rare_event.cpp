#include <doctest.h>

#include <cmath>
#include <vector>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/error.hpp"
#include "cbesq/rare_event.hpp"
#include "cbesq/sde.hpp"

using namespace cbesq;

namespace {

const TimeGrid& grid512() {
    static const auto g = TimeGrid::graded(1.0, 512, 2.0);
    return g;
}

Control constant(const TimeGrid& grid, double a) {
    return Control::from_rate(grid, [a](double) { return a; });
}

ComplexPath phi_of(const Control& h) { return solve_phi(h, OdeScheme{h.grid(), 1, 1e-6}).path; }

}  // namespace

TEST_CASE("ball around the zero-energy path") {
    const auto target = ComplexPath::zero_energy(grid512());
    const auto rep = estimate_ball_prob(target, 0.5, 0.05, 2000, std::nullopt, 1);
    CHECK(rep.mode == SamplingMode::direct);
    CHECK(rep.p_hat > 0.99);
    const auto all = estimate_ball_prob(target, 10.0, 0.3, 500, std::nullopt, 2);
    CHECK(all.p_hat == 1.0);
    CHECK(all.hits == 500);
}

TEST_CASE("ball probability argument checks") {
    const auto target = ComplexPath::zero_energy(grid512());
    CHECK_THROWS_AS(estimate_ball_prob(target, 0.5, 0.1, 0, std::nullopt, 1), ConfigError);
    CHECK_THROWS_AS(estimate_ball_prob(target, 0.0, 0.1, 10, std::nullopt, 1), DomainError);
    CHECK_THROWS_AS(estimate_ball_prob(target, 0.5, 0.04, 10, std::nullopt, 1), DomainError);
    const auto other = TimeGrid::graded(1.0, 256, 2.0);
    CHECK_THROWS_AS(estimate_ball_prob(target, 0.5, 0.1, 10, TiltSpec{constant(other, 1.0), 0.1}, 1), ConfigError);
    CHECK_THROWS_AS(estimate_ball_prob(target, 0.5, 0.1, 10, TiltSpec{constant(grid512(), 1.0), 0.2}, 1), ConfigError);
    // tilted mode has no eps floor
    CHECK_NOTHROW(estimate_ball_prob(target, 0.5, 0.01, 10, TiltSpec{Control::zero(grid512()), 0.01}, 1));
}

TEST_CASE("tilted and direct estimates agree") {
    const auto h = constant(grid512(), 1.0);
    const auto target = phi_of(h);
    const auto direct = estimate_ball_prob(target, 0.45, 0.3, 40000, std::nullopt, 3);
    const auto tilted = estimate_ball_prob(target, 0.45, 0.3, 10000, TiltSpec{h, 0.3}, 4);
    REQUIRE(direct.hits >= 50);
    CHECK(tilted.mode == SamplingMode::tilted);
    CHECK(tilted.ess > 0.0);
    CHECK(std::abs(direct.p_hat - tilted.p_hat) <= direct.ci95 + tilted.ci95);
}

TEST_CASE("zero control tilt equals direct sampling") {
    const auto target = ComplexPath::zero_energy(grid512());
    const auto direct = estimate_ball_prob(target, 0.2, 0.2, 1000, std::nullopt, 5);
    const auto tilted = estimate_ball_prob(target, 0.2, 0.2, 1000, TiltSpec{Control::zero(grid512()), 0.2}, 5);
    CHECK(direct.hits == tilted.hits);
    CHECK(direct.p_hat == doctest::Approx(tilted.p_hat).epsilon(1e-12));
}

TEST_CASE("zero hits report the Clopper-Pearson bound") {
    const auto target = phi_of(constant(grid512(), 3.0));
    const auto rep = estimate_ball_prob(target, 0.05, 0.05, 200, std::nullopt, 6);
    CHECK(rep.zero_hits);
    CHECK(rep.p_hat == 0.0);
    CHECK(rep.ci95 == doctest::Approx(1.0 - std::pow(0.05, 1.0 / 200.0)));
    CHECK(rep.eps2_log_p == doctest::Approx(0.0025 * std::log(rep.ci95)));
}

TEST_CASE("ldp slope: zero-energy target approaches 0 from below") {
    const auto target = ComplexPath::zero_energy(grid512());
    const auto rows = ldp_slope(target, Control::zero(grid512()), 0.3, {0.3, 0.2, 0.1}, 2000, 7, 0.05);
    double prev = -1e300;
    for (const auto& r : rows) {
        CHECK(r.report.eps2_log_p <= 0.0);
        CHECK(r.report.eps2_log_p >= prev);
        CHECK(r.neg_I == 0.0);
        prev = r.report.eps2_log_p;
    }
    CHECK(rows.back().report.mode == SamplingMode::tilted);
    CHECK(rows.front().report.mode == SamplingMode::direct);
}

TEST_CASE("ldp slope: lower energy target has the larger slope") {
    const auto h1 = constant(grid512(), 0.5);
    const auto h2 = constant(grid512(), 1.0);
    const auto r1 = ldp_slope(phi_of(h1), h1, 0.1, {0.1}, 4000, 8, 1e300);
    const auto r2 = ldp_slope(phi_of(h2), h2, 0.1, {0.1}, 4000, 8, 1e300);
    CHECK(r1[0].neg_I > r2[0].neg_I);
    CHECK(r1[0].report.eps2_log_p > r2[0].report.eps2_log_p);
}

TEST_CASE("ldp slope argument checks") {
    const auto target = ComplexPath::zero_energy(grid512());
    CHECK_THROWS_AS(ldp_slope(target, Control::zero(grid512()), 0.3, {}, 10, 1, 0.05), ConfigError);
    CHECK_THROWS_AS(ldp_slope(target, Control::zero(grid512()), 0.3, {0.1, 0.2}, 10, 1, 0.05), ConfigError);
    const auto bad = ComplexPath::from_function(grid512(), [](double t) { return complex(-t, t); });
    CHECK_THROWS_AS(ldp_slope(bad, Control::zero(grid512()), 0.3, {0.2}, 10, 1, 0.05), DomainError);
}

TEST_CASE("convergence probe") {
    const auto h = constant(grid512(), 1.0);
    const auto rows = convergence_probe(h, {0.2, 0.1, 0.05, 0.0}, 2000, 9);
    for (std::size_t j = 1; j + 1 < rows.size(); ++j) {
        CHECK(rows[j].q50 < rows[j - 1].q50);
        CHECK(rows[j].q90 < rows[j - 1].q90);
        CHECK(rows[j].q99 < rows[j - 1].q99);
        // median shrinks roughly like eps
        CHECK(rows[j - 1].q50 / rows[j].q50 == doctest::Approx(2.0).epsilon(0.25));
    }
    // eps = 0 leaves only the gap between the Euler scheme and the ODE solver, first order in the step
    CHECK(rows.back().q50 == rows.back().q99);
    const auto finer = TimeGrid::graded(1.0, 1024, 2.0);
    const auto at_zero = convergence_probe(Control::from_rate(finer, [](double) { return 1.0; }), {0.0}, 1, 9);
    CHECK(rows.back().q50 / at_zero[0].q50 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(rows.back().q50 < 2.0 / 512.0);

    const auto zero = convergence_probe(Control::zero(grid512()), {0.2, 0.1, 0.05}, 1000, 10);
    CHECK(zero[1].mean_square < zero[0].mean_square);
    CHECK(zero[2].mean_square < zero[1].mean_square);
}

TEST_CASE("supermartingale: trivial field gives M = 1") {
    const auto field = TestField::from_functions(grid512(), [](double) { return 0.0; }, [](double) { return 0.0; });
    const auto rep = supermartingale_check(field, 0.2, 500, 11);
    CHECK(rep.mean == 1.0);
    CHECK(rep.stderr == 0.0);
    CHECK(rep.max_identity_gap == 0.0);
}

TEST_CASE("supermartingale: constant field stays below 1") {
    const auto field = TestField::from_functions(grid512(), [](double) { return 0.5; }, [](double) { return 0.5; });
    const auto rep = supermartingale_check(field, 0.2, 10000, 12);
    CHECK(rep.within_bound());
    // weights are heavy-tailed (ess about 5% of n), so the lower side is only a consistency band
    CHECK(rep.mean >= 1.0 - 4.0 * rep.stderr);
    CHECK(rep.mean > 0.5);
    CHECK(rep.max_identity_gap <= 1e-8);
    CHECK_FALSE(rep.degenerate);
    CHECK_THROWS_AS(supermartingale_check(field, 0.05, 100, 1), DomainError);
}

TEST_CASE("pathwise bounds") {
    const auto zero = pathwise_bounds_check(0.0, Control::zero(grid512()), 5, 13);
    CHECK(zero.u_violations + zero.v_violations == 0);
    CHECK(zero.max_u_excess <= 0.0);
    CHECK(zero.max_v_excess <= 1e-15);

    const auto h = constant(grid512(), 1.0);
    const auto rep = pathwise_bounds_check(0.1, h, 1000, 14);
    CHECK(rep.pairs == 1000 * grid512().size());
    CHECK(rep.violation_fraction() == 0.0);

    const auto tight = pathwise_bounds_check(0.1, h, 200, 14, 0.0);
    MESSAGE("violations with zero slack: U " << tight.u_violations << ", V " << tight.v_violations);
    CHECK(tight.u_violations + tight.v_violations > 0);
}

TEST_CASE("Hoelder tails") {
    const auto grid = TimeGrid::graded(1.0, 128, 2.0);
    CHECK_THROWS_AS(holder_tail_probe({0.2}, 0.5, {1.0}, 10, 1, grid), DomainError);
    const auto rows = holder_tail_probe({0.2, 0.1}, 0.4, {0.5, 1.0, 2.0, 4.0, 100.0}, 1000, 15, grid);
    REQUIRE(rows.size() == 10);
    CHECK(rows[4].tail == 0.0);
    CHECK(rows[4].eps2_log_tail == -kInfiniteRate);
    for (std::size_t j = 1; j < 5; ++j) {
        const auto& a = rows[j - 1];
        const auto& b = rows[j];
        if (b.hits > 0) CHECK(b.eps2_log_tail < a.eps2_log_tail);
        CHECK(b.tail <= a.tail);
    }
    for (std::size_t j = 0; j < 5; ++j) CHECK(rows[5 + j].tail <= rows[j].tail + 0.02);
}

TEST_CASE("Hoelder seminorm of a line") {
    const auto grid = TimeGrid::uniform(1.0, 64);
    const auto line = ComplexPath::zero_energy(grid);
    // |t - s|^(1 - alpha) is largest for the widest pair
    CHECK(holder_seminorm(line, 0.25) == doctest::Approx(1.0));
}

TEST_CASE("Monte Carlo results do not depend on the thread count") {
    const auto h = constant(grid512(), 1.0);
    const auto target = phi_of(h);
    const auto a = estimate_ball_prob(target, 0.3, 0.2, 3000, TiltSpec{h, 0.2}, 16);
    const auto b = estimate_ball_prob(target, 0.3, 0.2, 3000, TiltSpec{h, 0.2}, 16, WorkerPool(3));
    CHECK(a.p_hat == b.p_hat);
    CHECK(a.ci95 == b.ci95);
    const auto qa = convergence_probe(h, {0.1}, 500, 17);
    const auto qb = convergence_probe(h, {0.1}, 500, 17, WorkerPool(4));
    CHECK(qa[0].q50 == qb[0].q50);
    CHECK(qa[0].mean_square == qb[0].mean_square);
}

TEST_CASE("row seeds differ per row") {
    CHECK(row_seed(5, 0) == 5);
    CHECK(row_seed(5, 1) != row_seed(5, 2));
}
