#include <doctest.h>

#include <sstream>

#include "cbesq/error.hpp"
#include "cbesq/path_io.hpp"
#include "cbesq/sde.hpp"

using namespace cbesq;

namespace {

ComplexPath noisy_path(std::uint64_t stream) {
    SimParams params;
    params.grid = TimeGrid::graded(1.0, 200, 2.0);
    params.epsilon = 0.3;
    params.seed = 21;
    params.stream = stream;
    return simulate_z(params, sample_noise(params));
}

}  // namespace

TEST_CASE("path csv round trip is bit-exact") {
    const auto z = noisy_path(0);
    std::stringstream buf;
    io::write_path_csv(buf, z);
    const auto back = io::read_path_csv(buf);
    REQUIRE(back.size() == z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
        CHECK(back.grid[k] == z.grid[k]);
        CHECK(back[k] == z[k]);
    }
}

TEST_CASE("long format selects a path by id") {
    const auto a = noisy_path(0);
    const auto b = noisy_path(1);
    std::stringstream buf;
    io::write_long_header(buf);
    io::write_path_rows(buf, 0, a);
    io::write_path_rows(buf, 1, b);
    const std::string text = buf.str();

    std::istringstream first(text);
    CHECK(io::read_path_csv(first).values == a.values);
    std::istringstream second(text);
    CHECK(io::read_path_csv(second, 1).values == b.values);
    std::istringstream missing(text);
    CHECK_THROWS_AS(io::read_path_csv(missing, 7), ConfigError);
}

TEST_CASE("control csv round trip") {
    const auto grid = TimeGrid::graded(1.0, 100, 2.0);
    const auto h = Control::from_rate(grid, [](double t) { return std::sin(3.0 * t) + 0.25; });
    std::stringstream buf;
    io::write_control_csv(buf, h);
    const auto back = io::read_control_csv(buf);
    REQUIRE(back.grid().size() == grid.size());
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) CHECK(back.rate(k) == h.rate(k));
    CHECK(sup_distance(back, h) < 1e-14);
}

TEST_CASE("malformed csv is rejected") {
    std::istringstream header("time,x,y\n0,0,0\n");
    CHECK_THROWS_AS(io::read_path_csv(header), ConfigError);
    std::istringstream cell("t,re,im\n0,0,0\n0.5,abc,0\n");
    CHECK_THROWS_AS(io::read_path_csv(cell), ConfigError);
    std::istringstream empty("");
    CHECK_THROWS_AS(io::read_path_csv(empty), ConfigError);
}

TEST_CASE("format_double keeps 17 significant digits") {
    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(io::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
