#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbesq/grid.hpp"
#include "cbesq/path_io.hpp"
#include "cli.hpp"

using namespace cbesq;
using namespace cbesq::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::current_path() / "cli_scratch" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json read_json(const fs::path& file) {
    std::ifstream in(file);
    return json::parse(in);
}

int call(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = main_entry(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

std::set<fs::path> tree(const fs::path& root) {
    std::set<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) files.insert(fs::relative(e.path(), root));
    return files;
}

}  // namespace

TEST_CASE("parse_config accepts the documented invocations") {
    const auto sim = parse_config({"simulate", "--eps", "0.1", "--T", "1", "--N", "4096", "--seed", "7"});
    CHECK(sim.command == "simulate");
    CHECK(sim.seed == 7);
    CHECK(sim.params.at("eps") == "0.1");
    CHECK(sim.params.at("N") == "4096");
    CHECK(sim.params.at("gamma") == "2");

    const auto geo = parse_config({"geodesic", "--arg-z", "0.7853981634", "--m", "64"});
    CHECK(geo.command == "geodesic");
    CHECK(std::stod(geo.params.at("arg-z")) == doctest::Approx(std::atan(1.0)));
    CHECK(geo.params.at("m") == "64");
}

TEST_CASE("usage errors name the key") {
    auto message = [](std::vector<std::string> args) {
        try {
            parse_config(args);
        } catch (const UsageError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK(message({"clt", "--eps", "0"}).find("eps") != std::string::npos);
    CHECK(message({"simulate", "--kappa", "4"}).find("kappa") != std::string::npos);
    CHECK(message({"simulate", "--kappa", "0"}).find("kappa") != std::string::npos);
    CHECK(message({"tails", "--alpha", "0.5"}).find("alpha") != std::string::npos);
    CHECK(message({"geodesic"}).find("arg-z") != std::string::npos);
    CHECK(message({"rate"}).find("path") != std::string::npos);
    CHECK(message({"simulate"}).find("eps") != std::string::npos);
    CHECK(message({"simulate", "--eps", "0.1", "--bogus", "1"}) != "accepted");
    CHECK(message({"frobnicate"}) != "accepted");
    CHECK(message({"ldp-slope", "--eps-list", "0.1,0.2"}).find("eps-list") != std::string::npos);
    CHECK(message({"simulate", "--eps", "0.1", "--N", "-3"}).find("N") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags") {
    const auto dir = scratch("config");
    const auto file = dir / "run.cfg";
    std::ofstream(file) << "# comment\neps = 0.2\nN=128\nseed=9\nout=" << (dir / "o").string() << "\n";
    const auto cfg = parse_config({"simulate", "--config", file.string(), "--N", "64"});
    CHECK(cfg.params.at("eps") == "0.2");
    CHECK(cfg.params.at("N") == "64");
    CHECK(cfg.seed == 9);
    CHECK(cfg.out == dir / "o");

    std::ofstream(dir / "bad.cfg") << "eps=0.2\nradius=3\n";
    CHECK_THROWS_WITH_AS(parse_config({"simulate", "--config", (dir / "bad.cfg").string()}),
                         doctest::Contains("radius"), UsageError);
}

TEST_CASE("rate on the zero-energy path reports 0") {
    const auto dir = scratch("rate_zero");
    const auto path_file = dir / "phi.csv";
    {
        std::ofstream out(path_file);
        io::write_path_csv(out, ComplexPath::zero_energy(TimeGrid::graded(1.0, 256, 2.0)));
    }
    CHECK(call({"rate", "--path", path_file.string(), "--out", (dir / "o").string()}) == kExitOk);
    const auto j = read_json(dir / "o" / "rate.json");
    CHECK(j["finite"] == true);
    CHECK(j["value"].get<double>() == 0.0);
    const auto manifest = read_json(dir / "o" / "manifest.json");
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["config"]["command"] == "rate");
}

TEST_CASE("rate re-consumes simulate and solve-ode output") {
    const auto dir = scratch("reconsume");
    REQUIRE(call({"simulate", "--eps", "0.1", "--N", "256", "--paths", "3", "--seed", "4", "--out", (dir / "sim").string()}) ==
            kExitOk);
    CHECK(call({"rate", "--path", (dir / "sim" / "paths.csv").string(), "--path-id", "2", "--out",
                (dir / "rate_sim").string()}) == kExitOk);
    const auto sim_rate = read_json(dir / "rate_sim" / "rate.json");
    CHECK(sim_rate.contains("flags"));
    CHECK(sim_rate.contains("finite"));

    REQUIRE(call({"solve-ode", "--control", "const:1", "--N", "1024", "--out", (dir / "ode").string()}) == kExitOk);
    CHECK(call({"rate", "--path", (dir / "ode" / "phi.csv").string(), "--out", (dir / "rate_ode").string()}) == kExitOk);
    const auto ode_rate = read_json(dir / "rate_ode" / "rate.json");
    REQUIRE(ode_rate["finite"] == true);
    CHECK(ode_rate["value"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(fs::exists(dir / "rate_ode" / "control.csv"));
}

TEST_CASE("manifest checksums match the files and reruns reproduce them") {
    const auto dir = scratch("rerun");
    auto run_once = [&](const std::string& sub, const std::string& threads) {
        const auto out = dir / sub;
        REQUIRE(call({"converge", "--control", "const:1", "--eps-list", "0.2,0.1", "--n", "200", "--N", "512", "--seed",
                      "3", "--threads", threads, "--out", out.string()}) == kExitOk);
        return read_json(out / "manifest.json");
    };
    const auto a = run_once("a", "1");
    const auto b = run_once("b", "3");
    REQUIRE(a["files"].size() == 1);
    for (const auto& f : a["files"]) {
        CHECK(f["sha256"] == sha256_file(dir / "a" / f["name"].get<std::string>()));
    }
    CHECK(a["files"] == b["files"]);
    CHECK(a["config"]["threads"] == 1);
    CHECK(b["config"]["threads"] == 3);
}

TEST_CASE("ldp-slope table carries a gap column") {
    const auto dir = scratch("ldp");
    REQUIRE(call({"ldp-slope", "--n", "500", "--N", "512", "--eps-list", "0.3,0.2", "--out", dir.string()}) == kExitOk);
    std::ifstream in(dir / "ldp_slope.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.find("gap") != std::string::npos);
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    CHECK(call({"--help"}) == kExitOk);
    CHECK(call({"simulate", "--help"}) == kExitOk);
    CHECK(call({"clt", "--eps", "0", "--out", dir.string()}) == kExitUsage);
    CHECK(call({"nope"}) == kExitUsage);
    CHECK(call({"rate", "--path", (dir / "missing.csv").string()}) == kExitUsage);

    std::ofstream(dir / "bad.csv") << "t,re,im\n0,0,0\n0.5,-0.5\n";
    std::string err;
    CHECK(call({"rate", "--path", (dir / "bad.csv").string(), "--out", (dir / "o").string()}, &err) == kExitUsage);
    CHECK_FALSE(err.empty());

    // the endpoint is out of reach at such a short horizon
    const int code = call({"geodesic", "--arg-z", "0.3", "--m", "4", "--N", "64", "--T", "0.05", "--multistart", "1",
                           "--out", (dir / "geo").string()});
    CHECK(code == kExitNonconvergence);
    CHECK(fs::exists(dir / "geo" / "geodesic.json"));
    CHECK(read_json(dir / "geo" / "manifest.json")["status"] == "nonconvergence");
}

TEST_CASE("runs write only inside the output directory") {
    const auto dir = scratch("confined");
    const auto out = dir / "out";
    const auto before = tree(dir);
    REQUIRE(call({"simulate", "--kappa", "2", "--paths", "20", "--N", "128", "--out", out.string()}) == kExitOk);
    auto after = tree(dir);
    for (auto it = after.begin(); it != after.end();) {
        it = (*it).begin()->string() == "out" ? after.erase(it) : std::next(it);
    }
    CHECK(after == before);
    const auto files = tree(out);
    CHECK(files == std::set<fs::path>{"tips.csv", "simulate.json", "manifest.json"});
}
