#include "cli.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cbesq/controlled_ode.hpp"
#include "cbesq/ensemble.hpp"
#include "cbesq/error.hpp"
#include "cbesq/geodesic.hpp"
#include "cbesq/parallel.hpp"
#include "cbesq/path_io.hpp"
#include "cbesq/rare_event.hpp"
#include "cbesq/rate.hpp"
#include "cbesq/sde.hpp"

#ifndef CBESQ_VERSION_STRING
#define CBESQ_VERSION_STRING "v0.0.0-unknown"
#endif

namespace cbesq::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string version_string() { return CBESQ_VERSION_STRING; }

namespace {

struct Key {
    std::string name;
    std::string fallback;  // empty: no default
    bool required = false;
    std::string help;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<Key> keys;
};

std::vector<Key> grid_keys(const std::string& N = "4096") {
    return {{"T", "1", false, "horizon"}, {"N", N, false, "grid intervals"}, {"gamma", "2", false, "grid grading exponent"}};
}

std::vector<Key> with(std::vector<Key> keys, const std::vector<Key>& more) {
    keys.insert(keys.end(), more.begin(), more.end());
    return keys;
}

const Key kControl{"control", "const:1", false, "control: const:A | linear:A | sin:A | file:PATH (t,h,hdot csv)"};

const std::vector<Command>& command_table() {
    static const std::vector<Command> table = {
        {"simulate", "Euler-Maruyama paths of Z^eps (or Z^{eps,h}); with --kappa, SLE tip samples",
         with({{"eps", "", false, "noise scale (required unless --kappa)"},
               {"kappa", "", false, "SLE parameter in (0,4): sample tips sqrt(kappa Y_T)"},
               {"paths", "1", false, "number of paths / tip samples"},
               {"hdot", "0", false, "constant control rate for the shifted process"}},
              grid_keys())},
        {"solve-ode", "solve d(phi) = -dt + 2 sqrt(phi) dh",
         with({kControl, {"startup", "1", false, "startup nodes"}, {"tolerance", "1e-6", false, "handoff tolerance"}},
              grid_keys())},
        {"rate", "evaluate the rate functional I on a path csv",
         {{"path", "", true, "path csv (t,re,im or path_id,t,re,im)"}, {"path-id", "", false, "path id in long csv"}}},
        {"sup-j", "dual value sup_J over m-element hat bases",
         {{"path", "", true, "path csv"}, {"path-id", "", false, "path id in long csv"}, {"m", "64", false, "elements"}}},
        {"geodesic", "minimal energy for phi to join 0 to z^2",
         {{"arg-z", "", true, "arg z in (0, pi)"},
          {"modulus", "1", false, "|z|"},
          {"T", "0", false, "horizon, 0 selects |z|^2"},
          {"m", "64", false, "control pieces"},
          {"N", "1024", false, "ODE grid intervals"},
          {"gamma", "2", false, "ODE grid grading"},
          {"multistart", "2", false, "1 or 2 starts"},
          {"scan-horizon", "", false, "comma list of horizons as multiples of |z|^2; report the best"}}},
        {"ball-prob", "P(sup |Z - phi^h| < r), direct or tilted",
         with({kControl,
               {"eps", "", true, "noise scale"},
               {"r", "", true, "ball radius"},
               {"n", "10000", false, "paths"},
               {"mode", "tilted", false, "direct | tilted"}},
              grid_keys())},
        {"ldp-slope", "eps^2 log p against -I over a decreasing eps schedule",
         with({kControl,
               {"r", "0.3", false, "ball radius"},
               {"eps-list", "0.3,0.2,0.15,0.1", false, "decreasing eps values"},
               {"n", "10000", false, "paths per eps"},
               {"mode", "tilted", false, "tilted: every row tilted; direct: rows below eps 0.05 and the last row tilted"}},
              grid_keys())},
        {"clt", "fluctuation covariance of (Z + t)/eps; optional Bessel CLT",
         with({{"eps", "", true, "noise scale > 0"},
               {"n", "10000", false, "paths"},
               {"s", "0.5", false, "first time"},
               {"t", "1", false, "second time"},
               {"delta", "", false, "also run the real squared Bessel CLT at this dimension"}},
              grid_keys())},
        {"converge", "quantiles of sup |Z^{eps,h} - phi^h|",
         with({kControl, {"eps-list", "0.2,0.1,0.05", false, "eps values"}, {"n", "2000", false, "paths per eps"}},
              grid_keys())},
        {"bounds", "pathwise bounds on U and V",
         with({kControl,
               {"eps", "0.1", false, "noise scale"},
               {"n", "1000", false, "paths"},
               {"slack", "", false, "slack (default 4 sqrt(max dt))"}},
              grid_keys())},
        {"tails", "Hoelder-norm tail probabilities",
         with({{"eps-list", "0.3,0.2,0.1", false, "eps values"},
               {"alpha", "0.25", false, "Hoelder exponent in (0, 1/2)"},
               {"radii", "1,2,4", false, "radii R"},
               {"n", "2000", false, "paths per eps"}},
              grid_keys("256"))},
        {"supermg", "E M^eps_{f,g}(Z^eps) for random smooth (f, g)",
         with({{"eps", "0.2", false, "noise scale >= 0.1"},
               {"fields", "5", false, "number of random fields"},
               {"n", "10000", false, "paths per field"},
               {"amplitude", "0.25", false, "coefficient range of the fields"}},
              grid_keys())},
    };
    return table;
}

const Command& find_command(const std::string& name) {
    for (const auto& c : command_table()) {
        if (c.name == name) return c;
    }
    throw UsageError("unknown command '" + name + "'");
}

double parse_number(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw UsageError("--" + key + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text, std::uint64_t min = 1) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) {
        throw UsageError("--" + key + ": expected a non-negative integer, got '" + text + "'");
    }
    if (v < min) throw UsageError("--" + key + ": must be >= " + std::to_string(min));
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
    if (out.empty()) throw UsageError("--" + key + ": empty list");
    return out;
}

void require_range(const std::string& key, double v, double lo, double hi, bool lo_open, bool hi_open,
                   const std::string& what) {
    const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    if (!ok) throw UsageError("--" + key + ": " + what);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ControlSpec {
    std::string kind;
    double a = 0.0;
    std::string file;
};

ControlSpec parse_control_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("--control: expected KIND:VALUE, got '" + text + "'");
    ControlSpec spec{text.substr(0, colon), 0.0, {}};
    const auto rest = text.substr(colon + 1);
    if (spec.kind == "file") {
        if (!fs::exists(rest)) throw UsageError("--control: file not found: " + rest);
        spec.file = rest;
    } else if (spec.kind == "const" || spec.kind == "linear" || spec.kind == "sin") {
        spec.a = parse_number("control", rest);
    } else {
        throw UsageError("--control: unknown kind '" + spec.kind + "' (const, linear, sin, file)");
    }
    return spec;
}

// Range checks by key; a few depend on the command.
void validate(const std::string& command, const std::string& key, const std::string& value) {
    if (key == "eps") {
        const double v = parse_number(key, value);
        if (command == "clt" || command == "ball-prob" || command == "supermg") {
            require_range(key, v, 0.0, kInf, true, true, "must be > 0");
        } else {
            require_range(key, v, 0.0, kInf, false, true, "must be >= 0");
        }
    } else if (key == "kappa") {
        require_range(key, parse_number(key, value), 0.0, 4.0, true, true, "must lie in (0, 4)");
    } else if (key == "alpha") {
        require_range(key, parse_number(key, value), 0.0, 0.5, true, true, "must lie in (0, 1/2)");
    } else if (key == "T") {
        const double v = parse_number(key, value);
        if (command == "geodesic") {
            require_range(key, v, 0.0, kInf, false, true, "must be >= 0");
        } else {
            require_range(key, v, 0.0, kInf, true, true, "must be > 0");
        }
    } else if (key == "gamma") {
        require_range(key, parse_number(key, value), 1.0, kInf, false, true, "must be >= 1");
    } else if (key == "N" || key == "n" || key == "paths" || key == "m" || key == "fields" || key == "startup") {
        parse_count(key, value, key == "n" && command != "simulate" ? 2 : 1);
    } else if (key == "multistart") {
        const auto v = parse_count(key, value);
        if (v > 2) throw UsageError("--multistart: must be 1 or 2");
    } else if (key == "path-id") {
        parse_count(key, value, 0);
    } else if (key == "r" || key == "modulus" || key == "delta" || key == "tolerance" || key == "amplitude" ||
               key == "slack") {
        require_range(key, parse_number(key, value), 0.0, kInf, true, true, "must be > 0");
    } else if (key == "s" || key == "t" || key == "hdot") {
        parse_number(key, value);
    } else if (key == "arg-z") {
        require_range(key, parse_number(key, value), 0.0, std::numbers::pi, true, true, "must lie in (0, pi)");
    } else if (key == "mode") {
        if (value != "direct" && value != "tilted") throw UsageError("--mode: expected direct or tilted");
    } else if (key == "eps-list") {
        const auto list = parse_list(key, value);
        for (std::size_t j = 0; j < list.size(); ++j) {
            require_range(key, list[j], 0.0, kInf, command != "converge", true, "entries must be positive");
            if (j > 0 && !(list[j] < list[j - 1])) throw UsageError("--eps-list: must be strictly decreasing");
        }
    } else if (key == "radii" || key == "scan-horizon") {
        for (double v : parse_list(key, value)) require_range(key, v, 0.0, kInf, true, true, "entries must be positive");
    } else if (key == "control") {
        parse_control_spec(value);
    } else if (key == "path") {
        if (!fs::exists(value)) throw UsageError("--path: file not found: " + value);
    }
}

std::map<std::string, std::string> read_config_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw UsageError("--config: cannot open " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--config: line " + std::to_string(lineno) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        auto key = trim(line.substr(0, eq));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

}  // namespace

const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& c : command_table()) v.push_back(c.name);
        return v;
    }();
    return names;
}

ExperimentConfig parse_config(const std::vector<std::string>& args) {
    CLI::App app{"cbesq: large deviations of complex squared Bessel processes", "cbesq"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string seed_text, threads_text, out_text, config_file;
    app.add_option("--seed", seed_text, "master seed (default 1)");
    app.add_option("--threads", threads_text, "worker threads (default: hardware)");
    app.add_option("--out", out_text, "output directory (default: out)");
    app.add_option("--config", config_file, "key=value file; flags override it");

    std::map<std::string, std::map<std::string, std::string>> flag_values;
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : command_table()) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        subs[cmd.name] = sub;
        for (const auto& key : cmd.keys) {
            std::string help = key.help;
            if (!key.fallback.empty()) help += " [" + key.fallback + "]";
            if (key.required) help += " (required)";
            sub->add_option("--" + key.name, flag_values[cmd.name][key.name], help);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        auto* asked = &app;
        for (auto* sub : app.get_subcommands()) asked = sub;
        throw HelpRequested(asked->help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    ExperimentConfig cfg;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) cfg.command = name;
    }
    const auto& cmd = find_command(cfg.command);
    auto* sub = subs.at(cfg.command);

    std::map<std::string, std::string> file_values;
    if (!config_file.empty()) file_values = read_config_file(config_file);

    // Globals: flag, then file, then default.
    auto global = [&](const std::string& key, const std::string& flag, const std::string& fallback) {
        if (!flag.empty()) return flag;
        if (auto it = file_values.find(key); it != file_values.end()) return it->second;
        return fallback;
    };
    cfg.seed = parse_count("seed", global("seed", seed_text, "1"), 0);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    cfg.threads = static_cast<unsigned>(parse_count("threads", global("threads", threads_text, std::to_string(hw))));
    cfg.out = global("out", out_text, "out");

    for (const auto& [key, value] : file_values) {
        if (key == "seed" || key == "threads" || key == "out") continue;
        const bool known = std::any_of(cmd.keys.begin(), cmd.keys.end(), [&](const Key& k) { return k.name == key; });
        if (!known) throw UsageError("--config: unknown key '" + key + "' for command " + cfg.command);
    }
    for (const auto& key : cmd.keys) {
        std::string value = key.fallback;
        if (auto it = file_values.find(key.name); it != file_values.end()) value = it->second;
        if (sub->count("--" + key.name) > 0) value = flag_values[cfg.command][key.name];
        if (value.empty()) {
            if (key.required) throw UsageError("--" + key.name + ": required by " + cfg.command);
            continue;
        }
        validate(cfg.command, key.name, value);
        cfg.params[key.name] = value;
    }
    if (cfg.command == "simulate" && !cfg.params.contains("eps") && !cfg.params.contains("kappa")) {
        throw UsageError("--eps: required by simulate (or give --kappa)");
    }
    if (cfg.command == "clt") {
        const double s = parse_number("s", cfg.params.at("s"));
        const double t = parse_number("t", cfg.params.at("t"));
        const double T = parse_number("T", cfg.params.at("T"));
        if (!(s > 0.0 && s <= t && t <= T)) throw UsageError("--s/--t: need 0 < s <= t <= T");
    }
    return cfg;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

namespace {

class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        names_.push_back(name);
        std::ofstream out(dir_ / name);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        return out;
    }

    void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

    const std::vector<std::string>& names() const { return names_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

// Reads parameters of an already validated config.
struct Params {
    const ExperimentConfig& cfg;

    bool has(const std::string& key) const { return cfg.params.contains(key); }
    const std::string& text(const std::string& key) const { return cfg.params.at(key); }
    double num(const std::string& key) const { return parse_number(key, text(key)); }
    std::size_t count(const std::string& key) const { return static_cast<std::size_t>(parse_count(key, text(key), 0)); }
    std::vector<double> list(const std::string& key) const { return parse_list(key, text(key)); }

    TimeGrid grid() const { return TimeGrid::graded(num("T"), count("N"), num("gamma")); }

    Control control(const TimeGrid& grid) const {
        const auto spec = parse_control_spec(text("control"));
        if (spec.kind == "file") {
            std::ifstream in(spec.file);
            return io::read_control_csv(in);
        }
        const double a = spec.a;
        if (spec.kind == "const") return Control::from_rate(grid, [a](double) { return a; });
        if (spec.kind == "linear") return Control::from_rate(grid, [a](double t) { return a * t; });
        return Control::from_rate(grid, [a](double t) { return a * std::sin(t); });
    }

    ComplexPath path() const {
        std::ifstream in(text("path"));
        std::optional<std::uint64_t> id;
        if (has("path-id")) id = count("path-id");
        return io::read_path_csv(in, id);
    }
};

json config_echo(const ExperimentConfig& cfg) {
    json params = json::object();
    for (const auto& [k, v] : cfg.params) params[k] = v;
    return json{{"command", cfg.command}, {"seed", cfg.seed}, {"params", params}};
}

json summary_head(const ExperimentConfig& cfg) {
    return json{{"config", config_echo(cfg)}, {"version", version_string()}};
}

json finite_or_null(double v) { return std::isfinite(v) && v != kInfiniteRate ? json(v) : json(nullptr); }

std::string fmt(double x) { return io::format_double(x); }

bool run_simulate(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto grid = p.grid();
    const std::size_t paths = p.count("paths");
    auto summary = summary_head(p.cfg);
    if (p.has("kappa")) {
        const auto tips = sle_tip_ensemble(p.num("kappa"), grid, paths, p.cfg.seed, pool);
        auto out = art.open("tips.csv");
        out << "sample,re,im\n";
        for (std::size_t i = 0; i < tips.size(); ++i) out << i << ',' << fmt(tips[i].real()) << ',' << fmt(tips[i].imag()) << '\n';
        summary["tips_csv_ref"] = "tips.csv";
        summary["samples"] = paths;
    } else {
        SimParams sp;
        sp.epsilon = p.num("eps");
        sp.grid = grid;
        sp.seed = p.cfg.seed;
        const double hdot = p.num("hdot");
        const auto h = Control::from_rate(grid, [hdot](double) { return hdot; });
        auto out = art.open("paths.csv");
        if (paths > 1) io::write_long_header(out);
        for (std::size_t i = 0; i < paths; ++i) {
            const auto sp_i = sp.with_stream(i);
            const auto noise = sample_noise(sp_i);
            const auto z = hdot == 0.0 ? simulate_z(sp_i, noise) : simulate_z_h(sp_i, h, noise);
            if (paths > 1) {
                io::write_path_rows(out, i, z);
            } else {
                io::write_path_csv(out, z);
            }
        }
        summary["paths_csv_ref"] = "paths.csv";
        summary["paths"] = paths;
    }
    summary["slit_hits"] = slit_hits();
    art.write_json("simulate.json", summary);
    return true;
}

bool run_solve_ode(const Params& p, Artifacts& art) {
    const auto h = p.control(p.grid());
    const OdeScheme scheme{h.grid(), p.count("startup"), p.num("tolerance")};
    const auto sol = solve_phi(h, scheme);
    {
        auto out = art.open("phi.csv");
        io::write_path_csv(out, sol.path);
    }
    {
        auto out = art.open("control.csv");
        io::write_control_csv(out, h);
    }
    auto summary = summary_head(p.cfg);
    summary["phi_csv_ref"] = "phi.csv";
    summary["control_csv_ref"] = "control.csv";
    summary["energy"] = h.energy();
    summary["endpoint"] = {sol.path.values.back().real(), sol.path.values.back().imag()};
    summary["min_sqrt_ratio"] = sol.min_sqrt_ratio;
    summary["handoff_residual"] = sol.handoff_residual;
    art.write_json("solve_ode.json", summary);
    return true;
}

bool run_rate(const Params& p, Artifacts& art) {
    const auto res = eval_I(p.path());
    auto summary = summary_head(p.cfg);
    summary["flags"] = {{"h1", res.h1_ok}, {"h2", res.h2_ok}, {"h3", res.h3_ok}};
    summary["finite"] = res.finite();
    summary["value"] = finite_or_null(res.value);
    summary["max_h3_defect"] = res.max_h3_defect;
    if (res.recovered_control) {
        auto out = art.open("control.csv");
        io::write_control_csv(out, *res.recovered_control);
        summary["control_csv_ref"] = "control.csv";
    } else {
        summary["control_csv_ref"] = nullptr;
    }
    art.write_json("rate.json", summary);
    return true;
}

bool run_sup_j(const Params& p, Artifacts& art) {
    const auto xi = p.path();
    const auto dual = sup_J(xi, p.count("m"));
    const auto rate = eval_I(xi);
    auto summary = summary_head(p.cfg);
    summary["m"] = dual.elements;
    summary["finite"] = dual.finite;
    summary["value"] = finite_or_null(dual.value);
    summary["rank"] = dual.rank;
    summary["null_projection"] = dual.null_projection;
    summary["eval_I"] = finite_or_null(rate.value);
    art.write_json("sup_j.json", summary);
    return true;
}

bool run_geodesic(const Params& p, Artifacts& art, const WorkerPool& pool) {
    GeodesicProblem problem;
    problem.target = std::polar(p.num("modulus"), p.num("arg-z"));
    problem.horizon = p.num("T");
    problem.pieces = p.count("m");
    problem.intervals = p.count("N");
    problem.gamma = p.num("gamma");
    problem.multistart = p.count("multistart");

    std::optional<GeodesicResult> result;
    json scan_rows = json::array();
    if (p.has("scan-horizon")) {
        std::vector<double> horizons;
        for (double f : p.list("scan-horizon")) horizons.push_back(f * std::norm(problem.target));
        auto scan = scan_horizon(problem, horizons, pool);
        auto out = art.open("horizon_scan.csv");
        out << "T,energy,converged,defect\n";
        for (const auto& r : scan.runs) {
            out << fmt(r.horizon) << ',' << fmt(r.energy) << ',' << (r.converged ? 1 : 0) << ',' << fmt(r.defect) << '\n';
        }
        const std::size_t pick = scan.best.value_or(0);
        result = std::move(scan.runs[pick]);
    } else {
        result = min_energy_to_point(problem, pool);
    }
    {
        auto out = art.open("control.csv");
        io::write_control_csv(out, result->control);
    }
    auto summary = summary_head(p.cfg);
    summary["z"] = {problem.target.real(), problem.target.imag()};
    summary["T"] = result->horizon;
    summary["m"] = problem.pieces;
    summary["energy"] = result->energy;
    summary["closed_form"] = result->closed_form;
    summary["rel_err"] = result->relative_error;
    summary["control_csv_ref"] = "control.csv";
    summary["converged"] = result->converged;
    summary["defect"] = result->defect;
    summary["start_energies"] = result->start_energies;
    if (p.has("scan-horizon")) summary["horizon_scan_csv_ref"] = "horizon_scan.csv";
    art.write_json("geodesic.json", summary);
    return result->converged;
}

void write_mc_header(std::ostream& out) { out << "eps,r,n,mode,p_hat,ci95,eps2_log_p,neg_I"; }

void write_mc_row(std::ostream& out, const MCReport& r, double neg_I) {
    out << fmt(r.epsilon) << ',' << fmt(r.radius) << ',' << r.n << ',' << to_string(r.mode) << ',' << fmt(r.p_hat) << ','
        << fmt(r.ci95) << ',' << fmt(r.eps2_log_p) << ',' << fmt(neg_I);
}

json mc_json(const MCReport& r) {
    return json{{"eps", r.epsilon}, {"r", r.radius},      {"n", r.n},
                {"mode", to_string(r.mode)}, {"hits", r.hits}, {"p_hat", r.p_hat},
                {"ci95", r.ci95},    {"eps2_log_p", r.eps2_log_p}, {"eps2_log_ci", r.eps2_log_ci},
                {"zero_hits", r.zero_hits}, {"ess", r.ess}};
}

ComplexPath target_of(const Control& h) { return solve_phi(h, OdeScheme{h.grid(), 1, 1e-6}).path; }

bool run_ball_prob(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto h = p.control(p.grid());
    const auto target = target_of(h);
    const double eps = p.num("eps");
    std::optional<TiltSpec> tilt;
    if (p.text("mode") == "tilted") tilt = TiltSpec{h, eps};
    const auto rep = estimate_ball_prob(target, p.num("r"), eps, p.count("n"), tilt, p.cfg.seed, pool);
    const double neg_I = -eval_I(target).value;
    {
        auto out = art.open("ball_prob.csv");
        write_mc_header(out);
        out << '\n';
        write_mc_row(out, rep, neg_I);
        out << '\n';
    }
    auto summary = summary_head(p.cfg);
    summary["result"] = mc_json(rep);
    summary["neg_I"] = neg_I;
    summary["table_csv_ref"] = "ball_prob.csv";
    art.write_json("ball_prob.json", summary);
    return true;
}

bool run_ldp_slope(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto h = p.control(p.grid());
    const auto target = target_of(h);
    const double tilted_below = p.text("mode") == "tilted" ? kInf : kDirectEpsilonFloor;
    const auto rows = ldp_slope(target, h, p.num("r"), p.list("eps-list"), p.count("n"), p.cfg.seed, tilted_below, pool);
    json jrows = json::array();
    {
        auto out = art.open("ldp_slope.csv");
        write_mc_header(out);
        out << ",gap\n";
        for (const auto& row : rows) {
            write_mc_row(out, row.report, row.neg_I);
            out << ',' << fmt(row.gap) << '\n';
            auto j = mc_json(row.report);
            j["gap"] = row.gap;
            jrows.push_back(j);
        }
    }
    auto summary = summary_head(p.cfg);
    summary["neg_I"] = rows.front().neg_I;
    summary["rows"] = jrows;
    summary["table_csv_ref"] = "ldp_slope.csv";
    art.write_json("ldp_slope.json", summary);
    return true;
}

json estimate_json(const stats::Estimate& e) { return json{{"value", e.value}, {"stderr", e.stderr}}; }

bool run_clt(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto grid = p.grid();
    const auto rep = fluctuation_probe(grid, p.num("eps"), p.num("s"), p.num("t"), p.count("n"), p.cfg.seed, pool);
    auto summary = summary_head(p.cfg);
    summary["s"] = rep.s;
    summary["t"] = rep.t;
    summary["cov_im"] = estimate_json(rep.cov_im);
    summary["cov_im_limit"] = 2.0 * std::min(rep.s * rep.s, rep.t * rep.t);
    summary["var_im_s"] = estimate_json(rep.var_im_s);
    summary["var_im_t"] = estimate_json(rep.var_im_t);
    summary["var_re_end"] = estimate_json(rep.var_re_end);
    if (p.has("delta")) {
        const auto b = bessel_probe(grid, p.num("delta"), 0.0, p.count("n"), row_seed(p.cfg.seed, 1), pool);
        summary["bessel"] = {{"delta", b.delta},
                             {"mean_end", estimate_json(b.mean_end)},
                             {"mean_end_limit", b.delta * grid.horizon()},
                             {"var_normalized", estimate_json(b.var_normalized)},
                             {"var_normalized_limit", 2.0 * grid.horizon() * grid.horizon()},
                             {"clamps", b.clamps}};
    }
    art.write_json("clt.json", summary);
    return true;
}

bool run_converge(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto h = p.control(p.grid());
    const auto rows = convergence_probe(h, p.list("eps-list"), p.count("n"), p.cfg.seed, pool);
    auto out = art.open("converge.csv");
    out << "eps,q50,q90,q99,mean_sq\n";
    for (const auto& r : rows) {
        out << fmt(r.epsilon) << ',' << fmt(r.q50) << ',' << fmt(r.q90) << ',' << fmt(r.q99) << ',' << fmt(r.mean_square)
            << '\n';
    }
    return true;
}

bool run_bounds(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto h = p.control(p.grid());
    std::optional<double> slack;
    if (p.has("slack")) slack = p.num("slack");
    const auto rep = pathwise_bounds_check(p.num("eps"), h, p.count("n"), p.cfg.seed, slack, pool);
    auto summary = summary_head(p.cfg);
    summary["paths"] = rep.paths;
    summary["pairs"] = rep.pairs;
    summary["u_violations"] = rep.u_violations;
    summary["v_violations"] = rep.v_violations;
    summary["slack"] = rep.slack;
    summary["max_u_excess"] = rep.max_u_excess;
    summary["max_v_excess"] = rep.max_v_excess;
    summary["violation_fraction"] = rep.violation_fraction();
    art.write_json("bounds.json", summary);
    return true;
}

bool run_tails(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto rows =
        holder_tail_probe(p.list("eps-list"), p.num("alpha"), p.list("radii"), p.count("n"), p.cfg.seed, p.grid(), pool);
    auto out = art.open("tails.csv");
    out << "eps,R,n,hits,tail,eps2_log_tail\n";
    for (const auto& r : rows) {
        out << fmt(r.epsilon) << ',' << fmt(r.radius) << ',' << r.n << ',' << r.hits << ',' << fmt(r.tail) << ','
            << (r.hits == 0 ? std::string("-inf") : fmt(r.eps2_log_tail)) << '\n';
    }
    return true;
}

bool run_supermg(const Params& p, Artifacts& art, const WorkerPool& pool) {
    const auto grid = p.grid();
    const std::size_t fields = p.count("fields");
    json jrows = json::array();
    auto out = art.open("supermg.csv");
    out << "field,eps,n,mean,stderr,ess,max_identity_gap,within_bound\n";
    for (std::size_t j = 0; j < fields; ++j) {
        const auto field = TestField::random_smooth(grid, row_seed(p.cfg.seed, j), p.num("amplitude"));
        const auto rep = supermartingale_check(field, p.num("eps"), p.count("n"), row_seed(p.cfg.seed ^ 0xf1e1dULL, j), pool);
        out << j << ',' << fmt(rep.epsilon) << ',' << rep.n << ',' << fmt(rep.mean) << ',' << fmt(rep.stderr) << ','
            << fmt(rep.ess) << ',' << fmt(rep.max_identity_gap) << ',' << (rep.within_bound() ? 1 : 0) << '\n';
        jrows.push_back({{"field", j},
                         {"mean", rep.mean},
                         {"stderr", rep.stderr},
                         {"ess", rep.ess},
                         {"max_identity_gap", rep.max_identity_gap},
                         {"degenerate", rep.degenerate},
                         {"within_bound", rep.within_bound()}});
    }
    auto summary = summary_head(p.cfg);
    summary["fields"] = jrows;
    art.write_json("supermg.json", summary);
    return true;
}

}  // namespace

RunManifest run(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const Params p{config};
    Artifacts art(config.out);
    const WorkerPool pool(config.threads);
    reset_slit_hits();

    bool converged = true;
    const auto& c = config.command;
    if (c == "simulate") {
        converged = run_simulate(p, art, pool);
    } else if (c == "solve-ode") {
        converged = run_solve_ode(p, art);
    } else if (c == "rate") {
        converged = run_rate(p, art);
    } else if (c == "sup-j") {
        converged = run_sup_j(p, art);
    } else if (c == "geodesic") {
        converged = run_geodesic(p, art, pool);
    } else if (c == "ball-prob") {
        converged = run_ball_prob(p, art, pool);
    } else if (c == "ldp-slope") {
        converged = run_ldp_slope(p, art, pool);
    } else if (c == "clt") {
        converged = run_clt(p, art, pool);
    } else if (c == "converge") {
        converged = run_converge(p, art, pool);
    } else if (c == "bounds") {
        converged = run_bounds(p, art, pool);
    } else if (c == "tails") {
        converged = run_tails(p, art, pool);
    } else if (c == "supermg") {
        converged = run_supermg(p, art, pool);
    } else {
        throw UsageError("unknown command '" + c + "'");
    }

    RunManifest m;
    m.command = c;
    m.version = version_string();
    m.converged = converged;
    for (const auto& name : art.names()) {
        const auto path = art.dir() / name;
        m.files.push_back({name, sha256_file(path), fs::file_size(path)});
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json files = json::array();
    for (const auto& f : m.files) files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    auto echo = config_echo(config);
    echo["threads"] = config.threads;
    echo["out"] = config.out.string();
    const json manifest{{"config", echo},
                        {"version", m.version},
                        {"wall_seconds", m.wall_seconds},
                        {"status", converged ? "ok" : "nonconvergence"},
                        {"files", files}};
    std::ofstream(art.dir() / "manifest.json") << manifest.dump(2) << '\n';
    return m;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = parse_config(args);
    } catch (const HelpRequested& e) {
        out << e.what();
        return kExitOk;
    } catch (const UsageError& e) {
        err << e.what() << '\n';
        return kExitUsage;
    }
    try {
        const auto m = run(cfg);
        out << cfg.command << ": wrote " << m.files.size() << " file(s) and manifest.json to " << cfg.out.string() << " in "
            << std::fixed << std::setprecision(2) << m.wall_seconds << " s\n";
        if (!m.converged) {
            err << cfg.command << ": did not converge; best iterate written\n";
            return kExitNonconvergence;
        }
        return kExitOk;
    } catch (const UsageError& e) {
        err << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "usage: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NonConvergence& e) {
        err << "nonconvergence: " << e.what() << '\n';
        return kExitNonconvergence;
    } catch (const RefinementError& e) {
        err << "nonconvergence: " << e.what() << '\n';
        return kExitNonconvergence;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace cbesq::cli
