#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Command-line harness: parses a flat key=value configuration, runs one
// experiment, and writes its CSV/JSON artifacts plus manifest.json into the
// output directory.
namespace cbesq::cli {

/// Process exit statuses.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitNonconvergence = 3,
    kExitInternal = 4,
};

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown by parse_config for --help; what() is the help text.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string command;
    std::map<std::string, std::string> params;  // command keys after defaults, file and flags
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct FileDigest {
    std::string name;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string version;
    double wall_seconds = 0.0;
    bool converged = true;  // false maps to kExitNonconvergence
    std::vector<FileDigest> files;
};

/// Commands understood by parse_config.
const std::vector<std::string>& commands();

/// Parses `<command> [--key value ...] [--config file]` (argv without the
/// program name). Values from the
/// config file are overridden by flags. Throws UsageError naming the key on a
/// missing, unknown or out-of-range value.
ExperimentConfig parse_config(const std::vector<std::string>& args);

/// Runs the experiment, writes artifacts and manifest.json.
RunManifest run(const ExperimentConfig& config);

/// Full entry point: parse, run, map exceptions to exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);

std::string version_string();

}  // namespace cbesq::cli
