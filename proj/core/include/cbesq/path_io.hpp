#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "cbesq/grid.hpp"

// CSV carriers for paths and controls. Numbers are written with 17
// significant digits so a path read back is bit-identical.
namespace cbesq::io {

/// Header `t,re,im`, one row per node.
void write_path_csv(std::ostream& out, const ComplexPath& path);

/// Long format: header `path_id,t,re,im`; call write_path_rows for each path.
void write_long_header(std::ostream& out);
void write_path_rows(std::ostream& out, std::uint64_t path_id, const ComplexPath& path);

/// Reads either format. For long-format files `path_id` selects the path
/// (default: the first one in the file).
ComplexPath read_path_csv(std::istream& in, std::optional<std::uint64_t> path_id = std::nullopt);

/// Header `t,h,hdot`, one row per node; hdot on row k is the derivative on
/// [t_k, t_{k+1}] and the last row repeats the final interval's value.
void write_control_csv(std::ostream& out, const Control& h);
Control read_control_csv(std::istream& in);

std::string format_double(double x);

}  // namespace cbesq::io
