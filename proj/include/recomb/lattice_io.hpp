#pragma once

#include <string>
#include <string_view>

#include "recomb/lattice.hpp"

namespace recomb {

enum class ExportFormat { json, dot, csv };

// Throws std::invalid_argument for an unknown tag.
ExportFormat parse_format(std::string_view tag);

// JSON: fixed field order, doubles at 17 significant digits.
// DOT: black center branches, blue spanning branches, green downward and red
// upward sibling branches. CSV: one row per node.
std::string export_lattice(const Lattice& lat, ExportFormat format);

// Inverse of the JSON export. Throws std::invalid_argument on malformed input.
Lattice parse_lattice_json(std::string_view text);

// "%.17g" formatting shared by every writer.
std::string format_double(double v);

}  // namespace recomb
