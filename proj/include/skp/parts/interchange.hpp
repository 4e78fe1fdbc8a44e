#pragma once

#include <iosfwd>

#include "skp/parts/part_graph.hpp"

namespace skp {

/// Line-oriented part-graph export:
///
///   PART <id> <cx> <cy> <cz> <radius> <lrf row-major, 9 values> <degenerate 0|1>
///   EDGE <i> <j>
///
/// All PART lines come first. Floats use the shortest decimal form that
/// round-trips, so reading the file back reproduces the doubles exactly.
void write_part_graph(std::ostream& out, const PartGraph& graph);

/// Reads the format above. Members and canonical points are not part of the
/// interchange and come back empty. Throws std::runtime_error on bad input.
PartGraph read_part_graph(std::istream& in);

}  // namespace skp
