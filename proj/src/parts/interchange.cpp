#include "skp/parts/interchange.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "skp/geometry/io.hpp"

namespace skp {

void write_part_graph(std::ostream& out, const PartGraph& graph) {
  for (std::size_t i = 0; i < graph.parts.size(); ++i) {
    const Part& p = graph.parts[i];
    out << "PART " << i;
    for (int a = 0; a < 3; ++a) out << ' ' << format_double(p.center[a]);
    out << ' ' << format_double(p.bounding_radius);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << format_double(p.lrf(r, c));
    }
    out << ' ' << (p.degenerate_lrf ? 1 : 0) << '\n';
  }
  for (const auto& [i, j] : graph.edges) out << "EDGE " << i << ' ' << j << '\n';
}

namespace {

double parse_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw std::runtime_error("part graph line " + std::to_string(line) + ": bad number '" + tok + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& tok, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw std::runtime_error("part graph line " + std::to_string(line) + ": bad index '" + tok + "'");
  }
  return v;
}

}  // namespace

PartGraph read_part_graph(std::istream& in) {
  PartGraph graph;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "PART") {
      if (tok.size() != 16) throw std::runtime_error("part graph line " + std::to_string(line_no) + ": PART needs 15 fields");
      if (parse_index(tok[1], line_no) != graph.parts.size()) {
        throw std::runtime_error("part graph line " + std::to_string(line_no) + ": PART ids must be sequential");
      }
      Part p;
      for (int a = 0; a < 3; ++a) p.center[a] = parse_double(tok[2 + static_cast<std::size_t>(a)], line_no);
      p.bounding_radius = parse_double(tok[5], line_no);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p.lrf(r, c) = parse_double(tok[6 + static_cast<std::size_t>(3 * r + c)], line_no);
      }
      p.degenerate_lrf = tok[15] == "1";
      graph.parts.push_back(std::move(p));
    } else if (tok[0] == "EDGE") {
      if (tok.size() != 3) throw std::runtime_error("part graph line " + std::to_string(line_no) + ": EDGE needs 2 fields");
      const std::size_t i = parse_index(tok[1], line_no);
      const std::size_t j = parse_index(tok[2], line_no);
      if (i >= graph.parts.size() || j >= graph.parts.size() || i == j) {
        throw std::runtime_error("part graph line " + std::to_string(line_no) + ": invalid edge");
      }
      graph.edges.emplace_back(i, j);
    } else {
      throw std::runtime_error("part graph line " + std::to_string(line_no) + ": unknown record '" + tok[0] + "'");
    }
  }
  return graph;
}

}  // namespace skp
