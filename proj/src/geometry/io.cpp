#include "skp/geometry/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "skp/geometry/normals.hpp"

namespace skp {

CloudIoError::CloudIoError(Kind kind, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      kind_(kind),
      line_(line) {}

namespace {

using Kind = CloudIoError::Kind;

/// Splits the input into whitespace tokens line by line, skipping blank
/// lines and `#` comments, and remembers the current line number.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return tokens;
    }
    return std::nullopt;
  }

  std::vector<std::string> require(const char* what) {
    auto t = next();
    if (!t) throw CloudIoError(Kind::parse, line_no_, std::string("unexpected end of file, expected ") + what);
    return *t;
  }

  [[nodiscard]] std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

double to_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw CloudIoError(Kind::parse, line, "invalid number '" + tok + "'");
  }
  if (!std::isfinite(v)) throw CloudIoError(Kind::parse, line, "non-finite value '" + tok + "'");
  return v;
}

long long to_integer(const std::string& tok, std::size_t line) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw CloudIoError(Kind::parse, line, "invalid integer '" + tok + "'");
  }
  return v;
}

void push_polygon(PointCloud& cloud, const std::vector<long long>& idx, std::size_t vertex_count,
                  std::size_t line) {
  if (idx.size() < 3) throw CloudIoError(Kind::parse, line, "face with fewer than 3 vertices");
  for (long long v : idx) {
    if (v < 0 || static_cast<std::size_t>(v) >= vertex_count) {
      throw CloudIoError(Kind::parse, line, "face index " + std::to_string(v) + " out of range");
    }
  }
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (idx[a] == idx[b]) throw CloudIoError(Kind::degenerate_face, line, "face repeats a vertex index");
    }
  }
  // Fan triangulation for polygons.
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
    cloud.faces.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                           static_cast<std::uint32_t>(idx[k + 1])});
  }
}

PointCloud parse_off(std::istream& in) {
  LineReader reader(in);
  auto header = reader.require("OFF header");
  std::vector<std::string> counts;
  const std::string& first = header[0];
  if (first.rfind("OFF", 0) != 0) throw CloudIoError(Kind::parse, reader.line(), "missing OFF header");
  if (first.size() > 3) {
    // Tolerates the "OFF8 6 0" header glitch found in some public corpora.
    counts.push_back(first.substr(3));
  }
  counts.insert(counts.end(), header.begin() + 1, header.end());
  if (counts.empty()) counts = reader.require("vertex/face/edge counts");
  if (counts.size() < 2) throw CloudIoError(Kind::parse, reader.line(), "expected 'V F E' counts");
  const long long nv = to_integer(counts[0], reader.line());
  const long long nf = to_integer(counts[1], reader.line());
  if (nv < 0 || nf < 0) throw CloudIoError(Kind::parse, reader.line(), "negative element count");

  PointCloud cloud;
  cloud.positions.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    auto tok = reader.require("vertex line");
    if (tok.size() < 3) throw CloudIoError(Kind::parse, reader.line(), "vertex line needs 3 floats");
    cloud.positions.emplace_back(to_double(tok[0], reader.line()), to_double(tok[1], reader.line()),
                                 to_double(tok[2], reader.line()));
  }
  for (long long f = 0; f < nf; ++f) {
    auto tok = reader.require("face line");
    const long long n = to_integer(tok[0], reader.line());
    if (n < 0 || static_cast<std::size_t>(n) + 1 > tok.size()) {
      throw CloudIoError(Kind::parse, reader.line(), "face line shorter than its vertex count");
    }
    std::vector<long long> idx;
    for (long long k = 0; k < n; ++k) idx.push_back(to_integer(tok[static_cast<std::size_t>(k) + 1], reader.line()));
    push_polygon(cloud, idx, cloud.positions.size(), reader.line());
  }
  return cloud;
}

PointCloud parse_xyz_normals(std::istream& in) {
  LineReader reader(in);
  PointCloud cloud;
  while (auto tok = reader.next()) {
    if (tok->size() != 6) {
      throw CloudIoError(Kind::parse, reader.line(), "expected 6 floats (px py pz nx ny nz)");
    }
    const std::size_t l = reader.line();
    Vec3 p(to_double((*tok)[0], l), to_double((*tok)[1], l), to_double((*tok)[2], l));
    Vec3 n(to_double((*tok)[3], l), to_double((*tok)[4], l), to_double((*tok)[5], l));
    const double len = n.norm();
    if (!(len > 0.0)) throw CloudIoError(Kind::parse, l, "zero-length normal");
    cloud.positions.push_back(p);
    cloud.normals.push_back(n / len);
  }
  return cloud;
}

PointCloud parse_ply(std::istream& in) {
  LineReader reader(in);
  auto magic = reader.require("ply magic");
  if (magic[0] != "ply") throw CloudIoError(Kind::parse, reader.line(), "missing 'ply' magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;  // "list" for list properties
  };
  std::vector<Element> elements;
  for (;;) {
    auto tok = reader.require("PLY header");
    const std::string& key = tok[0];
    if (key == "end_header") break;
    if (key == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        throw CloudIoError(Kind::parse, reader.line(), "only ascii PLY is supported");
      }
    } else if (key == "element") {
      if (tok.size() < 3) throw CloudIoError(Kind::parse, reader.line(), "bad element line");
      const long long c = to_integer(tok[2], reader.line());
      if (c < 0) throw CloudIoError(Kind::parse, reader.line(), "negative element count");
      elements.push_back({tok[1], static_cast<std::size_t>(c), {}});
    } else if (key == "property") {
      if (elements.empty() || tok.size() < 3) {
        throw CloudIoError(Kind::parse, reader.line(), "property outside of an element");
      }
      elements.back().properties.push_back(tok[1] == "list" ? std::string("list:") + tok.back() : tok.back());
    }
    // comment/obj_info lines are ignored
  }

  PointCloud cloud;
  bool have_normals = false;
  for (const Element& el : elements) {
    if (el.name == "vertex") {
      auto find = [&](const char* name) -> std::ptrdiff_t {
        auto it = std::find(el.properties.begin(), el.properties.end(), name);
        return it == el.properties.end() ? -1 : it - el.properties.begin();
      };
      const std::ptrdiff_t ix = find("x"), iy = find("y"), iz = find("z");
      const std::ptrdiff_t inx = find("nx"), iny = find("ny"), inz = find("nz");
      if (ix < 0 || iy < 0 || iz < 0) throw CloudIoError(Kind::parse, reader.line(), "vertex lacks x/y/z");
      have_normals = inx >= 0 && iny >= 0 && inz >= 0;
      for (std::size_t i = 0; i < el.count; ++i) {
        auto tok = reader.require("vertex row");
        const std::size_t l = reader.line();
        if (tok.size() < el.properties.size()) throw CloudIoError(Kind::parse, l, "short vertex row");
        auto at = [&](std::ptrdiff_t k) { return to_double(tok[static_cast<std::size_t>(k)], l); };
        cloud.positions.emplace_back(at(ix), at(iy), at(iz));
        if (have_normals) {
          Vec3 n(at(inx), at(iny), at(inz));
          const double len = n.norm();
          if (!(len > 0.0)) throw CloudIoError(Kind::parse, l, "zero-length normal");
          cloud.normals.push_back(n / len);
        }
      }
    } else if (el.name == "face") {
      for (std::size_t i = 0; i < el.count; ++i) {
        auto tok = reader.require("face row");
        const std::size_t l = reader.line();
        const long long n = to_integer(tok[0], l);
        if (n < 0 || static_cast<std::size_t>(n) + 1 > tok.size()) {
          throw CloudIoError(Kind::parse, l, "face row shorter than its vertex count");
        }
        std::vector<long long> idx;
        for (long long k = 0; k < n; ++k) idx.push_back(to_integer(tok[static_cast<std::size_t>(k) + 1], l));
        push_polygon(cloud, idx, cloud.positions.size(), l);
      }
    } else {
      for (std::size_t i = 0; i < el.count; ++i) reader.require("element row");
    }
  }
  return cloud;
}

void ensure_normals(PointCloud& cloud) {
  if (cloud.has_normals()) return;
  if (cloud.has_faces()) {
    auto normals = face_vertex_normals(cloud);
    const bool complete = std::all_of(normals.begin(), normals.end(),
                                      [](const Vec3& n) { return n.squaredNorm() > 0.0; });
    if (complete) {
      cloud.normals = std::move(normals);
      return;
    }
  }
  if (cloud.size() >= 3) {
    const std::size_t k = std::min<std::size_t>(16, cloud.size());
    cloud.normals = estimate_normals(cloud, k).cloud.normals;
  } else {
    cloud.normals.assign(cloud.size(), Vec3::UnitZ());
  }
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return CloudFormat::off;
  if (ext == ".ply") return CloudFormat::ply;
  return CloudFormat::xyz_normals;
}

CloudFormat parse_format(std::string_view name) {
  if (name == "off") return CloudFormat::off;
  if (name == "ply") return CloudFormat::ply;
  if (name == "xyz-normals" || name == "xyz") return CloudFormat::xyz_normals;
  throw std::invalid_argument("unknown cloud format '" + std::string(name) + "'");
}

PointCloud parse_cloud(std::istream& in, CloudFormat format) {
  PointCloud cloud;
  switch (format) {
    case CloudFormat::off: cloud = parse_off(in); break;
    case CloudFormat::ply: cloud = parse_ply(in); break;
    case CloudFormat::xyz_normals: cloud = parse_xyz_normals(in); break;
  }
  if (cloud.empty()) throw CloudIoError(Kind::empty_cloud, 0, "cloud has no points");
  ensure_normals(cloud);
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw CloudIoError(Kind::io, 0, "cannot open " + path.string());
  return parse_cloud(in, format);
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_off(std::ostream& out, const PointCloud& mesh) {
  out << "OFF\n" << mesh.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const Vec3& p : mesh.positions) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
  for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void write_xyz_normals(std::ostream& out, const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Vec3& n = cloud.normals[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << ' '
        << format_double(n.x()) << ' ' << format_double(n.y()) << ' ' << format_double(n.z()) << '\n';
  }
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw CloudIoError(Kind::io, 0, "cannot write " + path.string());
  if (format_from_path(path) == CloudFormat::off) {
    write_off(out, cloud);
  } else {
    write_xyz_normals(out, cloud);
  }
}

}  // namespace skp
