#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "skp/geometry/point_cloud.hpp"

namespace skp {

enum class CloudFormat { off, ply, xyz_normals };

class CloudIoError : public std::runtime_error {
 public:
  enum class Kind { io, parse, empty_cloud, degenerate_face };

  CloudIoError(Kind kind, std::size_t line, const std::string& what);

  [[nodiscard]] Kind kind() const { return kind_; }
  /// 1-based line of the offending input, 0 when not tied to a line.
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Picks the format from the extension: .off, .ply, anything else is
/// treated as xyz-normals.
CloudFormat format_from_path(const std::filesystem::path& path);
CloudFormat parse_format(std::string_view name);

/// Loads a cloud and guarantees unit normals on return. Files without
/// normals get face-weighted vertex normals when faces exist, PCA normals
/// otherwise.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
PointCloud parse_cloud(std::istream& in, CloudFormat format);

void write_off(std::ostream& out, const PointCloud& mesh);
void write_xyz_normals(std::ostream& out, const PointCloud& cloud);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace skp
