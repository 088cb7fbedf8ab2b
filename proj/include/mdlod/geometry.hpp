#pragma once

#include <compare>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mdlod::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

double distance(Point a, Point b);
double distance_to_segment(Point p, Point a, Point b);

/// Codimension-tagged segment index. `index` is unique within its codimension.
struct SegmentId {
  int codim = 0;
  int index = 0;

  friend auto operator<=>(const SegmentId&, const SegmentId&) = default;
};

std::string to_string(SegmentId id);

struct Rectangle {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(Point p, double tol) const;
  bool on_boundary(Point p, double tol) const;
};

using Ring = std::vector<Point>;

/// Connected codim-0 region. rings[0] is the outer boundary (counter-clockwise),
/// further rings are holes (clockwise).
struct BulkSegment {
  SegmentId id;
  std::vector<Ring> rings;

  double area() const;
  bool contains(Point p) const;
  double distance_to_boundary(Point p) const;
  /// A point strictly inside the region.
  Point interior_point() const;
};

/// Straight open codim-1 piece between two endpoints.
struct InterfaceSegment {
  SegmentId id;
  Point a;
  Point b;
  int source_polyline = -1;

  double length() const { return distance(a, b); }
};

struct JunctionPoint {
  SegmentId id;
  Point p;
};

/// E0 holds (bulk index, interface index); E1 holds (interface index, junction index).
struct AdjacencyGraph {
  std::set<std::pair<int, int>> e0;
  std::set<std::pair<int, int>> e1;
};

/// Declarative input: a rectangle and interface polylines.
struct GeometrySpec {
  Rectangle box;
  std::vector<std::vector<Point>> polylines;
};

GeometrySpec parse_geometry_spec(std::string_view text);
GeometrySpec load_geometry_spec(const std::filesystem::path& path);

/// Mixed-dimensional partition of a rectangle. Immutable after build_domain;
/// fields are public so that validation can be exercised on hand-edited copies.
struct MixedDomain {
  Rectangle box;
  std::vector<BulkSegment> bulk;
  std::vector<InterfaceSegment> interfaces;
  std::vector<JunctionPoint> junctions;
  AdjacencyGraph adjacency;

  double tolerance() const;
  /// Bulk segment containing p, or -1 when p lies on an interface or outside.
  int locate_bulk(Point p) const;
  std::vector<int> bulk_adjacent_to(int interface_index) const;
};

/// Builds the partition without enforcing the domain rules. Throws GeometryError
/// only for input it cannot represent: points outside the box, zero-length
/// pieces, and overlapping interfaces.
MixedDomain construct_domain(const GeometrySpec& spec);

/// construct_domain followed by validate_domain; any violation is an error.
MixedDomain build_domain(const GeometrySpec& spec);

enum class ViolationKind {
  partition,
  adjacency,
  inclusion,
  orphan_interface,
  dangling_interface,
  junction,
  overlap,
  degenerate,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::vector<SegmentId> segments;
  std::string message;
};

std::vector<Violation> validate_domain(const MixedDomain& domain);

}  // namespace mdlod::geom
