#include "mdlod/geometry.hpp"

#include "mdlod/error.hpp"
#include "mdlod/keyvalue.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace mdlod::geom {

namespace {

double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }

double signed_area(const Ring& ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % ring.size()];
    s += cross(p, q);
  }
  return 0.5 * s;
}

bool ring_contains(const Ring& ring, Point p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double ring_distance(const Ring& ring, Point p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ring.size(); ++i)
    d = std::min(d, distance_to_segment(p, ring[i], ring[(i + 1) % ring.size()]));
  return d;
}

// Parameter of p projected on [a, b].
double param_on(Point p, Point a, Point b) {
  const Point d = b - a;
  return dot(p - a, d) / dot(d, d);
}

bool collinear_overlap(Point a, Point b, Point c, Point d, double tol) {
  const Point u = b - a;
  const double len = std::sqrt(dot(u, u));
  if (std::abs(cross(u, c - a)) / len > tol || std::abs(cross(u, d - a)) / len > tol) return false;
  double t0 = param_on(c, a, b);
  double t1 = param_on(d, a, b);
  if (t0 > t1) std::swap(t0, t1);
  const double lo = std::max(0.0, t0);
  const double hi = std::min(1.0, t1);
  return (hi - lo) * len > tol;
}

struct RawSegment {
  Point a;
  Point b;
  int polyline;
};

class VertexPool {
 public:
  explicit VertexPool(double tol) : tol_(tol) {}

  int find_or_add(Point p) {
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (distance(points_[i], p) <= tol_) return static_cast<int>(i);
    points_.push_back(p);
    return static_cast<int>(points_.size()) - 1;
  }

  const std::vector<Point>& points() const { return points_; }

 private:
  double tol_;
  std::vector<Point> points_;
};

std::vector<RawSegment> clean_polylines(const GeometrySpec& spec, double tol) {
  std::vector<RawSegment> raw;
  for (std::size_t k = 0; k < spec.polylines.size(); ++k) {
    const auto& line = spec.polylines[k];
    if (line.size() < 2) throw GeometryError(fmt::format("interface {} has fewer than two points", k));
    for (const Point& p : line) {
      if (!spec.box.contains(p, tol))
        throw GeometryError(fmt::format("interface {} has point ({}, {}) outside the domain", k, p.x, p.y));
    }
    std::vector<Point> pts;
    for (const Point& p : line) {
      if (!pts.empty() && distance(pts.back(), p) <= tol)
        throw GeometryError(fmt::format("interface {} has a zero-length piece", k));
      // drop vertices where the direction does not change
      if (pts.size() >= 2) {
        const Point u = pts.back() - pts[pts.size() - 2];
        const Point v = p - pts.back();
        if (std::abs(cross(u, v)) <= tol * std::sqrt(dot(u, u)) && dot(u, v) > 0.0) pts.pop_back();
      }
      pts.push_back(p);
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const Point a = pts[i];
      const Point b = pts[i + 1];
      const bool vertical_side =
          (std::abs(a.x - spec.box.x0) <= tol && std::abs(b.x - spec.box.x0) <= tol) ||
          (std::abs(a.x - spec.box.x1) <= tol && std::abs(b.x - spec.box.x1) <= tol);
      const bool horizontal_side =
          (std::abs(a.y - spec.box.y0) <= tol && std::abs(b.y - spec.box.y0) <= tol) ||
          (std::abs(a.y - spec.box.y1) <= tol && std::abs(b.y - spec.box.y1) <= tol);
      if (vertical_side || horizontal_side)
        throw GeometryError(fmt::format("interface {} runs along the domain boundary", k));
      raw.push_back({a, b, static_cast<int>(k)});
    }
  }
  return raw;
}

// Points where two raw segments meet (crossing or touching).
std::vector<Point> intersections(const RawSegment& s, const RawSegment& t, double tol) {
  std::vector<Point> out;
  const Point r = s.b - s.a;
  const Point q = t.b - t.a;
  const double denom = cross(r, q);
  const double scale = std::sqrt(dot(r, r) * dot(q, q));
  if (std::abs(denom) > 1e-12 * scale) {
    const double u = cross(t.a - s.a, q) / denom;
    const double v = cross(t.a - s.a, r) / denom;
    const Point p = s.a + u * r;
    if (distance_to_segment(p, s.a, s.b) <= tol && distance_to_segment(p, t.a, t.b) <= tol) out.push_back(p);
    (void)v;
    return out;
  }
  // parallel: only endpoint contacts remain (overlaps were rejected earlier)
  for (Point p : {t.a, t.b})
    if (distance_to_segment(p, s.a, s.b) <= tol) out.push_back(p);
  for (Point p : {s.a, s.b})
    if (distance_to_segment(p, t.a, t.b) <= tol) out.push_back(p);
  return out;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double distance_to_segment(Point p, Point a, Point b) {
  const Point d = b - a;
  const double len2 = dot(d, d);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + t * d);
}

std::string to_string(SegmentId id) {
  static constexpr const char* names[] = {"bulk", "interface", "junction"};
  return fmt::format("{}#{}", names[std::clamp(id.codim, 0, 2)], id.index);
}

bool Rectangle::contains(Point p, double tol) const {
  return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
}

bool Rectangle::on_boundary(Point p, double tol) const {
  if (!contains(p, tol)) return false;
  return std::abs(p.x - x0) <= tol || std::abs(p.x - x1) <= tol || std::abs(p.y - y0) <= tol ||
         std::abs(p.y - y1) <= tol;
}

double BulkSegment::area() const {
  double a = 0.0;
  for (const Ring& r : rings) a += signed_area(r);
  return a;
}

bool BulkSegment::contains(Point p) const {
  if (rings.empty() || !ring_contains(rings[0], p)) return false;
  for (std::size_t i = 1; i < rings.size(); ++i)
    if (ring_contains(rings[i], p)) return false;
  return true;
}

double BulkSegment::distance_to_boundary(Point p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Ring& r : rings) d = std::min(d, ring_distance(r, p));
  return d;
}

Point BulkSegment::interior_point() const {
  const Ring& outer = rings.at(0);
  double span = 0.0;
  for (const Point& p : outer) span = std::max({span, std::abs(p.x - outer[0].x), std::abs(p.y - outer[0].y)});
  for (double delta : {1e-6, 1e-4, 1e-2}) {
    for (std::size_t i = 0; i < outer.size(); ++i) {
      const Point a = outer[i];
      const Point b = outer[(i + 1) % outer.size()];
      const double len = distance(a, b);
      if (len == 0.0) continue;
      const Point normal{-(b.y - a.y) / len, (b.x - a.x) / len};
      const Point candidate = 0.5 * (a + b) + (delta * std::min(span, len)) * normal;
      if (contains(candidate) && distance_to_boundary(candidate) > 0.0) return candidate;
    }
  }
  throw GeometryError(fmt::format("no interior point found for {}", to_string(id)));
}

double MixedDomain::tolerance() const { return 1e-10 * std::max(box.width(), box.height()); }

int MixedDomain::locate_bulk(Point p) const {
  const double tol = tolerance();
  for (const InterfaceSegment& s : interfaces)
    if (distance_to_segment(p, s.a, s.b) <= tol) return -1;
  for (std::size_t i = 0; i < bulk.size(); ++i)
    if (bulk[i].contains(p)) return static_cast<int>(i);
  return -1;
}

std::vector<int> MixedDomain::bulk_adjacent_to(int interface_index) const {
  std::vector<int> out;
  for (const auto& [i, j] : adjacency.e0)
    if (j == interface_index) out.push_back(i);
  return out;
}

MixedDomain construct_domain(const GeometrySpec& spec) {
  const Rectangle& box = spec.box;
  if (!(box.x1 > box.x0) || !(box.y1 > box.y0)) throw GeometryError("domain rectangle is empty");
  const double scale = std::max(box.width(), box.height());
  const double tol = 1e-10 * scale;

  const std::vector<RawSegment> raw = clean_polylines(spec, tol);
  for (std::size_t i = 0; i < raw.size(); ++i)
    for (std::size_t j = i + 1; j < raw.size(); ++j)
      if (collinear_overlap(raw[i].a, raw[i].b, raw[j].a, raw[j].b, tol))
        throw GeometryError(fmt::format("interfaces {} and {} overlap", raw[i].polyline, raw[j].polyline));

  VertexPool pool(tol);
  const std::array<Point, 4> corners{Point{box.x0, box.y0}, Point{box.x1, box.y0}, Point{box.x1, box.y1},
                                     Point{box.x0, box.y1}};
  for (const Point& c : corners) pool.find_or_add(c);

  // split points per raw segment
  std::vector<std::vector<int>> cuts(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    cuts[i].push_back(pool.find_or_add(raw[i].a));
    cuts[i].push_back(pool.find_or_add(raw[i].b));
  }
  for (std::size_t i = 0; i < raw.size(); ++i)
    for (std::size_t j = i + 1; j < raw.size(); ++j)
      for (const Point& p : intersections(raw[i], raw[j], tol)) {
        const int v = pool.find_or_add(p);
        cuts[i].push_back(v);
        cuts[j].push_back(v);
      }

  MixedDomain domain;
  domain.box = box;

  struct Edge {
    int u;
    int v;
    int interface;  // -1 for boundary edges
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& c = cuts[i];
    const auto& pts = pool.points();
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    std::sort(c.begin(), c.end(), [&](int x, int y) {
      return param_on(pts[x], raw[i].a, raw[i].b) < param_on(pts[y], raw[i].a, raw[i].b);
    });
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      InterfaceSegment seg;
      seg.id = {1, static_cast<int>(domain.interfaces.size())};
      seg.a = pts[c[k]];
      seg.b = pts[c[k + 1]];
      seg.source_polyline = raw[i].polyline;
      edges.push_back({c[k], c[k + 1], seg.id.index});
      domain.interfaces.push_back(seg);
    }
  }

  // boundary edges, split wherever a vertex sits on a side
  {
    const auto& pts = pool.points();
    for (int side = 0; side < 4; ++side) {
      const Point a = corners[side];
      const Point b = corners[(side + 1) % 4];
      std::vector<int> on_side;
      for (std::size_t v = 0; v < pts.size(); ++v)
        if (distance_to_segment(pts[v], a, b) <= tol) on_side.push_back(static_cast<int>(v));
      std::sort(on_side.begin(), on_side.end(),
                [&](int x, int y) { return param_on(pts[x], a, b) < param_on(pts[y], a, b); });
      for (std::size_t k = 0; k + 1 < on_side.size(); ++k) edges.push_back({on_side[k], on_side[k + 1], -1});
    }
  }

  // half-edge faces: half-edge 2e runs u->v, 2e+1 runs v->u; face lies on the left
  const auto& pts = pool.points();
  const int n_half = 2 * static_cast<int>(edges.size());
  auto tail = [&](int h) { return (h % 2 == 0) ? edges[h / 2].u : edges[h / 2].v; };
  auto head = [&](int h) { return (h % 2 == 0) ? edges[h / 2].v : edges[h / 2].u; };
  auto angle = [&](int h) {
    const Point d = pts[head(h)] - pts[tail(h)];
    return std::atan2(d.y, d.x);
  };
  std::vector<std::vector<int>> outgoing(pts.size());
  for (int h = 0; h < n_half; ++h) outgoing[tail(h)].push_back(h);
  for (auto& out : outgoing) std::sort(out.begin(), out.end(), [&](int a, int b) { return angle(a) < angle(b); });
  std::vector<int> next(n_half);
  for (int h = 0; h < n_half; ++h) {
    const int twin = h ^ 1;
    const auto& out = outgoing[head(h)];
    const auto pos = std::find(out.begin(), out.end(), twin) - out.begin();
    const auto deg = static_cast<std::ptrdiff_t>(out.size());
    next[h] = out[(pos - 1 + deg) % deg];
  }
  std::vector<int> cycle_of(n_half, -1);
  std::vector<std::vector<int>> cycles;
  for (int h = 0; h < n_half; ++h) {
    if (cycle_of[h] >= 0) continue;
    std::vector<int> cyc;
    for (int g = h; cycle_of[g] < 0; g = next[g]) {
      cycle_of[g] = static_cast<int>(cycles.size());
      cyc.push_back(g);
    }
    cycles.push_back(std::move(cyc));
  }
  auto ring_of = [&](const std::vector<int>& cyc) {
    Ring r;
    for (int h : cyc) r.push_back(pts[tail(h)]);
    return r;
  };
  std::vector<double> areas;
  for (const auto& cyc : cycles) areas.push_back(signed_area(ring_of(cyc)));
  const int unbounded = static_cast<int>(std::min_element(areas.begin(), areas.end()) - areas.begin());

  const double area_tol = tol * scale;
  std::vector<int> face_cycles;
  for (std::size_t c = 0; c < cycles.size(); ++c)
    if (static_cast<int>(c) != unbounded && areas[c] > area_tol) face_cycles.push_back(static_cast<int>(c));

  // deterministic order: lowest y, then lowest x among the outer ring vertices
  auto anchor = [&](int c) {
    Point best = pts[tail(cycles[c][0])];
    for (int h : cycles[c]) {
      const Point p = pts[tail(h)];
      if (p.y < best.y - tol || (std::abs(p.y - best.y) <= tol && p.x < best.x)) best = p;
    }
    return best;
  };
  std::sort(face_cycles.begin(), face_cycles.end(), [&](int a, int b) {
    const Point pa = anchor(a);
    const Point pb = anchor(b);
    if (std::abs(pa.y - pb.y) > tol) return pa.y < pb.y;
    if (std::abs(pa.x - pb.x) > tol) return pa.x < pb.x;
    return areas[a] < areas[b];
  });
  std::vector<int> face_of_cycle(cycles.size(), -1);
  for (std::size_t f = 0; f < face_cycles.size(); ++f) {
    BulkSegment seg;
    seg.id = {0, static_cast<int>(f)};
    seg.rings.push_back(ring_of(cycles[face_cycles[f]]));
    domain.bulk.push_back(std::move(seg));
    face_of_cycle[face_cycles[f]] = static_cast<int>(f);
  }
  // remaining cycles are holes: attach each to the smallest face enclosing its left side
  for (std::size_t c = 0; c < cycles.size(); ++c) {
    if (static_cast<int>(c) == unbounded || face_of_cycle[c] >= 0) continue;
    const int h = cycles[c][0];
    const Point a = pts[tail(h)];
    const Point b = pts[head(h)];
    const double len = distance(a, b);
    const Point probe = 0.5 * (a + b) + (1e-6 * len) * Point{-(b.y - a.y) / len, (b.x - a.x) / len};
    int owner = -1;
    for (std::size_t f = 0; f < domain.bulk.size(); ++f) {
      if (!ring_contains(domain.bulk[f].rings[0], probe)) continue;
      if (owner < 0 || signed_area(domain.bulk[f].rings[0]) < signed_area(domain.bulk[owner].rings[0]))
        owner = static_cast<int>(f);
    }
    if (owner < 0) continue;
    face_of_cycle[c] = owner;
    if (areas[c] < -area_tol) domain.bulk[owner].rings.push_back(ring_of(cycles[c]));
  }

  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].interface < 0) continue;
    for (int h : {2 * static_cast<int>(e), 2 * static_cast<int>(e) + 1}) {
      const int f = face_of_cycle[cycle_of[h]];
      if (f >= 0) domain.adjacency.e0.insert({f, edges[e].interface});
    }
  }

  // junctions: interior vertices where two or more interface pieces meet
  std::vector<int> degree(pts.size(), 0);
  for (const Edge& e : edges)
    if (e.interface >= 0) {
      ++degree[e.u];
      ++degree[e.v];
    }
  std::vector<int> junction_vertices;
  for (std::size_t v = 0; v < pts.size(); ++v)
    if (degree[v] >= 2 && !box.on_boundary(pts[v], tol)) junction_vertices.push_back(static_cast<int>(v));
  std::sort(junction_vertices.begin(), junction_vertices.end(), [&](int a, int b) {
    if (std::abs(pts[a].y - pts[b].y) > tol) return pts[a].y < pts[b].y;
    return pts[a].x < pts[b].x;
  });
  std::map<int, int> junction_index;
  for (int v : junction_vertices) {
    junction_index[v] = static_cast<int>(domain.junctions.size());
    domain.junctions.push_back({{2, static_cast<int>(domain.junctions.size())}, pts[v]});
  }
  for (const Edge& e : edges) {
    if (e.interface < 0) continue;
    for (int v : {e.u, e.v})
      if (auto it = junction_index.find(v); it != junction_index.end())
        domain.adjacency.e1.insert({e.interface, it->second});
  }
  return domain;
}

MixedDomain build_domain(const GeometrySpec& spec) {
  MixedDomain domain = construct_domain(spec);
  const auto violations = validate_domain(domain);
  if (!violations.empty()) {
    std::string msg = "invalid geometry:";
    for (const auto& v : violations) msg += fmt::format(" [{}] {};", to_string(v.kind), v.message);
    throw GeometryError(msg);
  }
  return domain;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::partition: return "partition";
    case ViolationKind::adjacency: return "adjacency";
    case ViolationKind::inclusion: return "inclusion";
    case ViolationKind::orphan_interface: return "orphan interface";
    case ViolationKind::dangling_interface: return "dangling interface";
    case ViolationKind::junction: return "junction";
    case ViolationKind::overlap: return "overlap";
    case ViolationKind::degenerate: return "degenerate";
  }
  return "unknown";
}

std::vector<Violation> validate_domain(const MixedDomain& d) {
  std::vector<Violation> out;
  const double tol = d.tolerance();
  const double touch = 10.0 * tol;

  double total = 0.0;
  for (const BulkSegment& b : d.bulk) total += b.area();
  if (std::abs(total - d.box.area()) > 1e-12 * d.box.area())
    out.push_back({ViolationKind::partition, {},
                   fmt::format("bulk segments cover area {} of {}", total, d.box.area())});
  for (std::size_t i = 0; i < d.bulk.size(); ++i) {
    Point probe;
    try {
      probe = d.bulk[i].interior_point();
    } catch (const GeometryError&) {
      out.push_back({ViolationKind::partition, {d.bulk[i].id}, fmt::format("{} has no interior", to_string(d.bulk[i].id))});
      continue;
    }
    for (std::size_t j = 0; j < d.bulk.size(); ++j)
      if (j != i && d.bulk[j].contains(probe))
        out.push_back({ViolationKind::partition, {d.bulk[i].id, d.bulk[j].id},
                       fmt::format("{} overlaps {}", to_string(d.bulk[i].id), to_string(d.bulk[j].id))});
  }

  for (const InterfaceSegment& s : d.interfaces)
    if (s.length() <= tol)
      out.push_back({ViolationKind::degenerate, {s.id}, fmt::format("{} has zero length", to_string(s.id))});

  for (std::size_t i = 0; i < d.interfaces.size(); ++i)
    for (std::size_t j = i + 1; j < d.interfaces.size(); ++j) {
      const auto& s = d.interfaces[i];
      const auto& t = d.interfaces[j];
      if (s.length() > tol && collinear_overlap(s.a, s.b, t.a, t.b, tol))
        out.push_back({ViolationKind::overlap, {s.id, t.id},
                       fmt::format("{} overlaps {}", to_string(s.id), to_string(t.id))});
    }

  auto sample = [](const InterfaceSegment& s, int k, int n) {
    return s.a + (static_cast<double>(k) / n) * (s.b - s.a);
  };
  for (const auto& [i, j] : d.adjacency.e0) {
    if (i < 0 || i >= static_cast<int>(d.bulk.size()) || j < 0 || j >= static_cast<int>(d.interfaces.size())) {
      out.push_back({ViolationKind::adjacency, {{0, i}, {1, j}}, "adjacency refers to a missing segment"});
      continue;
    }
    const auto& s = d.interfaces[j];
    bool contained = true;
    for (int k = 0; k <= 8 && contained; ++k)
      contained = d.bulk[i].distance_to_boundary(sample(s, k, 8)) <= touch;
    if (!contained)
      out.push_back({ViolationKind::adjacency, {d.bulk[i].id, s.id},
                     fmt::format("{} is not contained in the boundary of {}", to_string(s.id),
                                 to_string(d.bulk[i].id))});
  }
  for (std::size_t i = 0; i < d.bulk.size(); ++i)
    for (std::size_t j = 0; j < d.interfaces.size(); ++j) {
      if (d.adjacency.e0.count({static_cast<int>(i), static_cast<int>(j)})) continue;
      const auto& s = d.interfaces[j];
      for (int k = 1; k < 8; ++k) {
        const Point p = sample(s, k, 8);
        if (d.bulk[i].contains(p) || d.bulk[i].distance_to_boundary(p) <= touch) {
          out.push_back({ViolationKind::inclusion, {d.bulk[i].id, s.id},
                         fmt::format("{} touches the closure of {} without being adjacent", to_string(s.id),
                                     to_string(d.bulk[i].id))});
          break;
        }
      }
    }

  for (const InterfaceSegment& s : d.interfaces) {
    if (d.bulk_adjacent_to(s.id.index).empty())
      out.push_back({ViolationKind::orphan_interface, {s.id},
                     fmt::format("{} has no adjacent bulk segment", to_string(s.id))});
    std::vector<SegmentId> loose;
    for (Point end : {s.a, s.b}) {
      if (d.box.on_boundary(end, tol)) continue;
      const bool at_junction = std::any_of(d.junctions.begin(), d.junctions.end(),
                                           [&](const JunctionPoint& jp) { return distance(jp.p, end) <= touch; });
      if (!at_junction) loose.push_back(s.id);
    }
    if (!loose.empty())
      out.push_back({ViolationKind::dangling_interface, {s.id},
                     fmt::format("{} ends inside the bulk without meeting another interface", to_string(s.id))});
  }

  for (const auto& [j, k] : d.adjacency.e1) {
    if (j < 0 || j >= static_cast<int>(d.interfaces.size()) || k < 0 || k >= static_cast<int>(d.junctions.size())) {
      out.push_back({ViolationKind::junction, {{1, j}, {2, k}}, "junction adjacency refers to a missing segment"});
      continue;
    }
    const auto& s = d.interfaces[j];
    const Point p = d.junctions[k].p;
    if (distance(p, s.a) > touch && distance(p, s.b) > touch)
      out.push_back({ViolationKind::junction, {s.id, d.junctions[k].id},
                     fmt::format("{} is not an endpoint of {}", to_string(d.junctions[k].id), to_string(s.id))});
  }
  for (const JunctionPoint& jp : d.junctions) {
    int meeting = 0;
    for (const auto& [j, k] : d.adjacency.e1) meeting += (k == jp.id.index);
    if (meeting < 2)
      out.push_back({ViolationKind::junction, {jp.id},
                     fmt::format("{} joins fewer than two interfaces", to_string(jp.id))});
  }
  return out;
}

GeometrySpec parse_geometry_spec(std::string_view text) {
  const auto doc = KeyValueDocument::parse(text);
  doc.require_known_keys({"domain", "interfaces"});
  GeometrySpec spec;
  try {
    const auto& box = doc.at("domain");
    if (!box.is_array() || box.size() != 4) throw ConfigError("'domain' must be [x0, y0, x1, y1]");
    spec.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
    if (doc.contains("interfaces")) {
      const auto& lines = doc.at("interfaces");
      if (!lines.is_array()) throw ConfigError("'interfaces' must be a list of polylines");
      for (const auto& line : lines) {
        if (!line.is_array()) throw ConfigError("each interface must be a list of [x, y] points");
        std::vector<Point> pts;
        for (const auto& p : line) {
          if (!p.is_array() || p.size() != 2) throw ConfigError("interface points must be [x, y]");
          pts.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        spec.polylines.push_back(std::move(pts));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed geometry value: {}", e.what()));
  }
  return spec;
}

GeometrySpec load_geometry_spec(const std::filesystem::path& path) {
  const auto doc = KeyValueDocument::load(path);
  std::string text;
  for (const auto& [k, v] : doc.entries()) text += k + " = " + v.dump() + "\n";
  try {
    return parse_geometry_spec(text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace mdlod::geom
