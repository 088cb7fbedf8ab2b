#include "mdlod/mesh.hpp"

#include "mdlod/error.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace mdlod::mesh {

namespace {

int grid_count(double length, int n_per_unit) {
  const double exact = length * n_per_unit;
  const int n = static_cast<int>(std::lround(exact));
  if (n < 1 || std::abs(exact - n) > 1e-9 * std::max(1.0, exact))
    throw MeshError(fmt::format("side length {} is not a multiple of 1/{}", length, n_per_unit));
  return n;
}

int grid_coordinate(double v, double origin, double size, int n, double tol) {
  const double exact = (v - origin) / size;
  const int k = static_cast<int>(std::lround(exact));
  if (k < 0 || k > n || std::abs(exact - k) * size > tol) return -1;
  return k;
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

geom::Point MeshPair::node_point(int n) const {
  const int ix = n % (nx + 1);
  const int iy = n / (nx + 1);
  return {box.x0 + ix * size, box.y0 + iy * size};
}

geom::Point MeshPair::element_center(int e) const {
  return {box.x0 + (e % nx + 0.5) * size, box.y0 + (e / nx + 0.5) * size};
}

std::array<int, 4> MeshPair::element_nodes(int e) const {
  const int ix = e % nx;
  const int iy = e / nx;
  return {node_index(ix, iy), node_index(ix + 1, iy), node_index(ix + 1, iy + 1), node_index(ix, iy + 1)};
}

bool MeshPair::on_boundary(int node) const {
  const int ix = node % (nx + 1);
  const int iy = node / (nx + 1);
  return ix == 0 || iy == 0 || ix == nx || iy == ny;
}

MeshPair build_mesh_pair(const geom::MixedDomain& domain, int n_per_unit) {
  if (n_per_unit < 1) throw MeshError("mesh resolution must be positive");
  MeshPair m;
  m.box = domain.box;
  m.nx = grid_count(domain.box.width(), n_per_unit);
  m.ny = grid_count(domain.box.height(), n_per_unit);
  m.size = 1.0 / n_per_unit;
  const double tol = 1e-9 * m.size;

  m.bulk_segment.resize(m.bulk_count());
  for (int e = 0; e < m.bulk_count(); ++e) {
    const int s = domain.locate_bulk(m.element_center(e));
    if (s < 0) throw MeshError(fmt::format("element {} could not be assigned to a bulk segment", e));
    m.bulk_segment[e] = s;
  }

  std::map<std::pair<int, int>, int> edge_index;
  for (const auto& seg : domain.interfaces) {
    const int ax = grid_coordinate(seg.a.x, m.box.x0, m.size, m.nx, tol);
    const int ay = grid_coordinate(seg.a.y, m.box.y0, m.size, m.ny, tol);
    const int bx = grid_coordinate(seg.b.x, m.box.x0, m.size, m.nx, tol);
    const int by = grid_coordinate(seg.b.y, m.box.y0, m.size, m.ny, tol);
    if (ax < 0 || ay < 0 || bx < 0 || by < 0 || (ax != bx && ay != by))
      throw MeshError(fmt::format("{} is not resolved by a grid with h = {}", geom::to_string(seg.id), m.size));
    const int steps = std::abs(bx - ax) + std::abs(by - ay);
    const int dx = (bx > ax) - (bx < ax);
    const int dy = (by > ay) - (by < ay);
    for (int k = 0; k < steps; ++k) {
      int p = m.node_index(ax + k * dx, ay + k * dy);
      int q = m.node_index(ax + (k + 1) * dx, ay + (k + 1) * dy);
      if (p > q) std::swap(p, q);
      if (!edge_index.emplace(std::pair{p, q}, m.interface_count()).second)
        throw MeshError(fmt::format("grid edge {}-{} carries two interface elements", p, q));
      m.interface_elements.push_back({p, q, seg.id.index});
    }
  }

  m.face_map.assign(m.bulk_count(), {-1, -1, -1, -1});
  m.interface_owners.assign(m.interface_count(), {});
  for (int t = 0; t < m.interface_count(); ++t) {
    const auto& el = m.interface_elements[t];
    const int ix = el.n0 % (m.nx + 1);
    const int iy = el.n0 / (m.nx + 1);
    const bool horizontal = (el.n1 == el.n0 + 1);
    // element on the lower/left side first
    if (horizontal) {
      if (iy > 0) {
        m.face_map[(iy - 1) * m.nx + ix][2] = t;
        m.interface_owners[t].push_back((iy - 1) * m.nx + ix);
      }
      if (iy < m.ny) {
        m.face_map[iy * m.nx + ix][0] = t;
        m.interface_owners[t].push_back(iy * m.nx + ix);
      }
    } else {
      if (ix > 0) {
        m.face_map[iy * m.nx + ix - 1][1] = t;
        m.interface_owners[t].push_back(iy * m.nx + ix - 1);
      }
      if (ix < m.nx) {
        m.face_map[iy * m.nx + ix][3] = t;
        m.interface_owners[t].push_back(iy * m.nx + ix);
      }
    }
  }

  // segments may only change across interface elements
  for (int e = 0; e < m.bulk_count(); ++e) {
    const int ix = e % m.nx;
    const int iy = e / m.nx;
    if (ix + 1 < m.nx && m.bulk_segment[e] != m.bulk_segment[e + 1] && m.face_map[e][1] < 0)
      throw MeshError(fmt::format("elements {} and {} differ in segment without an interface", e, e + 1));
    if (iy + 1 < m.ny && m.bulk_segment[e] != m.bulk_segment[e + m.nx] && m.face_map[e][2] < 0)
      throw MeshError(fmt::format("elements {} and {} differ in segment without an interface", e, e + m.nx));
  }
  return m;
}

CoarseMesh make_coarse_mesh(const MeshPair& fine, std::vector<std::vector<int>> bulk_members,
                            std::vector<std::vector<int>> interface_members, double H) {
  CoarseMesh c;
  c.H = H;
  c.bulk_members = std::move(bulk_members);
  c.interface_members = std::move(interface_members);
  const double h = fine.size;

  c.bulk_of_fine.assign(fine.bulk_count(), -1);
  for (int k = 0; k < c.bulk_count(); ++k) {
    auto& members = c.bulk_members[k];
    if (members.empty()) throw MeshError(fmt::format("coarse element {} is empty", k));
    std::sort(members.begin(), members.end());
    for (int e : members) {
      if (c.bulk_of_fine.at(e) >= 0) throw MeshError(fmt::format("fine element {} assigned twice", e));
      c.bulk_of_fine[e] = k;
      if (fine.bulk_segment[e] != fine.bulk_segment[members[0]])
        throw MeshError(fmt::format("coarse element {} spans several bulk segments", k));
    }
    c.bulk_measure.push_back(static_cast<double>(members.size()) * h * h);
    c.bulk_segment.push_back(fine.bulk_segment[members[0]]);
  }
  if (std::find(c.bulk_of_fine.begin(), c.bulk_of_fine.end(), -1) != c.bulk_of_fine.end())
    throw MeshError("coarse bulk elements do not cover the fine mesh");

  c.interface_of_fine.assign(fine.interface_count(), -1);
  c.interface_owners.resize(c.interface_count());
  c.bulk_faces.assign(c.bulk_count(), {});
  for (int k = 0; k < c.interface_count(); ++k) {
    auto& members = c.interface_members[k];
    if (members.empty()) throw MeshError(fmt::format("coarse interface element {} is empty", k));
    std::sort(members.begin(), members.end());
    std::vector<int> owners;
    for (int t : members) {
      if (c.interface_of_fine.at(t) >= 0) throw MeshError(fmt::format("fine interface element {} assigned twice", t));
      c.interface_of_fine[t] = k;
      for (int e : fine.interface_owners[t]) owners.push_back(c.bulk_of_fine[e]);
    }
    c.interface_measure.push_back(static_cast<double>(members.size()) * h);
    c.interface_segment.push_back(fine.interface_elements[members[0]].segment);
    c.interface_owners[k] = sorted_unique(owners);
    for (int o : c.interface_owners[k]) c.bulk_faces[o].push_back(k);
  }
  if (std::find(c.interface_of_fine.begin(), c.interface_of_fine.end(), -1) != c.interface_of_fine.end())
    throw MeshError("coarse interface elements do not cover the fine interface mesh");

  std::vector<std::vector<int>> bulk_at_node(fine.node_count());
  for (int e = 0; e < fine.bulk_count(); ++e)
    for (int n : fine.element_nodes(e)) bulk_at_node[n].push_back(c.bulk_of_fine[e]);
  std::vector<std::vector<int>> iface_at_node(fine.node_count());
  for (int t = 0; t < fine.interface_count(); ++t)
    for (int n : {fine.interface_elements[t].n0, fine.interface_elements[t].n1})
      iface_at_node[n].push_back(c.interface_of_fine[t]);

  auto neighbors = [](std::vector<std::vector<int>>& at_node, int count) {
    std::vector<std::set<int>> adj(count);
    for (auto& list : at_node) {
      list = sorted_unique(std::move(list));
      for (int a : list)
        for (int b : list)
          if (a != b) adj[a].insert(b);
    }
    std::vector<std::vector<int>> out(count);
    for (int k = 0; k < count; ++k) out[k].assign(adj[k].begin(), adj[k].end());
    return out;
  };
  c.bulk_neighbors = neighbors(bulk_at_node, c.bulk_count());
  c.interface_neighbors = neighbors(iface_at_node, c.interface_count());
  return c;
}

MeshHierarchy build_hierarchy(const geom::MixedDomain& domain, int n_per_unit, int r) {
  if (r < 2) throw MeshError(fmt::format("refinement factor {} is below 2", r));
  MeshHierarchy mh;
  mh.refinement = r;
  mh.coarse_grid = build_mesh_pair(domain, n_per_unit);
  mh.fine = build_mesh_pair(domain, n_per_unit * r);
  const MeshPair& cg = *mh.coarse_grid;
  const MeshPair& fg = mh.fine;

  std::vector<std::vector<int>> bulk(cg.bulk_count());
  for (int e = 0; e < fg.bulk_count(); ++e) {
    const int ix = (e % fg.nx) / r;
    const int iy = (e / fg.nx) / r;
    bulk[iy * cg.nx + ix].push_back(e);
  }

  std::map<std::pair<int, int>, int> coarse_edge;
  for (int t = 0; t < cg.interface_count(); ++t)
    coarse_edge[{cg.interface_elements[t].n0, cg.interface_elements[t].n1}] = t;
  std::vector<std::vector<int>> iface(cg.interface_count());
  for (int t = 0; t < fg.interface_count(); ++t) {
    const auto& el = fg.interface_elements[t];
    const int ix = el.n0 % (fg.nx + 1);
    const int iy = el.n0 / (fg.nx + 1);
    const bool horizontal = (el.n1 == el.n0 + 1);
    const int cx = ix / r;
    const int cy = iy / r;
    const int p = cg.node_index(cx, cy);
    const int q = horizontal ? cg.node_index(cx + 1, cy) : cg.node_index(cx, cy + 1);
    const auto it = coarse_edge.find({p, q});
    if (it == coarse_edge.end()) throw MeshError(fmt::format("fine interface element {} has no coarse parent", t));
    iface[it->second].push_back(t);
  }
  mh.coarse = make_coarse_mesh(fg, std::move(bulk), std::move(iface), cg.size);
  return mh;
}

Patch patch_of_set(const CoarseMesh& coarse, const std::vector<int>& seeds, int level) {
  Patch p;
  p.level = level;
  std::vector<char> in(coarse.bulk_count(), 0);
  std::vector<int> frontier;
  for (int s : seeds) {
    if (s < 0 || s >= coarse.bulk_count()) throw MeshError(fmt::format("coarse element {} does not exist", s));
    if (!in[s]) {
      in[s] = 1;
      frontier.push_back(s);
    }
  }
  for (int step = 0; step < level; ++step) {
    std::vector<int> next;
    for (int k : frontier)
      for (int n : coarse.bulk_neighbors[k])
        if (!in[n]) {
          in[n] = 1;
          next.push_back(n);
        }
    frontier = std::move(next);
  }
  std::vector<char> iface(coarse.interface_count(), 0);
  for (int k = 0; k < coarse.bulk_count(); ++k) {
    if (!in[k]) continue;
    p.bulk.push_back(k);
    for (int t : coarse.bulk_faces[k]) iface[t] = 1;
  }
  for (int t = 0; t < coarse.interface_count(); ++t)
    if (iface[t]) p.interface.push_back(t);
  p.multipliers = p.bulk;
  for (int t : p.interface) p.multipliers.push_back(coarse.bulk_count() + t);
  return p;
}

Patch patch(const CoarseMesh& coarse, int seed, int level) {
  if (level < 0) throw MeshError("patch level must be nonnegative");
  return patch_of_set(coarse, {seed}, level);
}

}  // namespace mdlod::mesh
