#include "mdlod/error.hpp"
#include "mdlod/mesh.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace mdlod::mesh {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int a) {
    while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

// Face neighbors of a fine element in order bottom, right, top, left (-1 outside).
std::array<int, 4> face_neighbors(const MeshPair& m, int e) {
  const int ix = e % m.nx;
  const int iy = e / m.nx;
  return {iy > 0 ? e - m.nx : -1, ix + 1 < m.nx ? e + 1 : -1, iy + 1 < m.ny ? e + m.nx : -1, ix > 0 ? e - 1 : -1};
}

// Node pairs of the faces in the same order as face_neighbors.
std::array<std::pair<int, int>, 4> face_nodes(const MeshPair& m, int e) {
  const auto n = m.element_nodes(e);
  return {std::pair{n[0], n[1]}, std::pair{n[1], n[2]}, std::pair{n[3], n[2]}, std::pair{n[0], n[3]}};
}

void check_topology(const MeshPair& fine, const std::vector<int>& members, int label, const std::vector<int>& assignment) {
  // face connectivity
  std::set<int> seen{members[0]};
  std::vector<int> stack{members[0]};
  while (!stack.empty()) {
    const int e = stack.back();
    stack.pop_back();
    for (int n : face_neighbors(fine, e))
      if (n >= 0 && assignment[n] == label && seen.insert(n).second) stack.push_back(n);
  }
  if (seen.size() != members.size()) throw MeshError(fmt::format("agglomerate {} is not connected", label));
  // Euler characteristic of the closed union of squares
  std::set<int> vertices;
  std::set<std::pair<int, int>> edges;
  for (int e : members) {
    for (int v : fine.element_nodes(e)) vertices.insert(v);
    for (auto f : face_nodes(fine, e)) edges.insert(f);
  }
  const long chi = static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) + static_cast<long>(members.size());
  if (chi != 1) throw MeshError(fmt::format("agglomerate {} is not simply connected", label));
}

RegularityEntry measure_radii(const MeshPair& fine, const std::vector<int>& members, int label,
                              const std::vector<int>& assignment) {
  std::vector<std::pair<geom::Point, geom::Point>> boundary;
  std::set<int> corner_nodes;
  for (int e : members) {
    const auto nb = face_neighbors(fine, e);
    const auto fn = face_nodes(fine, e);
    for (int k = 0; k < 4; ++k) {
      if (nb[k] >= 0 && assignment[nb[k]] == label) continue;
      boundary.push_back({fine.node_point(fn[k].first), fine.node_point(fn[k].second)});
      corner_nodes.insert(fn[k].first);
      corner_nodes.insert(fn[k].second);
    }
  }
  const double h = fine.size;
  const int sub = 16;
  int ix0 = fine.nx;
  int iy0 = fine.ny;
  int ix1 = 0;
  int iy1 = 0;
  for (int e : members) {
    ix0 = std::min(ix0, e % fine.nx);
    iy0 = std::min(iy0, e / fine.nx);
    ix1 = std::max(ix1, e % fine.nx + 1);
    iy1 = std::max(iy1, e / fine.nx + 1);
  }
  RegularityEntry best;
  best.element = label;
  best.inscribed = -1.0;
  best.circumscribed = std::numeric_limits<double>::infinity();
  for (int jy = iy0 * sub; jy <= iy1 * sub; ++jy)
    for (int jx = ix0 * sub; jx <= ix1 * sub; ++jx) {
      const int ex = std::min(jx / sub, fine.nx - 1);
      const int ey = std::min(jy / sub, fine.ny - 1);
      if (assignment[ey * fine.nx + ex] != label) continue;
      const geom::Point c{fine.box.x0 + jx * h / sub, fine.box.y0 + jy * h / sub};
      double r = std::numeric_limits<double>::infinity();
      for (const auto& [a, b] : boundary) r = std::min(r, geom::distance_to_segment(c, a, b));
      if (r < best.inscribed - 1e-14 * h) continue;
      double rp = 0.0;
      for (int v : corner_nodes) rp = std::max(rp, geom::distance(c, fine.node_point(v)));
      if (r > best.inscribed + 1e-14 * h || rp < best.circumscribed) {
        best.inscribed = r;
        best.circumscribed = rp;
        best.center = c;
      }
    }
  return best;
}

}  // namespace

bool RegularityReport::all_satisfied() const {
  return std::all_of(entries.begin(), entries.end(), [](const RegularityEntry& e) { return e.satisfied; });
}

std::vector<int> RegularityReport::flagged() const {
  std::vector<int> out;
  for (const auto& e : entries)
    if (!e.satisfied) out.push_back(e.element);
  return out;
}

Agglomeration agglomerate(const MeshPair& fine, const std::vector<int>& assignment, double rho0, double rho1) {
  if (static_cast<int>(assignment.size()) != fine.bulk_count())
    throw MeshError("assignment does not cover every fine element");
  const int k = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<std::vector<int>> bulk(k);
  for (int e = 0; e < fine.bulk_count(); ++e) {
    if (assignment[e] < 0) throw MeshError(fmt::format("fine element {} has no label", e));
    bulk[assignment[e]].push_back(e);
  }
  for (int label = 0; label < k; ++label) {
    if (bulk[label].empty()) throw MeshError(fmt::format("label {} is unused", label));
    check_topology(fine, bulk[label], label, assignment);
  }

  // coarse interface elements: connected runs of fine interface elements with the same owner pair
  std::map<std::pair<int, int>, std::vector<int>> by_owners;
  for (int t = 0; t < fine.interface_count(); ++t) {
    const auto& owners = fine.interface_owners[t];
    int a = assignment[owners.front()];
    int b = assignment[owners.back()];
    if (a > b) std::swap(a, b);
    by_owners[{a, b}].push_back(t);
  }
  std::vector<std::vector<int>> iface;
  for (const auto& [key, list] : by_owners) {
    UnionFind uf(static_cast<int>(list.size()));
    std::map<int, int> first_at_node;
    for (int i = 0; i < static_cast<int>(list.size()); ++i)
      for (int n : {fine.interface_elements[list[i]].n0, fine.interface_elements[list[i]].n1}) {
        const auto [it, fresh] = first_at_node.emplace(n, i);
        if (!fresh) uf.unite(i, it->second);
      }
    std::map<int, std::vector<int>> runs;
    for (int i = 0; i < static_cast<int>(list.size()); ++i) runs[uf.find(i)].push_back(list[i]);
    for (auto& [root, run] : runs) iface.push_back(std::move(run));
  }
  std::sort(iface.begin(), iface.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

  double H = 0.0;
  for (const auto& m : bulk) H = std::max(H, std::sqrt(static_cast<double>(m.size())) * fine.size);

  Agglomeration out;
  out.report.H = H;
  out.report.rho0 = rho0;
  out.report.rho1 = rho1;
  for (int label = 0; label < k; ++label) {
    RegularityEntry entry = measure_radii(fine, bulk[label], label, assignment);
    const double slack = 1e-12 * H;
    entry.satisfied = rho0 * H <= entry.inscribed + slack && entry.inscribed <= entry.circumscribed + slack &&
                      entry.circumscribed <= rho1 * H + slack;
    out.report.entries.push_back(entry);
  }
  out.coarse = make_coarse_mesh(fine, std::move(bulk), std::move(iface), H);
  return out;
}

std::vector<int> interface_following_assignment(const MeshPair& fine, int n_per_unit) {
  const double cells_exact = 1.0 / (fine.size * n_per_unit);
  const int r = static_cast<int>(std::lround(cells_exact));
  if (r < 1 || std::abs(cells_exact - r) > 1e-9) throw MeshError("coarse cells must be unions of fine elements");
  const int cx = (fine.nx + r - 1) / r;
  auto cell_of = [&](int e) { return (e / fine.nx / r) * cx + (e % fine.nx) / r; };

  UnionFind uf(fine.bulk_count());
  for (int e = 0; e < fine.bulk_count(); ++e)
    for (int n : face_neighbors(fine, e))
      if (n >= 0 && cell_of(n) == cell_of(e) && fine.bulk_segment[n] == fine.bulk_segment[e]) uf.unite(e, n);
  std::vector<int> piece(fine.bulk_count());
  for (int e = 0; e < fine.bulk_count(); ++e) piece[e] = uf.find(e);

  const long half_cell = static_cast<long>(r) * r;
  std::set<int> stuck;
  for (;;) {
    std::map<int, long> area;
    for (int p : piece) ++area[p];
    int smallest = -1;
    for (const auto& [p, a] : area)
      if (2 * a < half_cell && !stuck.count(p) && (smallest < 0 || a < area[smallest])) smallest = p;
    if (smallest < 0) break;
    std::map<int, int> shared;
    for (int e = 0; e < fine.bulk_count(); ++e) {
      if (piece[e] != smallest) continue;
      for (int n : face_neighbors(fine, e))
        if (n >= 0 && piece[n] != smallest && fine.bulk_segment[n] == fine.bulk_segment[e]) ++shared[piece[n]];
    }
    if (shared.empty()) {
      stuck.insert(smallest);
      continue;
    }
    const auto target = std::max_element(shared.begin(), shared.end(),
                                          [](const auto& a, const auto& b) { return a.second < b.second; });
    for (int& p : piece)
      if (p == smallest) p = target->first;
  }

  std::map<int, int> relabel;
  std::vector<int> out(fine.bulk_count());
  for (int e = 0; e < fine.bulk_count(); ++e) {
    const auto [it, fresh] = relabel.emplace(piece[e], static_cast<int>(relabel.size()));
    out[e] = it->second;
  }
  return out;
}

}  // namespace mdlod::mesh
