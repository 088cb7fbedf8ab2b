#include "mdlod/error.hpp"
#include "mdlod/lod.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

namespace mdlod::lod {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix nodal_interpolation(const mesh::MeshHierarchy& h, const fem::DofMap& dofs) {
  if (!h.coarse_grid) throw AssemblyError("nodal interpolation needs a structured coarse grid");
  const mesh::MeshPair& cg = *h.coarse_grid;
  const fem::DofMap cd = fem::DofMap::build(cg);
  const int nb = cg.bulk_count();

  std::vector<std::vector<int>> bulk_at_node(cg.node_count());
  for (int e = 0; e < nb; ++e)
    for (int n : cg.element_nodes(e)) bulk_at_node[n].push_back(e);
  std::vector<std::vector<int>> iface_at_node(cg.node_count());
  for (int t = 0; t < cg.interface_count(); ++t) {
    iface_at_node[cg.interface_elements[t].n0].push_back(t);
    iface_at_node[cg.interface_elements[t].n1].push_back(t);
  }

  std::vector<Triplet> triplets;
  for (int k = 0; k < cd.free_count(); ++k) {
    const fem::Dof& dof = cd.dof(cd.free_dofs()[k]);
    std::vector<int> cols;
    if (dof.codim == 0) {
      for (int e : bulk_at_node[dof.node])
        if (cg.bulk_segment[e] == dof.segment) cols.push_back(e);
    } else {
      for (int t : iface_at_node[dof.node]) cols.push_back(nb + t);
    }
    for (int c : cols) triplets.emplace_back(k, c, 1.0 / static_cast<double>(cols.size()));
  }
  SparseMatrix c(cd.free_count(), h.coarse.element_count());
  c.setFromTriplets(triplets.begin(), triplets.end());
  SparseMatrix p = fem::prolongation_matrix(cd, cg, dofs, h.fine) * c;
  p.prune(0.0);
  return p;
}

// Shortest-path distances from the sources through the given weighted graph.
std::vector<double> dijkstra(int n, const std::vector<int>& sources,
                             const std::function<void(int, const std::function<void(int, double)>&)>& neighbors) {
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int s : sources) {
    dist[s] = 0.0;
    heap.push({0.0, s});
  }
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    neighbors(u, [&](int v, double w) {
      if (du + w < dist[v]) {
        dist[v] = du + w;
        heap.push({dist[v], v});
      }
    });
  }
  return dist;
}

SparseMatrix pou_interpolation(const mesh::MeshHierarchy& h, const fem::DofMap& dofs) {
  const mesh::MeshPair& f = h.fine;
  const mesh::CoarseMesh& c = h.coarse;
  const int nb = c.bulk_count();

  // fine elements carrying each DOF: bulk elements of the DOF's segment, or interface elements
  std::vector<std::vector<int>> carriers(dofs.size());
  for (int e = 0; e < f.bulk_count(); ++e)
    for (int d : dofs.element_dofs(e)) carriers[d].push_back(e);
  for (int t = 0; t < f.interface_count(); ++t)
    for (int d : dofs.interface_element_dofs(t)) carriers[d].push_back(t);

  std::vector<std::vector<int>> bulk_at_node(f.node_count());
  for (int e = 0; e < f.bulk_count(); ++e)
    for (int n : f.element_nodes(e)) bulk_at_node[n].push_back(e);
  std::vector<std::vector<int>> iface_at_node(f.node_count());
  for (int t = 0; t < f.interface_count(); ++t) {
    iface_at_node[f.interface_elements[t].n0].push_back(t);
    iface_at_node[f.interface_elements[t].n1].push_back(t);
  }

  std::vector<Triplet> raw;
  std::vector<double> denominator(dofs.free_count(), 0.0);
  std::vector<char> in_u;

  for (int k = 0; k < c.element_count(); ++k) {
    const bool bulk = k < nb;
    const int local = bulk ? k : k - nb;
    in_u.assign(bulk ? nb : c.interface_count(), 0);
    in_u[local] = 1;
    for (int n : (bulk ? c.bulk_neighbors[local] : c.interface_neighbors[local])) in_u[n] = 1;
    const auto& parent = bulk ? c.bulk_of_fine : c.interface_of_fine;
    const auto& at_node = bulk ? bulk_at_node : iface_at_node;
    auto inside = [&](int fine_element) { return in_u[parent[fine_element]] != 0; };

    std::vector<int> sources;
    std::vector<int> members;
    for (std::size_t m = 0; m < in_u.size(); ++m) {
      if (!in_u[m]) continue;
      for (int fe : (bulk ? c.bulk_members[m] : c.interface_members[m])) {
        const auto ids = bulk ? std::vector<int>(dofs.element_dofs(fe).begin(), dofs.element_dofs(fe).end())
                              : std::vector<int>(dofs.interface_element_dofs(fe).begin(),
                                                 dofs.interface_element_dofs(fe).end());
        for (int d : ids) {
          members.push_back(d);
          const int node = dofs.dof(d).node;
          bool boundary = f.on_boundary(node);
          for (int other : at_node[node]) boundary = boundary || !inside(other);
          if (boundary) sources.push_back(d);
        }
      }
    }
    const auto dist = dijkstra(dofs.size(), sources, [&](int u, const std::function<void(int, double)>& relax) {
      const geom::Point pu = f.node_point(dofs.dof(u).node);
      for (int fe : carriers[u]) {
        if (bulk != (dofs.dof(u).codim == 0) || !inside(fe)) continue;
        if (bulk) {
          for (int v : dofs.element_dofs(fe))
            if (v != u) relax(v, geom::distance(pu, f.node_point(dofs.dof(v).node)));
        } else {
          for (int v : dofs.interface_element_dofs(fe))
            if (v != u) relax(v, f.size);
        }
      }
    });
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (int d : members) {
      const int fi = dofs.free_index(d);
      if (fi < 0 || dist[d] == 0.0) continue;
      if (!std::isfinite(dist[d]))
        throw AssemblyError(fmt::format("DOF {} is cut off from the boundary of the cover of element {}", d, k));
      raw.emplace_back(fi, k, dist[d]);
      denominator[fi] += dist[d];
    }
  }
  for (int fi = 0; fi < dofs.free_count(); ++fi)
    if (!(denominator[fi] > 0.0))
      throw AssemblyError(fmt::format("partition of unity vanishes at free DOF {}", fi));
  std::vector<Triplet> normalized;
  normalized.reserve(raw.size());
  for (const auto& t : raw) normalized.emplace_back(t.row(), t.col(), t.value() / denominator[t.row()]);
  SparseMatrix p(dofs.free_count(), c.element_count());
  p.setFromTriplets(normalized.begin(), normalized.end());
  return p;
}

}  // namespace

SparseMatrix assemble_constraints(const fem::DofMap& dofs, const mesh::MeshPair& fine, const mesh::CoarseMesh& coarse) {
  const double h = fine.size;
  const int nb = coarse.bulk_count();
  std::vector<Triplet> triplets;
  for (int k = 0; k < nb; ++k) {
    const double w = 0.25 * h * h / coarse.bulk_measure[k];
    for (int e : coarse.bulk_members[k])
      for (int d : dofs.element_dofs(e))
        if (dofs.free_index(d) >= 0) triplets.emplace_back(k, dofs.free_index(d), w);
  }
  for (int k = 0; k < coarse.interface_count(); ++k) {
    const double w = 0.5 * h / coarse.interface_measure[k];
    for (int t : coarse.interface_members[k])
      for (int d : dofs.interface_element_dofs(t))
        if (dofs.free_index(d) >= 0) triplets.emplace_back(nb + k, dofs.free_index(d), w);
  }
  SparseMatrix b(coarse.element_count(), dofs.free_count());
  b.setFromTriplets(triplets.begin(), triplets.end());
  return b;
}

Vector qoi(const fem::DofMap& dofs, const mesh::MeshPair& fine, const mesh::CoarseMesh& coarse, const Vector& v) {
  return assemble_constraints(dofs, fine, coarse) * v;
}

SparseMatrix interpolation_matrix(const mesh::MeshHierarchy& h, const fem::DofMap& dofs, Interpolation mode) {
  return mode == Interpolation::nodal ? nodal_interpolation(h, dofs) : pou_interpolation(h, dofs);
}

}  // namespace mdlod::lod
