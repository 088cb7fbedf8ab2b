#pragma once

#include "mdlod/geometry.hpp"

#include <array>
#include <optional>
#include <vector>

namespace mdlod::mesh {

/// Straight interface element between two grid nodes (n0 < n1).
struct InterfaceElement {
  int n0 = 0;
  int n1 = 0;
  int segment = 0;
};

/// Uniform square grid fitted to a MixedDomain. Bulk element e sits at
/// (e % nx, e / nx); node (ix, iy) has index iy * (nx + 1) + ix.
struct MeshPair {
  geom::Rectangle box;
  int nx = 0;
  int ny = 0;
  double size = 0.0;
  std::vector<int> bulk_segment;
  std::vector<InterfaceElement> interface_elements;
  /// Per bulk element, faces ordered bottom, right, top, left: the coincident
  /// interface element or -1.
  std::vector<std::array<int, 4>> face_map;
  /// Bulk elements sharing each interface element.
  std::vector<std::vector<int>> interface_owners;

  int bulk_count() const { return nx * ny; }
  int interface_count() const { return static_cast<int>(interface_elements.size()); }
  int node_count() const { return (nx + 1) * (ny + 1); }
  int node_index(int ix, int iy) const { return iy * (nx + 1) + ix; }
  geom::Point node_point(int n) const;
  geom::Point element_center(int e) const;
  /// Corner nodes counter-clockwise from the lower left.
  std::array<int, 4> element_nodes(int e) const;
  bool on_boundary(int node) const;
  int n_of(int t1) const { return static_cast<int>(interface_owners[t1].size()); }
};

/// Fits a grid with `n_per_unit` elements per unit length. Throws MeshError when
/// an interface is not made of grid edges.
MeshPair build_mesh_pair(const geom::MixedDomain& domain, int n_per_unit);

/// Coarse partition given as unions of fine elements. Covers both the
/// structured case (coarse squares) and agglomerated elements of arbitrary shape.
struct CoarseMesh {
  double H = 0.0;
  std::vector<std::vector<int>> bulk_members;
  std::vector<int> bulk_of_fine;
  std::vector<double> bulk_measure;
  std::vector<int> bulk_segment;

  std::vector<std::vector<int>> interface_members;
  std::vector<int> interface_of_fine;
  std::vector<double> interface_measure;
  std::vector<int> interface_segment;
  std::vector<std::vector<int>> interface_owners;

  /// Coarse interface elements on the boundary of each coarse bulk element.
  std::vector<std::vector<int>> bulk_faces;
  /// Closure-intersection adjacency, self excluded.
  std::vector<std::vector<int>> bulk_neighbors;
  std::vector<std::vector<int>> interface_neighbors;

  int bulk_count() const { return static_cast<int>(bulk_members.size()); }
  int interface_count() const { return static_cast<int>(interface_members.size()); }
  /// N: coarse bulk elements followed by coarse interface elements.
  int element_count() const { return bulk_count() + interface_count(); }
  int n_of(int t1) const { return static_cast<int>(interface_owners[t1].size()); }
};

/// Derives faces, owners and adjacency from membership lists.
/// `bulk_members` and `interface_members` must partition the fine elements.
CoarseMesh make_coarse_mesh(const MeshPair& fine, std::vector<std::vector<int>> bulk_members,
                            std::vector<std::vector<int>> interface_members, double H);

struct MeshHierarchy {
  MeshPair fine;
  CoarseMesh coarse;
  /// Coarse grid when the coarse mesh is a uniform square grid.
  std::optional<MeshPair> coarse_grid;
  int refinement = 0;

  const std::vector<int>& parent_map() const { return coarse.bulk_of_fine; }
};

/// Coarse grid with n_per_unit elements per unit length, fine grid r times finer.
MeshHierarchy build_hierarchy(const geom::MixedDomain& domain, int n_per_unit, int r);

struct Patch {
  int level = 0;
  std::vector<int> bulk;
  std::vector<int> interface;
  /// Coarse element indices in QOI order (bulk index, then bulk_count + interface index).
  std::vector<int> multipliers;
};

/// Element patch N_level of a coarse bulk element. The interface part holds
/// every coarse interface element lying on the boundary of a patch bulk element.
Patch patch(const CoarseMesh& coarse, int seed, int level);

/// Patch grown from an arbitrary set of coarse bulk elements.
Patch patch_of_set(const CoarseMesh& coarse, const std::vector<int>& seeds, int level);

struct RegularityEntry {
  int element = 0;
  double inscribed = 0.0;
  double circumscribed = 0.0;
  geom::Point center;
  bool satisfied = false;
};

struct RegularityReport {
  double H = 0.0;
  double rho0 = 0.0;
  double rho1 = 0.0;
  std::vector<RegularityEntry> entries;

  bool all_satisfied() const;
  std::vector<int> flagged() const;
};

struct Agglomeration {
  CoarseMesh coarse;
  RegularityReport report;
};

/// Groups fine elements by label into coarse elements. Labels must be
/// 0..k-1, each label set face-connected, simply connected and inside one bulk
/// segment. H is the largest square root of an agglomerate area.
/// Inscribed radii are maximized over centers on a lattice of spacing h/16.
Agglomeration agglomerate(const MeshPair& fine, const std::vector<int>& assignment, double rho0, double rho1);

/// Labels from intersecting the cells of an n_per_unit grid with the bulk
/// segments; pieces smaller than half a cell join the neighboring piece of the
/// same segment with which they share the longest boundary.
std::vector<int> interface_following_assignment(const MeshPair& fine, int n_per_unit);

}  // namespace mdlod::mesh
