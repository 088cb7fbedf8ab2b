#pragma once

#include "mdlod/fem.hpp"
#include "mdlod/mesh.hpp"

#include <filesystem>
#include <string_view>
#include <vector>

namespace mdlod::lod {

using fem::SparseMatrix;
using fem::Vector;

enum class Interpolation { nodal, pou };
enum class Variant { global, stabilized, naive };

std::string_view to_string(Interpolation mode);
std::string_view to_string(Variant variant);
Interpolation parse_interpolation(std::string_view text);
Variant parse_variant(std::string_view text);

/// N x free matrix whose row T applies the element average q_T.
SparseMatrix assemble_constraints(const fem::DofMap& dofs, const mesh::MeshPair& fine, const mesh::CoarseMesh& coarse);

/// Element averages of a fine function (free coefficients).
Vector qoi(const fem::DofMap& dofs, const mesh::MeshPair& fine, const mesh::CoarseMesh& coarse, const Vector& v);

/// Matrix mapping QOI vectors to the quasi-interpolant on the fine free DOFs.
/// Nodal mode needs a structured coarse grid: interior coarse nodes take the
/// mean of the adjacent element values (bulk copies average over elements of
/// their own segment), boundary nodes are zero. PoU mode weights each value by
/// the normalized intrinsic distance to the boundary of the element's
/// first-order patch.
SparseMatrix interpolation_matrix(const mesh::MeshHierarchy& h, const fem::DofMap& dofs, Interpolation mode);

/// The fine problem on a mesh hierarchy together with everything the
/// multiscale method reuses: operator, constraints, interpolation and the
/// per-element restricted operators.
class Discretization {
 public:
  Discretization(mesh::MeshHierarchy hierarchy, fem::CoefficientSet coefficients, Interpolation mode);

  const mesh::MeshHierarchy& hierarchy() const { return hierarchy_; }
  const mesh::MeshPair& fine() const { return hierarchy_.fine; }
  const mesh::CoarseMesh& coarse() const { return hierarchy_.coarse; }
  const fem::DofMap& dofs() const { return dofs_; }
  const fem::CoefficientSet& coefficients() const { return coefficients_; }
  Interpolation interpolation_mode() const { return mode_; }

  const SparseMatrix& A() const { return a_; }
  const SparseMatrix& B() const { return b_; }
  /// I_H as a map from QOI vectors: I_H v = P (B v).
  const SparseMatrix& P() const { return p_; }
  const SparseMatrix& restricted_operator(int coarse_element) const { return restricted_[coarse_element]; }

  int free_count() const { return dofs_.free_count(); }
  int coarse_count() const { return hierarchy_.coarse.element_count(); }

  /// Weights of b_{T0}: 1 on T0, 1/n on its interface faces, 0 elsewhere.
  std::vector<std::pair<int, double>> constraint_weights(int coarse_element) const;

  /// Free DOFs whose support lies inside the patch, ascending.
  std::vector<int> interior_dofs(const mesh::Patch& patch) const;

  /// Free DOFs touched by the fine elements of one coarse bulk element and its faces.
  const std::vector<int>& element_dofs(int coarse_element) const { return element_dofs_[coarse_element]; }

 private:
  mesh::MeshHierarchy hierarchy_;
  fem::CoefficientSet coefficients_;
  Interpolation mode_;
  fem::DofMap dofs_;
  SparseMatrix a_;
  SparseMatrix b_;
  SparseMatrix p_;
  std::vector<SparseMatrix> restricted_;
  std::vector<std::vector<int>> element_dofs_;
  // per free DOF: coarse bulk elements (codim 0) or coarse interface elements (codim 1) of its support
  std::vector<std::vector<int>> support_;
};

struct CorrectorResult {
  Vector corrector;    // free DOFs, zero outside the patch
  Vector multipliers;  // one per coarse element, zero outside the patch
  mesh::Patch patch;
};

/// Localized element corrector of coarse bulk element T0 for a function with
/// QOI vector q: a(K v, w) + b(w, lambda) = a_T0(I_H v, w) and
/// b(K v, mu) = -b_T0(v - I_H v, mu) on the level-ell patch.
CorrectorResult corrector_solve(const Discretization& d, int coarse_element, int ell, const Vector& q);

struct MultiscaleBasis {
  SparseMatrix phi;  // free x N
  Variant variant = Variant::global;
  int ell = 0;
};

MultiscaleBasis build_basis(const Discretization& d, Variant variant, int ell);

/// Debug dump, one line per column: `column nnz row:value ...` after a
/// `rows cols variant ell` header. Not a stable format.
void write_basis(const std::filesystem::path& path, const MultiscaleBasis& basis);

struct MultiscaleSolution {
  Vector coefficients;
  Vector u;
};

MultiscaleSolution solve_multiscale(const MultiscaleBasis& basis, const SparseMatrix& a, const Vector& f);

/// R^ell v = I_H v - sum over coarse bulk elements of their correctors.
Vector apply_Rl(const Discretization& d, int ell, const Vector& v);

/// Patch of a coarse element in QOI indexing: bulk elements grow from
/// themselves, interface elements from the bulk elements sharing them.
mesh::Patch patch_of_element(const mesh::CoarseMesh& coarse, int element, int level);

/// Norm of phi restricted to the complement of the level-m patch of `element`
/// for m = 1..max_level: unweighted gradients of both components plus the
/// jump between bulk trace and interface where both lie outside.
std::vector<double> decay_profile(const Discretization& d, const Vector& phi, int element, int max_level);

}  // namespace mdlod::lod
