#pragma once

#include "mdlod/geometry.hpp"
#include "mdlod/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace mdlod::fem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using PointFunction = std::function<double(geom::Point)>;

struct Dof {
  int node = 0;
  int codim = 0;
  /// Bulk segment for bulk DOFs, -1 for interface DOFs.
  int segment = -1;
};

/// Degrees of freedom of the broken bulk space and the junction-continuous
/// interface space on a fine grid. Bulk DOFs come first, ordered by segment and
/// then node index; interface DOFs follow in node order.
class DofMap {
 public:
  static DofMap build(const mesh::MeshPair& m);

  int size() const { return static_cast<int>(dofs_.size()); }
  int bulk_size() const { return bulk_size_; }
  int interface_size() const { return size() - bulk_size_; }
  int free_count() const { return static_cast<int>(free_.size()); }

  const Dof& dof(int i) const { return dofs_[i]; }
  /// -1 when the node has no copy for that segment.
  int bulk_dof(int node, int segment) const;
  int interface_dof(int node) const;
  bool is_dirichlet(int i) const { return free_index_[i] < 0; }
  int free_index(int i) const { return free_index_[i]; }
  const std::vector<int>& free_dofs() const { return free_; }

  const std::array<int, 4>& element_dofs(int e) const { return element_dofs_[e]; }
  const std::array<int, 2>& interface_element_dofs(int t) const { return interface_element_dofs_[t]; }

  /// Free coefficients extended by zero on Dirichlet DOFs, and the reverse.
  Vector extend(const Vector& free) const;
  Vector restrict_to_free(const Vector& full) const;

 private:
  std::vector<Dof> dofs_;
  int bulk_size_ = 0;
  std::vector<int> free_index_;
  std::vector<int> free_;
  std::vector<std::vector<std::pair<int, int>>> bulk_at_node_;
  std::vector<int> interface_at_node_;
  std::vector<std::array<int, 4>> element_dofs_;
  std::vector<std::array<int, 2>> interface_element_dofs_;
};

/// Diffusivities and transfer coefficient, one value per fine element.
struct CoefficientSet {
  std::vector<double> a0;
  std::vector<double> a1;
  std::vector<double> b1;
};

/// Samples point functions at fine element midpoints.
CoefficientSet sample_coefficients(const mesh::MeshPair& m, const PointFunction& a0, const PointFunction& a1,
                                   const PointFunction& b1);

/// Throws AssemblyError when a value is not finite and positive, or the sizes
/// do not match the mesh.
void check_coefficients(const mesh::MeshPair& m, const CoefficientSet& c);

/// Element matrices. Local bulk node order follows MeshPair::element_nodes.
std::array<std::array<double, 4>, 4> bulk_stiffness(double h, double a);
std::array<std::array<double, 2>, 2> interface_stiffness(double h, double a);
/// Robin block for one bulk side: rows/cols (bulk n0, bulk n1, interface n0, interface n1).
std::array<std::array<double, 4>, 4> coupling_block(double h, double b);

/// Operator over every DOF, Dirichlet ones included.
SparseMatrix assemble_full_operator(const DofMap& dofs, const mesh::MeshPair& m, const CoefficientSet& c);

/// Operator on free DOFs.
SparseMatrix assemble_operator(const DofMap& dofs, const mesh::MeshPair& m, const CoefficientSet& c);

/// Part of the operator attributed to one coarse bulk element: bulk stiffness
/// on its fine elements, interface stiffness on its interface faces weighted by
/// 1/n, and the coupling on those faces with the trace taken from its own side.
SparseMatrix assemble_restricted_operator(const DofMap& dofs, const mesh::MeshPair& m, const mesh::CoarseMesh& coarse,
                                          const CoefficientSet& c, int coarse_element);

/// Load vector on free DOFs, integrated with 5-point Gauss rules.
Vector assemble_load(const DofMap& dofs, const mesh::MeshPair& m, const PointFunction& f0, const PointFunction& f1);

/// Sparse LDL^T factorization that insists on positive pivots.
class SpdSolver {
 public:
  explicit SpdSolver(const SparseMatrix& a);
  ~SpdSolver();
  SpdSolver(SpdSolver&&) noexcept;
  SpdSolver& operator=(SpdSolver&&) noexcept;

  Vector solve(const Vector& rhs) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Solves A u = F and checks the residual.
Vector solve_dirichlet(const SparseMatrix& a, const Vector& f);

double energy_norm(const SparseMatrix& a, const Vector& v);

/// Evaluates a function of a coarser nested grid at the nodes of a finer one.
/// Both vectors hold free coefficients.
Vector prolongate(const DofMap& from_dofs, const mesh::MeshPair& from, const DofMap& to_dofs,
                  const mesh::MeshPair& to, const Vector& v);

/// Sparse matrix form of prolongate.
SparseMatrix prolongation_matrix(const DofMap& from_dofs, const mesh::MeshPair& from, const DofMap& to_dofs,
                                 const mesh::MeshPair& to);

/// Writes x,y,codim,segment,value rows for every DOF.
void write_field_csv(const std::filesystem::path& path, const DofMap& dofs, const mesh::MeshPair& m,
                     const Vector& free_values);

}  // namespace mdlod::fem
