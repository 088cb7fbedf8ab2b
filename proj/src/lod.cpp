#include "mdlod/lod.hpp"

#include "mdlod/error.hpp"
#include "mdlod/parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <fmt/core.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mdlod::lod {

namespace {

using Triplet = Eigen::Triplet<double>;

// [A_pp B_mp^T; B_mp 0] restricted to the DOFs p and multiplier rows m.
class SaddleSystem {
 public:
  SaddleSystem(const SparseMatrix& a, const SparseMatrix& b, std::vector<int> dofs, std::vector<int> rows)
      : dofs_(std::move(dofs)), rows_(std::move(rows)) {
    if (dofs_.size() < rows_.size())
      throw SolverError(fmt::format("{} constraints on {} unknowns", rows_.size(), dofs_.size()));
    std::vector<int> local(a.cols(), -1);
    for (std::size_t i = 0; i < dofs_.size(); ++i) local[dofs_[i]] = static_cast<int>(i);
    std::vector<int> row_local(b.rows(), -1);
    for (std::size_t i = 0; i < rows_.size(); ++i) row_local[rows_[i]] = static_cast<int>(i);
    const int np = static_cast<int>(dofs_.size());
    std::vector<Triplet> triplets;
    for (int j : dofs_) {
      for (SparseMatrix::InnerIterator it(a, j); it; ++it)
        if (local[it.row()] >= 0) triplets.emplace_back(local[it.row()], local[j], it.value());
      for (SparseMatrix::InnerIterator it(b, j); it; ++it)
        if (row_local[it.row()] >= 0) {
          triplets.emplace_back(np + row_local[it.row()], local[j], it.value());
          triplets.emplace_back(local[j], np + row_local[it.row()], it.value());
        }
    }
    const int n = np + static_cast<int>(rows_.size());
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
    lu_.analyzePattern(matrix_);
    lu_.factorize(matrix_);
    if (lu_.info() != Eigen::Success)
      throw SolverError(fmt::format("saddle point factorization failed: {}", lu_.lastErrorMessage()));
  }

  const std::vector<int>& dofs() const { return dofs_; }
  const std::vector<int>& rows() const { return rows_; }

  /// Solves with right-hand sides given on the local DOF and row orderings.
  std::pair<Vector, Vector> solve(const Vector& top, const Vector& bottom) const {
    const auto np = static_cast<Eigen::Index>(dofs_.size());
    Vector rhs(matrix_.rows());
    rhs << top, bottom;
    const Vector x = lu_.solve(rhs);
    const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
    const double res = (matrix_ * x - rhs).lpNorm<Eigen::Infinity>();
    if (!(res <= 1e-8 * scale)) throw SolverError(fmt::format("saddle point residual {} too large", res / scale));
    return {x.head(np), x.tail(x.size() - np)};
  }

 private:
  std::vector<int> dofs_;
  std::vector<int> rows_;
  SparseMatrix matrix_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

Vector gather(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

void scatter_add(Vector& v, const std::vector<int>& idx, const Vector& local, double sign) {
  for (std::size_t i = 0; i < idx.size(); ++i) v[idx[i]] += sign * local[static_cast<Eigen::Index>(i)];
}

// Right-hand side of the element corrector of `element` for QOI q, on the system's local orderings.
std::pair<Vector, Vector> corrector_rhs(const Discretization& d, int element, const SaddleSystem& s, const Vector& ih,
                                        const Vector& q) {
  const Vector top = gather(d.restricted_operator(element) * ih, s.dofs());
  const Vector diff = q - d.B() * ih;
  Vector full_bottom = Vector::Zero(d.coarse_count());
  for (const auto& [row, w] : d.constraint_weights(element)) full_bottom[row] = -w * diff[row];
  return {top, gather(full_bottom, s.rows())};
}

SparseMatrix from_columns(int rows, const std::vector<Vector>& cols) {
  std::vector<Triplet> triplets;
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (Eigen::Index i = 0; i < cols[j].size(); ++i)
      if (cols[j][i] != 0.0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), cols[j][i]);
  SparseMatrix m(rows, static_cast<int>(cols.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

MultiscaleBasis global_basis(const Discretization& d) {
  std::vector<int> all(d.free_count());
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> rows(d.coarse_count());
  std::iota(rows.begin(), rows.end(), 0);
  const SaddleSystem s(d.A(), d.B(), all, rows);
  std::vector<Vector> cols(d.coarse_count());
  parallel_for(cols.size(), [&](std::size_t t) {
    cols[t] = s.solve(Vector::Zero(d.free_count()), Vector::Unit(d.coarse_count(), static_cast<Eigen::Index>(t)))
                  .first;
  });
  return {from_columns(d.free_count(), cols), Variant::global, 0};
}

MultiscaleBasis naive_basis(const Discretization& d, int ell) {
  std::vector<Vector> cols(d.coarse_count());
  parallel_for(cols.size(), [&](std::size_t t) {
    const mesh::Patch p = patch_of_element(d.coarse(), static_cast<int>(t), ell);
    const SaddleSystem s(d.A(), d.B(), d.interior_dofs(p), p.multipliers);
    Vector bottom = Vector::Zero(static_cast<Eigen::Index>(p.multipliers.size()));
    const auto pos = std::lower_bound(p.multipliers.begin(), p.multipliers.end(), static_cast<int>(t));
    if (pos == p.multipliers.end() || *pos != static_cast<int>(t))
      throw SolverError(fmt::format("element {} is missing from its own patch", t));
    bottom[pos - p.multipliers.begin()] = 1.0;
    cols[t] = Vector::Zero(d.free_count());
    scatter_add(cols[t], s.dofs(), s.solve(Vector::Zero(static_cast<Eigen::Index>(s.dofs().size())), bottom).first,
                1.0);
  });
  return {from_columns(d.free_count(), cols), Variant::naive, ell};
}

MultiscaleBasis stabilized_basis(const Discretization& d, int ell) {
  const int nb = d.coarse().bulk_count();
  const int n = d.coarse_count();
  const Eigen::SparseMatrix<double, Eigen::RowMajor> p_rows = d.P();
  const SparseMatrix& p = d.P();

  // per bulk element: the columns whose corrector right-hand side is nonzero, with their solutions
  struct Contribution {
    int column;
    std::vector<int> dofs;
    Vector values;
  };
  std::vector<std::vector<Contribution>> work(nb);
  parallel_for(work.size(), [&](std::size_t k) {
    const int element = static_cast<int>(k);
    std::set<int> candidates{element};
    for (int face : d.coarse().bulk_faces[element]) candidates.insert(nb + face);
    for (int dof : d.element_dofs(element))
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(p_rows, dof); it; ++it)
        candidates.insert(static_cast<int>(it.col()));
    const mesh::Patch patch = mesh::patch(d.coarse(), element, ell);
    const SaddleSystem s(d.A(), d.B(), d.interior_dofs(patch), patch.multipliers);
    for (int t : candidates) {
      const Vector ih = Vector(p.col(t));
      const auto [top, bottom] = corrector_rhs(d, element, s, ih, Vector::Unit(n, t));
      if (top.lpNorm<Eigen::Infinity>() == 0.0 && bottom.lpNorm<Eigen::Infinity>() == 0.0) continue;
      work[k].push_back({t, s.dofs(), s.solve(top, bottom).first});
    }
  });

  std::vector<Vector> cols(n);
  for (int t = 0; t < n; ++t) cols[t] = Vector(p.col(t));
  for (const auto& list : work)
    for (const auto& c : list) scatter_add(cols[c.column], c.dofs, c.values, -1.0);
  return {from_columns(d.free_count(), cols), Variant::stabilized, ell};
}

}  // namespace

std::string_view to_string(Interpolation mode) { return mode == Interpolation::nodal ? "nodal" : "pou"; }

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::global: return "global";
    case Variant::stabilized: return "stabilized";
    case Variant::naive: return "naive";
  }
  return "unknown";
}

Interpolation parse_interpolation(std::string_view text) {
  if (text == "nodal") return Interpolation::nodal;
  if (text == "pou") return Interpolation::pou;
  throw ConfigError(fmt::format("unknown interpolation '{}'", text));
}

Variant parse_variant(std::string_view text) {
  if (text == "global") return Variant::global;
  if (text == "stabilized") return Variant::stabilized;
  if (text == "naive") return Variant::naive;
  throw ConfigError(fmt::format("unknown variant '{}'", text));
}

Discretization::Discretization(mesh::MeshHierarchy hierarchy, fem::CoefficientSet coefficients, Interpolation mode)
    : hierarchy_(std::move(hierarchy)), coefficients_(std::move(coefficients)), mode_(mode) {
  const mesh::MeshPair& f = hierarchy_.fine;
  const mesh::CoarseMesh& c = hierarchy_.coarse;
  dofs_ = fem::DofMap::build(f);
  a_ = fem::assemble_operator(dofs_, f, coefficients_);
  b_ = assemble_constraints(dofs_, f, c);
  p_ = interpolation_matrix(hierarchy_, dofs_, mode_);

  restricted_.resize(c.bulk_count());
  parallel_for(restricted_.size(), [&](std::size_t k) {
    restricted_[k] = fem::assemble_restricted_operator(dofs_, f, c, coefficients_, static_cast<int>(k));
  });

  element_dofs_.assign(c.bulk_count(), {});
  support_.assign(dofs_.free_count(), {});
  for (int e = 0; e < f.bulk_count(); ++e)
    for (int dof : dofs_.element_dofs(e)) {
      const int fi = dofs_.free_index(dof);
      if (fi < 0) continue;
      support_[fi].push_back(c.bulk_of_fine[e]);
      element_dofs_[c.bulk_of_fine[e]].push_back(fi);
    }
  for (int t = 0; t < f.interface_count(); ++t)
    for (int dof : dofs_.interface_element_dofs(t)) {
      const int fi = dofs_.free_index(dof);
      if (fi < 0) continue;
      const int parent = c.interface_of_fine[t];
      support_[fi].push_back(parent);
      for (int owner : c.interface_owners[parent]) element_dofs_[owner].push_back(fi);
    }
  for (auto* lists : {&element_dofs_, &support_})
    for (auto& l : *lists) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
}

std::vector<std::pair<int, double>> Discretization::constraint_weights(int coarse_element) const {
  const mesh::CoarseMesh& c = hierarchy_.coarse;
  std::vector<std::pair<int, double>> out{{coarse_element, 1.0}};
  for (int face : c.bulk_faces[coarse_element]) out.push_back({c.bulk_count() + face, 1.0 / c.n_of(face)});
  return out;
}

std::vector<int> Discretization::interior_dofs(const mesh::Patch& patch) const {
  const mesh::CoarseMesh& c = hierarchy_.coarse;
  std::vector<char> bulk(c.bulk_count(), 0);
  std::vector<char> iface(c.interface_count(), 0);
  for (int k : patch.bulk) bulk[k] = 1;
  for (int k : patch.interface) iface[k] = 1;
  std::vector<int> out;
  for (int fi = 0; fi < dofs_.free_count(); ++fi) {
    const auto& in = dofs_.dof(dofs_.free_dofs()[fi]).codim == 0 ? bulk : iface;
    if (std::all_of(support_[fi].begin(), support_[fi].end(), [&](int k) { return in[k] != 0; })) out.push_back(fi);
  }
  return out;
}

CorrectorResult corrector_solve(const Discretization& d, int coarse_element, int ell, const Vector& q) {
  if (coarse_element < 0 || coarse_element >= d.coarse().bulk_count())
    throw SolverError(fmt::format("coarse bulk element {} does not exist", coarse_element));
  if (ell < 1) throw SolverError("corrector patches need ell >= 1");
  if (q.size() != d.coarse_count()) throw SolverError("QOI vector has the wrong length");
  CorrectorResult out;
  out.patch = mesh::patch(d.coarse(), coarse_element, ell);
  const SaddleSystem s(d.A(), d.B(), d.interior_dofs(out.patch), out.patch.multipliers);
  const Vector ih = d.P() * q;
  const auto [top, bottom] = corrector_rhs(d, coarse_element, s, ih, q);
  out.corrector = Vector::Zero(d.free_count());
  out.multipliers = Vector::Zero(d.coarse_count());
  if (top.lpNorm<Eigen::Infinity>() == 0.0 && bottom.lpNorm<Eigen::Infinity>() == 0.0) return out;
  const auto [x, lambda] = s.solve(top, bottom);
  scatter_add(out.corrector, s.dofs(), x, 1.0);
  scatter_add(out.multipliers, s.rows(), lambda, 1.0);
  return out;
}

MultiscaleBasis build_basis(const Discretization& d, Variant variant, int ell) {
  if (variant != Variant::global && ell < 1) throw SolverError("localized bases need ell >= 1");
  switch (variant) {
    case Variant::global: return global_basis(d);
    case Variant::stabilized: return stabilized_basis(d, ell);
    case Variant::naive: return naive_basis(d, ell);
  }
  throw SolverError("unknown variant");
}

void write_basis(const std::filesystem::path& path, const MultiscaleBasis& basis) {
  auto out = fmt::output_file(path.string());
  out.print("{} {} {} {}\n", basis.phi.rows(), basis.phi.cols(), to_string(basis.variant), basis.ell);
  for (int k = 0; k < basis.phi.outerSize(); ++k) {
    std::string line = fmt::format("{} {}", k, basis.phi.col(k).nonZeros());
    for (SparseMatrix::InnerIterator it(basis.phi, k); it; ++it) line += fmt::format(" {}:{}", it.row(), it.value());
    out.print("{}\n", line);
  }
}

MultiscaleSolution solve_multiscale(const MultiscaleBasis& basis, const SparseMatrix& a, const Vector& f) {
  const SparseMatrix& phi = basis.phi;
  if (phi.rows() != a.rows() || f.size() != a.rows()) throw SolverError("basis, operator and load sizes differ");
  const SparseMatrix aphi = a * phi;
  const Eigen::MatrixXd g = Eigen::MatrixXd(SparseMatrix(phi.transpose()) * aphi);
  const Vector rhs = phi.transpose() * f;
  MultiscaleSolution out;
  const double rmax = rhs.lpNorm<Eigen::Infinity>();
  if (rmax == 0.0) {
    out.coefficients = Vector::Zero(phi.cols());
    out.u = Vector::Zero(phi.rows());
    return out;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (g + g.transpose()));
  if (llt.info() != Eigen::Success) throw SolverError("coarse Galerkin matrix is not positive definite");
  out.coefficients = llt.solve(rhs);
  out.u = phi * out.coefficients;
  const double res = (phi.transpose() * (a * out.u - f)).lpNorm<Eigen::Infinity>();
  if (!(res <= 1e-10 * rmax)) throw SolverError(fmt::format("Galerkin residual {} too large", res / rmax));
  return out;
}

Vector apply_Rl(const Discretization& d, int ell, const Vector& v) {
  const Vector q = d.B() * v;
  std::vector<Vector> parts(d.coarse().bulk_count());
  parallel_for(parts.size(), [&](std::size_t k) {
    parts[k] = corrector_solve(d, static_cast<int>(k), ell, q).corrector;
  });
  Vector out = d.P() * q;
  for (const auto& c : parts) out -= c;
  return out;
}

mesh::Patch patch_of_element(const mesh::CoarseMesh& coarse, int element, int level) {
  if (element < coarse.bulk_count()) return mesh::patch(coarse, element, level);
  return mesh::patch_of_set(coarse, coarse.interface_owners.at(element - coarse.bulk_count()), level);
}

std::vector<double> decay_profile(const Discretization& d, const Vector& phi, int element, int max_level) {
  const mesh::MeshPair& f = d.fine();
  const mesh::CoarseMesh& c = d.coarse();
  const fem::DofMap& dofs = d.dofs();
  const Vector v = dofs.extend(phi);
  const auto kb = fem::bulk_stiffness(f.size, 1.0);
  const auto ki = fem::interface_stiffness(f.size, 1.0);
  const auto kc = fem::coupling_block(f.size, 1.0);
  std::vector<double> out;
  for (int m = 1; m <= max_level; ++m) {
    const mesh::Patch p = patch_of_element(c, element, m);
    std::vector<char> in_bulk(c.bulk_count(), 0);
    std::vector<char> in_iface(c.interface_count(), 0);
    for (int k : p.bulk) in_bulk[k] = 1;
    for (int k : p.interface) in_iface[k] = 1;
    double sum = 0.0;
    for (int e = 0; e < f.bulk_count(); ++e) {
      if (in_bulk[c.bulk_of_fine[e]]) continue;
      const auto& ids = dofs.element_dofs(e);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) sum += v[ids[i]] * kb[i][j] * v[ids[j]];
    }
    for (int t = 0; t < f.interface_count(); ++t) {
      if (in_iface[c.interface_of_fine[t]]) continue;
      const auto& ids = dofs.interface_element_dofs(t);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) sum += v[ids[i]] * ki[i][j] * v[ids[j]];
      const auto& el = f.interface_elements[t];
      for (int owner : f.interface_owners[t]) {
        if (in_bulk[c.bulk_of_fine[owner]]) continue;
        const int s = f.bulk_segment[owner];
        const std::array<int, 4> jd{dofs.bulk_dof(el.n0, s), dofs.bulk_dof(el.n1, s), ids[0], ids[1]};
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) sum += v[jd[i]] * kc[i][j] * v[jd[j]];
      }
    }
    out.push_back(std::sqrt(std::max(sum, 0.0)));
  }
  return out;
}

}  // namespace mdlod::lod
