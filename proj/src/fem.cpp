#include "mdlod/fem.hpp"

#include "mdlod/error.hpp"
#include "mdlod/parallel.hpp"

#include <Eigen/SparseCholesky>
#include <fmt/core.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace mdlod::fem {

namespace {

using Triplet = Eigen::Triplet<double>;

// Bilinear shape functions on [0,1]^2 in the order (0,0), (1,0), (1,1), (0,1).
constexpr std::array<std::array<int, 2>, 4> kCorner{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

double shape(int i, double xi, double eta) {
  const double sx = kCorner[i][0] ? xi : 1.0 - xi;
  const double sy = kCorner[i][1] ? eta : 1.0 - eta;
  return sx * sy;
}

std::array<double, 2> shape_grad(int i, double xi, double eta) {
  const double sx = kCorner[i][0] ? xi : 1.0 - xi;
  const double sy = kCorner[i][1] ? eta : 1.0 - eta;
  const double dx = kCorner[i][0] ? 1.0 : -1.0;
  const double dy = kCorner[i][1] ? 1.0 : -1.0;
  return {dx * sy, dy * sx};
}

// Gauss-Legendre rules on [0, 1].
struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

const Rule& gauss2() {
  static const Rule r = [] {
    const double g = 0.5 / std::sqrt(3.0);
    return Rule{{0.5 - g, 0.5 + g}, {0.5, 0.5}};
  }();
  return r;
}

const Rule& gauss5() {
  static const Rule r = [] {
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    const double w0 = 128.0 / 225.0;
    Rule out;
    for (auto [x, w] : {std::pair{-b, wb}, {-a, wa}, {0.0, w0}, {a, wa}, {b, wb}}) {
      out.x.push_back(0.5 * (x + 1.0));
      out.w.push_back(0.5 * w);
    }
    return out;
  }();
  return r;
}

// Per-element contributions collected in slots and concatenated in slot order,
// so the summation order of duplicates does not depend on scheduling.
struct LocalBlock {
  std::vector<int> dofs;
  std::vector<double> values;  // row-major dofs.size()^2
};

void append(std::vector<Triplet>& out, const LocalBlock& b) {
  const std::size_t n = b.dofs.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (b.values[i * n + j] != 0.0) out.emplace_back(b.dofs[i], b.dofs[j], b.values[i * n + j]);
}

template <std::size_t N>
LocalBlock make_block(const std::array<int, N>& dofs, const std::array<std::array<double, N>, N>& k, double w) {
  LocalBlock b;
  b.dofs.assign(dofs.begin(), dofs.end());
  b.values.resize(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) b.values[i * N + j] = w * k[i][j];
  return b;
}

LocalBlock coupling_for(const DofMap& dofs, const mesh::MeshPair& m, const CoefficientSet& c, int t, int owner) {
  const auto& el = m.interface_elements[t];
  const int s = m.bulk_segment[owner];
  const std::array<int, 4> ids{dofs.bulk_dof(el.n0, s), dofs.bulk_dof(el.n1, s), dofs.interface_dof(el.n0),
                               dofs.interface_dof(el.n1)};
  return make_block(ids, coupling_block(m.size, c.b1[t]), 1.0);
}

SparseMatrix from_blocks(int n, std::vector<std::vector<LocalBlock>>& slots) {
  std::vector<Triplet> triplets;
  for (const auto& slot : slots)
    for (const auto& b : slot) append(triplets, b);
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

SparseMatrix free_block(const DofMap& dofs, const SparseMatrix& full) {
  std::vector<Triplet> triplets;
  for (int k = 0; k < full.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(full, k); it; ++it) {
      const int i = dofs.free_index(static_cast<int>(it.row()));
      const int j = dofs.free_index(static_cast<int>(it.col()));
      if (i >= 0 && j >= 0) triplets.emplace_back(i, j, it.value());
    }
  SparseMatrix a(dofs.free_count(), dofs.free_count());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

}  // namespace

DofMap DofMap::build(const mesh::MeshPair& m) {
  DofMap d;
  d.bulk_at_node_.assign(m.node_count(), {});
  std::vector<std::vector<int>> segments_at_node(m.node_count());
  int max_segment = -1;
  for (int e = 0; e < m.bulk_count(); ++e) {
    max_segment = std::max(max_segment, m.bulk_segment[e]);
    for (int n : m.element_nodes(e)) segments_at_node[n].push_back(m.bulk_segment[e]);
  }
  for (auto& s : segments_at_node) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  for (int seg = 0; seg <= max_segment; ++seg)
    for (int n = 0; n < m.node_count(); ++n)
      if (std::binary_search(segments_at_node[n].begin(), segments_at_node[n].end(), seg)) {
        d.bulk_at_node_[n].push_back({seg, d.size()});
        d.dofs_.push_back({n, 0, seg});
      }
  d.bulk_size_ = d.size();

  d.interface_at_node_.assign(m.node_count(), -1);
  std::vector<char> on_interface(m.node_count(), 0);
  for (const auto& el : m.interface_elements) on_interface[el.n0] = on_interface[el.n1] = 1;
  for (int n = 0; n < m.node_count(); ++n)
    if (on_interface[n]) {
      d.interface_at_node_[n] = d.size();
      d.dofs_.push_back({n, 1, -1});
    }

  d.free_index_.assign(d.size(), -1);
  for (int i = 0; i < d.size(); ++i)
    if (!m.on_boundary(d.dofs_[i].node)) {
      d.free_index_[i] = static_cast<int>(d.free_.size());
      d.free_.push_back(i);
    }

  d.element_dofs_.resize(m.bulk_count());
  for (int e = 0; e < m.bulk_count(); ++e) {
    const auto nodes = m.element_nodes(e);
    for (int k = 0; k < 4; ++k) d.element_dofs_[e][k] = d.bulk_dof(nodes[k], m.bulk_segment[e]);
  }
  d.interface_element_dofs_.resize(m.interface_count());
  for (int t = 0; t < m.interface_count(); ++t)
    d.interface_element_dofs_[t] = {d.interface_at_node_[m.interface_elements[t].n0],
                                    d.interface_at_node_[m.interface_elements[t].n1]};
  return d;
}

int DofMap::bulk_dof(int node, int segment) const {
  for (const auto& [s, i] : bulk_at_node_[node])
    if (s == segment) return i;
  return -1;
}

int DofMap::interface_dof(int node) const { return interface_at_node_[node]; }

Vector DofMap::extend(const Vector& free) const {
  if (free.size() != free_count()) throw AssemblyError("vector length does not match the free DOFs");
  Vector full = Vector::Zero(size());
  for (int k = 0; k < free_count(); ++k) full[free_[k]] = free[k];
  return full;
}

Vector DofMap::restrict_to_free(const Vector& full) const {
  if (full.size() != size()) throw AssemblyError("vector length does not match the DOF map");
  Vector out(free_count());
  for (int k = 0; k < free_count(); ++k) out[k] = full[free_[k]];
  return out;
}

CoefficientSet sample_coefficients(const mesh::MeshPair& m, const PointFunction& a0, const PointFunction& a1,
                                   const PointFunction& b1) {
  CoefficientSet c;
  for (int e = 0; e < m.bulk_count(); ++e) c.a0.push_back(a0(m.element_center(e)));
  for (const auto& el : m.interface_elements) {
    const geom::Point mid = 0.5 * (m.node_point(el.n0) + m.node_point(el.n1));
    c.a1.push_back(a1(mid));
    c.b1.push_back(b1(mid));
  }
  check_coefficients(m, c);
  return c;
}

void check_coefficients(const mesh::MeshPair& m, const CoefficientSet& c) {
  if (static_cast<int>(c.a0.size()) != m.bulk_count() || static_cast<int>(c.a1.size()) != m.interface_count() ||
      static_cast<int>(c.b1.size()) != m.interface_count())
    throw AssemblyError("coefficient arrays do not match the mesh");
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!std::isfinite(v[i]) || v[i] <= 0.0)
        throw AssemblyError(fmt::format("{} = {} on element {} is not positive", name, v[i], i));
  };
  check(c.a0, "A0");
  check(c.a1, "A1");
  check(c.b1, "B1");
}

std::array<std::array<double, 4>, 4> bulk_stiffness(double /*h*/, double a) {
  // the gradient scaling 1/h^2 cancels against the Jacobian h^2 in 2D
  std::array<std::array<double, 4>, 4> k{};
  const Rule& q = gauss2();
  for (std::size_t i = 0; i < q.x.size(); ++i)
    for (std::size_t j = 0; j < q.x.size(); ++j) {
      const double w = q.w[i] * q.w[j];
      for (int p = 0; p < 4; ++p) {
        const auto gp = shape_grad(p, q.x[i], q.x[j]);
        for (int r = 0; r < 4; ++r) {
          const auto gr = shape_grad(r, q.x[i], q.x[j]);
          k[p][r] += a * w * (gp[0] * gr[0] + gp[1] * gr[1]);
        }
      }
    }
  return k;
}

std::array<std::array<double, 2>, 2> interface_stiffness(double h, double a) {
  std::array<std::array<double, 2>, 2> k{};
  const Rule& q = gauss2();
  const std::array<double, 2> g{-1.0 / h, 1.0 / h};
  for (std::size_t i = 0; i < q.x.size(); ++i)
    for (int p = 0; p < 2; ++p)
      for (int r = 0; r < 2; ++r) k[p][r] += a * q.w[i] * h * g[p] * g[r];
  return k;
}

std::array<std::array<double, 4>, 4> coupling_block(double h, double b) {
  std::array<std::array<double, 2>, 2> mass{};
  const Rule& q = gauss2();
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    const std::array<double, 2> phi{1.0 - q.x[i], q.x[i]};
    for (int p = 0; p < 2; ++p)
      for (int r = 0; r < 2; ++r) mass[p][r] += b * q.w[i] * h * phi[p] * phi[r];
  }
  std::array<std::array<double, 4>, 4> k{};
  for (int p = 0; p < 2; ++p)
    for (int r = 0; r < 2; ++r) {
      k[p][r] = mass[p][r];
      k[p + 2][r + 2] = mass[p][r];
      k[p][r + 2] = -mass[p][r];
      k[p + 2][r] = -mass[p][r];
    }
  return k;
}

SparseMatrix assemble_full_operator(const DofMap& dofs, const mesh::MeshPair& m, const CoefficientSet& c) {
  check_coefficients(m, c);
  const int nb = m.bulk_count();
  const int ni = m.interface_count();
  std::vector<std::vector<LocalBlock>> slots(nb + ni);
  parallel_for(slots.size(), [&](std::size_t k) {
    const int idx = static_cast<int>(k);
    if (idx < nb) {
      slots[k].push_back(make_block(dofs.element_dofs(idx), bulk_stiffness(m.size, c.a0[idx]), 1.0));
      return;
    }
    const int t = idx - nb;
    slots[k].push_back(make_block(dofs.interface_element_dofs(t), interface_stiffness(m.size, c.a1[t]), 1.0));
    for (int owner : m.interface_owners[t]) slots[k].push_back(coupling_for(dofs, m, c, t, owner));
  });
  return from_blocks(dofs.size(), slots);
}

SparseMatrix assemble_operator(const DofMap& dofs, const mesh::MeshPair& m, const CoefficientSet& c) {
  return free_block(dofs, assemble_full_operator(dofs, m, c));
}

SparseMatrix assemble_restricted_operator(const DofMap& dofs, const mesh::MeshPair& m, const mesh::CoarseMesh& coarse,
                                          const CoefficientSet& c, int coarse_element) {
  if (coarse_element < 0 || coarse_element >= coarse.bulk_count())
    throw AssemblyError(fmt::format("coarse element {} does not exist", coarse_element));
  std::vector<std::vector<LocalBlock>> slots(1);
  auto& blocks = slots[0];
  for (int e : coarse.bulk_members[coarse_element])
    blocks.push_back(make_block(dofs.element_dofs(e), bulk_stiffness(m.size, c.a0[e]), 1.0));
  for (int face : coarse.bulk_faces[coarse_element]) {
    const double weight = 1.0 / coarse.n_of(face);
    for (int t : coarse.interface_members[face]) {
      blocks.push_back(make_block(dofs.interface_element_dofs(t), interface_stiffness(m.size, c.a1[t]), weight));
      for (int owner : m.interface_owners[t])
        if (coarse.bulk_of_fine[owner] == coarse_element) blocks.push_back(coupling_for(dofs, m, c, t, owner));
    }
  }
  return free_block(dofs, from_blocks(dofs.size(), slots));
}

Vector assemble_load(const DofMap& dofs, const mesh::MeshPair& m, const PointFunction& f0, const PointFunction& f1) {
  const Rule& q = gauss5();
  const double h = m.size;
  const int nb = m.bulk_count();
  const int ni = m.interface_count();
  std::vector<std::array<double, 4>> local(nb + ni, {0, 0, 0, 0});
  parallel_for(local.size(), [&](std::size_t k) {
    const int idx = static_cast<int>(k);
    if (idx < nb) {
      const geom::Point origin = m.node_point(m.element_nodes(idx)[0]);
      for (std::size_t i = 0; i < q.x.size(); ++i)
        for (std::size_t j = 0; j < q.x.size(); ++j) {
          const double f = f0({origin.x + h * q.x[i], origin.y + h * q.x[j]});
          for (int p = 0; p < 4; ++p) local[k][p] += q.w[i] * q.w[j] * h * h * f * shape(p, q.x[i], q.x[j]);
        }
      return;
    }
    const auto& el = m.interface_elements[idx - nb];
    const geom::Point a = m.node_point(el.n0);
    const geom::Point b = m.node_point(el.n1);
    for (std::size_t i = 0; i < q.x.size(); ++i) {
      const double f = f1(a + q.x[i] * (b - a));
      local[k][0] += q.w[i] * h * f * (1.0 - q.x[i]);
      local[k][1] += q.w[i] * h * f * q.x[i];
    }
  });
  Vector full = Vector::Zero(dofs.size());
  for (int e = 0; e < nb; ++e)
    for (int p = 0; p < 4; ++p) full[dofs.element_dofs(e)[p]] += local[e][p];
  for (int t = 0; t < ni; ++t)
    for (int p = 0; p < 2; ++p) full[dofs.interface_element_dofs(t)[p]] += local[nb + t][p];
  return dofs.restrict_to_free(full);
}

struct SpdSolver::Impl {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
};

SpdSolver::SpdSolver(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  impl_->ldlt.compute(a);
  if (impl_->ldlt.info() != Eigen::Success) throw SolverError("sparse LDL^T factorization failed");
  const Vector d = impl_->ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!(d[i] > 0.0)) throw SolverError(fmt::format("nonpositive pivot {} at row {}", d[i], i));
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Vector SpdSolver::solve(const Vector& rhs) const { return impl_->ldlt.solve(rhs); }

Vector solve_dirichlet(const SparseMatrix& a, const Vector& f) {
  if (a.rows() != f.size()) throw SolverError("operator and load sizes differ");
  const double fmax = f.lpNorm<Eigen::Infinity>();
  if (fmax == 0.0) return Vector::Zero(f.size());
  const SpdSolver solver(a);
  const Vector u = solver.solve(f);
  const double res = (a * u - f).lpNorm<Eigen::Infinity>();
  if (!(res <= 1e-10 * fmax)) throw SolverError(fmt::format("residual {} exceeds tolerance", res / fmax));
  return u;
}

double energy_norm(const SparseMatrix& a, const Vector& v) {
  if (a.cols() != v.size()) throw SolverError("operator and vector sizes differ");
  const double q = v.dot(a * v);
  const Vector av = v.cwiseAbs();
  const double scale = av.dot(a.cwiseAbs() * av);
  if (q < -1e-12 * scale) throw SolverError(fmt::format("negative energy {} (scale {})", q, scale));
  return std::sqrt(std::max(q, 0.0));
}

SparseMatrix prolongation_matrix(const DofMap& from_dofs, const mesh::MeshPair& from, const DofMap& to_dofs,
                                 const mesh::MeshPair& to) {
  const double ratio = from.size / to.size;
  const int r = static_cast<int>(std::lround(ratio));
  if (r < 1 || std::abs(ratio - r) > 1e-9 || to.nx != r * from.nx || to.ny != r * from.ny)
    throw AssemblyError("grids are not nested");
  std::map<std::pair<int, int>, int> from_edge;
  for (int t = 0; t < from.interface_count(); ++t)
    from_edge[{from.interface_elements[t].n0, from.interface_elements[t].n1}] = t;

  std::vector<Triplet> triplets;
  auto add = [&](int row_full, int col_full, double w) {
    const int i = to_dofs.free_index(row_full);
    const int j = from_dofs.free_index(col_full);
    if (i >= 0 && j >= 0 && w != 0.0) triplets.emplace_back(i, j, w);
  };
  for (int d = 0; d < to_dofs.size(); ++d) {
    if (to_dofs.is_dirichlet(d)) continue;
    const Dof& dof = to_dofs.dof(d);
    const int tx = dof.node % (to.nx + 1);
    const int ty = dof.node / (to.nx + 1);
    if (dof.codim == 0) {
      // any coarse element of the same segment whose closure holds the node
      int found = -1;
      for (int cy : {ty / r, ty / r - 1})
        for (int cx : {tx / r, tx / r - 1}) {
          if (found >= 0 || cx < 0 || cy < 0 || cx >= from.nx || cy >= from.ny) continue;
          if (tx < cx * r || tx > (cx + 1) * r || ty < cy * r || ty > (cy + 1) * r) continue;
          if (from.bulk_segment[cy * from.nx + cx] == dof.segment) found = cy * from.nx + cx;
        }
      if (found < 0) throw AssemblyError(fmt::format("no coarse element carries DOF {}", d));
      const double xi = static_cast<double>(tx - (found % from.nx) * r) / r;
      const double eta = static_cast<double>(ty - (found / from.nx) * r) / r;
      for (int p = 0; p < 4; ++p) add(d, from_dofs.element_dofs(found)[p], shape(p, xi, eta));
      continue;
    }
    if (tx % r == 0 && ty % r == 0) {
      const int src = from_dofs.interface_dof(from.node_index(tx / r, ty / r));
      if (src < 0) throw AssemblyError(fmt::format("no coarse interface node for DOF {}", d));
      add(d, src, 1.0);
      continue;
    }
    const bool horizontal = (ty % r == 0);
    const int n0 = from.node_index(tx / r, ty / r);
    const int n1 = horizontal ? n0 + 1 : n0 + from.nx + 1;
    const auto it = from_edge.find({n0, n1});
    if (it == from_edge.end()) throw AssemblyError(fmt::format("no coarse interface element for DOF {}", d));
    const double s = horizontal ? static_cast<double>(tx % r) / r : static_cast<double>(ty % r) / r;
    const auto& ids = from_dofs.interface_element_dofs(it->second);
    add(d, ids[0], 1.0 - s);
    add(d, ids[1], s);
  }
  SparseMatrix p(to_dofs.free_count(), from_dofs.free_count());
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

Vector prolongate(const DofMap& from_dofs, const mesh::MeshPair& from, const DofMap& to_dofs, const mesh::MeshPair& to,
                  const Vector& v) {
  return prolongation_matrix(from_dofs, from, to_dofs, to) * v;
}

void write_field_csv(const std::filesystem::path& path, const DofMap& dofs, const mesh::MeshPair& m,
                     const Vector& free_values) {
  const Vector full = dofs.extend(free_values);
  auto out = fmt::output_file(path.string());
  out.print("x,y,codim,segment,value\n");
  for (int i = 0; i < dofs.size(); ++i) {
    const Dof& d = dofs.dof(i);
    const geom::Point p = m.node_point(d.node);
    out.print("{},{},{},{},{}\n", p.x, p.y, d.codim, d.segment, full[i]);
  }
}

}  // namespace mdlod::fem
