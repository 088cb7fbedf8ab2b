#pragma once

// Brute-force references shared by the unit tests and the acceptance checks.

#include "mdlod/fem.hpp"
#include "mdlod/lod.hpp"

#include <Eigen/Dense>

#include <utility>

namespace mdlod::oracle {

/// Dense operator on free DOFs from closed-form element integrals.
inline Eigen::MatrixXd dense_operator(const fem::DofMap& dofs, const mesh::MeshPair& m, const fem::CoefficientSet& c) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dofs.size(), dofs.size());
  const double q1[4][4] = {{4, -1, -2, -1}, {-1, 4, -1, -2}, {-2, -1, 4, -1}, {-1, -2, -1, 4}};
  for (int e = 0; e < m.bulk_count(); ++e) {
    const int ix = e % m.nx;
    const int iy = e / m.nx;
    const int nodes[4] = {iy * (m.nx + 1) + ix, iy * (m.nx + 1) + ix + 1, (iy + 1) * (m.nx + 1) + ix + 1,
                          (iy + 1) * (m.nx + 1) + ix};
    for (int p = 0; p < 4; ++p)
      for (int r = 0; r < 4; ++r)
        full(dofs.bulk_dof(nodes[p], m.bulk_segment[e]), dofs.bulk_dof(nodes[r], m.bulk_segment[e])) +=
            c.a0[e] * q1[p][r] / 6.0;
  }
  const double h = m.size;
  for (int t = 0; t < m.interface_count(); ++t) {
    const int n[2] = {m.interface_elements[t].n0, m.interface_elements[t].n1};
    for (int p = 0; p < 2; ++p)
      for (int r = 0; r < 2; ++r) {
        full(dofs.interface_dof(n[p]), dofs.interface_dof(n[r])) += c.a1[t] / h * (p == r ? 1.0 : -1.0);
        const double mass = c.b1[t] * h / 6.0 * (p == r ? 2.0 : 1.0);
        for (int owner : m.interface_owners[t]) {
          const int s = m.bulk_segment[owner];
          const int bp = dofs.bulk_dof(n[p], s);
          const int br = dofs.bulk_dof(n[r], s);
          const int ip = dofs.interface_dof(n[p]);
          const int ir = dofs.interface_dof(n[r]);
          full(bp, br) += mass;
          full(ip, ir) += mass;
          full(bp, ir) -= mass;
          full(ip, br) -= mass;
        }
      }
  }
  Eigen::MatrixXd out(dofs.free_count(), dofs.free_count());
  for (int i = 0; i < dofs.free_count(); ++i)
    for (int j = 0; j < dofs.free_count(); ++j) out(i, j) = full(dofs.free_dofs()[i], dofs.free_dofs()[j]);
  return out;
}

/// Dense solve of [A B^T; B 0] [x; l] = [top; bottom].
inline std::pair<fem::Vector, fem::Vector> dense_saddle(const lod::Discretization& d, const fem::Vector& top,
                                                        const fem::Vector& bottom) {
  const int n = d.free_count();
  const int m = d.coarse_count();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n + m, n + m);
  s.topLeftCorner(n, n) = Eigen::MatrixXd(d.A());
  s.bottomLeftCorner(m, n) = Eigen::MatrixXd(d.B());
  s.topRightCorner(n, m) = Eigen::MatrixXd(d.B()).transpose();
  fem::Vector rhs(n + m);
  rhs << top, bottom;
  const fem::Vector x = s.fullPivLu().solve(rhs);
  return {x.head(n), x.tail(m)};
}

}  // namespace mdlod::oracle
