#include "mdlod/error.hpp"
#include "mdlod/fem.hpp"
#include "mdlod/lod.hpp"
#include "mdlod/parallel.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

using namespace mdlod;
using namespace mdlod::lod;

namespace {

geom::MixedDomain cross() {
  return geom::build_domain({{0, 0, 1, 1}, {{{0.5, 0}, {0.5, 1}}, {{0, 0.5}, {1, 0.5}}}});
}

geom::MixedDomain plain() { return geom::build_domain({{0, 0, 1, 1}, {}}); }

fem::CoefficientSet random_coefficients(const mesh::MeshPair& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  fem::CoefficientSet c;
  for (int e = 0; e < m.bulk_count(); ++e) c.a0.push_back(u(rng));
  for (int t = 0; t < m.interface_count(); ++t) {
    c.a1.push_back(1.0 + u(rng));
    c.b1.push_back(0.5 + u(rng));
  }
  return c;
}

fem::CoefficientSet unit_coefficients(const mesh::MeshPair& m) {
  const auto one = [](geom::Point) { return 1.0; };
  return fem::sample_coefficients(m, one, one, one);
}

Discretization cross_problem(int n_per_unit, int r, std::uint64_t seed, Interpolation mode = Interpolation::nodal) {
  auto h = mesh::build_hierarchy(cross(), n_per_unit, r);
  auto c = random_coefficients(h.fine, seed);
  return Discretization(std::move(h), std::move(c), mode);
}

Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Element averages by 2x2 Gauss quadrature of the bilinear/linear interpolant.
Vector oracle_qoi(const Discretization& d, const Vector& full) {
  const auto& f = d.fine();
  const auto& c = d.coarse();
  const auto& dofs = d.dofs();
  Vector q = Vector::Zero(c.element_count());
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  for (int e = 0; e < f.bulk_count(); ++e) {
    const auto ids = dofs.element_dofs(e);
    for (double s : pts)
      for (double t : pts) {
        const double val = full[ids[0]] * (1 - s) * (1 - t) + full[ids[1]] * s * (1 - t) + full[ids[2]] * s * t +
                           full[ids[3]] * (1 - s) * t;
        q[c.bulk_of_fine[e]] += 0.25 * f.size * f.size * val;
      }
  }
  for (int t = 0; t < f.interface_count(); ++t) {
    const auto ids = dofs.interface_element_dofs(t);
    for (double s : pts)
      q[c.bulk_count() + c.interface_of_fine[t]] += 0.5 * f.size * (full[ids[0]] * (1 - s) + full[ids[1]] * s);
  }
  for (int k = 0; k < c.bulk_count(); ++k) q[k] /= c.bulk_measure[k];
  for (int k = 0; k < c.interface_count(); ++k) q[c.bulk_count() + k] /= c.interface_measure[k];
  return q;
}

Vector column(const MultiscaleBasis& b, int t) { return Vector(b.phi.col(t)); }

std::set<int> support_elements(const Discretization& d, const Vector& v) {
  std::set<int> out;
  const Vector full = d.dofs().extend(v);
  for (int e = 0; e < d.fine().bulk_count(); ++e)
    for (int id : d.dofs().element_dofs(e))
      if (full[id] != 0.0) out.insert(d.coarse().bulk_of_fine[e]);
  return out;
}

}  // namespace

TEST_SUITE("lod") {
  TEST_CASE("constraints agree with quadrature averages") {
    const Discretization d = cross_problem(4, 2, 1);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector v = random_vector(d.free_count(), rng);
      CHECK((d.B() * v - oracle_qoi(d, d.dofs().extend(v))).lpNorm<Eigen::Infinity>() <= 1e-12);
      CHECK((qoi(d.dofs(), d.fine(), d.coarse(), v) - d.B() * v).norm() == 0.0);
    }
    // the averaging rows of the unmasked function 1 are all ones
    CHECK((oracle_qoi(d, Vector::Ones(d.dofs().size())) - Vector::Ones(d.coarse_count())).norm() <= 1e-13);
    // brute force: rows stacked from unit vectors
    REQUIRE(d.free_count() <= 200);
    const Eigen::MatrixXd b = Eigen::MatrixXd(d.B());
    for (int k = 0; k < d.free_count(); ++k)
      CHECK((b.col(k) - oracle_qoi(d, d.dofs().extend(Vector::Unit(d.free_count(), k)))).norm() <= 1e-14);
  }

  TEST_CASE("bulk rows only touch DOFs of their own element") {
    const Discretization d = cross_problem(4, 2, 1);
    const Eigen::MatrixXd b = Eigen::MatrixXd(d.B());
    for (int k = 0; k < d.coarse().bulk_count(); ++k)
      for (int j = 0; j < d.free_count(); ++j)
        if (b(k, j) != 0.0) {
          const auto& el = d.element_dofs(k);
          CHECK(std::binary_search(el.begin(), el.end(), j));
          CHECK(d.dofs().dof(d.dofs().free_dofs()[j]).codim == 0);
        }
  }

  TEST_CASE("hat at an element-interior node") {
    auto h = mesh::build_hierarchy(plain(), 4, 4);
    auto c = unit_coefficients(h.fine);
    const Discretization d(std::move(h), std::move(c), Interpolation::nodal);
    const int node = d.fine().node_index(6, 6);  // inside coarse element (1, 1)
    const int fi = d.dofs().free_index(d.dofs().bulk_dof(node, 0));
    const Vector q = d.B() * Vector::Unit(d.free_count(), fi);
    const double h2 = d.fine().size * d.fine().size;
    for (int k = 0; k < d.coarse_count(); ++k)
      CHECK(q[k] == doctest::Approx(k == 5 ? h2 / d.coarse().bulk_measure[5] : 0.0).epsilon(1e-14));
  }

  TEST_CASE("functions with vanishing averages are annihilated by the interpolation") {
    for (Interpolation mode : {Interpolation::nodal, Interpolation::pou}) {
      const Discretization d = cross_problem(4, 4, 3, mode);
      std::mt19937_64 rng(4);
      // one bubble-like hat per coarse element at an interior fine node
      std::vector<int> hat(d.coarse_count(), -1);
      const Eigen::MatrixXd b = Eigen::MatrixXd(d.B());
      for (int k = 0; k < d.coarse_count(); ++k)
        for (int j = 0; j < d.free_count() && hat[k] < 0; ++j)
          if (b(k, j) != 0.0 && b.col(j).cwiseAbs().sum() == b(k, j)) hat[k] = j;
      Vector v = random_vector(d.free_count(), rng);
      const Vector q = d.B() * v;
      for (int k = 0; k < d.coarse_count(); ++k) {
        REQUIRE(hat[k] >= 0);
        v[hat[k]] -= q[k] / b(k, hat[k]);
      }
      CHECK((d.B() * v).lpNorm<Eigen::Infinity>() <= 1e-12);
      CHECK((d.P() * (d.B() * v)).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }

  TEST_CASE("nodal interpolation values") {
    auto h = mesh::build_hierarchy(plain(), 4, 2);
    auto c = unit_coefficients(h.fine);
    const Discretization d(std::move(h), std::move(c), Interpolation::nodal);
    const auto& f = d.fine();
    auto value_at_coarse_node = [&](const Vector& v, int cx, int cy) {
      const int fi = d.dofs().free_index(d.dofs().bulk_dof(f.node_index(2 * cx, 2 * cy), 0));
      return fi < 0 ? 0.0 : v[fi];
    };
    const Vector ones = d.P() * Vector::Ones(d.coarse_count());
    for (int cy = 0; cy <= 4; ++cy)
      for (int cx = 0; cx <= 4; ++cx) {
        const bool interior = cx > 0 && cy > 0 && cx < 4 && cy < 4;
        CHECK(value_at_coarse_node(ones, cx, cy) == doctest::Approx(interior ? 1.0 : 0.0));
      }
    const Vector unit = d.P() * Vector::Unit(d.coarse_count(), 5);  // element (1, 1)
    for (int cy = 0; cy <= 4; ++cy)
      for (int cx = 0; cx <= 4; ++cx) {
        const bool corner = (cx == 1 || cx == 2) && (cy == 1 || cy == 2);
        CHECK(value_at_coarse_node(unit, cx, cy) == doctest::Approx(corner ? 0.25 : 0.0));
      }
    CHECK(d.P().rows() == d.free_count());
  }

  TEST_CASE("nodal interpolation needs a structured coarse grid") {
    auto h = mesh::build_hierarchy(cross(), 4, 2);
    h.coarse_grid.reset();
    auto c = unit_coefficients(h.fine);
    CHECK_THROWS_AS(Discretization(std::move(h), std::move(c), Interpolation::nodal), AssemblyError);
  }

  TEST_CASE("partition of unity weights") {
    const Discretization d = cross_problem(4, 4, 5, Interpolation::pou);
    const Eigen::MatrixXd p = Eigen::MatrixXd(d.P());
    CHECK((p.rowwise().sum() - Vector::Ones(d.free_count())).lpNorm<Eigen::Infinity>() <= 1e-13);
    CHECK(p.minCoeff() >= 0.0);
    // weights vanish outside the first-order patch of the element
    const auto& c = d.coarse();
    for (int k = 0; k < c.bulk_count(); ++k) {
      std::set<int> cover{k};
      cover.insert(c.bulk_neighbors[k].begin(), c.bulk_neighbors[k].end());
      for (int j = 0; j < d.free_count(); ++j) {
        if (p(j, k) == 0.0) continue;
        const auto& dof = d.dofs().dof(d.dofs().free_dofs()[j]);
        CHECK(dof.codim == 0);
        bool touches = false;
        for (int e = 0; e < d.fine().bulk_count(); ++e) {
          const auto nodes = d.fine().element_nodes(e);
          if (std::find(nodes.begin(), nodes.end(), dof.node) != nodes.end() && cover.count(c.bulk_of_fine[e]))
            touches = true;
        }
        CHECK(touches);
      }
    }
  }

  TEST_CASE("Kronecker property of every basis variant") {
    for (Interpolation mode : {Interpolation::nodal, Interpolation::pou}) {
      const Discretization d = cross_problem(4, 4, 6, mode);
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d.coarse_count(), d.coarse_count());
      for (auto [variant, ell] : {std::pair{Variant::global, 0}, {Variant::stabilized, 1}, {Variant::stabilized, 2},
                                  {Variant::naive, 1}, {Variant::naive, 2}}) {
        const MultiscaleBasis basis = build_basis(d, variant, ell);
        CHECK((Eigen::MatrixXd(d.B() * basis.phi) - eye).cwiseAbs().maxCoeff() <= 1e-9);
      }
    }
  }

  TEST_CASE("global basis equals the dense saddle-point oracle") {
    const Discretization d = cross_problem(4, 4, 7);
    REQUIRE(d.free_count() + d.coarse_count() <= 320);
    const MultiscaleBasis basis = build_basis(d, Variant::global, 0);
    for (int t = 0; t < d.coarse_count(); ++t) {
      const auto [x, l] = oracle::dense_saddle(d, Vector::Zero(d.free_count()), Vector::Unit(d.coarse_count(), t));
      CHECK(fem::energy_norm(d.A(), column(basis, t) - x) <= 1e-9);
    }
  }

  TEST_CASE("saturated stabilized basis equals the global basis") {
    for (Interpolation mode : {Interpolation::nodal, Interpolation::pou}) {
      const Discretization d = cross_problem(4, 4, 8, mode);
      const MultiscaleBasis global = build_basis(d, Variant::global, 0);
      const MultiscaleBasis stab = build_basis(d, Variant::stabilized, 4);
      for (int t = 0; t < d.coarse_count(); ++t)
        CHECK(fem::energy_norm(d.A(), column(global, t) - column(stab, t)) <= 1e-8);
    }
  }

  TEST_CASE("localized supports") {
    const Discretization d = cross_problem(8, 2, 9);
    for (int ell : {1, 2}) {
      const MultiscaleBasis stab = build_basis(d, Variant::stabilized, ell);
      const MultiscaleBasis naive = build_basis(d, Variant::naive, ell);
      for (int t = 0; t < d.coarse_count(); ++t) {
        const auto wide = patch_of_element(d.coarse(), t, ell + 1).bulk;
        const auto narrow = patch_of_element(d.coarse(), t, ell).bulk;
        for (int k : support_elements(d, column(stab, t))) CHECK(std::binary_search(wide.begin(), wide.end(), k));
        for (int k : support_elements(d, column(naive, t)))
          CHECK(std::binary_search(narrow.begin(), narrow.end(), k));
      }
    }
  }

  TEST_CASE("element correctors") {
    const Discretization d = cross_problem(4, 4, 10);
    const int t0 = 5;
    const auto zero = corrector_solve(d, t0, 1, Vector::Zero(d.coarse_count()));
    CHECK(zero.corrector.norm() == 0.0);
    CHECK(zero.multipliers.norm() == 0.0);

    const Vector q = Vector::Unit(d.coarse_count(), t0);
    const auto k1 = corrector_solve(d, t0, 1, q);
    const Vector ih = d.P() * q;
    CHECK((d.B() * k1.corrector)[t0] == doctest::Approx(-(q - d.B() * ih)[t0]).epsilon(1e-10));
    for (int k = 0; k < d.coarse().bulk_count(); ++k)
      if (!std::binary_search(k1.patch.bulk.begin(), k1.patch.bulk.end(), k))
        for (int e : d.coarse().bulk_members[k])
          for (int id : d.dofs().element_dofs(e))
            if (d.dofs().free_index(id) >= 0) CHECK(k1.corrector[d.dofs().free_index(id)] == 0.0);

    // saturated patch against the dense global saddle point of the unlocalized corrector
    const auto k_sat = corrector_solve(d, t0, 6, q);
    Vector bottom = Vector::Zero(d.coarse_count());
    const Vector diff = q - d.B() * ih;
    for (const auto& [row, w] : d.constraint_weights(t0)) bottom[row] = -w * diff[row];
    const auto [x, l] = oracle::dense_saddle(d, d.restricted_operator(t0) * ih, bottom);
    CHECK(fem::energy_norm(d.A(), k_sat.corrector - x) <= 1e-9);
    CHECK((k_sat.multipliers - l).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + l.lpNorm<Eigen::Infinity>()));
    CHECK_THROWS_AS(corrector_solve(d, t0, 0, q), SolverError);
    CHECK_THROWS_AS(corrector_solve(d, 99, 1, q), SolverError);
  }

  TEST_CASE("constraint weights and restricted operators add up") {
    const Discretization d = cross_problem(4, 2, 11);
    Vector total = Vector::Zero(d.coarse_count());
    SparseMatrix sum(d.free_count(), d.free_count());
    for (int k = 0; k < d.coarse().bulk_count(); ++k) {
      for (const auto& [row, w] : d.constraint_weights(k)) total[row] += w;
      sum += d.restricted_operator(k);
    }
    CHECK((total - Vector::Ones(d.coarse_count())).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(Eigen::MatrixXd(sum - d.A()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("R^ell preserves averages and reproduces the global basis when saturated") {
    const Discretization d = cross_problem(4, 4, 12);
    std::mt19937_64 rng(13);
    const MultiscaleBasis global = build_basis(d, Variant::global, 0);
    for (int trial = 0; trial < 4; ++trial) {
      const Vector v = random_vector(d.free_count(), rng);
      for (int ell : {1, 2}) {
        const Vector rv = apply_Rl(d, ell, v);
        CHECK((d.B() * rv - d.B() * v).lpNorm<Eigen::Infinity>() <= 1e-9);
      }
      // saturated R^ell v is the multiscale function with the averages of v
      const Vector r_sat = apply_Rl(d, 4, v);
      const Vector ms = global.phi * (d.B() * v);
      CHECK(fem::energy_norm(d.A(), r_sat - ms) <= 1e-9 * fem::energy_norm(d.A(), ms));
      const Vector defect = global.phi.transpose() * (d.A() * (v - r_sat));
      CHECK(defect.lpNorm<Eigen::Infinity>() <= 1e-9 * (d.A() * v).lpNorm<Eigen::Infinity>());
    }
  }

  TEST_CASE("multiscale Galerkin solve") {
    const Discretization d = cross_problem(4, 4, 14);
    const MultiscaleBasis basis = build_basis(d, Variant::stabilized, 2);
    const auto zero = solve_multiscale(basis, d.A(), Vector::Zero(d.free_count()));
    CHECK(zero.u.norm() == 0.0);

    std::mt19937_64 rng(15);
    const Vector c = random_vector(d.coarse_count(), rng);
    const Vector target = basis.phi * c;
    const auto exact = solve_multiscale(basis, d.A(), d.A() * target);
    CHECK((exact.u - target).norm() <= 1e-9 * target.norm());

    const Vector f = random_vector(d.free_count(), rng);
    const Vector u_h = fem::solve_dirichlet(d.A(), f);
    const auto ms = solve_multiscale(basis, d.A(), f);
    const double best = fem::energy_norm(d.A(), u_h - ms.u);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector y = ms.coefficients + 0.1 * random_vector(d.coarse_count(), rng);
      CHECK(best <= fem::energy_norm(d.A(), u_h - basis.phi * y) + 1e-12);
    }
    const Vector galerkin = basis.phi.transpose() * (d.A() * ms.u - f);
    CHECK(galerkin.lpNorm<Eigen::Infinity>() <= 1e-10 * (basis.phi.transpose() * f).lpNorm<Eigen::Infinity>());
  }

  TEST_CASE("decay profiles") {
    const Discretization d = cross_problem(8, 2, 16);
    const MultiscaleBasis stab = build_basis(d, Variant::stabilized, 2);
    const int t = 27;
    const auto prof = decay_profile(d, column(stab, t), t, 8);
    for (std::size_t m = 0; m + 1 < prof.size(); ++m) CHECK(prof[m + 1] <= prof[m]);
    for (int m = 3; m <= 8; ++m) CHECK(prof[m - 1] == 0.0);
    CHECK(prof[0] > 0.0);

    const MultiscaleBasis global = build_basis(d, Variant::global, 0);
    const auto g = decay_profile(d, column(global, t), t, 8);
    CHECK(g.back() == 0.0);
    // least-squares slope of the log-profile over the nonzero part
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t m = 0; m < g.size(); ++m)
      if (g[m] > 0.0) {
        xs.push_back(static_cast<double>(m + 1));
        ys.push_back(std::log(g[m]));
      }
    REQUIRE(xs.size() >= 2);
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    MESSAGE("global column decay slope " << sxy / sxx);
    CHECK(sxy / sxx <= -0.5);
  }

  TEST_CASE("basis is independent of the thread count") {
    const Discretization d = cross_problem(4, 4, 17, Interpolation::pou);
    set_thread_count(1);
    const MultiscaleBasis one = build_basis(d, Variant::stabilized, 1);
    set_thread_count(3);
    const MultiscaleBasis three = build_basis(d, Variant::stabilized, 1);
    const MultiscaleBasis naive3 = build_basis(d, Variant::naive, 1);
    set_thread_count(1);
    const MultiscaleBasis naive1 = build_basis(d, Variant::naive, 1);
    CHECK(Eigen::MatrixXd(one.phi - three.phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::MatrixXd(naive1.phi - naive3.phi).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("basis dump") {
    const Discretization d = cross_problem(4, 2, 18);
    const MultiscaleBasis basis = build_basis(d, Variant::naive, 1);
    const auto path = std::filesystem::temp_directory_path() / "mdlod_basis.txt";
    write_basis(path, basis);
    std::ifstream in(path);
    int rows = 0;
    int cols = 0;
    std::string variant;
    int ell = 0;
    in >> rows >> cols >> variant >> ell;
    CHECK(rows == d.free_count());
    CHECK(cols == d.coarse_count());
    CHECK(variant == "naive");
    CHECK(ell == 1);
    Eigen::MatrixXd read = Eigen::MatrixXd::Zero(rows, cols);
    for (int k = 0; k < cols; ++k) {
      int col = 0;
      int nnz = 0;
      in >> col >> nnz;
      CHECK(col == k);
      for (int i = 0; i < nnz; ++i) {
        std::string item;
        in >> item;
        const auto colon = item.find(':');
        read(std::stoi(item.substr(0, colon)), k) = std::stod(item.substr(colon + 1));
      }
    }
    CHECK((read - Eigen::MatrixXd(basis.phi)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("global basis reproduces the fine solution for elementwise constant sources") {
    // such a load is a combination of the averaging functionals and vanishes on their kernel
    const Discretization d = cross_problem(4, 4, 19);
    const auto one = [](geom::Point) { return 1.0; };
    const Vector f = fem::assemble_load(d.dofs(), d.fine(), one, one);
    const Vector u_h = fem::solve_dirichlet(d.A(), f);
    const auto ms = solve_multiscale(build_basis(d, Variant::global, 0), d.A(), f);
    CHECK(fem::energy_norm(d.A(), u_h - ms.u) <= 1e-10 * fem::energy_norm(d.A(), u_h));
    const auto local = solve_multiscale(build_basis(d, Variant::naive, 1), d.A(), f);
    CHECK(fem::energy_norm(d.A(), u_h - local.u) > 1e-6 * fem::energy_norm(d.A(), u_h));
  }
}
