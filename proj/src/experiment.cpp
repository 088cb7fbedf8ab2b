#include "mdlod/experiment.hpp"

#include "mdlod/error.hpp"
#include "mdlod/geometry.hpp"
#include "mdlod/parallel.hpp"

#include <fmt/core.h>
#include <fmt/os.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>

namespace mdlod::experiment {

namespace {

using nlohmann::json;

double parse_size(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(fmt::format("{}: expected a number or a fraction such as \"1/32\", got {}", key, v.dump()));
}

std::vector<double> parse_sizes(const json& v, const std::string& key) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(parse_size(x, key));
  } else {
    out.push_back(parse_size(v, key));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string, got {}", key, v.dump()));
  return v.get<std::string>();
}

CoefficientSpec parse_coefficient(const json& v, const std::string& key) {
  CoefficientSpec c;
  if (v.is_number()) {
    c.kind = CoefficientSpec::Kind::constant;
    c.value = v.get<double>();
    return c;
  }
  if (v.is_string()) {
    c.kind = CoefficientSpec::Kind::analytic;
    c.analytic = v.get<std::string>();
    analytic_function(c.analytic);  // rejects unknown names early
    return c;
  }
  if (!v.is_object() || v.value("kind", "") != "random")
    throw ConfigError(fmt::format("{}: expected a number, a field name or {{\"kind\": \"random\", ...}}", key));
  for (const auto& [k, _] : v.items())
    if (k != "kind" && k != "seed" && k != "lo" && k != "hi")
      throw ConfigError(fmt::format("{}: unknown field {}", key, k));
  c.kind = CoefficientSpec::Kind::random;
  if (v.contains("seed")) {
    if (!v["seed"].is_number_unsigned()) throw ConfigError(fmt::format("{}: seed must be a nonnegative integer", key));
    c.seed = v["seed"].get<std::uint64_t>();
  }
  if (!v.contains("lo") || !v.contains("hi")) throw ConfigError(fmt::format("{}: random field needs lo and hi", key));
  c.lo = v["lo"].get<double>();
  c.hi = v["hi"].get<double>();
  return c;
}

void check_coefficient(const CoefficientSpec& c, const std::string& key) {
  switch (c.kind) {
    case CoefficientSpec::Kind::constant:
      if (!(c.value > 0.0) || !std::isfinite(c.value)) throw ConfigError(fmt::format("{} must be positive", key));
      break;
    case CoefficientSpec::Kind::analytic:
      break;
    case CoefficientSpec::Kind::random:
      if (!c.seed) throw ConfigError(fmt::format("{}: random field needs a seed", key));
      if (!(c.lo > 0.0)) throw ConfigError(fmt::format("{}: lower bound {} is not positive", key, c.lo));
      if (!(c.hi >= c.lo) || !std::isfinite(c.hi)) throw ConfigError(fmt::format("{}: upper bound below lower", key));
      break;
  }
}

// Integer n with n * x == 1 up to rounding, or 0.
int reciprocal(double x) {
  if (!(x > 0.0)) return 0;
  const double n = std::round(1.0 / x);
  return std::abs(n * x - 1.0) <= 1e-9 ? static_cast<int>(n) : 0;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<double> field_on(const CoefficientSpec& c, std::uint64_t stream, const std::vector<geom::Point>& points) {
  std::vector<double> out(points.size());
  switch (c.kind) {
    case CoefficientSpec::Kind::constant:
      std::fill(out.begin(), out.end(), c.value);
      break;
    case CoefficientSpec::Kind::analytic: {
      const auto f = analytic_function(c.analytic);
      std::transform(points.begin(), points.end(), out.begin(), f);
      break;
    }
    case CoefficientSpec::Kind::random:
      // A0 draws from the seed itself; A1 and B1 get derived keys so they stay independent
      for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = random_value(stream == 0 ? *c.seed : splitmix64(*c.seed ^ stream), i, c.lo, c.hi);
      break;
  }
  return out;
}

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

ExperimentConfig parse_config(const KeyValueDocument& doc, const std::filesystem::path& base_dir) {
  doc.require_known_keys({"experiment", "geometry", "A0", "A1", "B1", "f0", "f1", "H", "h", "ell", "variant",
                          "coarse", "interpolation", "rho0", "rho1", "threads", "output"});
  ExperimentConfig c;
  if (doc.contains("experiment")) c.experiment = as_string(doc.at("experiment"), "experiment");
  if (c.experiment.empty() || c.experiment.find_first_of(",\"\n\r") != std::string::npos)
    throw ConfigError("experiment: name must be nonempty without commas, quotes or line breaks");
  c.geometry = as_string(doc.at("geometry"), "geometry");
  if (c.geometry.is_relative()) c.geometry = base_dir / c.geometry;
  c.a0 = doc.contains("A0") ? parse_coefficient(doc.at("A0"), "A0") : CoefficientSpec{};
  c.a1 = doc.contains("A1") ? parse_coefficient(doc.at("A1"), "A1") : CoefficientSpec{};
  c.b1 = doc.contains("B1") ? parse_coefficient(doc.at("B1"), "B1") : CoefficientSpec{};
  if (doc.contains("f0")) c.f0 = as_string(doc.at("f0"), "f0");
  if (doc.contains("f1")) c.f1 = as_string(doc.at("f1"), "f1");
  analytic_function(c.f0);
  analytic_function(c.f1);
  c.H = parse_sizes(doc.at("H"), "H");
  c.h = parse_size(doc.at("h"), "h");
  if (doc.contains("ell")) {
    const json& v = doc.at("ell");
    c.ell.clear();
    for (const auto& x : v.is_array() ? v : json::array({v})) {
      if (!x.is_number_integer() || x.get<int>() < 1) throw ConfigError("ell: expected positive integers");
      c.ell.push_back(x.get<int>());
    }
    if (c.ell.empty()) throw ConfigError("ell: empty list");
  }
  if (doc.contains("variant")) {
    const json& v = doc.at("variant");
    c.variants.clear();
    for (const auto& x : v.is_array() ? v : json::array({v}))
      c.variants.push_back(lod::parse_variant(as_string(x, "variant")));
    if (c.variants.empty()) throw ConfigError("variant: empty list");
  }
  if (doc.contains("coarse")) {
    const auto kind = as_string(doc.at("coarse"), "coarse");
    if (kind == "structured") {
      c.coarse = CoarseKind::structured;
    } else if (kind == "agglomerated") {
      c.coarse = CoarseKind::agglomerated;
      c.interpolation = lod::Interpolation::pou;
    } else {
      throw ConfigError(fmt::format("coarse: unknown kind {}", kind));
    }
  }
  if (doc.contains("interpolation"))
    c.interpolation = lod::parse_interpolation(as_string(doc.at("interpolation"), "interpolation"));
  if (doc.contains("rho0")) c.rho0 = doc.at("rho0").get<double>();
  if (doc.contains("rho1")) c.rho1 = doc.at("rho1").get<double>();
  if (doc.contains("threads")) {
    if (!doc.at("threads").is_number_integer()) throw ConfigError("threads: expected an integer");
    c.threads = doc.at("threads").get<int>();
  }
  if (doc.contains("output")) c.output = as_string(doc.at("output"), "output");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(KeyValueDocument::load(path), path.parent_path());
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  for (CoefficientSpec* c : {&config.a0, &config.a1, &config.b1})
    if (c->kind == CoefficientSpec::Kind::random) c->seed = seed;
}

void check_config(const ExperimentConfig& config) {
  check_coefficient(config.a0, "A0");
  check_coefficient(config.a1, "A1");
  check_coefficient(config.b1, "B1");
  if (reciprocal(config.h) == 0) throw ConfigError(fmt::format("h = {} is not the reciprocal of an integer", config.h));
  for (double H : config.H) {
    const int nH = reciprocal(H);
    if (nH == 0) throw ConfigError(fmt::format("H = {} is not the reciprocal of an integer", H));
    if (reciprocal(config.h) % nH != 0 || reciprocal(config.h) / nH < 2)
      throw ConfigError(fmt::format("h = {} does not divide H = {} with a factor of at least 2", config.h, H));
  }
  if (config.coarse == CoarseKind::agglomerated && config.interpolation == lod::Interpolation::nodal)
    throw ConfigError("nodal interpolation needs a structured coarse mesh");
  if (config.coarse == CoarseKind::agglomerated && !(0.0 < config.rho0 && config.rho0 <= config.rho1))
    throw ConfigError("need 0 < rho0 <= rho1");
  if (config.threads < 1) throw ConfigError("threads must be at least 1");
}

fem::PointFunction analytic_function(const std::string& id) {
  using std::numbers::pi;
  if (id == "zero") return [](geom::Point) { return 0.0; };
  if (id == "one") return [](geom::Point) { return 1.0; };
  if (id == "sin-sin") return [](geom::Point p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
  if (id == "x+2y") return [](geom::Point p) { return p.x + 2.0 * p.y; };
  if (id == "oscillating")
    return [](geom::Point p) { return std::sin(30.0 * pi * p.x) * std::sin(30.0 * pi * p.y) + 2.0; };
  throw ConfigError(fmt::format("unknown analytic field \"{}\"", id));
}

double random_value(std::uint64_t seed, std::uint64_t index, double lo, double hi) {
  const std::uint64_t bits = splitmix64(splitmix64(seed) + index);
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

fem::CoefficientSet build_coefficients(const ExperimentConfig& config, const mesh::MeshPair& fine) {
  check_coefficient(config.a0, "A0");
  check_coefficient(config.a1, "A1");
  check_coefficient(config.b1, "B1");
  std::vector<geom::Point> centers(fine.bulk_count());
  for (int e = 0; e < fine.bulk_count(); ++e) centers[e] = fine.element_center(e);
  std::vector<geom::Point> mids(fine.interface_count());
  for (int t = 0; t < fine.interface_count(); ++t) {
    const auto& el = fine.interface_elements[t];
    mids[t] = 0.5 * (fine.node_point(el.n0) + fine.node_point(el.n1));
  }
  fem::CoefficientSet c{field_on(config.a0, 0, centers), field_on(config.a1, 1, mids), field_on(config.b1, 2, mids)};
  fem::check_coefficients(fine, c);
  return c;
}

mesh::MeshHierarchy build_experiment_hierarchy(const ExperimentConfig& config, const geom::MixedDomain& domain,
                                               double H, mesh::RegularityReport* report) {
  const int nH = reciprocal(H);
  const int nh = reciprocal(config.h);
  if (nH == 0 || nh == 0 || nh % nH != 0)
    throw ConfigError(fmt::format("H = {} and h = {} are not nested", H, config.h));
  if (config.coarse == CoarseKind::structured) return mesh::build_hierarchy(domain, nH, nh / nH);
  mesh::MeshHierarchy out;
  out.fine = mesh::build_mesh_pair(domain, nh);
  auto agg = mesh::agglomerate(out.fine, mesh::interface_following_assignment(out.fine, nH), config.rho0, config.rho1);
  out.coarse = std::move(agg.coarse);
  out.refinement = nh / nH;
  if (report) *report = std::move(agg.report);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  check_config(config);
  set_thread_count(config.threads);
  const geom::MixedDomain domain = geom::build_domain(geom::load_geometry_spec(config.geometry));

  // the fine problem does not depend on H
  const mesh::MeshPair fine = mesh::build_mesh_pair(domain, reciprocal(config.h));
  const fem::DofMap dofs = fem::DofMap::build(fine);
  const fem::CoefficientSet coefficients = build_coefficients(config, fine);
  const fem::SparseMatrix a = fem::assemble_operator(dofs, fine, coefficients);
  const fem::Vector f = fem::assemble_load(dofs, fine, analytic_function(config.f0), analytic_function(config.f1));
  const fem::Vector u_h = fem::solve_dirichlet(a, f);

  ExperimentResult result;
  result.fine_energy = fem::energy_norm(a, u_h);

  std::vector<double> sizes = config.H;
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<int> levels = config.ell;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  for (double H : sizes) {
    auto cell_error = [&](const std::string& what) {
      return fmt::format("H = {}, {}", H, what);
    };
    const auto start = std::chrono::steady_clock::now();
    mesh::RegularityReport report;
    std::optional<lod::Discretization> d;
    try {
      d.emplace(build_experiment_hierarchy(config, domain, H, &report), coefficients, config.interpolation);
    } catch (const Error& e) {
      throw Error(cell_error(e.what()));
    }
    const double setup = elapsed(start);
    if (config.coarse == CoarseKind::agglomerated) result.regularity.push_back(report);

    struct Cell {
      int ell;
      lod::Variant variant;
    };
    std::vector<Cell> cells;
    if (std::find(config.variants.begin(), config.variants.end(), lod::Variant::global) != config.variants.end())
      cells.push_back({0, lod::Variant::global});
    for (int ell : levels)
      for (lod::Variant v : config.variants)
        if (v != lod::Variant::global) cells.push_back({ell, v});

    for (const Cell& cell : cells) {
      const auto cell_start = std::chrono::steady_clock::now();
      ReportRow row;
      try {
        const lod::MultiscaleBasis basis = lod::build_basis(*d, cell.variant, cell.ell);
        const lod::MultiscaleSolution ms = lod::solve_multiscale(basis, d->A(), f);
        row.err_energy = fem::energy_norm(a, u_h - ms.u);
      } catch (const Error& e) {
        throw Error(cell_error(fmt::format("ell = {}, {}: {}", cell.ell, lod::to_string(cell.variant), e.what())));
      }
      row.experiment = config.experiment;
      row.H = H;
      row.h = config.h;
      row.ell = cell.ell;
      row.variant = cell.variant;
      row.err_rel = result.fine_energy > 0.0 ? row.err_energy / result.fine_energy : 0.0;
      row.n_coarse = d->coarse_count();
      row.n_fine_free = d->free_count();
      row.wall_seconds = setup + elapsed(cell_start);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string format_csv(const std::vector<ReportRow>& rows) {
  std::string out = kCsvHeader;
  out += "\r\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\r\n", r.experiment, r.H, r.h, r.ell, lod::to_string(r.variant),
                       r.err_energy, r.err_rel, r.n_coarse, r.n_fine_free, r.wall_seconds);
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  const std::string text = format_csv(rows);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    auto out = fmt::output_file(tmp.string());
    out.print("{}", text);
  }
  std::filesystem::rename(tmp, path);
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("a slope fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw Error("a slope fit needs two distinct abscissae");
  return sxy / sxx;
}

RateFit fit_h_rate(std::span<const double> H, std::span<const double> err) {
  if (H.size() != err.size() || H.size() < 2) throw Error("a rate fit needs at least two points");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < H.size(); ++i) {
    if (!(err[i] > 0.0) || !(H[i] > 0.0)) throw Error(fmt::format("cannot take the logarithm of {}", err[i]));
    lx.push_back(std::log(H[i]));
    ly.push_back(std::log(err[i]));
  }
  RateFit fit;
  for (std::size_t i = 0; i + 1 < H.size(); ++i) fit.eoc.push_back((ly[i] - ly[i + 1]) / (lx[i] - lx[i + 1]));
  fit.slope = least_squares_slope(lx, ly);
  return fit;
}

double fit_ell_decay(std::span<const double> ell, std::span<const double> err) {
  if (ell.size() != err.size()) throw Error("ell and error lists differ in length");
  std::vector<double> ly;
  for (double e : err) {
    if (!(e > 0.0)) throw Error(fmt::format("cannot take the logarithm of {}", e));
    ly.push_back(std::log(e));
  }
  return least_squares_slope(ell, ly);
}

std::vector<ConvergenceSummary> summarize_convergence(const std::vector<ReportRow>& rows) {
  std::map<std::pair<int, int>, ConvergenceSummary> groups;
  for (const auto& r : rows) {
    auto& g = groups[{static_cast<int>(r.variant), r.ell}];
    g.variant = r.variant;
    g.ell = r.ell;
    g.H.push_back(r.H);
    g.err.push_back(r.err_energy);
  }
  std::vector<ConvergenceSummary> out;
  for (auto& [_, g] : groups) {
    if (g.H.size() < 2) continue;
    g.fit = fit_h_rate(g.H, g.err);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<DecaySummary> summarize_decay(const std::vector<ReportRow>& rows) {
  std::map<std::pair<int, double>, DecaySummary> groups;
  for (const auto& r : rows) {
    if (r.variant == lod::Variant::global) continue;
    auto& g = groups[{static_cast<int>(r.variant), -r.H}];
    g.variant = r.variant;
    g.H = r.H;
    g.ell.push_back(r.ell);
    g.err.push_back(r.err_energy);
  }
  std::vector<DecaySummary> out;
  for (auto& [_, g] : groups) {
    if (g.ell.size() < 2) continue;
    const std::vector<double> x(g.ell.begin(), g.ell.end());
    g.slope = fit_ell_decay(x, g.err);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace mdlod::experiment
