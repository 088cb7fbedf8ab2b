#pragma once

#include "mdlod/fem.hpp"
#include "mdlod/keyvalue.hpp"
#include "mdlod/lod.hpp"
#include "mdlod/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mdlod::experiment {

/// A coefficient given as a constant, a named analytic field, or independent
/// uniform values per fine element.
struct CoefficientSpec {
  enum class Kind { constant, analytic, random };
  Kind kind = Kind::constant;
  double value = 1.0;
  std::string analytic;
  std::optional<std::uint64_t> seed;
  double lo = 0.0;
  double hi = 0.0;
};

enum class CoarseKind { structured, agglomerated };

struct ExperimentConfig {
  std::string experiment = "experiment";
  std::filesystem::path geometry;
  CoefficientSpec a0;
  CoefficientSpec a1;
  CoefficientSpec b1;
  std::string f0 = "zero";
  std::string f1 = "zero";
  std::vector<double> H;
  double h = 0.0;
  std::vector<int> ell{1};
  std::vector<lod::Variant> variants{lod::Variant::stabilized};
  CoarseKind coarse = CoarseKind::structured;
  lod::Interpolation interpolation = lod::Interpolation::nodal;
  double rho0 = 0.05;
  double rho1 = 1.5;
  int threads = 1;
  std::filesystem::path output;
};

/// Reads a key-value config. A relative geometry path is resolved against
/// `base_dir`. Sizes may be numbers or strings such as "1/32".
ExperimentConfig parse_config(const KeyValueDocument& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces the seed of every random coefficient.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

/// Throws ConfigError when sizes are not nested, a random field lacks a seed
/// or has lo <= 0, or the interpolation does not fit the coarse mesh kind.
void check_config(const ExperimentConfig& config);

/// Named fields: "zero", "one", "sin-sin" = sin(pi x) sin(pi y), "x+2y",
/// "oscillating" = sin(30 pi x) sin(30 pi y) + 2.
fem::PointFunction analytic_function(const std::string& id);

/// Uniform value in [lo, hi) for one element, from a counter-based generator
/// keyed by (seed, index).
double random_value(std::uint64_t seed, std::uint64_t index, double lo, double hi);

fem::CoefficientSet build_coefficients(const ExperimentConfig& config, const mesh::MeshPair& fine);

/// Coarse mesh on top of the fine grid for coarse size H.
mesh::MeshHierarchy build_experiment_hierarchy(const ExperimentConfig& config, const geom::MixedDomain& domain,
                                               double H, mesh::RegularityReport* report = nullptr);

struct ReportRow {
  std::string experiment;
  double H = 0.0;
  double h = 0.0;
  int ell = 0;
  lod::Variant variant = lod::Variant::global;
  double err_energy = 0.0;
  double err_rel = 0.0;
  int n_coarse = 0;
  int n_fine_free = 0;
  double wall_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  double fine_energy = 0.0;
  /// One per H for agglomerated coarse meshes.
  std::vector<mesh::RegularityReport> regularity;
};

/// Solves the fine problem once, then one multiscale solve per (H, ell,
/// variant) cell. The global variant yields a single row with ell = 0 per H.
/// Rows are sorted by H descending, then ell ascending.
ExperimentResult run_experiment(const ExperimentConfig& config);

inline constexpr const char* kCsvHeader =
    "experiment,H,h,ell,variant,err_energy,err_rel,n_coarse,n_fine_free,wall_seconds";

std::string format_csv(const std::vector<ReportRow>& rows);

/// Writes to a temporary file next to `path` and renames it into place.
void write_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

double least_squares_slope(std::span<const double> x, std::span<const double> y);

struct RateFit {
  std::vector<double> eoc;
  double slope = 0.0;
};

/// Per-step orders log(e_i / e_{i+1}) / log(H_i / H_{i+1}) and the
/// least-squares slope of log e against log H.
RateFit fit_h_rate(std::span<const double> H, std::span<const double> err);

/// Least-squares slope of ln(err) against ell.
double fit_ell_decay(std::span<const double> ell, std::span<const double> err);

struct ConvergenceSummary {
  lod::Variant variant;
  int ell;
  std::vector<double> H;
  std::vector<double> err;
  RateFit fit;
};

struct DecaySummary {
  lod::Variant variant;
  double H;
  std::vector<int> ell;
  std::vector<double> err;
  double slope;
};

/// Groups of at least two rows along H (fixed variant and ell) or along ell
/// (fixed variant and H).
std::vector<ConvergenceSummary> summarize_convergence(const std::vector<ReportRow>& rows);
std::vector<DecaySummary> summarize_decay(const std::vector<ReportRow>& rows);

}  // namespace mdlod::experiment
