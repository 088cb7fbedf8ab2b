#include "mdlod/error.hpp"
#include "mdlod/experiment.hpp"
#include "mdlod/geometry.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace {

using namespace mdlod;

int validate(const std::string& path) {
  const geom::MixedDomain domain = geom::construct_domain(geom::load_geometry_spec(path));
  fmt::print("{}: {} bulk, {} interface, {} junction segments\n", path, domain.bulk.size(), domain.interfaces.size(),
             domain.junctions.size());
  const auto violations = geom::validate_domain(domain);
  for (const auto& v : violations) fmt::print("  {}: {}\n", geom::to_string(v.kind), v.message);
  fmt::print("{}\n", violations.empty() ? "valid" : "invalid");
  return violations.empty() ? 0 : 1;
}

struct RunOptions {
  std::string config;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

experiment::ExperimentResult run(const RunOptions& o, std::FILE*& report) {
  experiment::ExperimentConfig c = experiment::load_config(o.config);
  if (o.seed) experiment::override_seed(c, *o.seed);
  if (o.threads) c.threads = *o.threads;
  if (o.out) c.output = *o.out;
  auto result = experiment::run_experiment(c);
  // summaries go to stderr when the CSV itself goes to stdout
  report = c.output.empty() ? stderr : stdout;
  if (c.output.empty()) {
    fmt::print("{}", experiment::format_csv(result.rows));
  } else {
    experiment::write_csv(c.output, result.rows);
    fmt::print(report, "wrote {} rows to {}\n", result.rows.size(), c.output.string());
  }
  for (const auto& r : result.regularity) {
    fmt::print(report, "regularity at H = {}: {} elements, rho0 = {}, rho1 = {}, {}\n", r.H, r.entries.size(), r.rho0,
               r.rho1, r.all_satisfied() ? "all satisfied" : "violated");
    for (int k : r.flagged()) {
      const auto& e = r.entries[k];
      fmt::print(report, "  element {}: R = {}, R' = {}\n", e.element, e.inscribed, e.circumscribed);
    }
  }
  return result;
}

void print_convergence(const experiment::ExperimentResult& result, std::FILE* out) {
  for (const auto& s : experiment::summarize_convergence(result.rows)) {
    fmt::print(out, "{} ell = {}: slope {:.3f}, EOC", lod::to_string(s.variant), s.ell, s.fit.slope);
    for (double e : s.fit.eoc) fmt::print(out, " {:.3f}", e);
    fmt::print(out, "\n");
  }
}

void print_decay(const experiment::ExperimentResult& result, std::FILE* out) {
  for (const auto& s : experiment::summarize_decay(result.rows))
    fmt::print(out, "{} H = {}: decay slope {:.3f} per layer over ell = {}..{}\n", lod::to_string(s.variant), s.H,
               s.slope, s.ell.front(), s.ell.back());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solver for bulk-interface diffusion problems"};
  app.require_subcommand(1);

  std::string geometry;
  auto* validate_cmd = app.add_subcommand("validate", "Check a geometry file against the domain rules");
  validate_cmd->add_option("geometry", geometry, "Geometry file")->required();

  RunOptions options;
  auto add_run = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("config", options.config, "Experiment config")->required();
    cmd->add_option("--threads", options.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", options.out, "CSV output path (stdout when neither this nor the config names one)");
    cmd->add_option("--seed", options.seed, "Seed for every random coefficient");
    return cmd;
  };
  auto* solve_cmd = add_run("solve", "Run every (H, ell, variant) cell and write the CSV report");
  auto* convergence_cmd = add_run("convergence", "As solve, then print orders of convergence in H");
  auto* decay_cmd = add_run("decay", "As solve, then print the decay rate in ell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) return validate(geometry);
    std::FILE* report = stdout;
    const auto result = run(options, report);
    if (convergence_cmd->parsed()) print_convergence(result, report);
    if (decay_cmd->parsed()) print_decay(result, report);
    (void)solve_cmd;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
