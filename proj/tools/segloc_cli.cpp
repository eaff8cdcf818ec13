// segloc: simulate RSS measurements, localize a ground source, run the
// weighted-centroid baselines, and sweep Monte-Carlo benchmarks.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "segloc/segloc.hpp"

namespace {

using namespace segloc;

struct SimulateArgs {
  std::string scenario;
  std::size_t count = 200;
  std::uint64_t seed = 1;
  std::string out;
};

struct LocalizeArgs {
  std::string scenario;
  std::string measurements;
  double spacing = 5.0;
  std::optional<double> refine;
  std::size_t nb = 31;
  std::string dump_tensor;
  std::string out;
  std::size_t threads = default_thread_count();
  std::string sector_rule = "shadow-edges";
};

struct BaselineArgs {
  std::string method;
  std::string measurements;
  std::string out;
};

struct BenchArgs {
  std::string plan;
  std::string out;
  std::string summary;
  std::size_t threads = default_thread_count();
  bool no_timing = false;
};

int run_simulate(const SimulateArgs& a) {
  const Scenario s = io::read_scenario(a.scenario);
  io::write_measurements(a.out, generate_measurements(s, a.count, a.seed));
  return 0;
}

int run_localize(const LocalizeArgs& a) {
  // Footprints only: building heights and the los column are never read.
  const FootprintMap map = io::read_footprint_map(a.scenario);
  const MeasurementSet ms = io::read_measurements(a.measurements, /*keep_truth=*/false);
  GridSpec grid = GridSpec::covering(map.bounds(), a.spacing, a.refine, a.nb);
  grid.sector_rule =
      a.sector_rule == "gap-midpoints" ? SectorRule::gap_midpoints : SectorRule::shadow_edges;
  ErrorTensor tensor;
  LocalizeOptions opt;
  opt.threads = a.threads;
  if (!a.dump_tensor.empty()) opt.tensor = &tensor;
  const LocalizationResult r = localize(map, ms, grid, opt);
  io::write_json(a.out, io::result_to_json(r));
  if (!a.dump_tensor.empty()) io::write_json(a.dump_tensor, io::tensor_to_json(tensor));
  if (r.degenerate()) {
    std::cerr << "warning: " << r.minimizer_count
              << " candidates share the minimal residual; the estimate is not unique\n";
  }
  return 0;
}

int run_baseline(const BaselineArgs& a) {
  const Method method = parse_method(a.method);
  WclConfig cfg;
  switch (method) {
    case Method::wcl: cfg = WclConfig::plain(); break;
    case Method::wcl_mod: cfg = WclConfig::modified(); break;
    case Method::wcl_genius: cfg = WclConfig::genius(); break;
    case Method::segreg: throw Error("baseline: use the localize subcommand for segreg");
  }
  const MeasurementSet ms = io::read_measurements(a.measurements, cfg.los_only);
  const Vec3 est = wcl(ms, cfg);
  io::write_json(a.out, io::json{{"method", method_name(method)}, {"s_hat", io::vec_to_json(est)}});
  return 0;
}

int run_bench_cmd(const BenchArgs& a) {
  const BenchPlan plan = io::plan_from_json(io::read_json(a.plan));
  BenchOptions opt;
  opt.threads = a.threads;
  opt.record_runtime = !a.no_timing;
  const BenchOutcome out = run_bench(plan, opt);
  io::write_file(a.out, io::bench_records_to_csv(out.records));
  if (!a.summary.empty()) io::write_file(a.summary, io::bench_summary_to_csv(out.summary));
  if (!out.failures.empty()) {
    std::cerr << "warning: " << out.failures.size() << " failed trial(s) excluded\n";
    for (const BenchFailure& f : out.failures) {
      std::cerr << "  " << method_name(f.method) << " value=" << f.sweep_value
                << " seed=" << f.trial_seed << ": " << f.message << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RSS source localization with segmented regression over 2D building maps"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a measurement CSV from a scenario");
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--count", sim.count, "Number of measurements M")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out", sim.out, "Output CSV")->required();

  LocalizeArgs loc;
  auto* localize_cmd = app.add_subcommand("localize", "Estimate the source location");
  localize_cmd->add_option("--scenario", loc.scenario, "Scenario/map JSON (footprints only are used)")
      ->required()
      ->check(CLI::ExistingFile);
  localize_cmd->add_option("--measurements", loc.measurements, "Measurement CSV")
      ->required()
      ->check(CLI::ExistingFile);
  localize_cmd->add_option("--grid-spacing", loc.spacing, "Coarse grid spacing (m)")
      ->check(CLI::PositiveNumber);
  localize_cmd->add_option("--refine", loc.refine, "Fine grid spacing for the second stage (m)");
  localize_cmd->add_option("--nb", loc.nb, "Number of support vector angles")->check(CLI::Range(2, 100000));
  localize_cmd->add_option("--dump-tensor", loc.dump_tensor, "Write the full error tensor as JSON");
  localize_cmd->add_option("--threads", loc.threads, "Worker threads")->check(CLI::PositiveNumber);
  localize_cmd->add_option("--sector-rule", loc.sector_rule, "shadow-edges or gap-midpoints")
      ->check(CLI::IsMember({"shadow-edges", "gap-midpoints"}));
  localize_cmd->add_option("--out", loc.out, "Output JSON")->required();

  BaselineArgs base;
  auto* baseline = app.add_subcommand("baseline", "Weighted centroid baselines");
  baseline->add_option("--method", base.method, "wcl | wcl-mod | wcl-genius")
      ->required()
      ->check(CLI::IsMember({"wcl", "wcl-mod", "wcl-genius", "wcl_mod", "wcl_genius"}));
  baseline->add_option("--measurements", base.measurements, "Measurement CSV")
      ->required()
      ->check(CLI::ExistingFile);
  baseline->add_option("--out", base.out, "Output JSON")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Monte-Carlo RMSE sweep");
  bench_cmd->add_option("--plan", bench.plan, "Plan JSON")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--out", bench.out, "Per-trial CSV")->required();
  bench_cmd->add_option("--summary", bench.summary, "Aggregated RMSE CSV");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--no-timing", bench.no_timing, "Write runtime_ms as 0 (byte-reproducible output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*localize_cmd) return run_localize(loc);
    if (*baseline) return run_baseline(base);
    if (*bench_cmd) return run_bench_cmd(bench);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
