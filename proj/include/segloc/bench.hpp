#pragma once

#include <chrono>
#include <exception>
#include <span>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "segloc/baselines.hpp"
#include "segloc/error.hpp"
#include "segloc/localizer.hpp"
#include "segloc/parallel.hpp"
#include "segloc/propagation.hpp"

namespace segloc {

enum class Method { segreg, wcl, wcl_mod, wcl_genius };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::segreg: return "segreg";
    case Method::wcl: return "wcl";
    case Method::wcl_mod: return "wcl_mod";
    case Method::wcl_genius: return "wcl_genius";
  }
  return "?";
}

/// Accepts both the underscore and the dashed spelling ("wcl-mod").
inline Method parse_method(std::string_view s) {
  std::string n(s);
  for (char& c : n) {
    if (c == '-') c = '_';
  }
  for (Method m : {Method::segreg, Method::wcl, Method::wcl_mod, Method::wcl_genius}) {
    if (n == method_name(m)) return m;
  }
  throw Error("unknown method: " + std::string(s));
}

enum class SweepParameter { measurement_count, sigma_los, sigma_nlos };

inline std::string_view sweep_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::measurement_count: return "M";
    case SweepParameter::sigma_los: return "sigma_los";
    case SweepParameter::sigma_nlos: return "sigma_nlos";
  }
  return "?";
}

inline SweepParameter parse_sweep(std::string_view s) {
  if (s == "M" || s == "count") return SweepParameter::measurement_count;
  if (s == "sigma_los") return SweepParameter::sigma_los;
  if (s == "sigma_nlos") return SweepParameter::sigma_nlos;
  throw Error("unknown sweep parameter: " + std::string(s));
}

struct BenchPlan {
  Scenario scenario;
  SweepParameter sweep = SweepParameter::measurement_count;
  std::vector<double> values{200};
  std::size_t count = 200;  // M when the sweep is over sigma
  std::size_t trials = 50;
  std::uint64_t seed_base = 1;
  std::vector<Method> methods{Method::segreg, Method::wcl, Method::wcl_mod, Method::wcl_genius};
  GridSpec grid = GridSpec::covering(SquareBounds{200.0}, 5.0, 1.0);

  void validate() const {
    if (trials < 1) throw Error("bench plan: trials must be >= 1");
    if (values.empty()) throw Error("bench plan: sweep has no values");
    if (methods.empty()) throw Error("bench plan: no methods");
    for (double v : values) {
      if (sweep == SweepParameter::measurement_count && !(v >= 1.0 && v == std::floor(v))) {
        throw Error("bench plan: measurement counts must be positive integers");
      }
      if (sweep != SweepParameter::measurement_count && !(v >= 0.0)) {
        throw Error("bench plan: sigma values must be >= 0");
      }
    }
    scenario.validate();
    grid.validate();
  }
};

/// One (method, sweep value, seed) trial. rmse_m is the horizontal error of
/// that single trial.
struct BenchRecord {
  Method method;
  double sweep_value;
  std::uint64_t trial_seed;
  double rmse_m;
  double runtime_ms;
};

struct BenchSummary {
  Method method;
  double sweep_value;
  double rmse_m;
  std::size_t trials;
  std::size_t failed;
};

struct BenchFailure {
  Method method;
  double sweep_value;
  std::uint64_t trial_seed;
  std::string message;
};

struct BenchOutcome {
  std::vector<BenchRecord> records;
  std::vector<BenchSummary> summary;
  std::vector<BenchFailure> failures;
};

struct BenchOptions {
  std::size_t threads = default_thread_count();
  bool record_runtime = true;
};

/// sqrt(mean(e^2)).
inline double rmse(std::span<const double> errors) {
  if (errors.empty()) return std::nan("");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

inline Vec3 run_method(Method method, const FootprintMap& map, std::span<const Measurement> ms,
                       const GridSpec& grid, std::size_t threads) {
  switch (method) {
    case Method::segreg: {
      // The localizer never sees LOS labels.
      MeasurementSet blind(ms.begin(), ms.end());
      for (Measurement& m : blind) m.truth_los.reset();
      LocalizeOptions opt;
      opt.threads = threads;
      return localize(map, blind, grid, opt).s_hat;
    }
    case Method::wcl: return wcl(ms, WclConfig::plain());
    case Method::wcl_mod: return wcl(ms, WclConfig::modified());
    case Method::wcl_genius: return wcl(ms, WclConfig::genius());
  }
  throw Error("unreachable");
}

inline Scenario scenario_for(const BenchPlan& plan, double value, std::size_t& count) {
  Scenario s = plan.scenario;
  count = plan.count;
  switch (plan.sweep) {
    case SweepParameter::measurement_count: count = static_cast<std::size_t>(value); break;
    case SweepParameter::sigma_los: s.truth.sigma_los = value; break;
    case SweepParameter::sigma_nlos: s.truth.sigma_nlos = value; break;
  }
  return s;
}

/// Monte-Carlo sweep. Trials run in parallel; records come back ordered by
/// (method, sweep value, seed) in plan order.
inline BenchOutcome run_bench(const BenchPlan& plan, const BenchOptions& opt = {}) {
  plan.validate();
  const FootprintMap map = plan.scenario.map.footprints();
  const std::size_t nv = plan.values.size();
  const std::size_t nt = plan.trials;
  const std::size_t nm = plan.methods.size();

  struct Slot {
    double error = 0.0;
    double runtime_ms = 0.0;
    std::string failure;
    bool failed = false;
  };
  std::vector<Slot> slots(nv * nt * nm);
  auto slot = [&](std::size_t v, std::size_t t, std::size_t m) -> Slot& {
    return slots[(m * nv + v) * nt + t];
  };

  // Outer parallelism over trials; each localize call then runs serially.
  const std::size_t inner_threads = nv * nt >= opt.threads ? 1 : opt.threads;
  parallel_for(nv * nt, opt.threads, [&](std::size_t job) {
    const std::size_t v = job / nt;
    const std::size_t t = job % nt;
    std::size_t count = 0;
    const Scenario s = scenario_for(plan, plan.values[v], count);
    const MeasurementSet ms = generate_measurements(s, count, plan.seed_base + t);
    for (std::size_t mi = 0; mi < nm; ++mi) {
      Slot& out = slot(v, t, mi);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Vec3 est = run_method(plan.methods[mi], map, ms, plan.grid, inner_threads);
        out.error = std::hypot(est.x - s.source.x, est.y - s.source.y);
      } catch (const std::exception& e) {
        out.failed = true;
        out.failure = e.what();
      }
      const auto t1 = std::chrono::steady_clock::now();
      if (opt.record_runtime) {
        out.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
    }
  });

  BenchOutcome result;
  for (std::size_t mi = 0; mi < nm; ++mi) {
    for (std::size_t v = 0; v < nv; ++v) {
      std::vector<double> errors;
      std::size_t failed = 0;
      for (std::size_t t = 0; t < nt; ++t) {
        const Slot& s = slot(v, t, mi);
        const std::uint64_t seed = plan.seed_base + t;
        if (s.failed) {
          ++failed;
          result.failures.push_back({plan.methods[mi], plan.values[v], seed, s.failure});
          continue;
        }
        errors.push_back(s.error);
        result.records.push_back({plan.methods[mi], plan.values[v], seed, s.error, s.runtime_ms});
      }
      result.summary.push_back({plan.methods[mi], plan.values[v], rmse(errors), errors.size(), failed});
    }
  }
  return result;
}

}  // namespace segloc
