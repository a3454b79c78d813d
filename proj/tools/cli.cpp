#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "catpose/bench_harness.hpp"
#include "catpose/error.hpp"
#include "catpose/outlier_pruning.hpp"
#include "catpose/serialization.hpp"

namespace catpose::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SolveArgs {
  std::string library;
  std::string measurements;
  std::string method = "pace_star";
  std::optional<double> lambda;
  double epsilon = 0.05;
  long long clique_timeout_ms = 10000;
  std::string bounds;
  std::string out;
  std::uint64_t seed = 0;
};

struct PruneArgs {
  std::string library;
  std::string out;
};

struct BenchArgs {
  std::string config;
  std::string out = "bench_results.csv";
  std::optional<int> workers;
  bool resume = false;
  bool quiet = false;
};

struct GenArgs {
  std::string out = ".";
  GenParams params;
  std::string mode = "iid_models";
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text << '\n';
  } else {
    write_text(path, text);
  }
}

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  const ShapeLibrary lib = load_shape_library(a.library);
  const KeypointMeasurements meas = load_measurements(a.measurements);
  check_compatible(meas, lib);

  MethodOptions opt;
  opt.lambda = a.lambda.value_or(std::sqrt(static_cast<double>(lib.num_models()) / lib.num_keypoints()));
  if (!(opt.lambda >= 0.0)) throw InputError("--lambda must be >= 0");
  opt.epsilon = a.epsilon;
  if (!(opt.epsilon > 0.0)) throw InputError("--epsilon must be > 0");
  opt.clique_timeout = std::chrono::milliseconds(a.clique_timeout_ms);

  std::optional<PairwiseBounds> bounds;
  if (!a.bounds.empty() && uses_pruning(method)) {
    BoundsCache cache = load_bounds_cache(a.bounds);
    if (cache.library_hash == library_hash(lib)) {
      bounds = std::move(cache.bounds);
    } else {
      err << "warning: bounds cache " << a.bounds << " belongs to another library; recomputing\n";
    }
  }

  const Estimate est = run_method(method, meas, lib, opt, bounds ? &*bounds : nullptr);
  emit(estimate_to_json(est), a.out, out);
  if (est.degenerate) {
    err << "degenerate estimate: fewer than 3 inliers survived\n";
    return kSolverFailure;
  }
  return kSuccess;
}

int cmd_prune(const PruneArgs& a, std::ostream& out) {
  const ShapeLibrary lib = load_shape_library(a.library);
  const std::string hash = library_hash(lib);
  const int n = lib.num_keypoints();
  json report{{"out", a.out}, {"library_hash", hash}, {"num_pairs", n * (n - 1) / 2}};

  if (fs::exists(a.out)) {
    try {
      if (load_bounds_cache(a.out).library_hash == hash) {
        report["cache_hit"] = true;
        out << report.dump() << '\n';
        return kSuccess;
      }
    } catch (const InputError&) {
      // unreadable or stale cache, rebuild below
    }
  }
  const auto start = std::chrono::steady_clock::now();
  BoundsCache cache{hash, pairwise_bounds(lib)};
  save_bounds_cache(a.out, cache);
  report["cache_hit"] = false;
  report["elapsed_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  out << report.dump() << '\n';
  return kSuccess;
}

fs::path summary_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".summary.json");
  return p;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  const SweepConfig cfg = load_sweep_config(a.config);
  SweepOptions opt;
  opt.workers = a.workers.value_or(default_worker_count());
  if (opt.workers < 1) throw InputError("--workers must be >= 1");

  const fs::path csv = a.out;
  std::vector<ResultRow> rows;
  if (a.resume && fs::exists(csv)) {
    rows = read_csv(csv);
    opt.completed = rows;
  } else {
    write_csv(csv, {});
  }

  std::ofstream stream(csv, std::ios::app);
  if (!stream) throw InputError("cannot write CSV: " + csv.string());
  const std::size_t total = cfg.methods.size() * cfg.K.size() * cfg.r.size() *
                            cfg.outlier_rates.size() * cfg.seeds.size();
  std::size_t count = rows.size();
  opt.on_row = [&](const ResultRow& row) {
    stream << csv_line(row) << '\n';
    stream.flush();
    ++count;
    if (!a.quiet) {
      err << "[" << count << "/" << total << "] " << row.method << " K=" << row.K
          << " r=" << row.r << " rate=" << row.outlier_rate << " seed=" << row.seed
          << (row.failed ? " FAILED: " + row.error : "") << '\n';
    }
  };
  std::vector<ResultRow> fresh = run_monte_carlo(cfg, opt);
  stream.close();
  rows.insert(rows.end(), fresh.begin(), fresh.end());

  const fs::path summary = summary_path(csv);
  write_text(summary, summarize(rows));
  out << json{{"csv", csv.string()}, {"summary", summary.string()}, {"rows", rows.size()},
              {"new_rows", fresh.size()}}
             .dump()
      << '\n';
  return kSuccess;
}

int cmd_gen(GenArgs a, std::ostream& out) {
  a.params.mode = parse_gen_mode(a.mode);
  const SyntheticInstance inst = generate_instance(a.params);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_text(dir / "library.json", library_to_json(inst.library));
  write_text(dir / "measurements.json", measurements_to_json(inst.measurements));
  write_text(dir / "ground_truth.json", ground_truth_to_json(inst));
  out << json{{"dir", dir.string()}, {"num_outliers", inst.num_outliers()}}.dump() << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Category-level pose and shape estimation from 3D keypoints", "catpose"};
  app.require_subcommand(1);

  SolveArgs solve;
  CLI::App* s = app.add_subcommand("solve", "Estimate pose and shape for one instance");
  s->add_option("--library", solve.library, "Shape library JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--measurements", solve.measurements, "Keypoint measurements JSON")
      ->required()
      ->check(CLI::ExistingFile);
  s->add_option("--method", solve.method,
                "pace_star|altern|gnc|irls_gm|irls_tls|clique_pace_star|pace_hash")
      ->capture_default_str();
  s->add_option("--lambda", solve.lambda, "Shape regularization (default sqrt(K/N))");
  s->add_option("--epsilon", solve.epsilon, "Inlier noise bound")->capture_default_str();
  s->add_option("--timeout-clique-ms", solve.clique_timeout_ms, "Max-clique time budget")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  s->add_option("--bounds", solve.bounds, "Precomputed bounds cache from 'prune'")
      ->check(CLI::ExistingFile);
  s->add_option("--seed", solve.seed, "Unused by the deterministic solvers; accepted for scripting");
  s->add_option("--out", solve.out, "Write the estimate here instead of stdout");

  PruneArgs prune;
  CLI::App* p = app.add_subcommand("prune", "Precompute pairwise keypoint distance bounds");
  p->add_option("--library", prune.library, "Shape library JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--out", prune.out, "Bounds cache path")->required();

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Run a Monte Carlo sweep");
  b->add_option("--config", bench.config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  b->add_option("--out", bench.out, "Result CSV; the summary goes next to it")->capture_default_str();
  b->add_option("--workers", bench.workers, "Worker threads (default: CATPOSE_WORKERS or all cores)");
  b->add_flag("--resume", bench.resume, "Skip runs already present in the CSV");
  b->add_flag("--quiet", bench.quiet, "No progress output");

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "Write a synthetic instance (library, measurements, ground truth)");
  g->add_option("--out", gen.out, "Output directory")->capture_default_str();
  g->add_option("--seed", gen.params.seed, "RNG seed")->capture_default_str();
  g->add_option("--N", gen.params.N, "Keypoints")->capture_default_str();
  g->add_option("--K", gen.params.K, "Library models")->capture_default_str();
  g->add_option("--sigma", gen.params.sigma, "Inlier noise std dev")->capture_default_str();
  g->add_option("--r", gen.params.r, "Intra-class variation radius")->capture_default_str();
  g->add_option("--outlier-rate", gen.params.outlier_rate, "Fraction of outliers")->capture_default_str();
  g->add_option("--mode", gen.mode, "iid_models|mean_plus_variation")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    out << error_to_json("usage", e.what()) << '\n';
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (s->parsed()) return cmd_solve(solve, out, err);
    if (p->parsed()) return cmd_prune(prune, out);
    if (b->parsed()) return cmd_bench(bench, out, err);
    if (g->parsed()) return cmd_gen(gen, out);
  } catch (const InputError& e) {
    out << error_to_json("input", e.what()) << '\n';
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const SolverError& e) {
    out << error_to_json("solver", e.what()) << '\n';
    err << "error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    out << error_to_json("internal", e.what()) << '\n';
    err << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kInputError;
}

}  // namespace catpose::cli
