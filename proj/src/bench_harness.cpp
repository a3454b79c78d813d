#include "catpose/bench_harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "catpose/error.hpp"
#include "catpose/robust_pipeline.hpp"
#include "catpose/so3.hpp"

namespace catpose {

using nlohmann::json;

std::string to_string(GenMode mode) {
  return mode == GenMode::iid_models ? "iid_models" : "mean_plus_variation";
}

GenMode parse_gen_mode(const std::string& name) {
  if (name == "iid_models") return GenMode::iid_models;
  if (name == "mean_plus_variation") return GenMode::mean_plus_variation;
  throw InputError("unknown generation mode '" + name + "'");
}

int SyntheticInstance::num_outliers() const {
  return static_cast<int>(std::count(outlier_mask.begin(), outlier_mask.end(), true));
}

int outlier_count(double rate, int n) {
  return static_cast<int>(std::floor(rate * n + 1e-9));
}

namespace {

void validate(const GenParams& p) {
  if (p.N < 3) throw InputError("GenParams: N must be at least 3");
  if (p.K < 1) throw InputError("GenParams: K must be at least 1");
  if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) throw InputError("GenParams: sigma must be >= 0");
  if (!(p.r >= 0.0) || !std::isfinite(p.r)) throw InputError("GenParams: r must be >= 0");
  if (!(p.outlier_rate >= 0.0 && p.outlier_rate < 1.0)) {
    throw InputError("GenParams: outlier_rate must lie in [0, 1)");
  }
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, std::normal_distribution<double>& nd) {
  const double x = nd(rng);
  const double y = nd(rng);
  const double z = nd(rng);
  return {x, y, z};
}

}  // namespace

SyntheticInstance generate_instance(const GenParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);

  std::vector<Eigen::Matrix3Xd> models(p.K, Eigen::Matrix3Xd(3, p.N));
  if (p.mode == GenMode::iid_models) {
    for (auto& m : models) {
      for (int i = 0; i < p.N; ++i) m.col(i) = gaussian3(rng, nd);
    }
  } else {
    Eigen::Matrix3Xd mean(3, p.N);
    for (int i = 0; i < p.N; ++i) mean.col(i) = gaussian3(rng, nd);
    for (auto& m : models) {
      for (int i = 0; i < p.N; ++i) m.col(i) = mean.col(i) + p.r * gaussian3(rng, nd);
    }
  }

  ShapeCoefficients c(p.K);
  for (int k = 0; k < p.K; ++k) c[k] = unit(rng);
  if (c.sum() <= 0.0) c.setConstant(1.0);
  c /= c.sum();

  Pose pose;
  pose.rotation = random_rotation(rng);
  for (int a = 0; a < 3; ++a) pose.translation[a] = cube(rng);

  ShapeLibrary lib(std::move(models));
  Eigen::Matrix3Xd noise(3, p.N);
  for (int i = 0; i < p.N; ++i) noise.col(i) = p.sigma * gaussian3(rng, nd);
  Eigen::Matrix3Xd y = ((pose.rotation * lib.combine(c)).colwise() + pose.translation) + noise;

  std::vector<bool> outliers(p.N, false);
  const int m = outlier_count(p.outlier_rate, p.N);
  std::vector<int> idx(p.N);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < m; ++j) {
    std::uniform_int_distribution<int> pick(j, p.N - 1);
    std::swap(idx[j], idx[pick(rng)]);
  }
  std::sort(idx.begin(), idx.begin() + m);
  for (int j = 0; j < m; ++j) {
    outliers[idx[j]] = true;
    y.col(idx[j]) = gaussian3(rng, nd);
  }

  SyntheticInstance inst{std::move(lib), KeypointMeasurements(std::move(y)), pose, c,
                         std::move(outliers), std::move(noise), p};
  return inst;
}

SyntheticInstance generate_outlier_free(const GenParams& params) {
  if (params.mode != GenMode::iid_models || params.outlier_rate != 0.0) {
    throw InputError("generate_outlier_free needs mode iid_models and outlier_rate 0");
  }
  return generate_instance(params);
}

SyntheticInstance generate_robust_instance(const GenParams& params) {
  if (params.mode != GenMode::mean_plus_variation) {
    throw InputError("generate_robust_instance needs mode mean_plus_variation");
  }
  return generate_instance(params);
}

double rotation_error_deg(const Eigen::Matrix3d& r_hat, const Eigen::Matrix3d& r_gt) {
  const double arg = std::clamp(((r_gt.transpose() * r_hat).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(arg) * 180.0 / std::numbers::pi;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::pace_star: return "pace_star";
    case Method::altern: return "altern";
    case Method::gnc: return "gnc";
    case Method::irls_gm: return "irls_gm";
    case Method::irls_tls: return "irls_tls";
    case Method::clique_pace_star: return "clique_pace_star";
    case Method::pace_hash: return "pace_hash";
  }
  return "unknown";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::pace_star, Method::altern,
                                           Method::gnc,       Method::irls_gm,
                                           Method::irls_tls,  Method::clique_pace_star,
                                           Method::pace_hash};
  return methods;
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw InputError("unknown method '" + name + "'");
}

bool uses_pruning(Method method) {
  return method == Method::clique_pace_star || method == Method::pace_hash;
}

Estimate run_method(Method method, const KeypointMeasurements& meas, const ShapeLibrary& lib,
                    const MethodOptions& options, const PairwiseBounds* bounds) {
  RobustParams robust;
  robust.epsilon_bar = options.epsilon;
  CliqueOptions clique;
  clique.timeout = options.clique_timeout;
  switch (method) {
    case Method::pace_star:
      return pace_star(meas, lib, options.lambda);
    case Method::altern:
      return alternating_minimization(meas, lib, options.lambda);
    case Method::gnc:
      return gnc_tls(meas, lib, options.lambda, robust);
    case Method::irls_gm:
      return irls(meas, lib, options.lambda, IrlsLoss::GM, robust);
    case Method::irls_tls:
      return irls(meas, lib, options.lambda, IrlsLoss::TLS, robust);
    case Method::clique_pace_star:
      return clique_pace_star(meas, lib, options.lambda, PruneParams{options.epsilon}, clique,
                              bounds);
    case Method::pace_hash: {
      PaceHashParams p = make_pace_hash_params(options.epsilon);
      p.clique = clique;
      return pace_hash(meas, lib, options.lambda, p, bounds);
    }
  }
  throw InputError("unknown method");
}

bool ResultRow::success() const {
  return !failed && rot_err_deg < kSuccessRotationDeg && trans_err < kSuccessTranslation;
}

namespace {

ResultRow row_stub(const std::string& method, const GenParams& p, double lambda, double epsilon) {
  ResultRow row;
  row.method = method;
  row.N = p.N;
  row.K = p.K;
  row.sigma = p.sigma;
  row.r = p.r;
  row.outlier_rate = p.outlier_rate;
  row.lambda = lambda;
  row.epsilon = epsilon;
  row.seed = p.seed;
  return row;
}

}  // namespace

ResultRow evaluate(const std::string& method, const SyntheticInstance& inst, const Estimate& est,
                   double lambda, double epsilon) {
  ResultRow row = row_stub(method, inst.params, lambda, epsilon);
  row.rot_err_deg = rotation_error_deg(est.pose.rotation, inst.gt_pose.rotation);
  row.trans_err = (est.pose.translation - inst.gt_pose.translation).norm();
  row.shape_err = (est.shape - inst.gt_shape).norm();
  if (est.certificate) row.duality_gap = est.certificate->eta;
  if (est.clique) {
    int kept = 0;
    for (int i : *est.clique) kept += inst.outlier_mask[i] ? 0 : 1;
    const int inliers = static_cast<int>(inst.outlier_mask.size()) - inst.num_outliers();
    row.clique_inlier_rate =
        est.clique->empty() ? 0.0 : static_cast<double>(kept) / static_cast<double>(est.clique->size());
    row.inliers_removed = inliers - kept;
  }
  row.iterations = est.iterations;
  row.time_sec = est.solve_time;
  row.prune_ms = est.timing.prune_ms;
  row.robust_s = est.timing.robust_s;
  row.degenerate = est.degenerate;
  return row;
}

// ---------------------------------------------------------------------------
// Sweep configuration

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw InputError("config field '" + field + "': " + what);
}

template <typename T>
std::vector<T> scalar_or_list(const json& doc, const std::string& field) {
  const json& v = doc.at(field);
  std::vector<T> out;
  try {
    if (v.is_array()) {
      if (v.empty()) bad_field(field, "list must not be empty");
      for (const auto& e : v) {
        if (!e.is_number()) bad_field(field, "expected numbers");
        out.push_back(e.get<T>());
      }
    } else if (v.is_number()) {
      out.push_back(v.get<T>());
    } else {
      bad_field(field, "expected a number or a list of numbers");
    }
  } catch (const json::exception& e) {
    bad_field(field, e.what());
  }
  return out;
}

double number(const json& doc, const std::string& field) {
  const json& v = doc.at(field);
  if (!v.is_number()) bad_field(field, "expected a number");
  return v.get<double>();
}

}  // namespace

SweepConfig parse_sweep_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("config must be a JSON object");

  static const std::set<std::string> known{"method", "methods", "N", "K", "sigma", "r",
                                           "outlier_rates", "lambda", "epsilon", "seeds",
                                           "mode", "clique_timeout_ms"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) bad_field(key, "unknown field");
  }

  SweepConfig cfg;
  const std::string method_key = doc.contains("methods") ? "methods" : "method";
  if (!doc.contains(method_key)) bad_field("method", "required");
  const json& jm = doc[method_key];
  std::vector<std::string> names;
  if (jm.is_string()) {
    names.push_back(jm.get<std::string>());
  } else if (jm.is_array() && !jm.empty() && std::all_of(jm.begin(), jm.end(), [](const json& e) {
               return e.is_string();
             })) {
    names = jm.get<std::vector<std::string>>();
  } else {
    bad_field(method_key, "expected a method name or a non-empty list of names");
  }
  for (const auto& n : names) {
    try {
      cfg.methods.push_back(parse_method(n));
    } catch (const InputError& e) {
      bad_field(method_key, e.what());
    }
  }

  if (doc.contains("N")) {
    if (!doc["N"].is_number_integer() || doc["N"].get<long long>() < 3) {
      bad_field("N", "expected an integer >= 3");
    }
    cfg.N = doc["N"].get<int>();
  }

  if (!doc.contains("K")) bad_field("K", "required");
  for (const json& e : doc["K"].is_array() ? doc["K"] : json::array({doc["K"]})) {
    if (!e.is_number_integer() || e.get<long long>() < 1) bad_field("K", "expected integers >= 1");
    cfg.K.push_back(e.get<int>());
  }
  if (cfg.K.empty()) bad_field("K", "list must not be empty");

  if (doc.contains("sigma")) cfg.sigma = number(doc, "sigma");
  if (!(cfg.sigma >= 0.0)) bad_field("sigma", "must be >= 0");

  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) bad_field("mode", "expected a string");
    try {
      cfg.mode = parse_gen_mode(doc["mode"].get<std::string>());
    } catch (const InputError& e) {
      bad_field("mode", e.what());
    }
  } else {
    cfg.mode = doc.contains("r") ? GenMode::mean_plus_variation : GenMode::iid_models;
  }
  if (doc.contains("r")) {
    cfg.r = scalar_or_list<double>(doc, "r");
    for (double r : cfg.r) {
      if (!(r >= 0.0)) bad_field("r", "must be >= 0");
    }
    if (cfg.mode == GenMode::iid_models &&
        std::any_of(cfg.r.begin(), cfg.r.end(), [](double r) { return r != 0.0; })) {
      bad_field("r", "variation radius requires mode mean_plus_variation");
    }
  } else {
    if (cfg.mode == GenMode::mean_plus_variation) bad_field("r", "required for mean_plus_variation");
    cfg.r = {0.0};
  }

  if (doc.contains("outlier_rates")) {
    cfg.outlier_rates = scalar_or_list<double>(doc, "outlier_rates");
    for (double a : cfg.outlier_rates) {
      if (!(a >= 0.0 && a < 1.0)) bad_field("outlier_rates", "rates must lie in [0, 1)");
    }
  }
  if (doc.contains("lambda")) {
    cfg.lambda = number(doc, "lambda");
    if (!(*cfg.lambda >= 0.0)) bad_field("lambda", "must be >= 0");
  }
  if (doc.contains("epsilon")) {
    cfg.epsilon = number(doc, "epsilon");
    if (!(cfg.epsilon > 0.0)) bad_field("epsilon", "must be > 0");
  }

  if (!doc.contains("seeds")) bad_field("seeds", "required");
  const json& js = doc["seeds"];
  if (js.is_number_integer()) {
    const long long n = js.get<long long>();
    if (n < 0) bad_field("seeds", "count must be >= 0");
    for (long long s = 0; s < n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  } else if (js.is_array()) {
    for (const auto& e : js) {
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        bad_field("seeds", "expected non-negative integers");
      }
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
  } else {
    bad_field("seeds", "expected a count or a list of integers");
  }

  if (doc.contains("clique_timeout_ms")) {
    if (!doc["clique_timeout_ms"].is_number_integer() ||
        doc["clique_timeout_ms"].get<long long>() <= 0) {
      bad_field("clique_timeout_ms", "expected a positive integer");
    }
    cfg.clique_timeout = std::chrono::milliseconds(doc["clique_timeout_ms"].get<long long>());
  }
  return cfg;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sweep_config(ss.str());
}

// ---------------------------------------------------------------------------
// Monte Carlo execution

int default_worker_count() {
  if (const char* env = std::getenv("CATPOSE_WORKERS")) {
    int n = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
    if (ec == std::errc() && *ptr == '\0' && n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string row_key(const std::string& method, int K, double r, double rate, std::uint64_t seed) {
  return method + "|" + std::to_string(K) + "|" + fmt(r) + "|" + fmt(rate) + "|" +
         std::to_string(seed);
}

struct Task {
  GenParams params;
  std::vector<Method> methods;
};

std::vector<ResultRow> run_task(const Task& task, const SweepConfig& cfg) {
  const GenParams& p = task.params;
  MethodOptions opt;
  opt.lambda = cfg.lambda.value_or(std::sqrt(static_cast<double>(p.K) / p.N));
  opt.epsilon = cfg.epsilon;
  opt.clique_timeout = cfg.clique_timeout;

  std::vector<ResultRow> rows;
  std::optional<SyntheticInstance> inst;
  std::string gen_error;
  try {
    inst = generate_instance(p);
  } catch (const std::exception& e) {
    gen_error = e.what();
  }
  std::optional<PairwiseBounds> bounds;
  for (Method m : task.methods) {
    ResultRow row;
    try {
      if (!inst) throw SolverError("instance generation failed: " + gen_error);
      if (uses_pruning(m) && !bounds) bounds = pairwise_bounds(inst->library);
      const Estimate est = run_method(m, inst->measurements, inst->library, opt,
                                      bounds ? &*bounds : nullptr);
      row = evaluate(to_string(m), *inst, est, opt.lambda, opt.epsilon);
    } catch (const std::exception& e) {
      row = row_stub(to_string(m), p, opt.lambda, opt.epsilon);
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_monte_carlo(const SweepConfig& config, const SweepOptions& options) {
  std::set<std::string> done;
  for (const auto& row : options.completed) {
    done.insert(row_key(row.method, row.K, row.r, row.outlier_rate, row.seed));
  }

  std::vector<Task> tasks;
  for (int K : config.K) {
    for (double r : config.r) {
      for (double rate : config.outlier_rates) {
        for (std::uint64_t seed : config.seeds) {
          Task t;
          t.params = GenParams{config.N, K, config.sigma, r, rate, config.mode, seed};
          for (Method m : config.methods) {
            if (!done.count(row_key(to_string(m), K, r, rate, seed))) t.methods.push_back(m);
          }
          if (!t.methods.empty()) tasks.push_back(std::move(t));
        }
      }
    }
  }

  std::vector<std::vector<ResultRow>> results(tasks.size());
  std::vector<bool> finished(tasks.size(), false);
  std::size_t flushed = 0;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::vector<ResultRow> all;

  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      std::vector<ResultRow> rows = run_task(tasks[i], config);
      std::lock_guard<std::mutex> lock(mutex);
      results[i] = std::move(rows);
      finished[i] = true;
      while (flushed < tasks.size() && finished[flushed]) {
        for (auto& row : results[flushed]) {
          if (options.on_row) options.on_row(row);
          all.push_back(std::move(row));
        }
        results[flushed].clear();
        ++flushed;
      }
    }
  };

  const int workers = std::clamp(options.workers, 1, static_cast<int>(std::max<std::size_t>(1, tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return all;
}

// ---------------------------------------------------------------------------
// CSV

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header{
      "method",   "N",          "K",          "sigma",      "r",
      "outlier_rate", "lambda", "epsilon",    "seed",       "failed",
      "rot_err_deg", "trans_err", "shape_err", "duality_gap", "clique_inlier_rate",
      "inliers_removed", "iterations", "time_sec", "prune_ms", "robust_s",
      "degenerate", "error"};
  return header;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' || ch == '\r' ? ' ' : ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw InputError("CSV: unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_num(const std::string& s, const std::string& column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError("CSV: bad value '" + s + "' in column " + column);
  }
  return v;
}

}  // namespace

std::string csv_line(const ResultRow& row) {
  auto metric = [&](double v) { return row.failed ? std::string() : fmt(v); };
  std::ostringstream os;
  os << quote(row.method) << ',' << row.N << ',' << row.K << ',' << fmt(row.sigma) << ','
     << fmt(row.r) << ',' << fmt(row.outlier_rate) << ',' << fmt(row.lambda) << ','
     << fmt(row.epsilon) << ',' << row.seed << ',' << (row.failed ? 1 : 0) << ','
     << metric(row.rot_err_deg) << ',' << metric(row.trans_err) << ',' << metric(row.shape_err)
     << ',' << (row.duality_gap ? fmt(*row.duality_gap) : "") << ','
     << (row.clique_inlier_rate ? fmt(*row.clique_inlier_rate) : "") << ','
     << (row.inliers_removed ? std::to_string(*row.inliers_removed) : "") << ','
     << (row.failed ? "" : std::to_string(row.iterations)) << ',' << metric(row.time_sec) << ','
     << metric(row.prune_ms) << ',' << metric(row.robust_s) << ',' << (row.degenerate ? 1 : 0)
     << ',' << quote(row.error);
  return os.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write CSV: " + path.string());
  const auto& h = csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& row : rows) out << csv_line(row) << '\n';
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header != csv_header()) throw InputError("CSV: unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw InputError("CSV: wrong field count");
    ResultRow row;
    auto d = [&](int i) { return f[i].empty() ? 0.0 : parse_num<double>(f[i], header[i]); };
    row.method = f[0];
    row.N = parse_num<int>(f[1], header[1]);
    row.K = parse_num<int>(f[2], header[2]);
    row.sigma = d(3);
    row.r = d(4);
    row.outlier_rate = d(5);
    row.lambda = d(6);
    row.epsilon = d(7);
    row.seed = parse_num<std::uint64_t>(f[8], header[8]);
    row.failed = f[9] == "1";
    row.rot_err_deg = d(10);
    row.trans_err = d(11);
    row.shape_err = d(12);
    if (!f[13].empty()) row.duality_gap = d(13);
    if (!f[14].empty()) row.clique_inlier_rate = d(14);
    if (!f[15].empty()) row.inliers_removed = parse_num<int>(f[15], header[15]);
    row.iterations = f[16].empty() ? 0 : parse_num<int>(f[16], header[16]);
    row.time_sec = d(17);
    row.prune_ms = d(18);
    row.robust_s = d(19);
    row.degenerate = f[20] == "1";
    row.error = f[21];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read CSV: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

// ---------------------------------------------------------------------------
// Summary

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw InputError("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {q(0.5), q(0.25), q(0.75)};
}

namespace {

json stats(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const Quartiles q = quartiles(v);
  return {{"median", q.median}, {"q1", q.q1}, {"q3", q.q3}, {"iqr", q.iqr()}};
}

}  // namespace

std::string summarize(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ResultRow*>> cells;
  for (const auto& row : rows) {
    const std::string key = row.method + "|" + std::to_string(row.N) + "|" +
                            std::to_string(row.K) + "|" + fmt(row.sigma) + "|" + fmt(row.r) +
                            "|" + fmt(row.outlier_rate);
    auto [it, inserted] = cells.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&row);
  }

  json out = json::array();
  for (const auto& key : order) {
    const auto& group = cells[key];
    const ResultRow& first = *group.front();
    std::vector<double> rot, trans, shape, time, gap, prune, robust, clique_rate;
    int failures = 0, successes = 0, clean = 0, with_clique = 0;
    for (const ResultRow* r : group) {
      if (r->failed) {
        ++failures;
        continue;
      }
      successes += r->success() ? 1 : 0;
      rot.push_back(r->rot_err_deg);
      trans.push_back(r->trans_err);
      shape.push_back(r->shape_err);
      time.push_back(r->time_sec);
      prune.push_back(r->prune_ms);
      robust.push_back(r->robust_s);
      if (r->duality_gap) gap.push_back(*r->duality_gap);
      if (r->clique_inlier_rate) clique_rate.push_back(*r->clique_inlier_rate);
      if (r->inliers_removed) {
        ++with_clique;
        clean += *r->inliers_removed == 0 ? 1 : 0;
      }
    }
    const double runs = static_cast<double>(group.size());
    json cell{{"method", first.method},
              {"N", first.N},
              {"K", first.K},
              {"sigma", first.sigma},
              {"r", first.r},
              {"outlier_rate", first.outlier_rate},
              {"lambda", first.lambda},
              {"epsilon", first.epsilon},
              {"runs", group.size()},
              {"failures", failures},
              {"success_rate", successes / runs},
              {"rot_err_deg", stats(rot)},
              {"trans_err", stats(trans)},
              {"shape_err", stats(shape)},
              {"time_sec", stats(time)},
              {"duality_gap", stats(gap)}};
    if (!clique_rate.empty()) {
      cell["clique_inlier_rate_mean"] =
          std::accumulate(clique_rate.begin(), clique_rate.end(), 0.0) / clique_rate.size();
      cell["no_inlier_removed_rate"] = static_cast<double>(clean) / with_clique;
      cell["prune_ms"] = stats(prune);
    }
    out.push_back(std::move(cell));
  }
  return json{{"cells", out}}.dump(2);
}

}  // namespace catpose
