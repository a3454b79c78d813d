// Acceptance suite: one PASS/FAIL line per criterion. Exit code is nonzero
// when any gating criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "catpose/bench_harness.hpp"
#include "catpose/conic_backend.hpp"
#include "catpose/error.hpp"
#include "catpose/robust_pipeline.hpp"
#include "catpose/so3.hpp"
#include "oracles.hpp"

using namespace catpose;

namespace {

// Pinned tolerances.
constexpr int kSeeds = 50;
constexpr double kGapThreshold = 1e-4;
constexpr double kTightFraction = 0.95;
constexpr double kNoiseFloorFactor = 3.0;
constexpr double kAlternFailDeg = 10.0;
constexpr double kAlternFailFraction = 0.20;
constexpr double kCostAgreement = 1e-6;
constexpr double kCostAgreeFraction = 0.80;
constexpr double kLadderSlack = 0.10;
constexpr double kCliqueInlierFraction = 0.95;
constexpr double kNoRemovalFraction = 0.90;
constexpr double kVariantSuccess = 0.90 - kLadderSlack;
constexpr double kCliqueMs = 50.0;
constexpr double kGncSeconds = 5.0;

void parallel_for(int n, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min(n, default_worker_count()));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

double median(std::vector<double> v) { return v.empty() ? NAN : quartiles(std::move(v)).median; }

double fraction(const std::vector<bool>& v) {
  return v.empty() ? 0.0 : static_cast<double>(std::count(v.begin(), v.end(), true)) / v.size();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail, bool gating = true) {
  std::printf("criterion %d: %s  %s%s\n", id, pass ? "PASS" : "FAIL", detail.c_str(),
              gating ? "" : " (soft, not gating)");
  std::fflush(stdout);
  if (gating && !pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Rotation error when the shape is known: weighted Wahba on centered points.
double noise_floor_deg(const SyntheticInstance& inst) {
  const auto& y = inst.measurements.points();
  const Eigen::VectorXd& w = inst.measurements.weights();
  const Eigen::Matrix3Xd s = inst.library.combine(inst.gt_shape);
  const Eigen::Vector3d yw = y * w / w.sum();
  const Eigen::Vector3d sw = s * w / w.sum();
  const Eigen::Matrix3d R = wahba_svd(y.colwise() - yw, s.colwise() - sw, w);
  return rotation_error_deg(R, inst.gt_pose.rotation);
}

struct TightnessRun {
  double eta = 0.0;
  double pace_err = 0.0;
  double floor_err = 0.0;
  double altern_err = 0.0;
  double f_pace = 0.0;
  double f_altern = 0.0;
};

// Criteria 1 and 2 share the same instances.
std::map<int, std::vector<TightnessRun>> tightness_runs() {
  std::map<int, std::vector<TightnessRun>> out;
  for (int K : {10, 100, 500}) {
    std::vector<TightnessRun> runs(kSeeds);
    const double lambda = std::sqrt(K / 100.0);
    parallel_for(kSeeds, [&](int s) {
      const auto inst = generate_outlier_free(GenParams{100, K, 0.01, 0.0, 0.0, GenMode::iid_models,
                                                        static_cast<std::uint64_t>(s)});
      const Estimate ps = pace_star(inst.measurements, inst.library, lambda);
      const Estimate al = alternating_minimization(inst.measurements, inst.library, lambda);
      TightnessRun& r = runs[s];
      r.eta = ps.certificate->eta;
      r.pace_err = rotation_error_deg(ps.pose.rotation, inst.gt_pose.rotation);
      r.floor_err = noise_floor_deg(inst);
      r.altern_err = rotation_error_deg(al.pose.rotation, inst.gt_pose.rotation);
      r.f_pace = objective(inst.measurements, inst.library, ps.pose, ps.shape, lambda);
      r.f_altern = objective(inst.measurements, inst.library, al.pose, al.shape, lambda);
    });
    out[K] = std::move(runs);
  }
  return out;
}

void criterion1(const std::map<int, std::vector<TightnessRun>>& runs) {
  bool pass = true;
  std::string detail;
  for (const auto& [K, rs] : runs) {
    std::vector<bool> tight;
    std::vector<double> pe, fe;
    for (const auto& r : rs) {
      tight.push_back(r.eta < kGapThreshold);
      pe.push_back(r.pace_err);
      fe.push_back(r.floor_err);
    }
    const double tf = fraction(tight);
    const double mp = median(pe);
    const double mf = median(fe);
    pass = pass && tf >= kTightFraction && mp <= kNoiseFloorFactor * mf;
    detail += "K=" + std::to_string(K) + " tight=" + fmt("%.2f", tf) + " med_rot=" + fmt("%.3g", mp) +
              "deg floor=" + fmt("%.3g", mf) + "deg; ";
  }
  report(1, pass, detail);
}

void criterion2(const std::map<int, std::vector<TightnessRun>>& runs) {
  int altern_fail = 0;
  int pace_fail = 0;
  for (const auto& r : runs.at(500)) {
    altern_fail += r.altern_err > kAlternFailDeg ? 1 : 0;
    pace_fail += r.pace_err > kAlternFailDeg ? 1 : 0;
  }
  std::vector<bool> agree;
  for (const auto& r : runs.at(10)) {
    agree.push_back(std::abs(r.f_altern - r.f_pace) <= kCostAgreement * std::max(1.0, r.f_pace));
  }
  const double af = static_cast<double>(altern_fail) / kSeeds;
  const double ag = fraction(agree);
  const bool pass = af >= kAlternFailFraction && pace_fail == 0 && ag >= kCostAgreeFraction;
  report(2, pass,
         "K=500 altern>10deg=" + fmt("%.2f", af) + " pace>10deg=" + std::to_string(pace_fail) +
             "; K=10 cost agreement=" + fmt("%.2f", ag));
}

// Success table for the outlier-rate ladder; returns success rate per (method, rate).
std::map<std::pair<Method, double>, double> ladder(int K, double r, const std::vector<double>& rates,
                                                   const std::vector<Method>& methods,
                                                   std::vector<ResultRow>* rows_out = nullptr) {
  SweepConfig cfg;
  cfg.methods = methods;
  cfg.N = 100;
  cfg.K = {K};
  cfg.sigma = 0.01;
  cfg.r = {r};
  cfg.outlier_rates = rates;
  cfg.epsilon = 0.05;
  cfg.mode = GenMode::mean_plus_variation;
  for (int s = 0; s < kSeeds; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  SweepOptions opt;
  opt.workers = default_worker_count();
  const auto rows = run_monte_carlo(cfg, opt);
  std::map<std::pair<Method, double>, std::pair<int, int>> counts;
  for (const auto& row : rows) {
    auto& c = counts[{parse_method(row.method), row.outlier_rate}];
    c.first += !row.failed && row.success() ? 1 : 0;
    c.second += 1;
  }
  std::map<std::pair<Method, double>, double> out;
  for (const auto& [key, c] : counts) out[key] = static_cast<double>(c.first) / c.second;
  if (rows_out != nullptr) *rows_out = rows;
  return out;
}

void criterion3() {
  const std::vector<double> rates{0.1, 0.4, 0.6, 0.8, 0.9};
  const std::vector<Method> methods{Method::irls_tls, Method::irls_gm, Method::gnc, Method::pace_hash};
  const auto sr = ladder(10, 0.1, rates, methods);
  std::printf("  success rates (rows: method, cols: outlier rate 0.1 0.4 0.6 0.8 0.9)\n");
  for (Method m : methods) {
    std::printf("  %-10s", to_string(m).c_str());
    for (double rate : rates) std::printf(" %5.2f", sr.at({m, rate}));
    std::printf("\n");
  }
  const double tls = sr.at({Method::irls_tls, 0.1});
  const double gm = sr.at({Method::irls_gm, 0.4});
  const double gnc = sr.at({Method::gnc, 0.6});
  const double hash = sr.at({Method::pace_hash, 0.9});
  const bool pass = tls < 0.50 + kLadderSlack && gm >= 0.90 - kLadderSlack && gnc >= 0.90 - kLadderSlack &&
                    hash >= 0.90 - kLadderSlack;
  report(3, pass,
         "irls_tls@0.1=" + fmt("%.2f", tls) + " irls_gm@0.4=" + fmt("%.2f", gm) + " gnc@0.6=" + fmt("%.2f", gnc) +
             " pace_hash@0.9=" + fmt("%.2f", hash));
}

void criterion4() {
  std::vector<ResultRow> rows;
  ladder(10, 0.1, {0.7}, {Method::pace_hash}, &rows);
  double sum = 0.0;
  std::vector<bool> none_removed;
  for (const auto& row : rows) {
    if (row.failed || !row.clique_inlier_rate) {
      none_removed.push_back(false);
      continue;
    }
    sum += *row.clique_inlier_rate;
    none_removed.push_back(*row.inliers_removed == 0);
  }
  const double mean = sum / static_cast<double>(rows.size());
  const double nr = fraction(none_removed);
  report(4, mean >= kCliqueInlierFraction && nr >= kNoRemovalFraction,
         "mean clique inlier fraction=" + fmt("%.3f", mean) + " no-inlier-removed=" + fmt("%.2f", nr));
}

void criterion5() {
  struct Variant {
    int K;
    double r;
    bool gate_at_09;
  };
  bool pass = true;
  std::string detail;
  for (const Variant& v : {Variant{10, 0.2, true}, Variant{50, 0.1, true}, Variant{50, 0.2, false}}) {
    const auto sr = ladder(v.K, v.r, {0.8, 0.9}, {Method::pace_hash});
    const double s8 = sr.at({Method::pace_hash, 0.8});
    const double s9 = sr.at({Method::pace_hash, 0.9});
    pass = pass && s8 >= kVariantSuccess && (!v.gate_at_09 || s9 >= kVariantSuccess);
    detail += "(K=" + std::to_string(v.K) + ",r=" + fmt("%.1f", v.r) + ") @0.8=" + fmt("%.2f", s8) +
              " @0.9=" + fmt("%.2f", s9) + (v.gate_at_09 ? "" : " [0.9 not gated]") + "; ";
  }
  report(5, pass, detail);
}

void criterion6() {
  std::vector<double> clique_ms, gnc_s;
  for (int s = 0; s < 10; ++s) {
    const auto inst = generate_robust_instance(
        GenParams{66, 79, 0.01, 0.1, 0.5, GenMode::mean_plus_variation, static_cast<std::uint64_t>(s)});
    const auto bounds = pairwise_bounds(inst.library);
    const double lambda = std::sqrt(79.0 / 66.0);
    const Estimate e = pace_hash(inst.measurements, inst.library, lambda, make_pace_hash_params(0.05), &bounds);
    clique_ms.push_back(e.timing.prune_ms);
    gnc_s.push_back(e.timing.robust_s);
  }
  const double mc = median(clique_ms);
  const double mg = median(gnc_s);
  report(6, mc <= kCliqueMs && mg <= kGncSeconds,
         "N=66 median prune=" + fmt("%.2f", mc) + "ms gnc=" + fmt("%.3f", mg) + "s", false);
}

// Criterion 7 property suites.

bool prop_kkt() {
  std::mt19937_64 rng(701);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = generate_outlier_free(GenParams{30, 6, 0.05, 0.0, 0.0, GenMode::iid_models,
                                                      static_cast<std::uint64_t>(trial)});
    const auto cd = center_and_weight(inst.measurements, inst.library);
    const double lambda = 0.3;
    const auto cache = build_shape_cache(cd, lambda);
    const Eigen::Matrix3d R = oracle::random_rotation(rng);
    const ShapeCoefficients c = solve_shape(R, cd, cache);
    // stationarity of the centered cost plus multiplier, and the sum constraint
    Eigen::VectorXd rotated(cd.y_bar.size());
    for (int i = 0; i < cd.num_keypoints(); ++i) rotated.segment<3>(3 * i) = R.transpose() * cd.y_bar.segment<3>(3 * i);
    const Eigen::VectorXd grad = 2.0 * cd.B_bar.transpose() * (cd.B_bar * c - rotated) + 2.0 * lambda * c;
    const double mult = -grad.mean();
    const double res = (grad + mult * Eigen::VectorXd::Ones(c.size())).cwiseAbs().maxCoeff();
    worst = std::max({worst, res / std::max(1.0, grad.cwiseAbs().maxCoeff()), std::abs(c.sum() - 1.0)});
  }
  std::printf("  kkt residual max=%.2e\n", worst);
  return worst <= 1e-9;
}

bool prop_sandwich() {
  std::mt19937_64 rng(702);
  std::normal_distribution<double> nd;
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = generate_instance(GenParams{20, 4, 0.05, 0.1, trial % 2 == 0 ? 0.0 : 0.4,
                                                  GenMode::mean_plus_variation, static_cast<std::uint64_t>(trial)});
    const Estimate e = pace_star(inst.measurements, inst.library, 0.5);
    const auto& c = *e.certificate;
    violations += c.f_sdp <= c.f_est + 1e-8 * std::max(1.0, std::abs(c.f_est)) ? 0 : 1;
  }
  std::printf("  sandwich violations=%d/100\n", violations);
  return violations == 0;
}

bool prop_necessity() {
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = 0.05;
    // bounded noise so every inlier pair satisfies the compatibility test
    auto inst = generate_robust_instance(GenParams{12, 5, 0.0, 0.1, 0.0, GenMode::mean_plus_variation,
                                                   static_cast<std::uint64_t>(trial)});
    std::mt19937_64 rng(10000 + trial);
    std::normal_distribution<double> nd;
    Eigen::Matrix3Xd y = inst.measurements.points();
    for (int i = 0; i < y.cols(); ++i) {
      Eigen::Vector3d d(nd(rng), nd(rng), nd(rng));
      y.col(i) += std::uniform_real_distribution<double>(0.0, eps)(rng) * d.normalized();
    }
    const auto bounds = pairwise_bounds(inst.library);
    const auto g = compatibility_graph(KeypointMeasurements(y), bounds, PruneParams{eps});
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j = i + 1; j < g.num_nodes(); ++j) violations += g.adjacent(i, j) ? 0 : 1;
    }
  }
  std::printf("  necessity violations=%d over 1000 instances\n", violations);
  return violations == 0;
}

bool prop_clique() {
  std::mt19937_64 rng(704);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    const double p = std::uniform_real_distribution<double>(0.1, 0.95)(rng);
    CompatibilityGraph g(n);
    std::vector<std::uint32_t> masks(n, 0);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (std::bernoulli_distribution(p)(rng)) {
          g.add_edge(i, j);
          masks[i] |= 1u << j;
          masks[j] |= 1u << i;
        }
      }
    }
    mismatches += maximum_clique(g).members == oracle::brute_force_max_clique(masks) ? 0 : 1;
  }
  std::printf("  clique mismatches=%d/200\n", mismatches);
  return mismatches == 0;
}

bool prop_bmin() {
  std::mt19937_64 rng(705);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 2 + trial % 2;
    Eigen::Matrix3Xd p(3, K);
    for (int i = 0; i < p.size(); ++i) p.data()[i] = nd(rng);
    const double qp = min_norm_on_simplex(p).distance;
    const double grid = oracle::simplex_grid_min_norm(p, 1e-3);
    worst = std::max(worst, std::abs(qp - grid));
    if (qp > grid + 1e-12) worst = std::max(worst, 1.0);
  }
  std::printf("  b_min vs grid max diff=%.2e\n", worst);
  return worst <= 1e-3;
}

bool prop_altern() {
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int K = trial % 2 == 0 ? 10 : 200;
    const auto inst = generate_outlier_free(GenParams{100, K, 0.01, 0.0, 0.0, GenMode::iid_models,
                                                      static_cast<std::uint64_t>(trial)});
    std::vector<double> h;
    alternating_minimization(inst.measurements, inst.library, std::sqrt(K / 100.0), {}, &h);
    for (std::size_t t = 1; t < h.size(); ++t) violations += h[t] <= h[t - 1] + 1e-10 ? 0 : 1;
  }
  std::printf("  alternation monotonicity violations=%d\n", violations);
  return violations == 0;
}

bool prop_wahba() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> nd;
  int beaten = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::Matrix3Xd a(3, 12), b(3, 12);
    for (int i = 0; i < b.size(); ++i) b.data()[i] = nd(rng);
    a = oracle::random_rotation(rng) * b;
    for (int i = 0; i < a.size(); ++i) a.data()[i] += 0.2 * nd(rng);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(12);
    auto cost = [&](const Eigen::Matrix3d& R) { return (a - R * b).colwise().squaredNorm().dot(w); };
    const double f = cost(wahba_svd(a, b, w));
    for (int s = 0; s < 1000; ++s) beaten += cost(oracle::random_rotation(rng)) < f - 1e-12 ? 1 : 0;
  }
  std::printf("  wahba beaten by random rotations=%d\n", beaten);
  return beaten == 0;
}

bool prop_rotation_error() {
  std::mt19937_64 rng(708);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Matrix3d R = oracle::random_rotation(rng);
    const double theta = std::uniform_real_distribution<double>(0.5, 179.5)(rng);
    const Eigen::Matrix3d Rh = R * oracle::rodrigues(Eigen::Vector3d::UnitX(), theta * M_PI / 180.0);
    worst = std::max(worst, std::abs(rotation_error_deg(Rh, R) - theta));
  }
  std::printf("  rotation error oracle max diff=%.2e deg\n", worst);
  return worst <= 1e-9;
}

void criterion7() {
  const std::vector<std::pair<std::string, std::function<bool()>>> props{
      {"kkt", prop_kkt},       {"sandwich", prop_sandwich},   {"necessity", prop_necessity},
      {"clique", prop_clique}, {"b_min", prop_bmin},          {"altern", prop_altern},
      {"wahba", prop_wahba},   {"rot_err", prop_rotation_error}};
  std::string failed;
  for (const auto& [name, fn] : props) {
    if (!fn()) failed += name + " ";
  }
  report(7, failed.empty(), failed.empty() ? "all property suites hold" : "failed: " + failed);
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  auto lap = [&](const char* what) {
    std::printf("  [%s done at %.1fs]\n", what,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };
  try {
    const auto runs = tightness_runs();
    criterion1(runs);
    criterion2(runs);
    lap("1-2");
    criterion3();
    lap("3");
    criterion4();
    criterion5();
    lap("4-5");
    criterion6();
    criterion7();
    lap("6-7");
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("acceptance: %d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
