#include "catpose/outlier_pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "catpose/error.hpp"

namespace catpose {

void CompatibilityGraph::add_edge(int i, int j) {
  if (i == j) return;
  adj_[static_cast<std::size_t>(i) * n_ + j] = 1;
  adj_[static_cast<std::size_t>(j) * n_ + i] = 1;
}

int CompatibilityGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n_; ++j) d += adjacent(i, j) ? 1 : 0;
  return d;
}

std::size_t CompatibilityGraph::num_edges() const {
  std::size_t e = 0;
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) e += adjacent(i, j) ? 1 : 0;
  }
  return e;
}

namespace {

// Minimizer of ||P a|| subject to 1^T a = 1 over the columns of P.
Eigen::VectorXd affine_minimizer(const Eigen::Matrix3Xd& pts, const std::vector<int>& active) {
  const int s = static_cast<int>(active.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) kkt(a, b) = pts.col(active[a]).dot(pts.col(active[b]));
    kkt(a, s) = 1.0;
    kkt(s, a) = 1.0;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  rhs[s] = 1.0;
  return kkt.completeOrthogonalDecomposition().solve(rhs).head(s);
}

// Fallback when the active-set method stalls: vertices, exact edge minima and
// random Dirichlet samples.
SimplexQpResult sampled_min_norm(const Eigen::Matrix3Xd& pts) {
  const int k = static_cast<int>(pts.cols());
  SimplexQpResult best;
  best.c = Eigen::VectorXd::Zero(k);
  best.distance = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::VectorXd& c) {
    const double d = (pts * c).norm();
    if (d < best.distance) {
      best.distance = d;
      best.c = c;
    }
  };
  for (int a = 0; a < k; ++a) {
    consider(Eigen::VectorXd::Unit(k, a));
    for (int b = a + 1; b < k; ++b) {
      const Eigen::Vector3d diff = pts.col(a) - pts.col(b);
      const double den = diff.squaredNorm();
      const double t = den > 0.0 ? std::clamp(-pts.col(b).dot(diff) / den, 0.0, 1.0) : 0.0;
      Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
      c[a] = t;
      c[b] = 1.0 - t;
      consider(c);
    }
  }
  std::mt19937_64 rng(0x5eed);
  std::exponential_distribution<double> expo(1.0);
  for (int s = 0; s < 20000; ++s) {
    Eigen::VectorXd c(k);
    for (int a = 0; a < k; ++a) c[a] = expo(rng);
    consider(c / c.sum());
  }
  return best;
}

}  // namespace

SimplexQpResult min_norm_on_simplex(const Eigen::Matrix3Xd& pts) {
  const int k = static_cast<int>(pts.cols());
  if (k == 0) throw InputError("min_norm_on_simplex: no points");
  const double scale = std::max(pts.colwise().squaredNorm().maxCoeff(), 1e-300);
  constexpr double kOptTol = 1e-12;
  constexpr double kZeroTol = 1e-12;
  constexpr int kMaxMajor = 1000;

  SimplexQpResult res;
  Eigen::Index start = 0;
  pts.colwise().squaredNorm().minCoeff(&start);
  std::vector<int> active{static_cast<int>(start)};
  std::vector<double> lambda{1.0};

  auto current_point = [&]() {
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    for (std::size_t a = 0; a < active.size(); ++a) x += lambda[a] * pts.col(active[a]);
    return x;
  };

  for (int major = 0; major < kMaxMajor; ++major) {
    res.iterations = major + 1;
    const Eigen::Vector3d x = current_point();
    Eigen::Index j = 0;
    const double min_dot = (pts.transpose() * x).minCoeff(&j);
    if (x.squaredNorm() - min_dot <= kOptTol * scale ||
        std::find(active.begin(), active.end(), static_cast<int>(j)) != active.end()) {
      res.converged = true;
      break;
    }
    active.push_back(static_cast<int>(j));
    lambda.push_back(0.0);

    for (int minor = 0; minor < 100; ++minor) {
      const Eigen::VectorXd alpha = affine_minimizer(pts, active);
      if ((alpha.array() > kZeroTol).all()) {
        lambda.assign(alpha.data(), alpha.data() + alpha.size());
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < active.size(); ++a) {
        if (alpha[a] <= kZeroTol && lambda[a] - alpha[a] > 0.0) {
          theta = std::min(theta, lambda[a] / (lambda[a] - alpha[a]));
        }
      }
      std::vector<int> next_active;
      std::vector<double> next_lambda;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const double v = theta * alpha[a] + (1.0 - theta) * lambda[a];
        if (v > kZeroTol) {
          next_active.push_back(active[a]);
          next_lambda.push_back(v);
        }
      }
      if (next_active.empty()) {
        // numerically everything vanished; keep the best single vertex
        std::size_t keep = 0;
        for (std::size_t a = 1; a < active.size(); ++a) {
          if (pts.col(active[a]).squaredNorm() < pts.col(active[keep]).squaredNorm()) keep = a;
        }
        next_active = {active[keep]};
        next_lambda = {1.0};
      }
      const double total = std::accumulate(next_lambda.begin(), next_lambda.end(), 0.0);
      for (double& v : next_lambda) v /= total;
      active = std::move(next_active);
      lambda = std::move(next_lambda);
    }
  }

  res.c = Eigen::VectorXd::Zero(k);
  for (std::size_t a = 0; a < active.size(); ++a) res.c[active[a]] = lambda[a];
  res.distance = (pts * res.c).norm();
  return res;
}

PairwiseBounds pairwise_bounds(const ShapeLibrary& lib) {
  const int n = lib.num_keypoints();
  const int kk = lib.num_models();
  PairwiseBounds out;
  out.b_min = Eigen::MatrixXd::Zero(n, n);
  out.b_max = Eigen::MatrixXd::Zero(n, n);
  Eigen::Matrix3Xd diffs(3, kk);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = 0; k < kk; ++k) diffs.col(k) = lib.model(k).col(j) - lib.model(k).col(i);
      const double hi = diffs.colwise().norm().maxCoeff();
      SimplexQpResult qp = min_norm_on_simplex(diffs);
      if (!qp.converged) {
        std::cerr << "warning: simplex QP for pair (" << i << ", " << j
                  << ") did not converge; using dense sampling\n";
        SimplexQpResult sampled = sampled_min_norm(diffs);
        if (sampled.distance < qp.distance) qp = sampled;
      }
      const double lo = std::min(qp.distance, hi);
      out.b_min(i, j) = out.b_min(j, i) = lo;
      out.b_max(i, j) = out.b_max(j, i) = hi;
    }
  }
  return out;
}

CompatibilityGraph compatibility_graph(const KeypointMeasurements& meas,
                                       const PairwiseBounds& bounds, const PruneParams& params) {
  const int n = meas.size();
  if (bounds.num_keypoints() != n) {
    throw InputError("bounds were computed for a different keypoint count");
  }
  if (!(params.epsilon >= 0.0)) {
    throw InputError("epsilon must be nonnegative");
  }
  CompatibilityGraph graph(n);
  const double slack = 2.0 * params.epsilon;
  const auto& y = meas.points();
  const auto& w = meas.weights();
  for (int i = 0; i < n; ++i) {
    if (w[i] <= 0.0) continue;
    for (int j = i + 1; j < n; ++j) {
      if (w[j] <= 0.0) continue;
      const double d = (y.col(j) - y.col(i)).norm();
      if (bounds.b_min(i, j) - slack <= d && d <= bounds.b_max(i, j) + slack) {
        graph.add_edge(i, j);
      }
    }
  }
  return graph;
}

namespace {

// Branch and bound with greedy-coloring bounds.
class CliqueSearch {
 public:
  using Clock = std::chrono::steady_clock;

  CliqueSearch(const CompatibilityGraph& g, Clock::time_point deadline)
      : g_(g), deadline_(deadline) {}

  // Largest clique within `candidates`. When `target` > 0 the search stops at
  // the first clique of that size and reports nothing smaller.
  std::vector<int> run(std::vector<int> candidates, std::size_t target = 0) {
    target_ = target;
    best_size_ = target > 0 ? target - 1 : 0;
    best_.clear();
    current_.clear();
    done_ = false;
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](int a, int b) { return degree(a) > degree(b); });
    expand(candidates);
    return best_;
  }

  bool timed_out() const { return timed_out_; }

 private:
  int degree(int v) {
    if (degrees_.empty()) {
      degrees_.resize(g_.num_nodes());
      for (int i = 0; i < g_.num_nodes(); ++i) degrees_[i] = g_.degree(i);
    }
    return degrees_[v];
  }

  void color_sort(const std::vector<int>& p, std::vector<int>& order, std::vector<int>& colors) {
    std::vector<std::vector<int>> classes;
    for (int v : p) {
      std::size_t c = 0;
      for (; c < classes.size(); ++c) {
        bool conflict = false;
        for (int u : classes[c]) {
          if (g_.adjacent(u, v)) {
            conflict = true;
            break;
          }
        }
        if (!conflict) break;
      }
      if (c == classes.size()) classes.emplace_back();
      classes[c].push_back(v);
    }
    order.clear();
    colors.clear();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (int v : classes[c]) {
        order.push_back(v);
        colors.push_back(static_cast<int>(c) + 1);
      }
    }
  }

  void expand(const std::vector<int>& p) {
    if (done_) return;
    if ((++nodes_ & 255) == 0 && Clock::now() > deadline_) {
      timed_out_ = true;
      done_ = true;
      return;
    }
    std::vector<int> order;
    std::vector<int> colors;
    color_sort(p, order, colors);
    for (int idx = static_cast<int>(order.size()) - 1; idx >= 0; --idx) {
      if (done_) return;
      if (current_.size() + static_cast<std::size_t>(colors[idx]) <= best_size_) return;
      const int v = order[idx];
      current_.push_back(v);
      std::vector<int> next;
      for (int a = 0; a < idx; ++a) {
        if (g_.adjacent(v, order[a])) next.push_back(order[a]);
      }
      if (next.empty()) {
        if (current_.size() > best_size_) {
          best_size_ = current_.size();
          best_ = current_;
          if (target_ > 0 && best_size_ >= target_) done_ = true;
        }
      } else {
        expand(next);
      }
      current_.pop_back();
    }
  }

  const CompatibilityGraph& g_;
  Clock::time_point deadline_;
  std::vector<int> degrees_;
  std::vector<int> current_;
  std::vector<int> best_;
  std::size_t best_size_ = 0;
  std::size_t target_ = 0;
  long nodes_ = 0;
  bool done_ = false;
  bool timed_out_ = false;
};

}  // namespace

CliqueResult maximum_clique(const CompatibilityGraph& graph, const CliqueOptions& options) {
  CliqueResult out;
  const int n = graph.num_nodes();
  if (n == 0) return out;

  const auto deadline = CliqueSearch::Clock::now() + options.timeout;
  CliqueSearch search(graph, deadline);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> best = search.run(all);
  if (best.empty()) best = {0};
  std::sort(best.begin(), best.end());
  out.members = best;
  if (search.timed_out()) {
    out.exact = false;
    return out;
  }

  // Lexicographically smallest clique of the maximum size: take each vertex in
  // ascending order if some maximum clique extends the current prefix with it.
  const std::size_t omega = best.size();
  std::vector<int> chosen;
  std::vector<int> cand = all;
  while (chosen.size() < omega) {
    bool extended = false;
    for (std::size_t pos = 0; pos < cand.size(); ++pos) {
      const int v = cand[pos];
      std::vector<int> next;
      for (std::size_t q = pos + 1; q < cand.size(); ++q) {
        if (graph.adjacent(v, cand[q])) next.push_back(cand[q]);
      }
      const std::size_t need = omega - chosen.size() - 1;
      bool ok = need == 0;
      if (!ok && next.size() >= need) {
        ok = !search.run(next, need).empty();
        if (search.timed_out()) return out;  // size is exact, ordering best effort
      }
      if (ok) {
        chosen.push_back(v);
        cand = std::move(next);
        extended = true;
        break;
      }
    }
    if (!extended) return out;
  }
  out.members = std::move(chosen);
  return out;
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string library_hash(const ShapeLibrary& lib) {
  std::string bytes;
  for (const auto& m : lib.models()) {
    bytes.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
  }
  return content_hash(bytes);
}

void save_bounds_cache(const std::filesystem::path& path, const BoundsCache& cache) {
  using nlohmann::json;
  const int n = cache.bounds.num_keypoints();
  json doc;
  doc["format"] = "catpose-bounds-v1";
  doc["num_keypoints"] = n;
  doc["library_hash"] = cache.library_hash;
  json lo = json::array();
  json hi = json::array();
  for (int i = 0; i < n; ++i) {
    std::vector<double> rl(n), rh(n);
    for (int j = 0; j < n; ++j) {
      rl[j] = cache.bounds.b_min(i, j);
      rh[j] = cache.bounds.b_max(i, j);
    }
    lo.push_back(rl);
    hi.push_back(rh);
  }
  doc["b_min"] = lo;
  doc["b_max"] = hi;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write bounds cache: " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw InputError("failed writing bounds cache: " + path.string());
}

BoundsCache load_bounds_cache(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open bounds cache: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError(std::string("parse failure in bounds cache: ") + e.what());
  }
  BoundsCache cache;
  try {
    const int n = doc.at("num_keypoints").get<int>();
    cache.library_hash = doc.at("library_hash").get<std::string>();
    const auto lo = doc.at("b_min").get<std::vector<std::vector<double>>>();
    const auto hi = doc.at("b_max").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n) {
      throw InputError("bounds cache matrices do not match num_keypoints");
    }
    cache.bounds.b_min.resize(n, n);
    cache.bounds.b_max.resize(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(lo[i].size()) != n || static_cast<int>(hi[i].size()) != n) {
        throw InputError("bounds cache row has wrong length");
      }
      for (int j = 0; j < n; ++j) {
        cache.bounds.b_min(i, j) = lo[i][j];
        cache.bounds.b_max(i, j) = hi[i][j];
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid bounds cache: ") + e.what());
  }
  return cache;
}

}  // namespace catpose
