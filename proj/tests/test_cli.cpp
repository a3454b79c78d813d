#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "catpose/bench_harness.hpp"
#include "catpose/error.hpp"
#include "catpose/serialization.hpp"
#include "cli.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CATPOSE_FIXTURES;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "catpose");
  std::ostringstream out, err;
  const int code = catpose::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("catpose_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fixture(const std::string& rel) { return (kFixtures / rel).string(); }

}  // namespace

TEST_CASE("solve pace_star on the noiseless fixture") {
  const Result r = run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
                        fixture("noiseless/measurements.json"), "--method", "pace_star"});
  CHECK(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["certificate"]["eta"].get<double>() < 1e-6);
  CHECK(doc["pose"]["rotation_quaternion_wxyz"].size() == 4);
  CHECK(doc["pose"]["rotation_matrix"].size() == 3);
  CHECK(doc["pose"]["rotation_matrix"][0].size() == 3);
  CHECK(doc["timing"].contains("prune_ms"));

  const json gt = json::parse(catpose::read_text(fixture("noiseless/ground_truth.json")));
  const Result exact = run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
                            fixture("noiseless/measurements.json"), "--lambda", "0"});
  REQUIRE(exact.code == 0);
  const catpose::Estimate est = catpose::estimate_from_json(exact.out);
  Eigen::Matrix3d R_gt;
  for (int i = 0; i < 9; ++i) R_gt(i / 3, i % 3) = gt["pose"]["rotation_matrix"][i / 3][i % 3].get<double>();
  CHECK(catpose::rotation_error_deg(est.pose.rotation, R_gt) < 1e-6);
}

TEST_CASE("solve with a missing file is an input error") {
  const Result r = run({"solve", "--library", fixture("missing.json"), "--measurements",
                        fixture("noiseless/measurements.json")});
  CHECK(r.code == 2);
  const json doc = json::parse(r.out);
  CHECK(doc.contains("error"));
  CHECK(doc["error"]["message"].get<std::string>().find("missing.json") != std::string::npos);
}

TEST_CASE("solve rejects bad arguments") {
  CHECK(run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
             fixture("noiseless/measurements.json"), "--method", "teaser"})
            .code == 2);
  CHECK(run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
             fixture("noiseless/measurements.json"), "--lambda", "-1"})
            .code == 2);
  CHECK(run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
             fixture("outliers70/measurements.json")})
            .code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("solve pace_hash on the 70% outlier fixture") {
  const Result r = run({"solve", "--library", fixture("outliers70/library.json"), "--measurements",
                        fixture("outliers70/measurements.json"), "--method", "pace_hash", "--epsilon", "0.05"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  const json gt = json::parse(catpose::read_text(fixture("outliers70/ground_truth.json")));
  const auto& mask = doc["inlier_mask"];
  const auto& outliers = gt["outlier_mask"];
  REQUIRE(mask.size() == outliers.size());
  int match = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    match += mask[i].get<bool>() == !outliers[i].get<bool>() ? 1 : 0;
  }
  CHECK(match >= 0.95 * static_cast<double>(mask.size()));
  CHECK(doc["clique"]["members"].size() >= 28);
}

TEST_CASE("solve reuses a bounds cache and writes to --out") {
  const fs::path dir = scratch("bounds");
  const std::string cache = (dir / "bounds.json").string();
  REQUIRE(run({"prune", "--library", fixture("outliers70/library.json"), "--out", cache}).code == 0);
  const std::string est = (dir / "est.json").string();
  const Result a = run({"solve", "--library", fixture("outliers70/library.json"), "--measurements",
                        fixture("outliers70/measurements.json"), "--method", "clique_pace_star", "--bounds",
                        cache, "--out", est});
  CHECK(a.code == 0);
  CHECK(a.out.empty());
  const Result b = run({"solve", "--library", fixture("outliers70/library.json"), "--measurements",
                        fixture("outliers70/measurements.json"), "--method", "clique_pace_star"});
  CHECK(json::parse(catpose::read_text(est))["pose"] == json::parse(b.out)["pose"]);
  // a cache built for another library is ignored with a warning
  const Result c = run({"solve", "--library", fixture("noiseless/library.json"), "--measurements",
                        fixture("noiseless/measurements.json"), "--method", "pace_hash", "--bounds", cache});
  CHECK(c.code == 0);
  CHECK(c.err.find("another library") != std::string::npos);
}

TEST_CASE("prune is idempotent") {
  const fs::path dir = scratch("prune");
  const std::string cache = (dir / "bounds.json").string();
  const Result first = run({"prune", "--library", fixture("car_library.json"), "--out", cache});
  REQUIRE(first.code == 0);
  const std::string bytes = catpose::read_text(cache);
  const auto mtime = fs::last_write_time(cache);
  const Result second = run({"prune", "--library", fixture("car_library.json"), "--out", cache});
  REQUIRE(second.code == 0);
  CHECK_FALSE(json::parse(first.out)["cache_hit"].get<bool>());
  CHECK(json::parse(second.out)["cache_hit"].get<bool>());
  CHECK(catpose::read_text(cache) == bytes);
  CHECK(fs::last_write_time(cache) == mtime);
}

TEST_CASE("prune on a single-model library") {
  const fs::path dir = scratch("k1");
  const std::string cache = (dir / "bounds.json").string();
  REQUIRE(run({"prune", "--library", fixture("k1_library.json"), "--out", cache}).code == 0);
  const json doc = json::parse(catpose::read_text(cache));
  const auto& bmin = doc["b_min"];
  const auto& bmax = doc["b_max"];
  REQUIRE(bmin.size() == bmax.size());
  for (std::size_t i = 0; i < bmin.size(); ++i) {
    for (std::size_t j = 0; j < bmin[i].size(); ++j) {
      CHECK(bmin[i][j].get<double>() == doctest::Approx(bmax[i][j].get<double>()).epsilon(1e-12));
    }
  }
}

TEST_CASE("prune on the car-shaped library") {
  const fs::path dir = scratch("car");
  const auto start = std::chrono::steady_clock::now();
  const Result r = run({"prune", "--library", fixture("car_library.json"), "--out", (dir / "b.json").string()});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["num_pairs"] == 66);
  CHECK(secs < 1.0);
}

TEST_CASE("bench") {
  const fs::path dir = scratch("bench");
  SUBCASE("minimal config") {
    catpose::write_text(dir / "cfg.json", R"({"method": "pace_star", "K": 10, "seeds": 2})");
    const std::string csv = (dir / "out.csv").string();
    const Result r = run({"bench", "--config", (dir / "cfg.json").string(), "--out", csv, "--workers", "1"});
    REQUIRE(r.code == 0);
    const auto rows = catpose::read_csv(csv);
    CHECK(rows.size() == 2);
    CHECK(r.err.find("[2/2]") != std::string::npos);
    CHECK(fs::exists(dir / "out.summary.json"));
    // resuming a finished sweep adds nothing
    const Result again =
        run({"bench", "--config", (dir / "cfg.json").string(), "--out", csv, "--resume", "--quiet"});
    CHECK(again.code == 0);
    CHECK(json::parse(again.out)["new_rows"] == 0);
    CHECK(catpose::read_csv(csv).size() == 2);
  }
  SUBCASE("malformed config names the field") {
    catpose::write_text(dir / "bad.json", R"({"method": "pace_star", "K": 10, "seeds": 2, "sigma": "high"})");
    const Result r = run({"bench", "--config", (dir / "bad.json").string(), "--out", (dir / "x.csv").string()});
    CHECK(r.code == 2);
    CHECK(json::parse(r.out)["error"]["message"].get<std::string>().find("sigma") != std::string::npos);
  }
  SUBCASE("outlier-rate sweep over six methods") {
    catpose::write_text(dir / "fig.json", R"({"method": ["gnc", "irls_gm", "irls_tls", "altern",
        "clique_pace_star", "pace_hash"], "K": 10, "r": 0.1, "outlier_rates": [0.1, 0.5], "seeds": 2})");
    const std::string csv = (dir / "fig.csv").string();
    const Result r = run({"bench", "--config", (dir / "fig.json").string(), "--out", csv, "--quiet"});
    REQUIRE(r.code == 0);
    const json summary = json::parse(catpose::read_text(dir / "fig.summary.json"));
    std::set<std::string> methods;
    std::set<double> rates;
    for (const auto& cell : summary["cells"]) {
      methods.insert(cell["method"].get<std::string>());
      rates.insert(cell["outlier_rate"].get<double>());
      CHECK(cell["rot_err_deg"].contains("median"));
    }
    CHECK(methods.size() == 6);
    CHECK(rates.size() == 2);
    CHECK(summary["cells"].size() == 12);
    CHECK(catpose::read_csv(csv).size() == 24);
  }
}

TEST_CASE("gen writes a solvable instance") {
  const fs::path dir = scratch("gen");
  const Result r = run({"gen", "--out", dir.string(), "--seed", "5", "--N", "40", "--K", "5", "--sigma", "0",
                        "--r", "0.1", "--outlier-rate", "0.25", "--mode", "mean_plus_variation"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["num_outliers"] == 10);
  const Result again = run({"gen", "--out", (dir / "again").string(), "--seed", "5", "--N", "40", "--K", "5",
                            "--sigma", "0", "--r", "0.1", "--outlier-rate", "0.25", "--mode",
                            "mean_plus_variation"});
  REQUIRE(again.code == 0);
  CHECK(catpose::read_text(dir / "measurements.json") == catpose::read_text(dir / "again" / "measurements.json"));
  const Result s = run({"solve", "--library", (dir / "library.json").string(), "--measurements",
                        (dir / "measurements.json").string(), "--method", "gnc"});
  CHECK(s.code == 0);
  CHECK(run({"gen", "--out", dir.string(), "--mode", "bogus"}).code == 2);
}

TEST_CASE("estimate JSON round trip") {
  const Result r = run({"solve", "--library", fixture("outliers70/library.json"), "--measurements",
                        fixture("outliers70/measurements.json"), "--method", "pace_hash"});
  REQUIRE(r.code == 0);
  const catpose::Estimate est = catpose::estimate_from_json(r.out);
  CHECK(json::parse(catpose::estimate_to_json(est)) == json::parse(r.out));
  CHECK_THROWS_AS(catpose::estimate_from_json(R"({"pose": 3})"), catpose::InputError);
}
