#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedpredi/error.hpp"
#include "fedpredi/harness.hpp"

using namespace fedpredi;
namespace fs = std::filesystem;

namespace {

const char* kTinyPlan = R"({
  "name": "tiny",
  "corpus": {"synthetic": {"class_count": 6, "examples_per_class": 30, "feature_dim": 8, "separation": 2.0, "seed": 3},
             "test_fraction": 0.3, "labeled_per_class": 2},
  "unlabeled_partition": {"iid": true},
  "labeled_partition": {"rho": [1.5], "sigma": [0.0]},
  "federation": {"clients": 2, "latent_dim": 4, "patch_count": 4, "mask_ratio": 0.5,
                 "pretrain": {"rounds": 2, "optimizer": {"learning_rate": 0.01, "batch_size": 16}},
                 "finetune": {"rounds": 3, "optimizer": {"learning_rate": 0.05, "batch_size": 4}}},
  "seeds": [1, 2]
})";

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("fedpredi_test_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ResultRow row(std::string method, std::uint64_t seed, double acc, double f1, double rho = 2.0, double sigma = 1.0) {
  ResultRow r;
  r.key.rho_target = rho;
  r.key.sigma_target = sigma;
  r.key.method = std::move(method);
  r.key.seed = seed;
  r.macro_accuracy = acc;
  r.macro_f1 = f1;
  r.rho_realized = rho;
  r.sigma_realized = sigma;
  return r;
}

}  // namespace

TEST_CASE("plan parsing rejects unknown keys and bad values") {
  CHECK_NOTHROW(parse_plan(kTinyPlan));
  std::string bad = kTinyPlan;
  bad.replace(bad.find("\"seeds\""), 7, "\"sedes\"");
  CHECK_THROWS_AS(parse_plan(bad), Error);
  std::string dup = kTinyPlan;
  dup.replace(dup.find("[1, 2]"), 6, "[1, 1]");
  CHECK_THROWS_AS(parse_plan(dup), Error);
}

TEST_CASE("plan enumeration covers the full grid in order") {
  auto plan = parse_plan(kTinyPlan);
  plan.unlabeled_partition.alphas = {0.1, 0.2, 0.5, 1.0};
  plan.unlabeled_partition.iid = true;
  plan.labeled_partition.rho = {3.5, 3.0, 2.5, 2.0};
  plan.labeled_partition.sigma = {0.0, 1.0, 2.0};
  plan.seeds = {1, 2, 3};
  // 5 unlabeled cells x 4 rho x 3 sigma x 3 seeds x 2 methods
  CHECK(plan.run_count() == 5 * 12 * 3 * 2);
  const auto runs = plan_runs(plan);
  CHECK(!runs.front().alpha);
  CHECK(runs.front().method == "baseline");
  CHECK(runs[1].method == "prep");
  CHECK(*runs.back().alpha == 1.0);
  CHECK(runs.back().seed == 3);

  plan.labeled_partition = {};
  plan.labeled_partition.iid = true;
  plan.unlabeled_partition.alphas.clear();
  const auto iid = plan_runs(plan);
  CHECK(iid.size() == 6);
  CHECK(iid[0].labeled_iid);
  CHECK(iid[0].rho_target == 2.0);
}

TEST_CASE("result rows round trip through their serialized form") {
  auto r = row("prep", 7, 0.123456789012345, 0.5);
  r.key.alpha = 0.2;
  CHECK(parse_row(serialize_row(r)) == r);
  ResultRow failed;
  failed.key.method = "baseline";
  failed.ok = false;
  failed.error = "infeasible";
  CHECK(parse_row(serialize_row(failed)) == failed);
  CHECK(r.key.canonical() == "alpha=0.2|rho=2,sigma=1|prep|7");
}

TEST_CASE("a one-cell plan produces one row per seed and method, resumably") {
  const auto plan = parse_plan(kTinyPlan);
  const auto dir = temp_dir("resume");
  RunOptions opts;
  opts.write_timings = false;

  const auto full = run_plan(plan, dir / "full.jsonl", opts);
  CHECK(full.rows.size() == 4);
  CHECK(full.failures() == 0);
  for (const auto& r : full.rows) {
    CHECK(r.ok);
    CHECK(std::abs(r.rho_realized - 1.5) <= 0.1);
  }

  RunOptions partial = opts;
  partial.max_new_runs = 1;
  run_plan(plan, dir / "resumed.jsonl", partial);
  CHECK(read_results(dir / "resumed.jsonl").rows.size() == 1);
  {
    std::ofstream out(dir / "resumed.jsonl", std::ios::app);
    out << "{\"unlabeled\":\"ii";  // torn write
  }
  const auto resumed = run_plan(plan, dir / "resumed.jsonl", opts);
  CHECK(resumed.rows == full.rows);
  CHECK(slurp(dir / "resumed.jsonl") == slurp(dir / "full.jsonl"));

  RunOptions parallel = opts;
  parallel.workers = 2;
  run_plan(plan, dir / "parallel.jsonl", parallel);
  CHECK(slurp(dir / "parallel.jsonl") == slurp(dir / "full.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("infeasible cells are recorded as failures, not aborts") {
  auto plan = parse_plan(kTinyPlan);
  plan.labeled_partition.rho = {1.5, 9.0};
  plan.seeds = {1};
  const auto dir = temp_dir("infeasible");
  RunOptions opts;
  opts.write_timings = false;
  const auto t = run_plan(plan, dir / "r.jsonl", opts);
  CHECK(t.rows.size() == 4);
  CHECK(t.failures() == 2);
  CHECK(!t.rows[2].ok);
  CHECK(!t.rows[2].error.empty());
  fs::remove_all(dir);
}

TEST_CASE("mean and sample standard deviation") {
  CHECK(mean_std({}).mean == 0.0);
  CHECK(mean_std({0.7}).std == 0.0);
  const auto m = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
}

TEST_CASE("report aggregates per cell and pairs gains by seed") {
  ResultTable t;
  t.rows = {row("baseline", 1, 0.50, 0.40), row("prep", 1, 0.60, 0.45), row("baseline", 2, 0.54, 0.44),
            row("prep", 2, 0.56, 0.52),     row("prep", 3, 0.99, 0.99)};
  const auto r = summarize(t, true);
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].cell.method == "baseline");
  CHECK(r.cells[0].accuracy.mean == doctest::Approx(0.52));
  CHECK(r.cells[1].runs == 3);
  REQUIRE(r.gains.size() == 1);
  CHECK(r.gains[0].pairs == 2);
  CHECK(r.gains[0].accuracy_gain_pp.mean == doctest::Approx(6.0));
  CHECK(r.gains[0].f1_gain_pp.mean == doctest::Approx(6.5));
  CHECK(r.gains[0].f1_gain_pp.std == doctest::Approx(std::sqrt(2.0 * 1.5 * 1.5)));

  const auto text = format_report(r, ReportFormat::kText);
  CHECK(text.find("rho=2,sigma=1") != std::string::npos);
  const auto csv = format_report(r, ReportFormat::kCsv);
  CHECK(csv.find(',') != std::string::npos);

  ResultTable lonely;
  lonely.rows = {row("baseline", 1, 0.5, 0.5), row("baseline", 1, 0.5, 0.5, 3.0, 0.0), row("prep", 1, 0.5, 0.5, 3.0, 0.0)};
  CHECK_THROWS_AS(summarize(lonely, true), Error);
  CHECK_NOTHROW(summarize(lonely, false));
}

TEST_CASE("trend flags a gain that shrinks as prevalence grows") {
  ResultTable t;
  const double rhos[] = {1.5, 2.5, 3.5};
  const double gains[] = {0.10, 0.05, 0.01};
  for (int i = 0; i < 3; ++i) {
    t.rows.push_back(row("baseline", 1, 0.5, 0.5, rhos[i], 0.0));
    t.rows.push_back(row("prep", 1, 0.5, 0.5 + gains[i], rhos[i], 0.0));
  }
  const auto r = summarize(t, true);
  REQUIRE(r.trends.size() == 1);
  CHECK(r.trends[0].non_increasing);
  CHECK(r.trends[0].f1_gain_by_rho.front().first == 1.5);
  CHECK(r.trends[0].f1_gain_by_rho.front().second == doctest::Approx(10.0));
  t.rows.back().macro_f1 = 0.9;
  CHECK(!summarize(t, true).trends[0].non_increasing);
}
