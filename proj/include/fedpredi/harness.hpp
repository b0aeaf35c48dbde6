#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedpredi/corpus.hpp"
#include "fedpredi/federation.hpp"

namespace fedpredi {

struct CorpusPlan {
  std::optional<SyntheticSpec> synthetic;
  std::string manifest;  // used when synthetic is empty
  std::size_t min_count = 1;
  double test_fraction = 0.2;
  std::size_t labeled_per_class = 10;
};

struct UnlabeledPlan {
  bool iid = true;
  std::vector<double> alphas;
  std::size_t min_client_size = 1;
};

struct LabeledPlan {
  bool iid = false;
  std::vector<double> rho;
  std::vector<double> sigma;
  double sigma_tolerance = 0.5;
  std::size_t max_retries = 200;
};

struct ExperimentPlan {
  std::string name;
  CorpusPlan corpus;
  UnlabeledPlan unlabeled_partition;
  LabeledPlan labeled_partition;
  FederationConfig federation;
  bool pretrain = true;  // false: heads train on raw features
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> comparisons{"baseline", "prep"};

  void validate() const;
  std::size_t run_count() const;
};

// Plan files are JSON objects whose keys are the ExperimentPlan fields.
ExperimentPlan parse_plan(const std::string& json_text);
ExperimentPlan load_plan(const std::filesystem::path& path);
FederationConfig parse_federation_config(const std::string& json_text);
FederationConfig load_federation_config(const std::filesystem::path& path);

struct RunKey {
  std::optional<double> alpha;  // empty: IID unlabeled split
  bool labeled_iid = false;
  double rho_target = 0.0;
  double sigma_target = 0.0;
  std::string method;
  std::uint64_t seed = 0;

  std::string unlabeled_label() const;
  std::string labeled_label() const;
  std::string canonical() const;
  bool operator==(const RunKey&) const = default;
};

struct ResultRow {
  RunKey key;
  bool ok = true;
  std::string error;
  double macro_accuracy = 0.0;
  double macro_f1 = 0.0;
  double rho_realized = 0.0;
  double sigma_realized = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  std::size_t failures() const;
};

std::string serialize_row(const ResultRow& row);
ResultRow parse_row(const std::string& line);
// Reads complete lines; a trailing partial line (interrupted write) is ignored.
ResultTable read_results(const std::filesystem::path& path);

struct RunOptions {
  std::size_t workers = 1;
  std::optional<std::size_t> max_new_runs;  // stop early, as if interrupted
  bool write_timings = true;                // <results>.timings.jsonl sidecar
};

/// Every run of the plan in fixed order (unlabeled cell, labeled cell, seed,
/// method). Rows already present in the results file are skipped; new rows are
/// appended in plan order so an interrupted and resumed run writes the same
/// bytes as an uninterrupted one. Failures are recorded per row.
ResultTable run_plan(const ExperimentPlan& plan, const std::filesystem::path& results_path, const RunOptions& options = {});

// Enumerates the plan's runs in execution order.
std::vector<RunKey> plan_runs(const ExperimentPlan& plan);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample std, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

struct CellSummary {
  RunKey cell;  // seed unused
  std::size_t runs = 0;
  MeanStd accuracy;
  MeanStd f1;
  MeanStd rho_realized;
  MeanStd sigma_realized;
};

struct GainSummary {
  RunKey cell;  // method and seed unused
  std::size_t pairs = 0;
  MeanStd accuracy_gain_pp;
  MeanStd f1_gain_pp;
};

struct TrendSummary {
  std::string unlabeled;
  double sigma_target = 0.0;
  std::vector<std::pair<double, double>> f1_gain_by_rho;  // ascending rho
  bool non_increasing = true;
};

struct Report {
  std::vector<CellSummary> cells;
  std::vector<GainSummary> gains;
  std::vector<TrendSummary> trends;
};

/// Aggregates successful rows. Gains (prep minus baseline, percentage points)
/// use only seeds present for both methods; with gains requested, a cell
/// holding only one of the two methods is an error.
Report summarize(const ResultTable& table, bool gains);

enum class ReportFormat { kText, kCsv };
std::string format_report(const Report& report, ReportFormat format);
std::string report(const ResultTable& table, ReportFormat format);

}  // namespace fedpredi
