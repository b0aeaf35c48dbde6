#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "common.hpp"
#include "fedpredi/harness.hpp"

using namespace fedpredi;

int main(int argc, char** argv) {
  CLI::App app{"Experiment grid runner"};
  app.require_subcommand(1);

  std::string plan_path, results;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run (or resume) every cell of a plan");
  run->add_option("--plan", plan_path, "plan file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--results", results, "results file (JSONL); defaults to <plan name>.results.jsonl");
  run->add_option("--workers", workers, "parallel runs; FEDPREDI_WORKERS when omitted");

  std::string format = "text";
  auto* rep = app.add_subcommand("report", "Summarize a results file");
  rep->add_option("--results", results, "results file (JSONL)")->required()->check(CLI::ExistingFile);
  rep->add_option("--format", format, "output format")->check(CLI::IsMember({"text", "csv"}));

  CLI11_PARSE(app, argc, argv);

  return tools::guarded_main([&] {
    if (*run) {
      const auto plan = load_plan(plan_path);
      if (results.empty()) results = plan.name + ".results.jsonl";
      RunOptions opts;
      if (workers == 0) {
        const char* env = std::getenv("FEDPREDI_WORKERS");
        workers = env ? std::strtoul(env, nullptr, 10) : 1;
      }
      opts.workers = std::max<std::size_t>(1, workers);
      const auto table = run_plan(plan, results, opts);
      std::cout << table.rows.size() << " runs, " << table.failures() << " failed -> " << results << "\n";
      for (const auto& r : table.rows)
        if (!r.ok) std::cerr << "failed " << r.key.canonical() << ": " << r.error << "\n";
      return table.failures() ? 2 : 0;
    }
    std::cout << report(read_results(results), format == "csv" ? ReportFormat::kCsv : ReportFormat::kText);
    return 0;
  });
}
