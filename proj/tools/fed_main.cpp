#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "common.hpp"
#include "fedpredi/federation.hpp"
#include "fedpredi/harness.hpp"

using namespace fedpredi;

namespace {

void write_logs(const std::string& path, const std::vector<RoundLog>& logs) {
  if (path.empty()) {
    write_round_logs(std::cout, logs);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_round_logs(out, logs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated pre-training and fine-tuning"};
  app.require_subcommand(1);

  std::string splits, config, out, log;
  auto* pre = app.add_subcommand("pretrain", "Masked-reconstruction pre-training on unlabeled client splits");
  pre->add_option("--splits", splits, "directory of client_<k>.manifest files")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--config", config, "federation config (JSON)")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", out, "checkpoint for the encoder and decoder")->required();
  pre->add_option("--log", log, "round log (JSONL); stdout when omitted");

  std::string matrix, init, prep = "off", test;
  auto* ft = app.add_subcommand("finetune", "Supervised fine-tuning on labeled client splits");
  ft->add_option("--splits", splits, "directory of client_<k>.manifest files")->required()->check(CLI::ExistingDirectory);
  ft->add_option("--matrix", matrix, "assignment matrix the splits were cut from")->check(CLI::ExistingFile);
  ft->add_option("--init", init, "pre-trained checkpoint; raw-feature head when omitted")->check(CLI::ExistingFile);
  ft->add_option("--prep", prep, "prevalence-weighted loss")->check(CLI::IsMember({"on", "off"}));
  ft->add_option("--test", test, "test manifest for evaluation")->check(CLI::ExistingFile);
  ft->add_option("--config", config, "federation config (JSON)")->required()->check(CLI::ExistingFile);
  ft->add_option("--out", out, "checkpoint for the classifier")->required();
  ft->add_option("--log", log, "round log (JSONL); stdout when omitted");

  std::size_t every = 0;
  std::string ckpt_dir;
  for (auto* sub : {pre, ft}) {
    sub->add_option("--checkpoint-every", every, "also save the global model every N rounds");
    sub->add_option("--checkpoint-dir", ckpt_dir, "directory for periodic checkpoints");
  }

  CLI11_PARSE(app, argc, argv);

  return tools::guarded_main([&] {
    auto cfg = load_federation_config(config);
    const auto clients = tools::load_client_dir(splits);
    cfg.clients = clients.size();
    if (every) {
      if (ckpt_dir.empty()) throw Error("--checkpoint-every needs --checkpoint-dir");
      std::filesystem::create_directories(ckpt_dir);
      cfg.on_round = [&](const RoundLog& log, const ParamVector& params) {
        if (log.round % every == 0)
          save_checkpoint(std::filesystem::path(ckpt_dir) /
                              (std::string(stage_name(log.stage)) + "_round_" + std::to_string(log.round) + ".ckpt"),
                          params);
      };
    }
    if (*pre) {
      const auto r = federated_pretrain(clients, cfg);
      save_checkpoint(out, r.autoencoder);
      write_logs(log, r.logs);
      return 0;
    }
    std::optional<AssignmentMatrix> m;
    if (!matrix.empty()) m = load_assignment_matrix(matrix);
    ParamVector start;
    if (!init.empty()) start = load_checkpoint(init).select({kEncoder});
    std::optional<CorpusManifest> test_set;
    if (!test.empty()) test_set = load_manifest(test);
    const auto r = federated_finetune(clients, m ? &*m : nullptr, start, cfg, prep == "on", test_set ? &*test_set : nullptr);
    save_checkpoint(out, r.params);
    write_logs(log, r.logs);
    if (test_set) {
      const auto eval = evaluate_global(r.params, *test_set);
      std::cerr << "macro_accuracy " << format_double(eval.metrics.macro_accuracy) << " macro_f1 "
                << format_double(eval.metrics.macro_f1) << "\n";
    }
    return 0;
  });
}
