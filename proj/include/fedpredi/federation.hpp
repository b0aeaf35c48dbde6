#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedpredi/corpus.hpp"
#include "fedpredi/learners.hpp"
#include "fedpredi/metrics.hpp"
#include "fedpredi/partition.hpp"

namespace fedpredi {

enum class Stage { kPretrain, kFinetune };
std::string_view stage_name(Stage stage);

/// Derives every seed of a run from one global seed.
struct SeedLadder {
  std::uint64_t global = 0;

  std::uint64_t client_round(std::size_t client, std::size_t round, Stage stage) const;
  // Mask seed for a pre-training round; shared by all clients.
  std::uint64_t mask_round(std::size_t round) const;
  std::uint64_t init(Stage stage) const;
};

struct StageConfig {
  std::size_t rounds = 1;
  OptimizerConfig optimizer;
};

struct RoundLog;

// Called after every aggregation with the round's log and global parameters.
using RoundObserver = std::function<void(const RoundLog&, const ParamVector&)>;

struct FederationConfig {
  std::size_t clients = 4;
  std::size_t latent_dim = 8;
  MaskSpec mask;  // seed is replaced per round by the ladder
  StageConfig pretrain{30, {}};
  StageConfig finetune{20, {}};
  std::uint64_t seed = 0;
  std::size_t eval_stride = 1;  // 0 disables per-round evaluation
  bool renormalize_weights = false;
  std::size_t workers = 1;
  RoundObserver on_round;  // optional, e.g. periodic checkpoints

  void validate() const;
  SeedLadder ladder() const { return {seed}; }
};

/// Weighted mean of client parameters with weights n_k / sum n_j, summed in
/// client index order. Clients with n_k = 0 are skipped.
ParamVector fedavg(std::span<const ParamVector> client_params, std::span<const std::size_t> sizes);

struct PrevalenceWeights {
  std::vector<int> rho;
  std::vector<double> w;  // 1 / rho
};

/// Server side of the one-shot prevalence exchange. Input is the class-id set
/// reported by each client and nothing else.
PrevalenceWeights collect_prevalence(std::span<const std::vector<int>> label_sets, std::size_t classes);

// Client side: the class ids present in a labeled manifest, ascending.
std::vector<int> label_set(const CorpusManifest& labeled);

// Weights rescaled to mean 1.
std::vector<double> renormalized(const PrevalenceWeights& weights);

struct EvalResult {
  ConfusionMatrix confusion;
  MacroMetrics metrics;
};

EvalResult evaluate_global(const ParamVector& params, const CorpusManifest& test);

struct ClientRound {
  std::size_t client = 0;
  std::size_t samples = 0;
  double mean_loss = 0.0;
};

struct RoundLog {
  Stage stage = Stage::kPretrain;
  std::size_t round = 0;  // 1-based
  std::vector<ClientRound> clients;
  std::string checksum;  // of the aggregated parameters
  std::optional<MacroMetrics> metrics;
};

// One JSON object per client per round: stage, round, client, n_k, mean_loss,
// checksum; plus one record per evaluated round.
void write_round_logs(std::ostream& out, std::span<const RoundLog> logs);

struct PretrainResult {
  ParamVector encoder;      // theta only
  ParamVector autoencoder;  // theta and phi after the last round
  std::vector<RoundLog> logs;
};

/// Federated masked-reconstruction pre-training. Each round broadcasts
/// (theta, phi), runs local MAE updates and averages both by unlabeled counts.
PretrainResult federated_pretrain(std::span<const CorpusManifest> pool_splits, const FederationConfig& cfg);
PretrainResult federated_pretrain(std::span<const CorpusManifest> pool_splits, const FederationConfig& cfg,
                                  const ParamVector& init);

struct FinetuneResult {
  ParamVector params;  // encoder (when present) and head
  std::optional<PrevalenceWeights> weights;
  std::vector<RoundLog> logs;
};

/// Federated fine-tuning. `init` supplies the encoder (an empty ParamVector
/// trains a head on raw features); the head is always freshly initialized.
/// With use_prep the clients minimize prevalence-weighted CE with weights from
/// collect_prevalence, otherwise plain CE. When `matrix` is given the client
/// label sets must match its columns.
FinetuneResult federated_finetune(std::span<const CorpusManifest> labeled_splits, const AssignmentMatrix* matrix,
                                  const ParamVector& init, const FederationConfig& cfg, bool use_prep,
                                  const CorpusManifest* test = nullptr);

// The classifier federated_finetune starts from.
ParamVector finetune_init(const ParamVector& init, std::size_t classes, std::size_t feature_dim, const SeedLadder& ladder);

/// Single-site reference: `rounds` consecutive local updates on the union of
/// the data, seeded as client 0 of the ladder.
LocalResult centralized_train(const ParamVector& init, std::span<const Example> data, Stage stage,
                              const LocalObjective& objective, const StageConfig& stage_cfg, const SeedLadder& ladder,
                              std::vector<ParamVector>* trajectory = nullptr);

}  // namespace fedpredi
