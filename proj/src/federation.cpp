#include "fedpredi/federation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "fedpredi/error.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {

std::string_view stage_name(Stage stage) { return stage == Stage::kPretrain ? "pretrain" : "finetune"; }

std::uint64_t SeedLadder::client_round(std::size_t client, std::size_t round, Stage stage) const {
  return mix_seed({global, hash_string(stage_name(stage)), client, round});
}

std::uint64_t SeedLadder::mask_round(std::size_t round) const {
  return mix_seed({global, hash_string("mask"), round});
}

std::uint64_t SeedLadder::init(Stage stage) const {
  return mix_seed({global, hash_string("init"), hash_string(stage_name(stage))});
}

void FederationConfig::validate() const {
  if (clients < 1) throw Error("federation needs at least one client");
  if (latent_dim < 1) throw Error("latent dimension must be positive");
  if (pretrain.rounds < 1 || finetune.rounds < 1) throw Error("round counts must be positive");
  pretrain.optimizer.validate();
  finetune.optimizer.validate();
  mask.masked_count();
}

ParamVector fedavg(std::span<const ParamVector> client_params, std::span<const std::size_t> sizes) {
  if (client_params.empty()) throw Error("fedavg needs at least one client");
  if (client_params.size() != sizes.size()) throw Error("fedavg: one size per client required");
  for (const auto& p : client_params)
    if (!p.same_layout(client_params.front())) throw Error("fedavg: client parameter layouts differ");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (total == 0) throw Error("fedavg: all client sizes are zero");

  ParamVector out(client_params.front().shapes());
  auto acc = out.values();
  const double denom = static_cast<double>(total);
  for (std::size_t k = 0; k < client_params.size(); ++k) {
    if (sizes[k] == 0) continue;
    const double w = static_cast<double>(sizes[k]) / denom;
    auto v = client_params[k].values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
  return out;
}

PrevalenceWeights collect_prevalence(std::span<const std::vector<int>> label_sets, std::size_t classes) {
  PrevalenceWeights pw;
  pw.rho.assign(classes, 0);
  std::vector<char> seen(classes);
  for (const auto& set : label_sets) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int c : set) {
      if (c < 0 || static_cast<std::size_t>(c) >= classes)
        throw Error("label id " + std::to_string(c) + " outside [0, " + std::to_string(classes) + ")");
      seen[static_cast<std::size_t>(c)] = 1;
    }
    for (std::size_t c = 0; c < classes; ++c) pw.rho[c] += seen[c];
  }
  pw.w.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (pw.rho[c] == 0) throw Error("class " + std::to_string(c) + " is held by no client");
    pw.w[c] = 1.0 / pw.rho[c];
  }
  return pw;
}

std::vector<int> label_set(const CorpusManifest& labeled) {
  std::vector<char> seen(labeled.class_count(), 0);
  for (const auto& e : labeled.examples) {
    if (e.class_id == kUnlabeled) throw Error("label set requested for unlabeled data");
    seen[static_cast<std::size_t>(e.class_id)] = 1;
  }
  std::vector<int> out;
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (seen[c]) out.push_back(static_cast<int>(c));
  return out;
}

std::vector<double> renormalized(const PrevalenceWeights& weights) {
  const double mean = std::accumulate(weights.w.begin(), weights.w.end(), 0.0) / static_cast<double>(weights.w.size());
  std::vector<double> out(weights.w);
  for (auto& v : out) v /= mean;
  return out;
}

EvalResult evaluate_global(const ParamVector& params, const CorpusManifest& test) {
  const std::size_t classes = params.segment(kHead).shape.out_dim;
  if (test.class_count() != classes) throw Error("test set label space does not match the head");
  ConfusionMatrix cm(classes);
  for (const auto& e : test.examples) {
    if (e.class_id == kUnlabeled) throw Error("evaluation needs a labeled test manifest");
    cm.add(e.class_id, predict(params, e.features));
  }
  auto metrics = macro_metrics(cm);
  return {std::move(cm), std::move(metrics)};
}

void write_round_logs(std::ostream& out, std::span<const RoundLog> logs) {
  using nlohmann::ordered_json;
  for (const auto& log : logs) {
    for (const auto& c : log.clients) {
      ordered_json j;
      j["stage"] = stage_name(log.stage);
      j["round"] = log.round;
      j["client"] = c.client;
      j["n_k"] = c.samples;
      j["mean_loss"] = c.mean_loss;
      j["checksum"] = log.checksum;
      out << j.dump() << '\n';
    }
    if (log.metrics) {
      ordered_json j;
      j["stage"] = stage_name(log.stage);
      j["round"] = log.round;
      j["checksum"] = log.checksum;
      j["macro_accuracy"] = log.metrics->macro_accuracy;
      j["macro_f1"] = log.metrics->macro_f1;
      out << j.dump() << '\n';
    }
  }
}

namespace {

// Runs fn(k) for every client; results land by index so scheduling cannot
// change them. The first failure in client order is rethrown.
void for_each_client(std::size_t clients, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(clients);
  auto guarded = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (workers <= 1 || clients <= 1) {
    for (std::size_t k = 0; k < clients; ++k) guarded(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, clients); ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < clients; k = next++) guarded(k);
      });
    pool.clear();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RoundOutcome {
  ParamVector params;
  RoundLog log;
};

RoundOutcome run_round(const ParamVector& global, std::span<const CorpusManifest> splits, Stage stage, std::size_t round,
                       const LocalObjective& objective, const FederationConfig& cfg) {
  const std::size_t K = splits.size();
  const auto ladder = cfg.ladder();
  std::vector<ParamVector> updated(K);
  std::vector<std::size_t> sizes(K);
  std::vector<double> losses(K, 0.0);
  const auto& opt = stage == Stage::kPretrain ? cfg.pretrain.optimizer : cfg.finetune.optimizer;
  for_each_client(K, cfg.workers, [&](std::size_t k) {
    sizes[k] = splits[k].size();
    if (sizes[k] == 0) {
      updated[k] = global;
      return;
    }
    auto local = local_update(global, splits[k].examples, objective, opt, ladder.client_round(k, round, stage));
    losses[k] = local.mean_loss();
    updated[k] = std::move(local.params);
  });

  RoundOutcome out{fedavg(updated, sizes), {}};
  out.log.stage = stage;
  out.log.round = round;
  for (std::size_t k = 0; k < K; ++k) out.log.clients.push_back({k, sizes[k], losses[k]});
  out.log.checksum = checksum(out.params);
  return out;
}

}  // namespace

PretrainResult federated_pretrain(std::span<const CorpusManifest> pool_splits, const FederationConfig& cfg) {
  std::size_t dim = 0;
  for (const auto& s : pool_splits)
    if (s.feature_dim) dim = s.feature_dim;
  if (dim == 0) throw Error("pre-training needs a nonzero feature dimension");
  return federated_pretrain(pool_splits, cfg, init_autoencoder(dim, cfg.latent_dim, cfg.ladder().init(Stage::kPretrain)));
}

PretrainResult federated_pretrain(std::span<const CorpusManifest> pool_splits, const FederationConfig& cfg,
                                  const ParamVector& init) {
  cfg.validate();
  if (pool_splits.size() != cfg.clients)
    throw Error("expected " + std::to_string(cfg.clients) + " unlabeled splits, got " + std::to_string(pool_splits.size()));
  if (!init.has(kEncoder) || !init.has(kDecoder)) throw Error("pre-training needs encoder and decoder segments");
  const auto ladder = cfg.ladder();

  PretrainResult result;
  ParamVector global = init;
  LocalObjective objective{LossKind::kMae, cfg.mask, {}};
  for (std::size_t t = 1; t <= cfg.pretrain.rounds; ++t) {
    objective.mask.seed = ladder.mask_round(t);
    auto outcome = run_round(global, pool_splits, Stage::kPretrain, t, objective, cfg);
    global = std::move(outcome.params);
    if (cfg.on_round) cfg.on_round(outcome.log, global);
    result.logs.push_back(std::move(outcome.log));
  }
  result.encoder = global.select({kEncoder});
  result.autoencoder = std::move(global);
  return result;
}

ParamVector finetune_init(const ParamVector& init, std::size_t classes, std::size_t feature_dim, const SeedLadder& ladder) {
  const auto seed = ladder.init(Stage::kFinetune);
  if (init.has(kEncoder)) {
    if (init.segment(kEncoder).shape.in_dim != feature_dim) throw Error("encoder input does not match the feature dimension");
    return attach_head(init, classes, seed);
  }
  return init_linear_classifier(feature_dim, classes, seed);
}

FinetuneResult federated_finetune(std::span<const CorpusManifest> labeled_splits, const AssignmentMatrix* matrix,
                                  const ParamVector& init, const FederationConfig& cfg, bool use_prep,
                                  const CorpusManifest* test) {
  cfg.validate();
  if (labeled_splits.size() != cfg.clients)
    throw Error("expected " + std::to_string(cfg.clients) + " labeled splits, got " + std::to_string(labeled_splits.size()));
  const std::size_t classes = labeled_splits.front().class_count();
  const std::size_t dim = labeled_splits.front().feature_dim;
  for (const auto& s : labeled_splits) {
    if (s.class_count() != classes || s.feature_dim != dim) throw Error("labeled splits disagree on label space or dimension");
    for (const auto& e : s.examples)
      if (e.class_id < 0 || static_cast<std::size_t>(e.class_id) >= classes)
        throw Error("label " + std::to_string(e.class_id) + " of '" + e.id + "' outside [0, " + std::to_string(classes) + ")");
  }

  std::vector<std::vector<int>> sets;
  for (const auto& s : labeled_splits) sets.push_back(label_set(s));
  if (matrix) {
    if (matrix->classes() != classes || matrix->clients() != cfg.clients) throw Error("assignment matrix shape mismatch");
    for (std::size_t k = 0; k < cfg.clients; ++k)
      if (matrix->label_set(k) != sets[k]) throw Error("client " + std::to_string(k) + " label set disagrees with the assignment matrix");
  }

  FinetuneResult result;
  LocalObjective objective{LossKind::kCrossEntropy, cfg.mask, {}};
  if (use_prep) {
    result.weights = collect_prevalence(sets, classes);
    objective.kind = LossKind::kWeightedCrossEntropy;
    objective.class_weights = cfg.renormalize_weights ? renormalized(*result.weights) : result.weights->w;
  }

  ParamVector global = finetune_init(init, classes, dim, cfg.ladder());
  for (std::size_t t = 1; t <= cfg.finetune.rounds; ++t) {
    auto outcome = run_round(global, labeled_splits, Stage::kFinetune, t, objective, cfg);
    global = std::move(outcome.params);
    if (test && cfg.eval_stride && (t % cfg.eval_stride == 0 || t == cfg.finetune.rounds))
      outcome.log.metrics = evaluate_global(global, *test).metrics;
    if (cfg.on_round) cfg.on_round(outcome.log, global);
    result.logs.push_back(std::move(outcome.log));
  }
  result.params = std::move(global);
  return result;
}

LocalResult centralized_train(const ParamVector& init, std::span<const Example> data, Stage stage,
                              const LocalObjective& objective, const StageConfig& stage_cfg, const SeedLadder& ladder,
                              std::vector<ParamVector>* trajectory) {
  LocalResult acc{init, {}};
  LocalObjective obj = objective;
  for (std::size_t t = 1; t <= stage_cfg.rounds; ++t) {
    if (stage == Stage::kPretrain) obj.mask.seed = ladder.mask_round(t);
    auto step = local_update(acc.params, data, obj, stage_cfg.optimizer, ladder.client_round(0, t, stage));
    acc.params = std::move(step.params);
    acc.batch_losses.insert(acc.batch_losses.end(), step.batch_losses.begin(), step.batch_losses.end());
    if (trajectory) trajectory->push_back(acc.params);
  }
  return acc;
}

}  // namespace fedpredi
