#include "fedpredi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedpredi/error.hpp"
#include "fedpredi/manifest_io.hpp"
#include "fedpredi/partition.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void expect_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error("unknown key '" + key + "' in " + std::string(where));
}

OptimizerConfig parse_optimizer(const json& j) {
  expect_keys(j, "optimizer", {"kind", "learning_rate", "beta1", "beta2", "epsilon", "batch_size", "local_epochs"});
  OptimizerConfig o;
  const auto kind = j.value("kind", std::string("adam"));
  if (kind == "adam") {
    o.kind = OptimizerKind::kAdam;
  } else if (kind == "sgd") {
    o.kind = OptimizerKind::kSgd;
  } else {
    throw Error("optimizer kind must be 'adam' or 'sgd'");
  }
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.epsilon = j.value("epsilon", o.epsilon);
  o.batch_size = j.value("batch_size", o.batch_size);
  o.local_epochs = j.value("local_epochs", o.local_epochs);
  o.validate();
  return o;
}

StageConfig parse_stage(const json& j, StageConfig defaults) {
  expect_keys(j, "stage", {"rounds", "optimizer"});
  defaults.rounds = j.value("rounds", defaults.rounds);
  if (j.contains("optimizer")) defaults.optimizer = parse_optimizer(j.at("optimizer"));
  return defaults;
}

FederationConfig federation_from_json(const json& j) {
  expect_keys(j, "federation",
              {"clients", "latent_dim", "patch_count", "mask_ratio", "pretrain", "finetune", "seed", "eval_stride",
               "renormalize_weights", "workers"});
  FederationConfig f;
  f.clients = j.value("clients", f.clients);
  f.latent_dim = j.value("latent_dim", f.latent_dim);
  f.mask.patch_count = j.value("patch_count", f.mask.patch_count);
  f.mask.mask_ratio = j.value("mask_ratio", f.mask.mask_ratio);
  if (j.contains("pretrain")) f.pretrain = parse_stage(j.at("pretrain"), f.pretrain);
  if (j.contains("finetune")) f.finetune = parse_stage(j.at("finetune"), f.finetune);
  f.seed = j.value("seed", f.seed);
  f.eval_stride = j.value("eval_stride", f.eval_stride);
  f.renormalize_weights = j.value("renormalize_weights", f.renormalize_weights);
  f.workers = j.value("workers", f.workers);
  f.validate();
  return f;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto with_json_errors(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(std::string("plan: ") + e.what());
  }
}

}  // namespace

FederationConfig parse_federation_config(const std::string& json_text) {
  return with_json_errors([&] { return federation_from_json(json::parse(json_text)); });
}

FederationConfig load_federation_config(const std::filesystem::path& path) {
  return parse_federation_config(read_text(path));
}

ExperimentPlan parse_plan(const std::string& json_text) {
  return with_json_errors([&] {
    const json j = json::parse(json_text);
    expect_keys(j, "plan",
                {"name", "corpus", "unlabeled_partition", "labeled_partition", "federation", "pretrain", "seeds",
                 "comparisons"});
    ExperimentPlan p;
    p.name = j.value("name", std::string("plan"));

    const auto& c = j.at("corpus");
    expect_keys(c, "corpus", {"synthetic", "manifest", "min_count", "test_fraction", "labeled_per_class"});
    if (c.contains("synthetic")) p.corpus.synthetic = synthetic_spec_from_json_text(c.at("synthetic").dump());
    p.corpus.manifest = c.value("manifest", std::string());
    p.corpus.min_count = c.value("min_count", p.corpus.min_count);
    p.corpus.test_fraction = c.value("test_fraction", p.corpus.test_fraction);
    p.corpus.labeled_per_class = c.value("labeled_per_class", p.corpus.labeled_per_class);

    const auto& u = j.at("unlabeled_partition");
    expect_keys(u, "unlabeled_partition", {"iid", "alpha", "min_client_size"});
    p.unlabeled_partition.iid = u.value("iid", false);
    p.unlabeled_partition.alphas = u.value("alpha", std::vector<double>{});
    p.unlabeled_partition.min_client_size = u.value("min_client_size", p.unlabeled_partition.min_client_size);

    const auto& l = j.at("labeled_partition");
    expect_keys(l, "labeled_partition", {"iid", "rho", "sigma", "sigma_tolerance", "max_retries"});
    p.labeled_partition.iid = l.value("iid", false);
    p.labeled_partition.rho = l.value("rho", std::vector<double>{});
    p.labeled_partition.sigma = l.value("sigma", std::vector<double>{});
    p.labeled_partition.sigma_tolerance = l.value("sigma_tolerance", p.labeled_partition.sigma_tolerance);
    p.labeled_partition.max_retries = l.value("max_retries", p.labeled_partition.max_retries);

    p.federation = federation_from_json(j.value("federation", json::object()));
    p.pretrain = j.value("pretrain", true);
    p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("comparisons")) p.comparisons = j.at("comparisons").get<std::vector<std::string>>();
    p.validate();
    return p;
  });
}

ExperimentPlan load_plan(const std::filesystem::path& path) { return parse_plan(read_text(path)); }

void ExperimentPlan::validate() const {
  if (!corpus.synthetic && corpus.manifest.empty()) throw Error("plan corpus needs a synthetic spec or a manifest path");
  if (!unlabeled_partition.iid && unlabeled_partition.alphas.empty()) throw Error("plan has no unlabeled partition cell");
  for (double a : unlabeled_partition.alphas)
    if (!(a > 0.0)) throw Error("Dirichlet alpha must be positive");
  if (!labeled_partition.iid && (labeled_partition.rho.empty() || labeled_partition.sigma.empty()))
    throw Error("plan has no labeled partition cell");
  if (seeds.empty()) throw Error("plan needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) throw Error("plan seeds must be distinct");
  if (comparisons.empty()) throw Error("plan needs at least one method");
  for (const auto& m : comparisons)
    if (m != "baseline" && m != "prep") throw Error("unknown method '" + m + "' (expected baseline or prep)");
  federation.validate();
}

std::size_t ExperimentPlan::run_count() const { return plan_runs(*this).size(); }

std::string RunKey::unlabeled_label() const { return alpha ? "alpha=" + format_double(*alpha) : "iid"; }

std::string RunKey::labeled_label() const {
  return labeled_iid ? "iid" : "rho=" + format_double(rho_target) + ",sigma=" + format_double(sigma_target);
}

std::string RunKey::canonical() const {
  return unlabeled_label() + "|" + labeled_label() + "|" + method + "|" + std::to_string(seed);
}

std::vector<RunKey> plan_runs(const ExperimentPlan& plan) {
  std::vector<std::optional<double>> unlabeled;
  if (plan.unlabeled_partition.iid) unlabeled.emplace_back();
  for (double a : plan.unlabeled_partition.alphas) unlabeled.emplace_back(a);

  struct LabeledCell {
    bool iid;
    double rho, sigma;
  };
  std::vector<LabeledCell> labeled;
  const auto K = static_cast<double>(plan.federation.clients);
  if (plan.labeled_partition.iid) labeled.push_back({true, K, 0.0});
  for (double r : plan.labeled_partition.rho)
    for (double s : plan.labeled_partition.sigma) labeled.push_back({false, r, s});

  std::vector<RunKey> runs;
  for (const auto& u : unlabeled)
    for (const auto& l : labeled)
      for (auto seed : plan.seeds)
        for (const auto& m : plan.comparisons) runs.push_back({u, l.iid, l.rho, l.sigma, m, seed});
  return runs;
}

std::size_t ResultTable::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.ok; }));
}

std::string serialize_row(const ResultRow& r) {
  ordered_json j;
  j["unlabeled"] = r.key.unlabeled_label();
  j["alpha"] = r.key.alpha ? json(*r.key.alpha) : json(nullptr);
  j["labeled"] = r.key.labeled_iid ? "iid" : "predi";
  j["rho_target"] = r.key.rho_target;
  j["sigma_target"] = r.key.sigma_target;
  j["method"] = r.key.method;
  j["seed"] = r.key.seed;
  j["status"] = r.ok ? "ok" : "error";
  if (r.ok) {
    j["macro_accuracy"] = r.macro_accuracy;
    j["macro_f1"] = r.macro_f1;
    j["rho_realized"] = r.rho_realized;
    j["sigma_realized"] = r.sigma_realized;
  } else {
    j["error"] = r.error;
  }
  return j.dump();
}

ResultRow parse_row(const std::string& line) {
  return with_json_errors([&] {
    const json j = json::parse(line);
    ResultRow r;
    if (!j.at("alpha").is_null()) r.key.alpha = j.at("alpha").get<double>();
    r.key.labeled_iid = j.at("labeled").get<std::string>() == "iid";
    r.key.rho_target = j.at("rho_target").get<double>();
    r.key.sigma_target = j.at("sigma_target").get<double>();
    r.key.method = j.at("method").get<std::string>();
    r.key.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("status").get<std::string>() == "ok";
    if (r.ok) {
      r.macro_accuracy = j.at("macro_accuracy").get<double>();
      r.macro_f1 = j.at("macro_f1").get<double>();
      r.rho_realized = j.at("rho_realized").get<double>();
      r.sigma_realized = j.at("sigma_realized").get<double>();
    } else {
      r.error = j.value("error", std::string());
    }
    return r;
  });
}

ResultTable read_results(const std::filesystem::path& path) {
  ResultTable t;
  std::ifstream in(path, std::ios::binary);
  if (!in) return t;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  for (std::size_t nl; (nl = content.find('\n', start)) != std::string::npos; start = nl + 1) {
    if (nl > start) t.rows.push_back(parse_row(content.substr(start, nl - start)));
  }
  return t;
}

namespace {

struct Reconstruction {
  CorpusManifest test;
  std::vector<CorpusManifest> labeled_subsets;
  CorpusManifest pool;
};

struct LabeledSplit {
  std::vector<CorpusManifest> clients;
  std::optional<AssignmentMatrix> matrix;
  double rho = 0.0, sigma = 0.0;
};

template <typename T>
class Memo {
 public:
  template <typename F>
  std::shared_future<T> get(const std::string& key, F&& compute) {
    std::promise<T> promise;
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
      cache_.emplace(key, promise.get_future().share());
    }
    try {
      promise.set_value(compute());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    std::lock_guard lock(mu_);
    return cache_.at(key);
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_future<T>> cache_;
};

std::uint64_t tagged(std::uint64_t seed, std::string_view tag) { return mix_seed({seed, hash_string(tag)}); }

class PlanExecutor {
 public:
  explicit PlanExecutor(const ExperimentPlan& plan) : plan_(plan) {}

  ResultRow run(const RunKey& key) {
    ResultRow row;
    row.key = key;
    try {
      const auto& recon = reconstruction(key.seed);
      const auto& encoder = pretrained(key);
      const auto& split = labeled_split(key, recon);

      FederationConfig cfg = plan_.federation;
      cfg.seed = tagged(key.seed, "federation");
      cfg.eval_stride = 0;
      const bool prep = key.method == "prep";
      auto ft = federated_finetune(split.clients, split.matrix ? &*split.matrix : nullptr, encoder, cfg, prep);
      const auto eval = evaluate_global(ft.params, recon.test);
      row.macro_accuracy = eval.metrics.macro_accuracy;
      row.macro_f1 = eval.metrics.macro_f1;
      row.rho_realized = split.rho;
      row.sigma_realized = split.sigma;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    return row;
  }

 private:
  const CorpusManifest& corpus() {
    return corpus_
        .get("corpus",
             [&] {
               if (plan_.corpus.synthetic) return generate_synthetic(*plan_.corpus.synthetic).manifest;
               return load_manifest(plan_.corpus.manifest);
             })
        .get();
  }

  const Reconstruction& reconstruction(std::uint64_t seed) {
    return recon_
        .get(std::to_string(seed),
             [&] {
               const auto filtered = filter_min_count(corpus(), plan_.corpus.min_count);
               auto split = train_test_split(filtered.kept, plan_.corpus.test_fraction, tagged(seed, "split"));
               Reconstruction r;
               r.labeled_subsets = sample_labeled_subsets(split.train, plan_.federation.clients,
                                                          plan_.corpus.labeled_per_class, tagged(seed, "labeled"));
               r.pool = build_unlabeled_pool(split.train, filtered.remainder);
               r.test = std::move(split.test);
               return r;
             })
        .get();
  }

  const ParamVector& pretrained(const RunKey& key) {
    static const ParamVector kNone;
    if (!plan_.pretrain) return kNone;
    return pretrain_
        .get(key.unlabeled_label() + "|" + std::to_string(key.seed),
             [&] {
               const auto& recon = reconstruction(key.seed);
               const VolumeMode mode = key.alpha ? VolumeMode(DirichletVolume{*key.alpha}) : VolumeMode(IidVolume{});
               const auto sizes = partition_unlabeled(recon.pool.size(), plan_.federation.clients, mode,
                                                      tagged(key.seed, "volume"), plan_.unlabeled_partition.min_client_size);
               const auto splits = apply_volume_split(recon.pool, sizes, tagged(key.seed, "volume-assign"));
               FederationConfig cfg = plan_.federation;
               cfg.seed = tagged(key.seed, "pretrain");
               return federated_pretrain(splits, cfg).encoder;
             })
        .get();
  }

  const LabeledSplit& labeled_split(const RunKey& key, const Reconstruction& recon) {
    return labeled_
        .get(key.labeled_label() + "|" + std::to_string(key.seed),
             [&] {
               const std::size_t K = plan_.federation.clients;
               const std::size_t C = recon.test.class_count();
               LabeledSplit s;
               if (key.labeled_iid) {
                 s.clients = recon.labeled_subsets;
                 s.matrix = AssignmentMatrix::all_ones(C, K);
               } else {
                 PartitionTarget target;
                 target.rho_target = key.rho_target;
                 target.sigma_target = key.sigma_target;
                 target.sigma_tolerance = plan_.labeled_partition.sigma_tolerance;
                 target.max_retries = plan_.labeled_partition.max_retries;
                 target.seed = tagged(key.seed, "predi");
                 auto r = predi_partition(recon.labeled_subsets, target, C, K, plan_.corpus.labeled_per_class);
                 s.clients = std::move(r.clients);
                 s.matrix = std::move(r.matrix);
               }
               s.rho = s.matrix->stats().rho_bar;
               s.sigma = s.matrix->stats().sigma;
               return s;
             })
        .get();
  }

  const ExperimentPlan& plan_;
  Memo<CorpusManifest> corpus_;
  Memo<Reconstruction> recon_;
  Memo<ParamVector> pretrain_;
  Memo<LabeledSplit> labeled_;
};

// Drops a trailing partial record left by an interrupted write.
void truncate_partial_line(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto last = content.rfind('\n');
  const std::size_t keep = last == std::string::npos ? 0 : last + 1;
  if (keep != content.size()) std::filesystem::resize_file(path, keep);
}

}  // namespace

ResultTable run_plan(const ExperimentPlan& plan, const std::filesystem::path& results_path, const RunOptions& options) {
  plan.validate();
  truncate_partial_line(results_path);
  ResultTable table = read_results(results_path);
  std::set<std::string> done;
  for (const auto& r : table.rows) done.insert(r.key.canonical());

  std::vector<RunKey> pending;
  for (auto& k : plan_runs(plan))
    if (!done.count(k.canonical())) pending.push_back(std::move(k));
  if (options.max_new_runs && pending.size() > *options.max_new_runs) pending.resize(*options.max_new_runs);

  std::ofstream out(results_path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot open " + results_path.string() + " for appending");
  std::ofstream timings;
  if (options.write_timings) timings.open(results_path.string() + ".timings.jsonl", std::ios::app);

  PlanExecutor executor(plan);
  struct Timed {
    ResultRow row;
    double seconds;
  };
  auto execute = [&](const RunKey& key) {
    const auto t0 = std::chrono::steady_clock::now();
    auto row = executor.run(key);
    return Timed{std::move(row), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
  };

  // Workers pull runs in order; rows are committed strictly in plan order.
  std::vector<std::promise<Timed>> slots(pending.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  if (workers > 1) {
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < pending.size(); i = next++) slots[i].set_value(execute(pending[i]));
      });
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    Timed t = workers > 1 ? slots[i].get_future().get() : execute(pending[i]);
    out << serialize_row(t.row) << '\n';
    out.flush();
    if (timings) {
      ordered_json j;
      j["run"] = t.row.key.canonical();
      j["seconds"] = t.seconds;
      timings << j.dump() << '\n';
      timings.flush();
    }
    table.rows.push_back(std::move(t.row));
  }
  return table;
}

}  // namespace fedpredi
