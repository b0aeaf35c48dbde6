#include "fedpredi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_set>

#include "fedpredi/error.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {
namespace {

CorpusManifest empty_like(const CorpusManifest& m) {
  CorpusManifest out;
  out.class_names = m.class_names;
  out.provenance = m.provenance;
  out.feature_dim = m.feature_dim;
  return out;
}

std::vector<std::vector<std::size_t>> indices_by_class(const CorpusManifest& m) {
  std::vector<std::vector<std::size_t>> by_class(m.class_count());
  for (std::size_t i = 0; i < m.examples.size(); ++i) {
    const int c = m.examples[i].class_id;
    if (c == kUnlabeled) throw Error("operation requires a labeled manifest; example '" + m.examples[i].id + "' is unlabeled");
    by_class[static_cast<std::size_t>(c)].push_back(i);
  }
  return by_class;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& means) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < means.size(); ++c) {
    const double d = squared_distance(x, means[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::vector<std::size_t> CorpusManifest::class_counts() const {
  std::vector<std::size_t> counts(class_count(), 0);
  for (const auto& e : examples)
    if (e.class_id != kUnlabeled) ++counts[static_cast<std::size_t>(e.class_id)];
  return counts;
}

void CorpusManifest::validate() const {
  std::unordered_set<std::string> ids;
  ids.reserve(examples.size());
  const int c = static_cast<int>(class_count());
  for (const auto& e : examples) {
    if (!ids.insert(e.id).second) throw Error("duplicate example id '" + e.id + "'");
    if (e.class_id < kUnlabeled || e.class_id >= c)
      throw Error("example '" + e.id + "' has class id " + std::to_string(e.class_id) + " outside [0, " + std::to_string(c) + ")");
    if (e.features.size() != feature_dim)
      throw Error("example '" + e.id + "' has " + std::to_string(e.features.size()) + " features, expected " + std::to_string(feature_dim));
  }
}

FilterResult filter_min_count(const CorpusManifest& manifest, std::size_t min_count) {
  if (min_count < 1) throw Error("min_count must be at least 1");
  manifest.validate();
  const auto counts = manifest.class_counts();

  FilterResult r;
  r.old_to_new.assign(counts.size(), kUnlabeled);
  r.kept = empty_like(manifest);
  r.kept.class_names.clear();
  r.remainder = empty_like(manifest);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= min_count) {
      r.old_to_new[c] = static_cast<int>(r.kept.class_names.size());
      r.kept.class_names.push_back(manifest.class_names[c]);
    }
  }
  if (r.kept.class_names.empty())
    throw Error("no class has at least " + std::to_string(min_count) + " examples");

  for (const auto& e : manifest.examples) {
    const int mapped = e.class_id == kUnlabeled ? kUnlabeled : r.old_to_new[static_cast<std::size_t>(e.class_id)];
    if (mapped == kUnlabeled) {
      r.remainder.examples.push_back(e);
    } else {
      Example k = e;
      k.class_id = mapped;
      r.kept.examples.push_back(std::move(k));
    }
  }
  return r;
}

TrainTestSplit train_test_split(const CorpusManifest& manifest, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("test fraction must lie in (0, 1)");
  manifest.validate();
  auto by_class = indices_by_class(manifest);

  Rng rng(seed);
  std::vector<char> is_test(manifest.examples.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    const std::size_t n = idx.size();
    if (n == 0) continue;
    if (n < 2) throw Error("class '" + manifest.class_names[c] + "' has fewer than 2 examples");
    auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    rng.shuffle(std::span(idx));
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = 1;
  }

  TrainTestSplit out{empty_like(manifest), empty_like(manifest)};
  for (std::size_t i = 0; i < manifest.examples.size(); ++i)
    (is_test[i] ? out.test : out.train).examples.push_back(manifest.examples[i]);
  return out;
}

CorpusManifest build_unlabeled_pool(const CorpusManifest& train, const CorpusManifest& remainder) {
  if (!remainder.examples.empty() && remainder.feature_dim != train.feature_dim)
    throw Error("train and remainder feature dimensions differ");
  CorpusManifest pool = empty_like(train);
  pool.examples.reserve(train.size() + remainder.size());
  std::unordered_set<std::string> ids;
  for (const auto* src : {&train, &remainder}) {
    for (const auto& e : src->examples) {
      if (!ids.insert(e.id).second) throw Error("example id '" + e.id + "' appears in both inputs");
      Example u = e;
      u.class_id = kUnlabeled;
      pool.examples.push_back(std::move(u));
    }
  }
  return pool;
}

std::vector<CorpusManifest> sample_labeled_subsets(const CorpusManifest& train, std::size_t clients,
                                                   std::size_t per_class, std::uint64_t seed) {
  if (clients < 1) throw Error("client count must be positive");
  if (per_class < 1) throw Error("per-class sample size must be positive");
  train.validate();
  auto by_class = indices_by_class(train);

  Rng rng(seed);
  std::vector<int> owner(train.examples.size(), -1);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() < clients * per_class)
      throw Error("class '" + train.class_names[c] + "' has " + std::to_string(idx.size()) + " examples, needs " +
                  std::to_string(clients * per_class));
    rng.shuffle(std::span(idx));
    for (std::size_t k = 0; k < clients; ++k)
      for (std::size_t j = 0; j < per_class; ++j) owner[idx[k * per_class + j]] = static_cast<int>(k);
  }

  std::vector<CorpusManifest> subsets(clients, empty_like(train));
  for (std::size_t i = 0; i < train.examples.size(); ++i)
    if (owner[i] >= 0) subsets[static_cast<std::size_t>(owner[i])].examples.push_back(train.examples[i]);
  return subsets;
}

void SyntheticSpec::validate() const {
  if (class_counts.empty()) throw Error("synthetic spec needs at least one class");
  for (auto n : class_counts)
    if (n == 0) throw Error("synthetic class counts must be positive");
  if (feature_dim == 0) throw Error("feature dimension must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error("noise scale must be finite and >= 0");
  if (!(separation >= 0.0) || !std::isfinite(separation)) throw Error("separation must be finite and >= 0");
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t classes = spec.class_counts.size();
  const std::size_t d = spec.feature_dim;

  SyntheticCorpus out;
  Rng rng(spec.seed);
  out.class_means.assign(classes, std::vector<double>(d));
  for (auto& mean : out.class_means)
    for (auto& v : mean) v = spec.separation * rng.normal();

  auto& m = out.manifest;
  m.feature_dim = d;
  m.provenance = "synthetic seed=" + std::to_string(spec.seed);
  char buf[32];
  for (std::size_t c = 0; c < classes; ++c) {
    std::snprintf(buf, sizeof buf, "class%03zu", c);
    m.class_names.emplace_back(buf);
  }
  std::size_t next_id = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < spec.class_counts[c]; ++i) {
      Example e;
      std::snprintf(buf, sizeof buf, "s%07zu", next_id++);
      e.id = buf;
      e.class_id = static_cast<int>(c);
      e.features.resize(d);
      for (std::size_t j = 0; j < d; ++j) e.features[j] = out.class_means[c][j] + spec.noise * rng.normal();
      m.examples.push_back(std::move(e));
    }
  }

  // Held-out draws come from an independent stream so the manifest does not
  // depend on holdout_per_class.
  Rng holdout(mix_seed({spec.seed, hash_string("holdout")}));
  std::size_t correct = 0, total = 0;
  std::vector<double> x(d);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < spec.holdout_per_class; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[j] = out.class_means[c][j] + spec.noise * holdout.normal();
      correct += nearest(x, out.class_means) == c;
      ++total;
    }
  }
  out.separability = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return out;
}

double nearest_mean_accuracy(const CorpusManifest& manifest) {
  manifest.validate();
  const std::size_t classes = manifest.class_count();
  std::vector<std::vector<double>> means(classes, std::vector<double>(manifest.feature_dim, 0.0));
  const auto counts = manifest.class_counts();
  for (const auto& e : manifest.examples) {
    if (e.class_id == kUnlabeled) continue;
    auto& mean = means[static_cast<std::size_t>(e.class_id)];
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += e.features[j];
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (counts[c] > 0)
      for (auto& v : means[c]) v /= static_cast<double>(counts[c]);

  std::size_t correct = 0, total = 0;
  for (const auto& e : manifest.examples) {
    if (e.class_id == kUnlabeled) continue;
    // Only classes that actually occur compete.
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      if (counts[c] == 0) continue;
      const double dist = squared_distance(e.features, means[c]);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    correct += best == static_cast<std::size_t>(e.class_id);
    ++total;
  }
  if (total == 0) throw Error("nearest-mean accuracy needs labeled examples");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace fedpredi
