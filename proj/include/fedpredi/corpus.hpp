#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fedpredi {

// class_id carried by examples whose label has been erased.
inline constexpr int kUnlabeled = -1;

struct Example {
  std::string id;
  int class_id = kUnlabeled;
  std::vector<double> features;

  bool operator==(const Example&) const = default;
};

/// Class-labeled inventory of examples. Labeled and unlabeled collections share
/// this type; unlabeled entries carry kUnlabeled.
struct CorpusManifest {
  std::vector<Example> examples;
  std::vector<std::string> class_names;
  std::string provenance;
  std::size_t feature_dim = 0;

  std::size_t size() const { return examples.size(); }
  std::size_t class_count() const { return class_names.size(); }

  // Examples per class; unlabeled entries are not counted.
  std::vector<std::size_t> class_counts() const;

  // Throws Error if ids repeat, a class id is out of range or a feature vector
  // has the wrong length.
  void validate() const;

  bool operator==(const CorpusManifest&) const = default;
};

struct FilterResult {
  CorpusManifest kept;       // classes meeting the threshold, densely re-indexed
  CorpusManifest remainder;  // everything else, original class ids and names
  std::vector<int> old_to_new;  // kUnlabeled for dropped classes
};

FilterResult filter_min_count(const CorpusManifest& manifest, std::size_t min_count);

struct TrainTestSplit {
  CorpusManifest train;
  CorpusManifest test;
};

/// Per-class stratified split. Each class sends round-half-up(fraction * n)
/// examples to test, clamped so both sides keep at least one.
TrainTestSplit train_test_split(const CorpusManifest& manifest, double test_fraction,
                                std::uint64_t seed);

// Union of both inputs with labels erased; train examples first.
CorpusManifest build_unlabeled_pool(const CorpusManifest& train, const CorpusManifest& remainder);

/// K id-disjoint subsets holding exactly per_class examples of every class.
std::vector<CorpusManifest> sample_labeled_subsets(const CorpusManifest& train, std::size_t clients,
                                                   std::size_t per_class, std::uint64_t seed);

struct SyntheticSpec {
  std::vector<std::size_t> class_counts;  // one entry per class
  std::size_t feature_dim = 16;
  double separation = 1.0;  // std of the class-mean draw
  double noise = 1.0;       // within-class std
  std::uint64_t seed = 0;
  std::size_t holdout_per_class = 200;

  void validate() const;
};

struct SyntheticCorpus {
  CorpusManifest manifest;
  // Accuracy of the nearest-true-mean rule on fresh draws from the generator.
  double separability = 0.0;
  std::vector<std::vector<double>> class_means;
};

/// Gaussian class clusters. Class means are drawn first (class-major,
/// coordinate-minor), then examples class by class.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// Nearest-centroid accuracy using the manifest's own empirical class means.
double nearest_mean_accuracy(const CorpusManifest& manifest);

}  // namespace fedpredi
