#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "fedpredi/corpus.hpp"

namespace fedpredi {

struct IidVolume {};
struct DirichletVolume {
  double alpha = 1.0;
};
using VolumeMode = std::variant<IidVolume, DirichletVolume>;

struct VolumeSplit {
  std::vector<std::size_t> client_sizes;
  std::optional<double> alpha;  // empty for IID
  std::uint64_t seed = 0;

  std::size_t total() const;
};

/// Splits N unlabeled examples over K clients.
///
/// IID: sizes differ by at most one, the remainder going to the last clients.
/// Dirichlet: r ~ Dir_K(alpha), n_i = round(N r_i), then the signed rounding
/// remainder is moved one unit at a time to the clients with the largest
/// fractional residue (or taken from the smallest). Clients below min_size are
/// then topped up from the currently largest client.
VolumeSplit partition_unlabeled(std::size_t total, std::size_t clients, const VolumeMode& mode, std::uint64_t seed,
                                std::size_t min_size = 1);

// Population coefficient of variation of the client sizes.
double coefficient_of_variation(std::span<const std::size_t> sizes);

// Shuffles the pool under seed and cuts it into consecutive chunks of the given sizes.
std::vector<CorpusManifest> apply_volume_split(const CorpusManifest& pool, const VolumeSplit& split, std::uint64_t seed);

struct MatrixStats {
  std::vector<int> prevalence;    // rho_c, row sums
  std::vector<int> class_counts;  // n_k, column sums
  double rho_bar = 0.0;
  double mu = 0.0;
  double sigma = 0.0;  // population std of class_counts (divisor K)
};

/// Binary class x client presence matrix. Construction rejects matrices with an
/// empty row or column, so every class lives somewhere and every client holds
/// at least one class.
class AssignmentMatrix {
 public:
  AssignmentMatrix(std::size_t classes, std::size_t clients, std::vector<std::uint8_t> cells);
  static AssignmentMatrix from_rows(const std::vector<std::vector<int>>& rows);
  static AssignmentMatrix all_ones(std::size_t classes, std::size_t clients);

  std::size_t classes() const { return classes_; }
  std::size_t clients() const { return clients_; }
  bool at(std::size_t c, std::size_t k) const { return cells_[c * clients_ + k] != 0; }
  const MatrixStats& stats() const { return stats_; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  // Class ids present at client k, ascending.
  std::vector<int> label_set(std::size_t k) const;

  bool operator==(const AssignmentMatrix& o) const {
    return classes_ == o.classes_ && clients_ == o.clients_ && cells_ == o.cells_;
  }

 private:
  std::size_t classes_;
  std::size_t clients_;
  std::vector<std::uint8_t> cells_;
  MatrixStats stats_;
};

MatrixStats matrix_stats(const AssignmentMatrix& m);

// Header line "C K rho_bar sigma", then C lines of K space-separated digits.
void write_assignment_matrix(std::ostream& out, const AssignmentMatrix& m);
AssignmentMatrix read_assignment_matrix(std::istream& in);
void save_assignment_matrix(const std::filesystem::path& path, const AssignmentMatrix& m);
AssignmentMatrix load_assignment_matrix(const std::filesystem::path& path);

struct PartitionTarget {
  double rho_target = 1.0;
  double sigma_target = 0.0;
  std::optional<double> rho_tolerance;  // defaults to 1/(2C)
  double sigma_tolerance = 0.5;
  std::size_t max_retries = 200;
  std::uint64_t seed = 0;
};

struct PrediResult {
  AssignmentMatrix matrix;
  std::vector<int> prevalence;    // fixed by the prevalence step
  std::vector<int> count_targets; // q_k accepted by the disparity step
  std::vector<CorpusManifest> clients;
  std::size_t attempts = 0;       // disparity/allocation rounds used
};

/// Prevalence-disparity partitioning of labeled data.
///
/// 1. Prevalence: rho_c = 1 for all classes, then single increments on a
///    uniformly chosen class with rho_c < K until mean rho is within tolerance.
/// 2. Disparity: q_k = round(N(mu, sigma*^2)) clamped to [1, C] and repaired to
///    sum to A = sum rho_c; redrawn when its std misses sigma tolerance.
/// 3. Allocation: classes in random order go to the rho_c clients with the
///    largest remaining gap max(q_k - n_k, 0), ties broken at random.
/// 4. Images: each holding client receives s unused examples of the class.
/// Steps 2-3 repeat until the realized matrix meets the sigma tolerance with no
/// empty client, up to max_retries.
///
/// `labeled` is pooled; each class needs at least s*K examples across it.
PrediResult predi_partition(std::span<const CorpusManifest> labeled, const PartitionTarget& target, std::size_t classes,
                            std::size_t clients, std::size_t per_class);

}  // namespace fedpredi
