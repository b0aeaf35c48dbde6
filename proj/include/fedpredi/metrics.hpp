#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedpredi {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

  void add(int true_class, int predicted_class, std::uint64_t n = 1);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts_[t * classes_ + p]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t t) const;
  std::uint64_t col_sum(std::size_t p) const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  std::uint64_t support = 0;    // row sum
  std::uint64_t predicted = 0;  // column sum
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct MacroMetrics {
  double macro_accuracy = 0.0;  // mean recall over classes with support
  double macro_f1 = 0.0;        // mean F1 over classes that occur or are predicted
  std::vector<ClassMetrics> per_class;
};

/// Zero denominators give 0. Classes with no support are left out of the
/// accuracy mean; they count toward F1 (as 0) only if they were predicted.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

// Flat key/value view: macro_accuracy, macro_f1, then f1_<c>, recall_<c>, precision_<c>.
std::vector<std::pair<std::string, double>> flat_record(const MacroMetrics& m);

}  // namespace fedpredi
