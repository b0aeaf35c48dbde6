#include "fedpredi/metrics.hpp"

#include <numeric>

#include "fedpredi/error.hpp"

namespace fedpredi {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw Error("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (classes == 0) throw Error("confusion matrix needs at least one class");
  if (counts_.size() != classes * classes) throw Error("confusion matrix counts must be C x C");
}

void ConfusionMatrix::add(int true_class, int predicted_class, std::uint64_t n) {
  const auto c = static_cast<int>(classes_);
  if (true_class < 0 || true_class >= c || predicted_class < 0 || predicted_class >= c)
    throw Error("class id outside the confusion matrix");
  counts_[static_cast<std::size_t>(true_class) * classes_ + static_cast<std::size_t>(predicted_class)] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(t, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, p);
  return s;
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("confusion matrix is empty");
  MacroMetrics out;
  out.per_class.resize(cm.classes());
  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t supported = 0, scored = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    auto& m = out.per_class[c];
    const double tp = static_cast<double>(cm.at(c, c));
    m.support = cm.row_sum(c);
    m.predicted = cm.col_sum(c);
    m.recall = m.support ? tp / static_cast<double>(m.support) : 0.0;
    m.precision = m.predicted ? tp / static_cast<double>(m.predicted) : 0.0;
    m.f1 = (m.recall + m.precision) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    if (m.support) {
      recall_sum += m.recall;
      ++supported;
    }
    if (m.support || m.predicted) {
      f1_sum += m.f1;
      ++scored;
    }
  }
  out.macro_accuracy = supported ? recall_sum / static_cast<double>(supported) : 0.0;
  out.macro_f1 = scored ? f1_sum / static_cast<double>(scored) : 0.0;
  return out;
}

std::vector<std::pair<std::string, double>> flat_record(const MacroMetrics& m) {
  std::vector<std::pair<std::string, double>> kv{{"macro_accuracy", m.macro_accuracy}, {"macro_f1", m.macro_f1}};
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto id = std::to_string(c);
    kv.emplace_back("f1_" + id, m.per_class[c].f1);
    kv.emplace_back("recall_" + id, m.per_class[c].recall);
    kv.emplace_back("precision_" + id, m.per_class[c].precision);
  }
  return kv;
}

}  // namespace fedpredi
