#include <cmath>
#include <numeric>

#include "fedpredi/error.hpp"
#include "fedpredi/learners.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw Error("Adam epsilon must be positive");
  if (batch_size < 1) throw Error("batch size must be positive");
  if (local_epochs < 1) throw Error("local epochs must be positive");
}

double LocalResult::mean_loss() const {
  if (batch_losses.empty()) return 0.0;
  return std::accumulate(batch_losses.begin(), batch_losses.end(), 0.0) / static_cast<double>(batch_losses.size());
}

LocalResult local_update(const ParamVector& params, std::span<const Example> data, const LocalObjective& objective,
                         const OptimizerConfig& opt, std::uint64_t seed) {
  if (data.empty()) throw Error("local update needs data");
  opt.validate();

  LocalResult result{params, {}};
  auto theta = result.params.values();
  std::vector<double> m, v;
  if (opt.kind == OptimizerKind::kAdam) {
    m.assign(theta.size(), 0.0);
    v.assign(theta.size(), 0.0);
  }
  std::vector<double> ones;
  if (objective.kind == LossKind::kCrossEntropy) ones.assign(result.params.segment(kHead).shape.out_dim, 1.0);

  std::vector<std::size_t> order(data.size());
  std::vector<const Example*> batch;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opt.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed({seed, epoch}));
    rng.shuffle(std::span(order));
    MaskSpec mask = objective.mask;
    mask.seed = mix_seed({objective.mask.seed, epoch});

    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);

      LossGrad lg;
      switch (objective.kind) {
        case LossKind::kMae:
          lg = mae_loss(result.params, batch, mask);
          break;
        case LossKind::kCrossEntropy:
          lg = wce_loss(result.params, batch, ones);
          break;
        case LossKind::kWeightedCrossEntropy:
          lg = wce_loss(result.params, batch, objective.class_weights);
          break;
      }
      result.batch_losses.push_back(lg.loss);
      ++step;

      if (opt.kind == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= opt.learning_rate * lg.grad[i];
      } else {
        const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < theta.size(); ++i) {
          const double gi = lg.grad[i];
          m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
          v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          theta[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
        }
      }
      if (!result.params.all_finite())
        throw Error("local update diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                    " (batch loss " + std::to_string(lg.loss) + ")");
    }
  }
  return result;
}

}  // namespace fedpredi
