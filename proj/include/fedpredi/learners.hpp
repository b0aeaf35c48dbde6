#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedpredi/corpus.hpp"

namespace fedpredi {

inline constexpr std::string_view kEncoder = "encoder";
inline constexpr std::string_view kDecoder = "decoder";
inline constexpr std::string_view kHead = "head";

// An affine map out_dim x in_dim stored as row-major weights followed by bias.
struct SegmentShape {
  std::string name;
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;

  std::size_t size() const { return out_dim * (in_dim + 1); }
  bool operator==(const SegmentShape&) const = default;
};

struct Segment {
  SegmentShape shape;
  std::size_t offset = 0;

  bool operator==(const Segment&) const = default;
};

/// Flat model parameters with named, contiguous affine segments.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<SegmentShape> shapes);  // zero-filled
  ParamVector(std::vector<SegmentShape> shapes, std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }
  std::vector<SegmentShape> shapes() const;

  bool has(std::string_view name) const;
  const Segment& segment(std::string_view name) const;
  std::span<const double> segment_values(std::string_view name) const;
  std::span<double> segment_values(std::string_view name);

  bool same_layout(const ParamVector& other) const;

  // Copy of the named segments, in the order given.
  ParamVector select(std::initializer_list<std::string_view> names) const;
  static ParamVector concat(const ParamVector& a, const ParamVector& b);

  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
};

// Gaussian weights with std 1/sqrt(in_dim), zero bias.
void init_segment(ParamVector& params, std::string_view name, std::uint64_t seed);

// Encoder (latent x d) and decoder (d x latent).
ParamVector init_autoencoder(std::size_t feature_dim, std::size_t latent_dim, std::uint64_t seed);
// Encoder copied from `encoder` plus a fresh head over its latent space.
ParamVector attach_head(const ParamVector& encoder, std::size_t classes, std::uint64_t seed);
// Head directly on raw features.
ParamVector init_linear_classifier(std::size_t feature_dim, std::size_t classes, std::uint64_t seed);

// FNV-1a over the little-endian bytes of every value, as 16 hex digits.
std::string checksum(const ParamVector& params);

/// Masking of fixed-size feature patches. The vector is cut into patch_count
/// equal segments; round(mask_ratio * patch_count) of them are hidden.
struct MaskSpec {
  std::size_t patch_count = 4;
  double mask_ratio = 0.75;
  std::uint64_t seed = 0;

  std::size_t masked_count() const;  // throws unless in [1, P-1]
};

struct MaskedInput {
  std::vector<double> visible;             // input with masked patches zeroed
  std::vector<std::size_t> masked_patches; // ascending
};

MaskedInput apply_mask(std::span<const double> x, const MaskSpec& spec);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as the parameters
};

using Batch = std::span<const Example* const>;

std::vector<const Example*> batch_of(std::span<const Example> examples);

/// Masked reconstruction: z = W_e * visible + b_e, x_hat = W_d * z + b_d, loss
/// is the batch mean of the squared error over masked coordinates. Example i
/// is masked with seed mix(spec.seed, hash(id_i)), so a given example sees the
/// same mask wherever it is processed under the same spec.
LossGrad mae_loss(const ParamVector& params, Batch batch, const MaskSpec& spec);

/// (1/n) sum_i -w[y_i] log softmax(h(f(x_i)))[y_i]. f is the encoder when the
/// parameters carry one, identity otherwise.
LossGrad wce_loss(const ParamVector& params, Batch batch, std::span<const double> class_weights);
LossGrad ce_loss(const ParamVector& params, Batch batch);

std::vector<double> class_probabilities(const ParamVector& params, std::span<const double> features);
int predict(const ParamVector& params, std::span<const double> features);

enum class LossKind { kMae, kCrossEntropy, kWeightedCrossEntropy };
enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t local_epochs = 1;

  void validate() const;
};

struct LocalObjective {
  LossKind kind = LossKind::kCrossEntropy;
  MaskSpec mask;                      // kMae only
  std::vector<double> class_weights;  // kWeightedCrossEntropy only
};

struct LocalResult {
  ParamVector params;
  std::vector<double> batch_losses;

  double mean_loss() const;
};

/// E epochs of mini-batch steps. Epoch e shuffles with mix(seed, e); masks use
/// mix(objective.mask.seed, e). The last short batch is kept. Adam state starts
/// fresh on every call.
LocalResult local_update(const ParamVector& params, std::span<const Example> data, const LocalObjective& objective,
                         const OptimizerConfig& opt, std::uint64_t seed);

/// Checkpoint: text header (magic, segment names and shapes, value count)
/// followed by the values as little-endian IEEE-754 doubles.
void write_checkpoint(std::ostream& out, const ParamVector& params);
ParamVector read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ParamVector& params);
ParamVector load_checkpoint(const std::filesystem::path& path);

}  // namespace fedpredi
