#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedpredi/error.hpp"
#include "fedpredi/learners.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {
namespace {

// y = W x + b for a segment laid out as [W row-major | b].
void affine(std::span<const double> seg, std::size_t out_dim, std::size_t in_dim, std::span<const double> x,
            std::span<double> y) {
  const double* bias = seg.data() + out_dim * in_dim;
  for (std::size_t r = 0; r < out_dim; ++r) {
    const double* w = seg.data() + r * in_dim;
    double s = bias[r];
    for (std::size_t j = 0; j < in_dim; ++j) s += w[j] * x[j];
    y[r] = s;
  }
}

// Accumulates dW += dy x^T, db += dy and, when dx is nonempty, dx = W^T dy.
void affine_backward(std::span<const double> seg, std::size_t out_dim, std::size_t in_dim, std::span<const double> x,
                     std::span<const double> dy, std::span<double> dseg, std::span<double> dx) {
  double* dbias = dseg.data() + out_dim * in_dim;
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t r = 0; r < out_dim; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* dw = dseg.data() + r * in_dim;
    for (std::size_t j = 0; j < in_dim; ++j) dw[j] += g * x[j];
    dbias[r] += g;
    if (!dx.empty()) {
      const double* w = seg.data() + r * in_dim;
      for (std::size_t j = 0; j < in_dim; ++j) dx[j] += w[j] * g;
    }
  }
}

struct ClassifierView {
  bool has_encoder = false;
  SegmentShape enc;
  SegmentShape head;
  std::span<const double> enc_values;
  std::span<const double> head_values;
};

ClassifierView classifier_view(const ParamVector& params) {
  ClassifierView v;
  v.head = params.segment(kHead).shape;
  v.head_values = params.segment_values(kHead);
  if (params.has(kEncoder)) {
    v.has_encoder = true;
    v.enc = params.segment(kEncoder).shape;
    v.enc_values = params.segment_values(kEncoder);
    if (v.enc.out_dim != v.head.in_dim) throw Error("head input does not match encoder output");
  }
  return v;
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double l : logits) s += std::exp(l - m);
  const double lse = m + std::log(s);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

}  // namespace

std::size_t MaskSpec::masked_count() const {
  if (patch_count < 2) throw Error("masking needs at least two patches");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw Error("mask ratio must lie in (0, 1)");
  const auto m = static_cast<std::size_t>(std::floor(mask_ratio * static_cast<double>(patch_count) + 0.5));
  if (m < 1 || m > patch_count - 1)
    throw Error("mask ratio " + std::to_string(mask_ratio) + " masks " + std::to_string(m) + " of " +
                std::to_string(patch_count) + " patches");
  return m;
}

MaskedInput apply_mask(std::span<const double> x, const MaskSpec& spec) {
  const std::size_t masked = spec.masked_count();
  if (x.size() % spec.patch_count != 0)
    throw Error("feature dimension " + std::to_string(x.size()) + " not divisible by " + std::to_string(spec.patch_count) + " patches");
  const std::size_t width = x.size() / spec.patch_count;

  std::vector<std::size_t> patches(spec.patch_count);
  std::iota(patches.begin(), patches.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < masked; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(spec.patch_count - i));
    std::swap(patches[i], patches[j]);
  }
  MaskedInput out;
  out.masked_patches.assign(patches.begin(), patches.begin() + static_cast<std::ptrdiff_t>(masked));
  std::sort(out.masked_patches.begin(), out.masked_patches.end());
  out.visible.assign(x.begin(), x.end());
  for (auto p : out.masked_patches) std::fill_n(out.visible.begin() + static_cast<std::ptrdiff_t>(p * width), width, 0.0);
  return out;
}

std::vector<const Example*> batch_of(std::span<const Example> examples) {
  std::vector<const Example*> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(&e);
  return out;
}

LossGrad mae_loss(const ParamVector& params, Batch batch, const MaskSpec& spec) {
  if (batch.empty()) throw Error("empty batch");
  const auto enc = params.segment(kEncoder).shape;
  const auto dec = params.segment(kDecoder).shape;
  const auto enc_v = params.segment_values(kEncoder);
  const auto dec_v = params.segment_values(kDecoder);
  const std::size_t d = enc.in_dim, h = enc.out_dim;
  if (dec.in_dim != h || dec.out_dim != d) throw Error("decoder shape does not invert the encoder");
  const std::size_t width = d / spec.patch_count;

  LossGrad out;
  out.grad.assign(params.size(), 0.0);
  auto g = std::span<double>(out.grad);
  auto g_enc = g.subspan(params.segment(kEncoder).offset, enc.size());
  auto g_dec = g.subspan(params.segment(kDecoder).offset, dec.size());

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> z(h), xhat(d), dxhat(d), dz(h);
  double total = 0.0;
  for (const Example* e : batch) {
    if (e->features.size() != d) throw Error("example '" + e->id + "' has the wrong feature dimension");
    MaskSpec own = spec;
    own.seed = mix_seed({spec.seed, hash_string(e->id)});
    const auto masked = apply_mask(e->features, own);
    affine(enc_v, h, d, masked.visible, z);
    affine(dec_v, d, h, z, xhat);
    std::fill(dxhat.begin(), dxhat.end(), 0.0);
    double err = 0.0;
    for (auto p : masked.masked_patches) {
      for (std::size_t j = p * width; j < (p + 1) * width; ++j) {
        const double r = xhat[j] - e->features[j];
        err += r * r;
        dxhat[j] = 2.0 * r * inv_n;
      }
    }
    total += err;
    affine_backward(dec_v, d, h, z, dxhat, g_dec, dz);
    affine_backward(enc_v, h, d, masked.visible, dz, g_enc, {});
  }
  out.loss = total * inv_n;
  if (!std::isfinite(out.loss)) throw Error("reconstruction loss is not finite");
  return out;
}

LossGrad wce_loss(const ParamVector& params, Batch batch, std::span<const double> class_weights) {
  if (batch.empty()) throw Error("empty batch");
  const auto v = classifier_view(params);
  const std::size_t classes = v.head.out_dim;
  if (class_weights.size() != classes)
    throw Error("class weight vector has length " + std::to_string(class_weights.size()) + ", expected " + std::to_string(classes));
  const std::size_t d = v.has_encoder ? v.enc.in_dim : v.head.in_dim;
  const std::size_t h = v.head.in_dim;

  LossGrad out;
  out.grad.assign(params.size(), 0.0);
  auto g = std::span<double>(out.grad);
  auto g_head = g.subspan(params.segment(kHead).offset, v.head.size());
  std::span<double> g_enc;
  if (v.has_encoder) g_enc = g.subspan(params.segment(kEncoder).offset, v.enc.size());

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> z(h), logits(classes), logp(classes), dlogits(classes), dz(v.has_encoder ? h : 0);
  double total = 0.0;
  for (const Example* e : batch) {
    if (e->class_id < 0 || static_cast<std::size_t>(e->class_id) >= classes)
      throw Error("label " + std::to_string(e->class_id) + " of '" + e->id + "' outside [0, " + std::to_string(classes) + ")");
    if (e->features.size() != d) throw Error("example '" + e->id + "' has the wrong feature dimension");
    const auto y = static_cast<std::size_t>(e->class_id);
    const double w = class_weights[y];
    if (!std::isfinite(w)) throw Error("class " + std::to_string(y) + " has a non-finite weight");

    std::span<const double> x(e->features);
    std::span<const double> rep = x;
    if (v.has_encoder) {
      affine(v.enc_values, h, d, x, z);
      rep = z;
    }
    affine(v.head_values, classes, h, rep, logits);
    log_softmax(logits, logp);
    total += w * -logp[y];
    const double scale = w * inv_n;
    for (std::size_t c = 0; c < classes; ++c) dlogits[c] = scale * std::exp(logp[c]);
    dlogits[y] -= scale;
    affine_backward(v.head_values, classes, h, rep, dlogits, g_head, dz);
    if (v.has_encoder) affine_backward(v.enc_values, h, d, x, dz, g_enc, {});
  }
  out.loss = total * inv_n;
  if (!std::isfinite(out.loss)) throw Error("classification loss is not finite");
  return out;
}

LossGrad ce_loss(const ParamVector& params, Batch batch) {
  const std::vector<double> ones(params.segment(kHead).shape.out_dim, 1.0);
  return wce_loss(params, batch, ones);
}

std::vector<double> class_probabilities(const ParamVector& params, std::span<const double> features) {
  const auto v = classifier_view(params);
  const std::size_t h = v.head.in_dim;
  std::vector<double> z(h), logits(v.head.out_dim), logp(v.head.out_dim);
  std::span<const double> rep = features;
  if (v.has_encoder) {
    if (features.size() != v.enc.in_dim) throw Error("wrong feature dimension");
    affine(v.enc_values, h, v.enc.in_dim, features, z);
    rep = z;
  } else if (features.size() != h) {
    throw Error("wrong feature dimension");
  }
  affine(v.head_values, v.head.out_dim, h, rep, logits);
  log_softmax(logits, logp);
  for (auto& p : logp) p = std::exp(p);
  return logp;
}

int predict(const ParamVector& params, std::span<const double> features) {
  const auto p = class_probabilities(params, features);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace fedpredi
