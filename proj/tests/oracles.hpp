#pragma once

// Reference computations used by the tests. Each one is written from the
// definition, without calling the library routine it is compared against.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "fedpredi/corpus.hpp"
#include "fedpredi/learners.hpp"
#include "fedpredi/metrics.hpp"
#include "fedpredi/partition.hpp"
#include "fedpredi/rng.hpp"

namespace oracle {

struct Stats {
  std::vector<int> rho, n;
  double rho_bar, mu, sigma;
};

// Element-by-element recount of an assignment matrix.
inline Stats count_matrix(const fedpredi::AssignmentMatrix& m) {
  Stats s;
  s.rho.assign(m.classes(), 0);
  s.n.assign(m.clients(), 0);
  long total = 0;
  for (std::size_t c = 0; c < m.classes(); ++c)
    for (std::size_t k = 0; k < m.clients(); ++k) {
      const int v = m.cells()[c * m.clients() + k];
      s.rho[c] += v;
      s.n[k] += v;
      total += v;
    }
  s.rho_bar = static_cast<double>(total) / m.classes();
  s.mu = static_cast<double>(total) / m.clients();
  double var = 0.0;
  for (int v : s.n) var += (v - s.mu) * (v - s.mu);
  s.sigma = std::sqrt(var / m.clients());
  return s;
}

// Central finite differences of f at p.
inline std::vector<double> finite_difference(const fedpredi::ParamVector& p,
                                             const std::function<double(const fedpredi::ParamVector&)>& f,
                                             double h = 1e-6) {
  std::vector<double> g(p.size());
  fedpredi::ParamVector q = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = q.values()[i];
    q.values()[i] = orig + h;
    const double up = f(q);
    q.values()[i] = orig - h;
    const double down = f(q);
    q.values()[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

struct ClassScores {
  double recall, precision, f1;
};

// Per-class scores straight from the counts, with 0 for empty denominators.
inline std::vector<ClassScores> per_class_scores(const std::vector<std::vector<long>>& cm) {
  const std::size_t C = cm.size();
  std::vector<ClassScores> out(C);
  for (std::size_t c = 0; c < C; ++c) {
    long tp = cm[c][c], fn = 0, fp = 0;
    for (std::size_t j = 0; j < C; ++j) {
      if (j == c) continue;
      fn += cm[c][j];
      fp += cm[j][c];
    }
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double f = tp ? 2.0 * tp / double(2 * tp + fp + fn) : 0.0;
    out[c] = {r, p, f};
  }
  return out;
}

// Class means then samples, class-major, drawn with the same primitives.
inline std::vector<std::vector<double>> regenerate_features(const fedpredi::SyntheticSpec& spec) {
  fedpredi::Rng rng(spec.seed);
  std::vector<std::vector<double>> means(spec.class_counts.size(), std::vector<double>(spec.feature_dim));
  for (auto& m : means)
    for (auto& v : m) v = spec.separation * rng.normal();
  std::vector<std::vector<double>> xs;
  for (std::size_t c = 0; c < means.size(); ++c)
    for (std::size_t i = 0; i < spec.class_counts[c]; ++i) {
      std::vector<double> x(spec.feature_dim);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = means[c][j] + spec.noise * rng.normal();
      xs.push_back(std::move(x));
    }
  return xs;
}

// Nearest empirical centroid, recomputed from scratch.
inline double nearest_centroid_accuracy(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys, int classes) {
  const std::size_t d = xs.front().size();
  std::vector<std::vector<double>> mean(classes, std::vector<double>(d, 0.0));
  std::vector<int> count(classes, 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ++count[ys[i]];
    for (std::size_t j = 0; j < d; ++j) mean[ys[i]][j] += xs[i][j];
  }
  for (int c = 0; c < classes; ++c)
    for (auto& v : mean[c]) v /= count[c];
  int correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    int best = -1;
    double bd = 0.0;
    for (int c = 0; c < classes; ++c) {
      if (!count[c]) continue;
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) dist += (xs[i][j] - mean[c][j]) * (xs[i][j] - mean[c][j]);
      if (best < 0 || dist < bd) {
        bd = dist;
        best = c;
      }
    }
    correct += best == ys[i];
  }
  return double(correct) / double(xs.size());
}

}  // namespace oracle
