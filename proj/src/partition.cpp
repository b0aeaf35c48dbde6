#include "fedpredi/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedpredi/error.hpp"
#include "fedpredi/manifest_io.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {
namespace {

double population_std(std::span<const int> values) {
  const double k = static_cast<double>(values.size());
  double mean = 0.0;
  for (int v : values) mean += v;
  mean /= k;
  double var = 0.0;
  for (int v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / k);
}

std::vector<std::size_t> iid_sizes(std::size_t total, std::size_t clients) {
  std::vector<std::size_t> sizes(clients, total / clients);
  const std::size_t extra = total % clients;
  for (std::size_t k = clients - extra; k < clients; ++k) ++sizes[k];
  return sizes;
}

std::vector<std::size_t> dirichlet_sizes(std::size_t total, std::size_t clients, double alpha, Rng& rng) {
  std::vector<double> share(clients);
  double sum = 0.0;
  for (auto& g : share) {
    g = rng.gamma(alpha);
    sum += g;
  }
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed; concentrate on one client.
    std::fill(share.begin(), share.end(), 0.0);
    share[rng.uniform_index(clients)] = 1.0;
    sum = 1.0;
  }

  std::vector<long long> n(clients);
  std::vector<double> residue(clients);
  long long assigned = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const double exact = static_cast<double>(total) * (share[k] / sum);
    n[k] = std::llround(exact);
    residue[k] = exact - static_cast<double>(n[k]);
    assigned += n[k];
  }
  long long diff = static_cast<long long>(total) - assigned;
  while (diff > 0) {
    auto k = static_cast<std::size_t>(std::max_element(residue.begin(), residue.end()) - residue.begin());
    ++n[k];
    residue[k] -= 1.0;
    --diff;
  }
  while (diff < 0) {
    std::size_t best = clients;
    for (std::size_t k = 0; k < clients; ++k)
      if (n[k] > 0 && (best == clients || residue[k] < residue[best])) best = k;
    --n[best];
    residue[best] += 1.0;
    ++diff;
  }
  return {n.begin(), n.end()};
}

}  // namespace

std::size_t VolumeSplit::total() const {
  return std::accumulate(client_sizes.begin(), client_sizes.end(), std::size_t{0});
}

VolumeSplit partition_unlabeled(std::size_t total, std::size_t clients, const VolumeMode& mode, std::uint64_t seed,
                                std::size_t min_size) {
  if (clients < 1) throw Error("client count must be positive");
  if (total < clients * min_size)
    throw Error("cannot give " + std::to_string(clients) + " clients at least " + std::to_string(min_size) + " of " +
                std::to_string(total) + " examples");

  VolumeSplit split;
  split.seed = seed;
  if (std::holds_alternative<IidVolume>(mode)) {
    split.client_sizes = iid_sizes(total, clients);
    return split;
  }

  const double alpha = std::get<DirichletVolume>(mode).alpha;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("Dirichlet concentration must be positive");
  split.alpha = alpha;
  Rng rng(seed);
  split.client_sizes = dirichlet_sizes(total, clients, alpha, rng);

  auto& n = split.client_sizes;
  for (std::size_t k = 0; k < clients; ++k) {
    while (n[k] < min_size) {
      auto donor = static_cast<std::size_t>(std::max_element(n.begin(), n.end()) - n.begin());
      --n[donor];
      ++n[k];
    }
  }
  return split;
}

double coefficient_of_variation(std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw Error("no sizes");
  const double k = static_cast<double>(sizes.size());
  double mean = 0.0;
  for (auto s : sizes) mean += static_cast<double>(s);
  mean /= k;
  if (mean == 0.0) throw Error("coefficient of variation undefined for zero mean");
  double var = 0.0;
  for (auto s : sizes) var += (static_cast<double>(s) - mean) * (static_cast<double>(s) - mean);
  return std::sqrt(var / k) / mean;
}

std::vector<CorpusManifest> apply_volume_split(const CorpusManifest& pool, const VolumeSplit& split, std::uint64_t seed) {
  if (split.total() != pool.size())
    throw Error("volume split covers " + std::to_string(split.total()) + " examples, pool has " + std::to_string(pool.size()));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::vector<CorpusManifest> out;
  std::size_t next = 0;
  for (std::size_t k = 0; k < split.client_sizes.size(); ++k) {
    CorpusManifest part;
    part.class_names = pool.class_names;
    part.feature_dim = pool.feature_dim;
    part.provenance = pool.provenance;
    std::vector<std::size_t> mine(order.begin() + static_cast<std::ptrdiff_t>(next),
                                  order.begin() + static_cast<std::ptrdiff_t>(next + split.client_sizes[k]));
    std::sort(mine.begin(), mine.end());
    for (auto i : mine) part.examples.push_back(pool.examples[i]);
    next += split.client_sizes[k];
    out.push_back(std::move(part));
  }
  return out;
}

AssignmentMatrix::AssignmentMatrix(std::size_t classes, std::size_t clients, std::vector<std::uint8_t> cells)
    : classes_(classes), clients_(clients), cells_(std::move(cells)) {
  if (classes_ == 0 || clients_ == 0) throw Error("assignment matrix must be nonempty");
  if (cells_.size() != classes_ * clients_) throw Error("assignment matrix cell count does not match C x K");
  for (auto v : cells_)
    if (v > 1) throw Error("assignment matrix must be binary");
  stats_ = matrix_stats(*this);
  for (std::size_t c = 0; c < classes_; ++c)
    if (stats_.prevalence[c] < 1) throw Error("class " + std::to_string(c) + " is held by no client");
  for (std::size_t k = 0; k < clients_; ++k)
    if (stats_.class_counts[k] < 1) throw Error("client " + std::to_string(k) + " holds no class");
}

AssignmentMatrix AssignmentMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw Error("assignment matrix must be nonempty");
  const std::size_t k = rows.front().size();
  std::vector<std::uint8_t> cells;
  cells.reserve(rows.size() * k);
  for (const auto& row : rows) {
    if (row.size() != k) throw Error("ragged assignment matrix");
    for (int v : row) {
      if (v != 0 && v != 1) throw Error("assignment matrix must be binary");
      cells.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return AssignmentMatrix(rows.size(), k, std::move(cells));
}

AssignmentMatrix AssignmentMatrix::all_ones(std::size_t classes, std::size_t clients) {
  return AssignmentMatrix(classes, clients, std::vector<std::uint8_t>(classes * clients, 1));
}

std::vector<int> AssignmentMatrix::label_set(std::size_t k) const {
  std::vector<int> out;
  for (std::size_t c = 0; c < classes_; ++c)
    if (at(c, k)) out.push_back(static_cast<int>(c));
  return out;
}

MatrixStats matrix_stats(const AssignmentMatrix& m) {
  MatrixStats s;
  const std::size_t C = m.classes(), K = m.clients();
  s.prevalence.assign(C, 0);
  s.class_counts.assign(K, 0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < K; ++k)
      if (m.at(c, k)) {
        ++s.prevalence[c];
        ++s.class_counts[k];
      }
  const int total = std::accumulate(s.prevalence.begin(), s.prevalence.end(), 0);
  s.rho_bar = static_cast<double>(total) / static_cast<double>(C);
  s.mu = static_cast<double>(total) / static_cast<double>(K);
  s.sigma = population_std(s.class_counts);
  return s;
}

void write_assignment_matrix(std::ostream& out, const AssignmentMatrix& m) {
  out << m.classes() << ' ' << m.clients() << ' ' << format_double(m.stats().rho_bar) << ' '
      << format_double(m.stats().sigma) << '\n';
  for (std::size_t c = 0; c < m.classes(); ++c) {
    for (std::size_t k = 0; k < m.clients(); ++k) out << (k ? " " : "") << (m.at(c, k) ? '1' : '0');
    out << '\n';
  }
}

AssignmentMatrix read_assignment_matrix(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("empty assignment matrix file");
  std::istringstream hs(header);
  std::size_t C = 0, K = 0;
  std::string rho_text, sigma_text;
  if (!(hs >> C >> K >> rho_text >> sigma_text)) throw Error("bad assignment matrix header '" + header + "'");
  std::vector<std::uint8_t> cells;
  cells.reserve(C * K);
  for (std::size_t i = 0; i < C * K; ++i) {
    int v = -1;
    if (!(in >> v) || (v != 0 && v != 1)) throw Error("assignment matrix body must hold C x K binary digits");
    cells.push_back(static_cast<std::uint8_t>(v));
  }
  AssignmentMatrix m(C, K, std::move(cells));
  if (parse_double(rho_text) != m.stats().rho_bar || parse_double(sigma_text) != m.stats().sigma)
    throw Error("assignment matrix header statistics disagree with the matrix body");
  return m;
}

void save_assignment_matrix(const std::filesystem::path& path, const AssignmentMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_assignment_matrix(out, m);
}

AssignmentMatrix load_assignment_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_assignment_matrix(in);
}

namespace {

std::vector<int> draw_count_targets(int total, std::size_t clients, std::size_t classes, double sigma, Rng& rng) {
  const double mu = static_cast<double>(total) / static_cast<double>(clients);
  const int hi = static_cast<int>(classes);
  std::vector<double> raw(clients);
  std::vector<int> q(clients);
  int sum = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    raw[k] = mu + sigma * rng.normal();
    q[k] = static_cast<int>(std::clamp<long long>(std::llround(raw[k]), 1, hi));
    sum += q[k];
  }
  // +-1 steps on the client farthest from its unclamped draw in the needed direction.
  while (sum < total) {
    std::size_t best = clients;
    for (std::size_t k = 0; k < clients; ++k)
      if (q[k] < hi && (best == clients || raw[k] - q[k] > raw[best] - q[best])) best = k;
    ++q[best];
    ++sum;
  }
  while (sum > total) {
    std::size_t best = clients;
    for (std::size_t k = 0; k < clients; ++k)
      if (q[k] > 1 && (best == clients || q[k] - raw[k] > q[best] - raw[best])) best = k;
    --q[best];
    --sum;
  }
  return q;
}

std::vector<std::uint8_t> allocate_classes(std::span<const int> prevalence, std::span<const int> targets,
                                           std::size_t clients, Rng& rng) {
  const std::size_t classes = prevalence.size();
  std::vector<std::size_t> order(classes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));

  std::vector<std::uint8_t> cells(classes * clients, 0);
  std::vector<int> held(clients, 0);
  std::vector<std::size_t> rank(clients);
  std::vector<int> gap(clients);
  std::vector<std::uint64_t> tie(clients);
  for (std::size_t c : order) {
    for (std::size_t k = 0; k < clients; ++k) {
      gap[k] = std::max(targets[k] - held[k], 0);
      tie[k] = rng.next_u64();
    }
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      return gap[a] != gap[b] ? gap[a] > gap[b] : tie[a] < tie[b];
    });
    for (int i = 0; i < prevalence[c]; ++i) {
      const std::size_t k = rank[static_cast<std::size_t>(i)];
      cells[c * clients + k] = 1;
      ++held[k];
    }
  }
  return cells;
}

}  // namespace

PrediResult predi_partition(std::span<const CorpusManifest> labeled, const PartitionTarget& target, std::size_t classes,
                            std::size_t clients, std::size_t per_class) {
  if (classes < 1 || clients < 1 || per_class < 1) throw Error("classes, clients and per-class size must be positive");
  const double C = static_cast<double>(classes), K = static_cast<double>(clients);
  const double rho_tol = target.rho_tolerance.value_or(1.0 / (2.0 * C));
  if (!(rho_tol > 0.0) || !(target.sigma_tolerance > 0.0)) throw Error("partition tolerances must be positive");
  if (!(target.sigma_target >= 0.0)) throw Error("sigma target must be >= 0");
  if (!(target.rho_target >= 1.0 - rho_tol && target.rho_target <= K + rho_tol))
    throw InfeasibleError("mean prevalence target " + format_double(target.rho_target) + " outside [1, K]");

  // Pool every labeled example by class.
  std::vector<std::vector<const Example*>> pool(classes);
  std::size_t dim = 0;
  std::vector<std::string> names;
  for (const auto& m : labeled) {
    if (m.class_count() != classes) throw Error("labeled manifest has " + std::to_string(m.class_count()) + " classes, expected " + std::to_string(classes));
    if (names.empty()) {
      names = m.class_names;
      dim = m.feature_dim;
    }
    for (const auto& e : m.examples) {
      if (e.class_id == kUnlabeled) throw Error("predi partition needs labeled examples");
      pool[static_cast<std::size_t>(e.class_id)].push_back(&e);
    }
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (pool[c].size() < per_class * clients)
      throw Error("class " + std::to_string(c) + " has " + std::to_string(pool[c].size()) + " labeled examples, needs " +
                  std::to_string(per_class * clients));

  Rng rng(target.seed);

  std::vector<int> rho(classes, 1);
  int total = static_cast<int>(classes);
  auto mean_rho = [&] { return static_cast<double>(total) / C; };
  std::vector<std::size_t> open;
  while (std::abs(mean_rho() - target.rho_target) > rho_tol && mean_rho() < target.rho_target) {
    open.clear();
    for (std::size_t c = 0; c < classes; ++c)
      if (rho[c] < static_cast<int>(clients)) open.push_back(c);
    if (open.empty()) break;
    ++rho[open[rng.uniform_index(open.size())]];
    ++total;
  }
  if (std::abs(mean_rho() - target.rho_target) > rho_tol)
    throw InfeasibleError("mean prevalence " + format_double(target.rho_target) + " is not reachable within tolerance " +
                          format_double(rho_tol));
  if (static_cast<std::size_t>(total) < clients)
    throw InfeasibleError("only " + std::to_string(total) + " class slots for " + std::to_string(clients) + " clients");

  for (std::size_t attempt = 1; attempt <= target.max_retries; ++attempt) {
    auto q = draw_count_targets(total, clients, classes, target.sigma_target, rng);
    if (std::abs(population_std(q) - target.sigma_target) > target.sigma_tolerance) continue;
    auto cells = allocate_classes(rho, q, clients, rng);

    std::vector<int> held(clients, 0);
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t k = 0; k < clients; ++k) held[k] += cells[c * clients + k];
    if (*std::min_element(held.begin(), held.end()) < 1) continue;
    if (std::abs(population_std(held) - target.sigma_target) > target.sigma_tolerance) continue;

    PrediResult result{AssignmentMatrix(classes, clients, std::move(cells)), rho, q, {}, attempt};
    result.clients.resize(clients);
    for (auto& cm : result.clients) {
      cm.class_names = names;
      cm.feature_dim = dim;
      cm.provenance = "predi";
    }
    for (std::size_t c = 0; c < classes; ++c) {
      auto& ids = pool[c];
      rng.shuffle(std::span(ids));
      std::size_t next = 0;
      for (std::size_t k = 0; k < clients; ++k) {
        if (!result.matrix.at(c, k)) continue;
        for (std::size_t j = 0; j < per_class; ++j) result.clients[k].examples.push_back(*ids[next++]);
      }
    }
    return result;
  }
  throw Error("disparity target " + format_double(target.sigma_target) + " not met within " +
              std::to_string(target.max_retries) + " attempts");
}

}  // namespace fedpredi
