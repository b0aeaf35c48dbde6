#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "fedpredi/error.hpp"
#include "fedpredi/harness.hpp"
#include "fedpredi/manifest_io.hpp"

namespace fedpredi {
namespace {

// Orders cells by unlabeled split, labeled split (iid first, then rho
// descending, sigma ascending) and method.
using CellId = std::tuple<double, int, double, double, std::string>;

CellId cell_id(const RunKey& k, bool with_method) {
  return {k.alpha ? -*k.alpha : 1.0, k.labeled_iid ? 0 : 1, -k.rho_target, k.sigma_target, with_method ? k.method : ""};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

Report summarize(const ResultTable& table, bool gains) {
  struct Acc {
    RunKey key;
    std::vector<double> acc, f1, rho, sigma;
  };
  std::map<CellId, Acc> cells;
  // cell without method -> method -> seed -> row
  std::map<CellId, std::map<std::string, std::map<std::uint64_t, const ResultRow*>>> by_seed;
  for (const auto& r : table.rows) {
    if (!r.ok) continue;
    auto& a = cells[cell_id(r.key, true)];
    a.key = r.key;
    a.key.seed = 0;
    a.acc.push_back(r.macro_accuracy);
    a.f1.push_back(r.macro_f1);
    a.rho.push_back(r.rho_realized);
    a.sigma.push_back(r.sigma_realized);
    by_seed[cell_id(r.key, false)][r.key.method][r.key.seed] = &r;
  }
  if (cells.empty()) throw Error("result table has no successful rows");

  Report rep;
  for (auto& [id, a] : cells)
    rep.cells.push_back({a.key, a.acc.size(), mean_std(a.acc), mean_std(a.f1), mean_std(a.rho), mean_std(a.sigma)});

  if (!gains) return rep;
  for (const auto& [id, methods] : by_seed) {
    const auto base = methods.find("baseline");
    const auto prep = methods.find("prep");
    if (base == methods.end() || prep == methods.end()) {
      const auto& any = methods.begin()->second.begin()->second->key;
      throw Error("cell " + any.unlabeled_label() + " " + any.labeled_label() + " has no paired baseline/prep runs");
    }
    GainSummary g;
    std::vector<double> dacc, df1;
    for (const auto& [seed, brow] : base->second) {
      const auto it = prep->second.find(seed);
      if (it == prep->second.end()) continue;
      dacc.push_back(100.0 * (it->second->macro_accuracy - brow->macro_accuracy));
      df1.push_back(100.0 * (it->second->macro_f1 - brow->macro_f1));
      g.cell = brow->key;
    }
    if (dacc.empty()) {
      const auto& any = base->second.begin()->second->key;
      throw Error("cell " + any.unlabeled_label() + " " + any.labeled_label() + " has no seed run under both methods");
    }
    g.cell.method.clear();
    g.cell.seed = 0;
    g.pairs = dacc.size();
    g.accuracy_gain_pp = mean_std(dacc);
    g.f1_gain_pp = mean_std(df1);
    rep.gains.push_back(std::move(g));
  }

  std::map<std::pair<std::string, double>, std::vector<std::pair<double, double>>> trend;
  for (const auto& g : rep.gains)
    if (!g.cell.labeled_iid)
      trend[{g.cell.unlabeled_label(), g.cell.sigma_target}].emplace_back(g.cell.rho_target, g.f1_gain_pp.mean);
  for (auto& [key, points] : trend) {
    std::sort(points.begin(), points.end());
    TrendSummary t{key.first, key.second, points, true};
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].second > points[i - 1].second) t.non_increasing = false;
    rep.trends.push_back(std::move(t));
  }
  return rep;
}

std::string format_report(const Report& rep, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << "section,unlabeled,labeled,rho_target,sigma_target,method,n,acc_mean,acc_std,f1_mean,f1_std,rho_realized,sigma_realized\n";
    for (const auto& c : rep.cells)
      out << "cell," << c.cell.unlabeled_label() << ',' << (c.cell.labeled_iid ? "iid" : "predi") << ','
          << format_double(c.cell.rho_target) << ',' << format_double(c.cell.sigma_target) << ',' << c.cell.method << ','
          << c.runs << ',' << format_double(c.accuracy.mean) << ',' << format_double(c.accuracy.std) << ','
          << format_double(c.f1.mean) << ',' << format_double(c.f1.std) << ',' << format_double(c.rho_realized.mean) << ','
          << format_double(c.sigma_realized.mean) << '\n';
    for (const auto& g : rep.gains)
      out << "gain_pp," << g.cell.unlabeled_label() << ',' << (g.cell.labeled_iid ? "iid" : "predi") << ','
          << format_double(g.cell.rho_target) << ',' << format_double(g.cell.sigma_target) << ",prep-baseline,"
          << g.pairs << ',' << format_double(g.accuracy_gain_pp.mean) << ',' << format_double(g.accuracy_gain_pp.std) << ','
          << format_double(g.f1_gain_pp.mean) << ',' << format_double(g.f1_gain_pp.std) << ",,\n";
    return out.str();
  }

  out << "Per-cell results (mean +- std over seeds, percent)\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-22s %-9s %3s %16s %16s %8s %8s\n", "unlabeled", "labeled", "method", "n",
                "macro-acc", "macro-F1", "rho", "sigma");
  out << line;
  for (const auto& c : rep.cells) {
    std::snprintf(line, sizeof line, "%-12s %-22s %-9s %3zu %16s %16s %8s %8s\n", c.cell.unlabeled_label().c_str(),
                  c.cell.labeled_label().c_str(), c.cell.method.c_str(), c.runs,
                  (fixed(100 * c.accuracy.mean, 2) + " +- " + fixed(100 * c.accuracy.std, 2)).c_str(),
                  (fixed(100 * c.f1.mean, 2) + " +- " + fixed(100 * c.f1.std, 2)).c_str(),
                  fixed(c.rho_realized.mean, 3).c_str(), fixed(c.sigma_realized.mean, 3).c_str());
    out << line;
  }
  if (!rep.gains.empty()) {
    out << "\nPrevalence weighting gain over baseline (percentage points, paired seeds)\n";
    std::snprintf(line, sizeof line, "%-12s %-22s %5s %16s %16s\n", "unlabeled", "labeled", "pairs", "acc gain", "F1 gain");
    out << line;
    for (const auto& g : rep.gains) {
      std::snprintf(line, sizeof line, "%-12s %-22s %5zu %16s %16s\n", g.cell.unlabeled_label().c_str(),
                    g.cell.labeled_label().c_str(), g.pairs,
                    (fixed(g.accuracy_gain_pp.mean, 2) + " +- " + fixed(g.accuracy_gain_pp.std, 2)).c_str(),
                    (fixed(g.f1_gain_pp.mean, 2) + " +- " + fixed(g.f1_gain_pp.std, 2)).c_str());
      out << line;
    }
  }
  if (!rep.trends.empty()) {
    out << "\nF1 gain versus mean prevalence\n";
    for (const auto& t : rep.trends) {
      out << t.unlabeled << " sigma=" << fixed(t.sigma_target, 1) << ":";
      for (const auto& [rho, gain] : t.f1_gain_by_rho) out << "  rho " << fixed(rho, 1) << " -> " << fixed(gain, 2);
      out << (t.non_increasing ? "  [non-increasing in rho]" : "  [not monotone]") << '\n';
    }
  }
  return out.str();
}

std::string report(const ResultTable& table, ReportFormat format) {
  std::set<std::string> methods;
  for (const auto& r : table.rows)
    if (r.ok) methods.insert(r.key.method);
  const bool gains = methods.count("baseline") && methods.count("prep");
  return format_report(summarize(table, gains), format);
}

}  // namespace fedpredi
