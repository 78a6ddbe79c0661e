#include "vitaudit/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

namespace vitaudit {
namespace {

void check_bins(int bins) {
  if (bins < 1) throw AnalysisError("bins must be >= 1, got " + std::to_string(bins));
}

void check_score(double s) {
  if (!(s >= kScoreMin && s <= kScoreMax)) {
    throw AnalysisError("score " + std::to_string(s) + " outside [1, 5]");
  }
}

double kl_term(double p, double m) { return p > 0.0 ? p * std::log2(p / m) : 0.0; }

std::optional<double> fraction_ge3(std::span<const double> xs) {
  if (xs.empty()) return std::nullopt;
  const auto n = std::count_if(xs.begin(), xs.end(), [](double x) { return x >= 3.0; });
  return static_cast<double>(n) / static_cast<double>(xs.size());
}

std::optional<double> mean(std::span<const double> xs) {
  if (xs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson dist_json(const std::optional<ScoreDistribution>& d) {
  if (!d) return nullptr;
  return {{"edges", d->edges}, {"masses", d->masses}};
}

}  // namespace

std::size_t bin_index(double score, int bins) {
  check_bins(bins);
  check_score(score);
  const auto raw = std::floor((score - kScoreMin) * bins / (kScoreMax - kScoreMin));
  const auto i = static_cast<std::size_t>(raw);
  return std::min(i, static_cast<std::size_t>(bins - 1));
}

namespace serial {

std::vector<std::size_t> histogram_counts(std::span<const double> scores, int bins) {
  check_bins(bins);
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (const double s : scores) ++counts[bin_index(s, bins)];
  return counts;
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw AnalysisError("AUC needs both classes");
  std::uint64_t twice_wins = 0;
  for (const double p : positives) {
    for (const double n : negatives) {
      if (p > n) {
        twice_wins += 2;
      } else if (p == n) {
        twice_wins += 1;
      }
    }
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

}  // namespace serial

std::vector<std::size_t> histogram_counts(std::span<const double> scores, int bins) {
  check_bins(bins);
  for (const double s : scores) check_score(s);
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  std::size_t* c = counts.data();
  const auto n = static_cast<std::ptrdiff_t>(scores.size());
  const double* x = scores.data();
  const double scale = bins / (kScoreMax - kScoreMin);
  const auto last = static_cast<std::size_t>(bins - 1);
#pragma omp parallel for schedule(static) reduction(+ : c[:bins])
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(std::floor((x[i] - kScoreMin) * scale));
    ++c[b < last ? b : last];
  }
  return counts;
}

ScoreDistribution histogram(std::span<const double> scores, int bins) {
  check_bins(bins);
  if (scores.empty()) throw AnalysisError("histogram of an empty score list");
  const auto counts = histogram_counts(scores, bins);
  ScoreDistribution d;
  d.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    d.edges[static_cast<std::size_t>(i)] = kScoreMin + (kScoreMax - kScoreMin) * i / bins;
  }
  d.masses.resize(counts.size());
  const auto total = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < counts.size(); ++i) d.masses[i] = static_cast<double>(counts[i]) / total;
  return d;
}

double js_divergence(const ScoreDistribution& p, const ScoreDistribution& q) {
  if (p.edges != q.edges || p.masses.size() != q.masses.size()) {
    throw AnalysisError("distributions have different bin edges");
  }
  double kl_pm = 0.0;
  double kl_qm = 0.0;
  for (std::size_t i = 0; i < p.masses.size(); ++i) {
    const double m = 0.5 * (p.masses[i] + q.masses[i]);
    kl_pm += kl_term(p.masses[i], m);
    kl_qm += kl_term(q.masses[i], m);
  }
  const double jsd = 0.5 * kl_pm + 0.5 * kl_qm;
  return std::clamp(jsd, 0.0, 1.0);
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw AnalysisError("AUC needs both classes");
  std::vector<double> sorted(negatives.begin(), negatives.end());
  std::sort(sorted.begin(), sorted.end());

  const auto n = static_cast<std::ptrdiff_t>(positives.size());
  const double* pos = positives.data();
  unsigned long long twice_wins = 0;
#pragma omp parallel for schedule(static) reduction(+ : twice_wins)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto [lo, hi] = std::equal_range(sorted.begin(), sorted.end(), pos[i]);
    const auto below = static_cast<unsigned long long>(lo - sorted.begin());
    const auto tied = static_cast<unsigned long long>(hi - lo);
    twice_wins += 2 * below + tied;
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

double auc(std::span<const Label> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw AnalysisError("labels and scores differ in length");
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == Label::Pristine ? pos : neg).push_back(scores[i]);
  }
  return auc(pos, neg);
}

DiscriminationReport discrimination_report(std::span<const AuditRecord> records, int bins,
                                           const ErrorTaxonomy& taxonomy) {
  check_bins(bins);
  DiscriminationReport r;
  r.bins = bins;

  std::vector<double> pristine;
  std::vector<double> injected;
  std::array<std::vector<double>, 3> pristine_axis;
  std::array<std::vector<double>, 3> injected_axis;
  struct Acc {
    std::vector<double> overall;
    std::array<std::vector<double>, 3> axis;
  };
  std::map<std::string, Acc> by_subtype;

  for (const auto& rec : records) {
    if (!rec.label) {
      ++r.unlabeled_skipped;
      continue;
    }
    if (rec.label->reverted) {
      ++r.reverted_excluded;
      continue;
    }
    const double overall = to_double(rec.scores.overall);
    const bool is_injected = rec.label->injected();
    (is_injected ? injected : pristine).push_back(overall);
    for (const Axis a : kAllAxes) {
      const auto& s = rec.scores.score(a);
      if (!s) continue;
      (is_injected ? injected_axis : pristine_axis)[static_cast<std::size_t>(a)].push_back(*s);
    }
    if (is_injected && rec.label->subtype) {
      auto& acc = by_subtype[*rec.label->subtype];
      acc.overall.push_back(overall);
      for (const Axis a : kAllAxes) {
        if (const auto& s = rec.scores.score(a)) acc.axis[static_cast<std::size_t>(a)].push_back(*s);
      }
    }
  }
  if (pristine.empty() && injected.empty()) throw AnalysisError("no labeled records to analyze");

  r.pristine = pristine.size();
  r.injected = injected.size();
  if (!pristine.empty()) r.pristine_hist = histogram(pristine, bins);
  if (!injected.empty()) r.injected_hist = histogram(injected, bins);
  if (r.pristine_hist && r.injected_hist) {
    r.jsd = js_divergence(*r.pristine_hist, *r.injected_hist);
    r.auc = auc(pristine, injected);
  }
  r.pristine_overall_ge3 = fraction_ge3(pristine);
  r.injected_overall_ge3 = fraction_ge3(injected);
  for (std::size_t a = 0; a < 3; ++a) {
    r.pristine_axis_ge3[a] = fraction_ge3(pristine_axis[a]);
    r.injected_axis_ge3[a] = fraction_ge3(injected_axis[a]);
  }

  for (const auto c : kAllCategories) {
    for (const auto& st : taxonomy.subtypes(c)) {
      SubtypeStats s;
      s.category = std::string(to_string(c));
      if (const auto it = by_subtype.find(st.code); it != by_subtype.end()) {
        s.count = it->second.overall.size();
        s.mean_overall = mean(it->second.overall);
        for (std::size_t a = 0; a < 3; ++a) s.mean_axis[a] = mean(it->second.axis[a]);
      }
      r.per_subtype.emplace(st.code, std::move(s));
    }
  }
  return r;
}

ojson to_json(const DiscriminationReport& r) {
  ojson j;
  j["bins"] = r.bins;
  j["counts"] = {{"pristine", r.pristine},
                 {"injected", r.injected},
                 {"reverted_excluded", r.reverted_excluded},
                 {"unlabeled_skipped", r.unlabeled_skipped}};
  j["jsd"] = opt(r.jsd);
  j["auc"] = opt(r.auc);
  j["pristine_overall_ge3"] = opt(r.pristine_overall_ge3);
  j["injected_overall_ge3"] = opt(r.injected_overall_ge3);
  ojson axes = ojson::object();
  for (const Axis a : kAllAxes) {
    const auto i = static_cast<std::size_t>(a);
    axes[std::string(to_string(a))] = {{"pristine_ge3", opt(r.pristine_axis_ge3[i])},
                                       {"injected_ge3", opt(r.injected_axis_ge3[i])}};
  }
  j["per_axis"] = std::move(axes);
  j["histograms"] = {{"pristine", dist_json(r.pristine_hist)}, {"injected", dist_json(r.injected_hist)}};
  ojson subtypes = ojson::object();
  for (const auto& [code, s] : r.per_subtype) {
    ojson e;
    e["category"] = s.category;
    e["count"] = s.count;
    e["mean_overall"] = opt(s.mean_overall);
    for (const Axis a : kAllAxes) {
      e["mean_" + std::string(to_string(a))] = opt(s.mean_axis[static_cast<std::size_t>(a)]);
    }
    subtypes[code] = std::move(e);
  }
  j["per_subtype"] = std::move(subtypes);
  return j;
}

std::string histogram_csv(const DiscriminationReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_center,pristine_mass,injected_mass\n";
  const auto& edges = r.pristine_hist ? r.pristine_hist->edges : r.injected_hist ? r.injected_hist->edges
                                                                                   : std::vector<double>{};
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    out << 0.5 * (edges[i] + edges[i + 1]) << ',' << (r.pristine_hist ? r.pristine_hist->masses[i] : 0.0) << ','
        << (r.injected_hist ? r.injected_hist->masses[i] : 0.0) << '\n';
  }
  return out.str();
}

}  // namespace vitaudit
