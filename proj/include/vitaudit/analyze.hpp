#pragma once

// Discrimination statistics between pristine and injected score
// distributions: histograms, Jensen-Shannon divergence (base 2) and the
// Mann-Whitney AUC with pristine as the positive class.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitaudit/corpus.hpp"
#include "vitaudit/inject.hpp"

namespace vitaudit {

inline constexpr int kDefaultBins = 8;
inline constexpr double kScoreMin = 1.0;
inline constexpr double kScoreMax = 5.0;

struct ScoreDistribution {
  std::vector<double> edges;   // bins + 1, strictly increasing
  std::vector<double> masses;  // bins, non-negative, summing to 1

  std::size_t bins() const { return masses.size(); }
};

class AnalysisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Equal-width bins over [1, 5]; bins are left-closed except the last,
/// which also holds 5.0.
std::size_t bin_index(double score, int bins);

/// Throws AnalysisError on an empty list, bins < 1 or a score outside
/// [1, 5].
ScoreDistribution histogram(std::span<const double> scores, int bins = kDefaultBins);

/// Throws AnalysisError when the bin edges differ.
double js_divergence(const ScoreDistribution& p, const ScoreDistribution& q);

/// Probability that a positive outscores a negative, ties counting one
/// half. Throws AnalysisError when either class is empty.
double auc(std::span<const double> positives, std::span<const double> negatives);

enum class Label { Pristine, Injected };

/// Pristine is the positive class.
double auc(std::span<const Label> labels, std::span<const double> scores);

namespace serial {
std::vector<std::size_t> histogram_counts(std::span<const double> scores, int bins);
/// Exhaustive pair enumeration.
double auc(std::span<const double> positives, std::span<const double> negatives);
}  // namespace serial

/// Bin counts (parallel reduction; identical to serial::histogram_counts).
std::vector<std::size_t> histogram_counts(std::span<const double> scores, int bins);

struct SubtypeStats {
  std::string category;
  std::size_t count = 0;
  std::optional<double> mean_overall;
  std::array<std::optional<double>, 3> mean_axis;  // by Axis
};

struct DiscriminationReport {
  int bins = kDefaultBins;
  std::size_t pristine = 0;
  std::size_t injected = 0;
  std::size_t reverted_excluded = 0;
  std::size_t unlabeled_skipped = 0;
  std::optional<ScoreDistribution> pristine_hist;
  std::optional<ScoreDistribution> injected_hist;
  std::optional<double> jsd;
  std::optional<double> auc;
  std::optional<double> pristine_overall_ge3;
  std::optional<double> injected_overall_ge3;
  /// Fraction of judged pristine records with the axis score >= 3.
  std::array<std::optional<double>, 3> pristine_axis_ge3;
  std::array<std::optional<double>, 3> injected_axis_ge3;
  /// Keyed by subtype code; every catalogue code is present.
  std::map<std::string, SubtypeStats> per_subtype;
};

/// Throws AnalysisError when no record carries a label.
DiscriminationReport discrimination_report(std::span<const AuditRecord> records, int bins = kDefaultBins,
                                           const ErrorTaxonomy& taxonomy = ErrorTaxonomy::builtin());

ojson to_json(const DiscriminationReport& r);

/// "bin_center,pristine_mass,injected_mass" rows for plotting.
std::string histogram_csv(const DiscriminationReport& r);

}  // namespace vitaudit
