#include <doctest.h>

#include <cmath>

#include "gen.hpp"
#include "vitaudit/analyze.hpp"

using namespace vitaudit;
using namespace vitaudit::testing;

namespace {

ScoreDistribution dist(std::vector<double> masses) {
  ScoreDistribution d;
  const auto n = masses.size();
  for (std::size_t i = 0; i <= n; ++i) d.edges.push_back(1.0 + 4.0 * double(i) / double(n));
  d.masses = std::move(masses);
  return d;
}

/// KL in nats converted to bits, written independently of the library.
double jsd_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double a = 0, b = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (p[i] + q[i]) / 2;
    if (p[i] > 0) a += p[i] * std::log(p[i] / m);
    if (q[i] > 0) b += q[i] * std::log(q[i] / m);
  }
  return (a + b) / 2 / std::log(2.0);
}

std::vector<double> random_masses(Gen& g, std::size_t n) {
  std::vector<double> m(n);
  double sum = 0;
  for (auto& x : m) {
    x = g.coin(0.2) ? 0.0 : g.uniform();
    sum += x;
  }
  if (sum == 0) {
    m[0] = 1;
    sum = 1;
  }
  for (auto& x : m) x /= sum;
  return m;
}

std::vector<double> random_scores(Gen& g, int n, bool discrete) {
  std::vector<double> s;
  for (int i = 0; i < n; ++i) s.push_back(discrete ? 1.0 + g.range(0, 12) / 3.0 : 1.0 + 4.0 * g.uniform());
  return s;
}

AuditRecord labelled(const std::string& id, int l, int k, int v, const char* label, const char* category = nullptr,
                     const char* subtype = nullptr, bool reverted = false) {
  AuditRecord r;
  r.sample_id = id;
  r.scores = {l, k, v, aggregate(l, k, v, WeightScheme{})};
  if (label) {
    BenchmarkLabel b{label, {}, {}, reverted};
    if (category) b.category = category;
    if (subtype) b.subtype = subtype;
    r.label = b;
  }
  return r;
}

}  // namespace

TEST_CASE("binning") {
  CHECK(bin_index(1.0, 8) == 0);
  CHECK(bin_index(1.49, 8) == 0);
  CHECK(bin_index(1.5, 8) == 1);
  CHECK(bin_index(5.0, 8) == 7);
  CHECK(bin_index(4.99, 8) == 7);
  CHECK(bin_index(3.0, 1) == 0);
  CHECK_THROWS_AS(bin_index(0.5, 8), AnalysisError);
  CHECK_THROWS_AS(bin_index(3.0, 0), AnalysisError);
}

TEST_CASE("histograms") {
  const std::vector<double> threes(10, 3.0);
  const auto h = histogram(threes);
  REQUIRE(h.bins() == 8);
  CHECK(h.edges.front() == 1.0);
  CHECK(h.edges.back() == 5.0);
  CHECK(h.masses[4] == 1.0);
  CHECK_THROWS_AS(histogram(std::span<const double>{}), AnalysisError);

  Gen g(51);
  std::vector<double> uniform;
  for (int i = 0; i < 80'000; ++i) uniform.push_back(1.0 + 4.0 * g.uniform());
  const auto u = histogram(uniform);
  const double sigma = std::sqrt(1.0 / 8 * 7.0 / 8 / 80'000);
  double total = 0;
  for (const double m : u.masses) {
    CHECK(std::abs(m - 1.0 / 8) < 3 * sigma);
    total += m;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("parallel histogram counts match the serial loop") {
  Gen g(52);
  for (int round = 0; round < 50; ++round) {
    const auto s = random_scores(g, g.range(0, 3000), g.coin());
    const int bins = g.range(1, 16);
    REQUIRE(histogram_counts(s, bins) == serial::histogram_counts(s, bins));
  }
}

TEST_CASE("jsd examples") {
  CHECK(js_divergence(dist({0.5, 0.5}), dist({1.0, 0.0})) == doctest::Approx(0.311278).epsilon(1e-5));
  CHECK(js_divergence(dist({0.2, 0.3, 0.5}), dist({0.2, 0.3, 0.5})) == 0.0);
  CHECK(js_divergence(dist({1, 0, 0, 0}), dist({0, 0, 0.5, 0.5})) == 1.0);
  CHECK_THROWS_AS(js_divergence(dist({1, 0}), dist({1, 0, 0})), AnalysisError);
}

TEST_CASE("property: jsd matches the direct evaluation, is symmetric and bounded") {
  Gen g(53);
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(g.range(1, 12));
    const auto p = random_masses(g, n), q = random_masses(g, n);
    const double v = js_divergence(dist(p), dist(q));
    REQUIRE(std::abs(v - jsd_oracle(p, q)) < 1e-12);
    REQUIRE(std::abs(v - js_divergence(dist(q), dist(p))) < 1e-12);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("auc examples") {
  const std::vector<double> hi{4, 5, 4.5}, lo{1, 2, 3};
  CHECK(auc(hi, lo) == 1.0);
  CHECK(auc(lo, hi) == 0.0);
  const std::vector<double> same(7, 3.0);
  CHECK(auc(same, same) == 0.5);
  CHECK_THROWS_AS(auc(hi, std::span<const double>{}), AnalysisError);

  const std::vector<Label> labels{Label::Pristine, Label::Injected, Label::Pristine, Label::Injected};
  const std::vector<double> scores{4, 2, 3, 3};
  CHECK(auc(labels, scores) == 0.875);
}

TEST_CASE("property: auc agrees with pair enumeration and complements") {
  Gen g(54);
  for (int i = 0; i < 2000; ++i) {
    const int total = g.range(2, 200);
    const int npos = g.range(1, total - 1);
    const bool discrete = g.coin();
    const auto pos = random_scores(g, npos, discrete), neg = random_scores(g, total - npos, discrete);
    const double a = auc(pos, neg);
    REQUIRE(std::abs(a - serial::auc(pos, neg)) < 1e-12);
    REQUIRE(std::abs(auc(neg, pos) - (1.0 - a)) < 1e-12);
  }
}

TEST_CASE("discrimination report") {
  std::vector<AuditRecord> rs{
      labelled("p1", 5, 5, 5, "pristine"),
      labelled("p2", 5, 4, 5, "pristine"),
      labelled("i1", 2, 2, 2, "injected", "knowledge", "knowledge_entity"),
      labelled("i2", 2, 3, 1, "injected", "consistency", "consistency_fake"),
      labelled("r1", 1, 1, 1, "pristine", nullptr, nullptr, true),
      labelled("u1", 3, 3, 3, nullptr),
  };
  const auto r = discrimination_report(rs);
  CHECK(r.pristine == 2);
  CHECK(r.injected == 2);
  CHECK(r.reverted_excluded == 1);
  CHECK(r.unlabeled_skipped == 1);
  CHECK(*r.auc == 1.0);
  CHECK(*r.jsd == 1.0);
  CHECK(*r.pristine_overall_ge3 == 1.0);
  CHECK(*r.injected_overall_ge3 == 0.0);
  CHECK(*r.injected_axis_ge3[1] == 0.5);
  CHECK(r.per_subtype.size() == 14);
  CHECK(r.per_subtype.at("knowledge_entity").count == 1);
  CHECK(*r.per_subtype.at("knowledge_entity").mean_overall == doctest::Approx(2.0));
  CHECK(r.per_subtype.at("reasoning_causal").count == 0);
  CHECK_FALSE(r.per_subtype.at("reasoning_causal").mean_overall.has_value());

  const auto j = to_json(r);
  CHECK(j["counts"]["pristine"] == 2);
  CHECK(j["per_axis"]["knowledge"]["injected_ge3"] == 0.5);
  const auto csv = histogram_csv(r);
  CHECK(csv.starts_with("bin_center,pristine_mass,injected_mass\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);

  const std::vector<AuditRecord> unlabeled{labelled("u", 3, 3, 3, nullptr)};
  CHECK_THROWS_AS(discrimination_report(unlabeled), AnalysisError);
}

TEST_CASE("report with one class omits the two-class statistics") {
  const std::vector<AuditRecord> rs{labelled("p1", 5, 5, 5, "pristine"), labelled("p2", 3, 3, 3, "pristine")};
  const auto r = discrimination_report(rs);
  CHECK_FALSE(r.auc.has_value());
  CHECK_FALSE(r.jsd.has_value());
  CHECK(r.pristine_hist.has_value());
  CHECK_FALSE(r.injected_hist.has_value());
}
