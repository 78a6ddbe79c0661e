#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/rational.hpp>

namespace vitaudit {

using Rational = boost::rational<std::int64_t>;

double to_double(const Rational& r);

enum class Axis { Logic, Knowledge, Vision };

inline constexpr std::array<Axis, 3> kAllAxes{Axis::Logic, Axis::Knowledge, Axis::Vision};

/// "logic" | "knowledge" | "vision"
std::string_view to_string(Axis a);
std::optional<Axis> parse_axis(std::string_view s);

/// Subset of axes to judge; all three by default.
struct AxisSet {
  bool logic = true;
  bool knowledge = true;
  bool vision = true;

  bool contains(Axis a) const;
  bool empty() const { return !logic && !knowledge && !vision; }
  std::string to_string() const;

  /// Comma-separated axis names, e.g. "logic,vision". Throws
  /// std::invalid_argument on unknown names or an empty list.
  static AxisSet parse(std::string_view csv);
};

class InvalidWeightsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-negative weights over the three axes that sum to exactly one.
class WeightScheme {
 public:
  /// (1/3, 1/3, 1/3)
  WeightScheme();
  WeightScheme(Rational logic, Rational knowledge, Rational vision);

  static WeightScheme equal() { return {}; }
  static WeightScheme vision_centric();
  static WeightScheme reason_centric();
  static WeightScheme knowledge_centric();

  /// Accepts "l,k,v" where each entry is a decimal ("0.6") or a fraction
  /// ("1/3"), or one of the preset names "equal", "vision-centric",
  /// "reason-centric", "knowledge-centric".
  static WeightScheme parse(std::string_view spec);

  const Rational& logic() const { return w_[0]; }
  const Rational& knowledge() const { return w_[1]; }
  const Rational& vision() const { return w_[2]; }
  const Rational& weight(Axis a) const { return w_[static_cast<std::size_t>(a)]; }

  /// Preset name when the weights match one, otherwise "custom".
  std::string name() const;
  /// "l,k,v" with each weight as an exact fraction.
  std::string to_string() const;

  friend bool operator==(const WeightScheme&, const WeightScheme&) = default;

 private:
  std::array<Rational, 3> w_;
};

/// Parses "0.25", "3", "1/3". Throws std::invalid_argument.
Rational parse_rational(std::string_view s);

/// Integer axis scores in 1..5. An axis left out by an axis selector is
/// std::nullopt.
struct ScoreVector {
  std::optional<int> s_l;
  std::optional<int> s_k;
  std::optional<int> s_v;
  Rational overall{0};

  const std::optional<int>& score(Axis a) const;
  std::optional<int>& score(Axis a);

  bool complete() const { return s_l && s_k && s_v; }

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

/// Weighted combination of the judged axes. With all three axes present
/// this is w_l*s_l + w_k*s_k + w_v*s_v exactly; when an axis is absent the
/// remaining weights are renormalized to sum to one. Throws
/// std::invalid_argument for scores outside 1..5, no judged axis, or zero
/// total weight over the judged axes.
Rational aggregate(const ScoreVector& v, const WeightScheme& w);

/// Convenience for full vectors.
Rational aggregate(int s_l, int s_k, int s_v, const WeightScheme& w);

}  // namespace vitaudit
