#include "vitaudit/scores.hpp"

#include <charconv>
#include <utility>
#include <vector>

#include "vitaudit/text.hpp"

namespace vitaudit {
namespace {

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("not a number: '" + std::string(whole) + "'");
  }
  return v;
}

std::string rational_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::Logic: return "logic";
    case Axis::Knowledge: return "knowledge";
    case Axis::Vision: return "vision";
  }
  return "logic";
}

std::optional<Axis> parse_axis(std::string_view s) {
  for (const Axis a : kAllAxes) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

bool AxisSet::contains(Axis a) const {
  switch (a) {
    case Axis::Logic: return logic;
    case Axis::Knowledge: return knowledge;
    case Axis::Vision: return vision;
  }
  return false;
}

std::string AxisSet::to_string() const {
  std::string out;
  for (const Axis a : kAllAxes) {
    if (!contains(a)) continue;
    if (!out.empty()) out += ',';
    out += vitaudit::to_string(a);
  }
  return out;
}

AxisSet AxisSet::parse(std::string_view csv) {
  AxisSet set{false, false, false};
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto item = text::trim(csv.substr(start, comma == std::string_view::npos ? csv.npos : comma - start));
    if (!item.empty()) {
      const auto axis = parse_axis(item);
      if (!axis) throw std::invalid_argument("unknown axis '" + std::string(item) + "'");
      switch (*axis) {
        case Axis::Logic: set.logic = true; break;
        case Axis::Knowledge: set.knowledge = true; break;
        case Axis::Vision: set.vision = true; break;
      }
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (set.empty()) throw std::invalid_argument("axis selector selects no axes");
  return set;
}

Rational parse_rational(std::string_view s) {
  const auto whole = s;
  s = text::trim(s);
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const auto num = parse_int(text::trim(s.substr(0, slash)), whole);
    const auto den = parse_int(text::trim(s.substr(slash + 1)), whole);
    if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(whole) + "'");
    return Rational(num, den);
  }
  const auto dot = s.find('.');
  if (dot == std::string_view::npos) return Rational(parse_int(s, whole));
  const auto int_part = s.substr(0, dot);
  const auto frac_part = s.substr(dot + 1);
  // 12 decimal places keeps every product inside 64 bits.
  if (frac_part.empty() || frac_part.size() > 12 || frac_part.find_first_not_of("0123456789") != frac_part.npos) {
    throw std::invalid_argument("bad decimal '" + std::string(whole) + "'");
  }
  std::int64_t scale = 1;
  for (std::size_t i = 0; i < frac_part.size(); ++i) scale *= 10;
  const bool negative = !int_part.empty() && int_part.front() == '-';
  const auto ip = int_part.empty() || int_part == "-" ? 0 : parse_int(int_part, whole);
  const auto fp = parse_int(frac_part, whole);
  const auto magnitude = (negative ? -ip : ip) * scale + fp;
  return Rational(negative ? -magnitude : magnitude, scale);
}

WeightScheme::WeightScheme() : w_{Rational(1, 3), Rational(1, 3), Rational(1, 3)} {}

WeightScheme::WeightScheme(Rational logic, Rational knowledge, Rational vision) : w_{logic, knowledge, vision} {
  for (const auto& w : w_) {
    if (w < Rational(0)) throw InvalidWeightsError("weights must be non-negative, got " + to_string());
  }
  if (w_[0] + w_[1] + w_[2] != Rational(1)) {
    throw InvalidWeightsError("weights must sum to 1, got " + to_string());
  }
}

WeightScheme WeightScheme::vision_centric() { return {Rational(1, 5), Rational(1, 5), Rational(3, 5)}; }
WeightScheme WeightScheme::reason_centric() { return {Rational(3, 5), Rational(1, 5), Rational(1, 5)}; }
WeightScheme WeightScheme::knowledge_centric() { return {Rational(1, 5), Rational(3, 5), Rational(1, 5)}; }

WeightScheme WeightScheme::parse(std::string_view spec) {
  const auto s = text::trim(spec);
  if (s == "equal") return equal();
  if (s == "vision-centric") return vision_centric();
  if (s == "reason-centric") return reason_centric();
  if (s == "knowledge-centric") return knowledge_centric();

  std::vector<Rational> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto item = s.substr(start, comma == std::string_view::npos ? s.npos : comma - start);
    try {
      parts.push_back(parse_rational(item));
    } catch (const std::invalid_argument& e) {
      throw InvalidWeightsError(std::string("bad weight list '") + std::string(s) + "': " + e.what());
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) {
    throw InvalidWeightsError("expected three weights 'l,k,v', got '" + std::string(s) + "'");
  }
  return {parts[0], parts[1], parts[2]};
}

std::string WeightScheme::name() const {
  if (*this == equal()) return "equal";
  if (*this == vision_centric()) return "vision-centric";
  if (*this == reason_centric()) return "reason-centric";
  if (*this == knowledge_centric()) return "knowledge-centric";
  return "custom";
}

std::string WeightScheme::to_string() const {
  return rational_string(w_[0]) + "," + rational_string(w_[1]) + "," + rational_string(w_[2]);
}

const std::optional<int>& ScoreVector::score(Axis a) const {
  switch (a) {
    case Axis::Logic: return s_l;
    case Axis::Knowledge: return s_k;
    case Axis::Vision: return s_v;
  }
  return s_l;
}

std::optional<int>& ScoreVector::score(Axis a) {
  return const_cast<std::optional<int>&>(std::as_const(*this).score(a));
}

Rational aggregate(const ScoreVector& v, const WeightScheme& w) {
  Rational total_weight{0};
  Rational sum{0};
  bool any = false;
  for (const Axis a : kAllAxes) {
    const auto& s = v.score(a);
    if (!s) continue;
    if (*s < 1 || *s > 5) {
      throw std::invalid_argument(std::string(to_string(a)) + " score " + std::to_string(*s) + " outside 1..5");
    }
    any = true;
    total_weight += w.weight(a);
    sum += w.weight(a) * *s;
  }
  if (!any) throw std::invalid_argument("score vector has no judged axis");
  if (total_weight == Rational(0)) throw std::invalid_argument("judged axes carry zero total weight");
  return sum / total_weight;
}

Rational aggregate(int s_l, int s_k, int s_v, const WeightScheme& w) {
  return aggregate(ScoreVector{s_l, s_k, s_v, Rational(0)}, w);
}

}  // namespace vitaudit
