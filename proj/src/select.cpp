#include "vitaudit/select.hpp"

#include <algorithm>
#include <exception>

namespace vitaudit {
namespace {

RankedRecord key_for(const AuditRecord& r, const WeightScheme& w) {
  return RankedRecord{r.sample_id, aggregate(r.scores, w), r.scores.s_l.value_or(0), r.scores.s_v.value_or(0)};
}

std::vector<std::string> ids_of(std::span<const RankedRecord> keys) {
  std::vector<std::string> ids;
  ids.reserve(keys.size());
  for (const auto& k : keys) ids.push_back(k.id);
  return ids;
}

}  // namespace

bool ranks_before(const RankedRecord& a, const RankedRecord& b) {
  if (a.overall != b.overall) return a.overall > b.overall;
  if (a.s_l != b.s_l) return a.s_l > b.s_l;
  if (a.s_v != b.s_v) return a.s_v > b.s_v;
  return a.id < b.id;
}

std::vector<RankedRecord> rank_keys(std::span<const AuditRecord> records, const WeightScheme& w) {
  const auto n = static_cast<std::ptrdiff_t>(records.size());
  std::vector<RankedRecord> keys(records.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      keys[static_cast<std::size_t>(i)] = key_for(records[static_cast<std::size_t>(i)], w);
    } catch (...) {
#pragma omp critical(vitaudit_rank_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return keys;
}

std::vector<std::string> rank_and_select(std::span<const AuditRecord> records, const WeightScheme& w, std::size_t k) {
  auto keys = rank_keys(records, w);
  k = std::min(k, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(), ranks_before);
  keys.resize(k);
  return ids_of(keys);
}

namespace serial {

std::vector<std::string> rank_and_select(std::span<const AuditRecord> records, const WeightScheme& w, std::size_t k) {
  std::vector<RankedRecord> keys;
  keys.reserve(records.size());
  for (const auto& r : records) keys.push_back(key_for(r, w));
  std::sort(keys.begin(), keys.end(), ranks_before);
  keys.resize(std::min(k, keys.size()));
  return ids_of(keys);
}

}  // namespace serial
}  // namespace vitaudit
