#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vitaudit/corpus.hpp"
#include "vitaudit/scores.hpp"

namespace vitaudit {

struct RankedRecord {
  std::string id;
  Rational overall;
  int s_l = 0;  // 0 when the axis was not judged
  int s_v = 0;
};

/// Strict total order used for selection: overall descending, then s_l
/// descending, then s_v descending, then id ascending.
bool ranks_before(const RankedRecord& a, const RankedRecord& b);

/// Re-aggregates every record under `w`; the stored overall is ignored.
std::vector<RankedRecord> rank_keys(std::span<const AuditRecord> records, const WeightScheme& w);

/// Ids of the top `k` records under ranks_before; all ids when k exceeds
/// the record count.
std::vector<std::string> rank_and_select(std::span<const AuditRecord> records, const WeightScheme& w, std::size_t k);

namespace serial {
/// Full sort of every key, then truncation.
std::vector<std::string> rank_and_select(std::span<const AuditRecord> records, const WeightScheme& w, std::size_t k);
}  // namespace serial

}  // namespace vitaudit
