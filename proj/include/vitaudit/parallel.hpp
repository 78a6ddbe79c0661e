#pragma once

// Order-preserving parallel map over independent items. With
// concurrency <= 1 the loop runs serially on the calling thread, which is
// the reference path the parallel results are checked against.

#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vitaudit {

template <typename In, typename Fn>
auto parallel_map(std::span<const In> items, int concurrency, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
  using Out = std::invoke_result_t<Fn&, const In&>;
  const auto n = static_cast<std::ptrdiff_t>(items.size());
  std::vector<std::optional<Out>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(concurrency > 1 ? concurrency : 1) if (concurrency > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      slots[static_cast<std::size_t>(i)].emplace(fn(items[static_cast<std::size_t>(i)]));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Out> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace vitaudit
