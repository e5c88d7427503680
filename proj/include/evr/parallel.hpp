#pragma once

#include <tbb/blocked_range.h>
#include <tbb/info.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>

namespace evr {

/// Runs body(i) for i in [begin, end) on at most `workers` threads
/// (workers <= 0 means all hardware threads). Each index is processed
/// exactly once; results must not depend on scheduling.
template <typename Body>
void parallel_for(int begin, int end, int workers, Body&& body) {
  if (end <= begin) return;
  if (workers == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  // more threads than cores only adds contention
  const int cores = tbb::info::default_concurrency();
  const int concurrency = workers > 0 ? std::min(workers, cores) : cores;
  if (concurrency == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  tbb::task_arena arena(concurrency);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<int>(begin, end), [&](const tbb::blocked_range<int>& r) {
      for (int i = r.begin(); i != r.end(); ++i) body(i);
    });
  });
}

}  // namespace evr
