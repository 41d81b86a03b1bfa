//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <functional>

namespace erpflow {

// Worker count from ERPFLOW_THREADS, falling back to the hardware count.
// Always at least 1.
int thread_count();

// Runs fn(i) for every i in [0, n) across up to thread_count() workers with
// a static partition. Callers keep determinism by writing to disjoint,
// index-addressed slots. The first exception is rethrown after all workers
// join.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace erpflow
