#pragma once

#include <cstddef>
#include <functional>

namespace mdlod {

/// Worker count used by assembly and corrector loops. Defaults to 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Indices are
/// handed out dynamically; body must write only to slots owned by i. The first
/// exception thrown by any body is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mdlod
