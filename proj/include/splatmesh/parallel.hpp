#pragma once

#include <functional>

namespace splatmesh {

// Worker count used by all parallel kernels. Resolved once from
// SPLATMESH_THREADS unless set explicitly; always >= 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [begin, end) split into contiguous static chunks.
// Each index is visited exactly once; callers must only write disjoint state.
// A parallel_for issued from inside another one runs serially.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace splatmesh
