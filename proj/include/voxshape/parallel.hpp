#pragma once

#include <functional>

namespace voxshape {

// Runs fn(0..n-1) across up to `threads` workers from a shared persistent
// pool. Work items must be independent; each output slot is written by
// exactly one item, so results do not depend on the thread count or on
// scheduling. Nested calls from inside a worker run serially.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace voxshape
