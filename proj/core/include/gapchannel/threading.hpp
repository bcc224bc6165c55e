#ifndef GAPCHANNEL_THREADING_HPP
#define GAPCHANNEL_THREADING_HPP

#include <functional>

namespace gapchannel {

//! Worker cap: hardware concurrency, bounded by GAPCHANNEL_THREADS when set.
int worker_count();

//! Runs fn(0..n-1) on up to worker_count() threads. Blocks until done;
//! rethrows the first exception raised by any worker.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace gapchannel

#endif
