#ifndef PECM_PARALLEL_HPP
#define PECM_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <span>

namespace pecm {

/// Resolves a worker count. requested > 0 is taken as-is; requested == 0
/// falls back to the PECM_THREADS environment variable, and if that is
/// unset or 0, to the hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers, splitting the
/// index range into contiguous chunks. Results must be written to
/// per-index slots; the outcome is then independent of the worker count.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Fixed-order pairwise summation. Used for batch reductions so that sums
/// do not depend on how per-item terms were produced.
double pairwise_sum(std::span<const double> xs);

} // namespace pecm

#endif // PECM_PARALLEL_HPP
