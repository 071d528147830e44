#pragma once

namespace fastfiber {

// Worker count for parallel loops. Honors FASTFIBER_THREADS when set,
// otherwise the hardware concurrency.
int thread_count();

// Override programmatically (0 = back to automatic).
void set_thread_count(int n);

}  // namespace fastfiber
