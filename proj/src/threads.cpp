#include "fastfiber/threads.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace fastfiber {

namespace {
int g_override = 0;
}

void set_thread_count(int n) { g_override = std::max(0, n); }

int thread_count() {
  if (g_override > 0) return g_override;
  if (const char* env = std::getenv("FASTFIBER_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace fastfiber
