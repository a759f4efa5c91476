#include "clidd/parallel.hpp"

#include <atomic>

namespace clidd::parallel {

namespace {
std::atomic<int> g_workers{1};
}

void set_workers(int count) { g_workers.store(std::max(1, count)); }
int workers() { return g_workers.load(); }

}  // namespace clidd::parallel
