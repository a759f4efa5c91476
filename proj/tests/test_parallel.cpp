#include <doctest.h>

#include <atomic>
#include <random>
#include <stdexcept>

#include "clidd/parallel.hpp"
#include "clidd/tensor.hpp"
#include "oracles.hpp"

using namespace clidd;

TEST_SUITE("parallel") {

TEST_CASE("every index runs exactly once") {
  for (int workers : {1, 2, 4, 7}) {
    parallel::ScopedWorkers w(workers);
    std::vector<std::atomic<int>> hits(1000);
    parallel::for_each_index(1000, [&](std::int64_t i) { hits[std::size_t(i)]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    parallel::for_each_index(0, [&](std::int64_t) { FAIL("called for an empty range"); });
  }
}

TEST_CASE("worker exceptions reach the caller") {
  parallel::ScopedWorkers w(4);
  CHECK_THROWS_AS(parallel::for_each_index(100,
                                           [](std::int64_t i) {
                                             if (i == 57) throw std::runtime_error("boom");
                                           }),
                  std::runtime_error);
}

TEST_CASE("ScopedWorkers restores the previous count") {
  parallel::set_workers(1);
  {
    parallel::ScopedWorkers w(3);
    CHECK(parallel::workers() == 3);
    {
      parallel::ScopedWorkers inner(5);
      CHECK(parallel::workers() == 5);
    }
    CHECK(parallel::workers() == 3);
  }
  CHECK(parallel::workers() == 1);
}

TEST_CASE("convolution is bit-identical for any worker count") {
  std::mt19937_64 rng(1);
  const FeatureMapf in = oracle::random_map(rng, 37, 53, 8);
  const Kernel2Df k = oracle::random_kernel(rng, 16, 8, 3, 3);
  FeatureMapf reference;
  {
    parallel::ScopedWorkers w(1);
    reference = conv2d(in, k, 1, 1);
  }
  for (int workers : {2, 3, 4}) {
    parallel::ScopedWorkers w(workers);
    CHECK(conv2d(in, k, 1, 1).data == reference.data);
  }
}

}  // TEST_SUITE
