#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bench.hpp"

using namespace csnet;

TEST_CASE("parameter storage is exact") {
  const int w = 8;
  auto bytes = [&](const AlgebraDescriptor& d) {
    return bench_forward({d, w, 4, 3, 1}).param_bytes;
  };
  // two affine layers of w x w elements plus w biases each
  auto expect = [&](std::size_t elem_scalars) {
    return 2 * (static_cast<std::size_t>(w) * w + w) * elem_scalars * sizeof(double);
  };

  for (int d : {2, 4, 8}) {
    std::size_t diag = bytes(AlgebraDescriptor::diagonal(d));
    CHECK(diag == expect(d));
    std::size_t dense = bytes(AlgebraDescriptor::dense(d));
    CHECK(dense == expect(static_cast<std::size_t>(d) * d));
    // dense bytes = d^2 x (diagonal bytes / d)
    CHECK(dense == static_cast<std::size_t>(d) * d * (diag / d));
  }
  CHECK(bytes(AlgebraDescriptor::block_diagonal({2, 1})) == expect(4 + 1));

  // group storage scales as d! (no biases on the group backend)
  auto gexpect = [&](std::size_t fact) {
    return 2 * static_cast<std::size_t>(w) * w * fact * sizeof(double);
  };
  CHECK(bytes(AlgebraDescriptor::group(2)) == gexpect(2));
  CHECK(bytes(AlgebraDescriptor::group(3)) == gexpect(6));
  CHECK(bytes(AlgebraDescriptor::group(4)) == gexpect(24));
}

TEST_CASE("timing fields are sane and grow with d within noise") {
  BenchResult small = bench_forward({AlgebraDescriptor::dense(2), 8, 16, 5});
  BenchResult large = bench_forward({AlgebraDescriptor::dense(16), 8, 16, 5});
  CHECK(small.min_ns > 0);
  CHECK(small.median_ns >= small.min_ns);
  // generous noise margin: 8x the width in d should never be faster than half
  CHECK(large.median_ns * 2 >= small.median_ns);
  CHECK(large.param_bytes > small.param_bytes);
}

TEST_CASE("bench validation and csv") {
  CHECK_THROWS(bench_forward({AlgebraDescriptor::dense(2), 8, 4, 2}));
  std::string csv = bench_csv({{"dense", 2, 8, 100, 90, 1024}});
  CHECK(csv == "backend,d,width,median_ns,min_ns,param_bytes\ndense,2,8,100,90,1024\n");
}
