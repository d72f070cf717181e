#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "algebra.hpp"

namespace csnet {

struct BenchCase {
  AlgebraDescriptor desc;
  int width = 16;       // uniform layer width (3 affine layers)
  int batch = 32;
  int reps = 9;         // timed repetitions, >= 3
  int warmup = 3;
};

struct BenchResult {
  std::string backend;
  int d = 0;
  int width = 0;
  long long median_ns = 0;
  long long min_ns = 0;
  std::size_t param_bytes = 0;
};

// Times one batched forward pass (median/min over reps after warmup) and
// reports exact parameter storage.
BenchResult bench_forward(const BenchCase& c);

// CSV with header backend,d,width,median_ns,min_ns,param_bytes.
std::string bench_csv(const std::vector<BenchResult>& rows);

}  // namespace csnet
