#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bench.hpp"

using namespace csnet;

int main(int argc, char** argv) {
  std::string out_path;
  int width = 16, batch = 32, reps = 9;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    auto next = [&]() -> const char* {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "error: %s needs a value\n", a.c_str());
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--out") out_path = next();
    else if (a == "--width") width = std::atoi(next());
    else if (a == "--batch") batch = std::atoi(next());
    else if (a == "--reps") reps = std::atoi(next());
    else if (a == "--help" || a == "-h") {
      std::printf("usage: csnet-bench [--out file.csv] [--width N] [--batch N] [--reps N]\n"
                  "Times one batched forward per backend/size and reports parameter bytes.\n");
      return 0;
    } else {
      std::fprintf(stderr, "error: unknown argument %s\n", a.c_str());
      return 2;
    }
  }

  std::vector<BenchResult> rows;
  try {
    for (int d : {2, 4, 8, 16}) {
      rows.push_back(bench_forward({AlgebraDescriptor::diagonal(d), width, batch, reps}));
      rows.push_back(bench_forward({AlgebraDescriptor::dense(d), width, batch, reps}));
      if (d >= 4)
        rows.push_back(
            bench_forward({AlgebraDescriptor::block_diagonal(std::vector<int>(d / 2, 2)), width,
                           batch, reps}));
      rows.push_back(bench_forward({AlgebraDescriptor::circulant(d), width, batch, reps}));
    }
    for (int d : {2, 3, 4})
      rows.push_back(bench_forward({AlgebraDescriptor::group(d), width, batch, reps}));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  std::string csv = bench_csv(rows);
  if (out_path.empty()) {
    std::printf("%s", csv.c_str());
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
      return 1;
    }
    out << csv;
    std::printf("wrote %s\n", out_path.c_str());
  }
  return 0;
}
