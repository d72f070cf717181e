#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

#include "rng.hpp"
#include "train.hpp"

namespace csnet {

BenchResult bench_forward(const BenchCase& c) {
  if (c.reps < 3) throw std::invalid_argument("bench: need at least 3 repetitions");
  Network net = init_network(c.desc, {c.width, c.width, c.width}, 1);
  FastNet fast;
  fast.refresh(net);

  Rng rng(2);
  std::vector<Sample> batch;
  std::vector<int> idx;
  int submodels = c.desc.kind == AlgebraKind::Group ? 1 : c.desc.submodel_count();
  for (int i = 0; i < c.batch; ++i) {
    if (c.desc.kind == AlgebraKind::Group) {
      Sample s;
      s.input.resize(static_cast<std::size_t>(c.width) * c.desc.elem_size());
      for (double& v : s.input) v = rng.uniform(-1, 1);
      batch.push_back(std::move(s));
    } else {
      std::vector<double> x(c.width);
      for (double& v : x) v = rng.uniform(-1, 1);
      batch.push_back(make_matrix_sample(c.desc, i % submodels, x, {}));
    }
    idx.push_back(i);
  }

  for (int w = 0; w < c.warmup; ++w) forward_batch(net, fast, batch, idx, nullptr);

  std::vector<long long> ns(c.reps);
  volatile double sink = 0.0;
  for (int rep = 0; rep < c.reps; ++rep) {
    auto t0 = std::chrono::steady_clock::now();
    Eigen::MatrixXd out = forward_batch(net, fast, batch, idx, nullptr);
    auto t1 = std::chrono::steady_clock::now();
    sink = sink + out(0, 0);
    ns[rep] = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  }
  std::sort(ns.begin(), ns.end());

  BenchResult r;
  r.backend = kind_name(c.desc.kind);
  r.d = c.desc.order;
  r.width = c.width;
  r.median_ns = ns[ns.size() / 2];
  r.min_ns = ns.front();
  r.param_bytes = net.param_count() * sizeof(double);
  return r;
}

std::string bench_csv(const std::vector<BenchResult>& rows) {
  std::ostringstream os;
  os << "backend,d,width,median_ns,min_ns,param_bytes\n";
  for (const auto& r : rows)
    os << r.backend << "," << r.d << "," << r.width << "," << r.median_ns << "," << r.min_ns << ","
       << r.param_bytes << "\n";
  return os.str();
}

}  // namespace csnet
