// Acceptance gate: runs every contract criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "experiment.hpp"
#include "oracles.hpp"
#include "real_mlp.hpp"
#include "rng.hpp"
#include "tasks.hpp"
#include "train.hpp"

using namespace csnet;
namespace fs = std::filesystem;

namespace {

fs::path g_work;

std::string work(const std::string& name) { return (g_work / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Check {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      detail = why;
    }
  }
};

// ---------------------------------------------------------------- criterion 1

void axioms(Check& c) {
  Rng rng(1001);
  for (auto desc : {AlgebraDescriptor::diagonal(5), AlgebraDescriptor::dense(4),
                    AlgebraDescriptor::block_diagonal({2, 1, 2}), AlgebraDescriptor::circulant(5),
                    AlgebraDescriptor::group(3)}) {
    for (int t = 0; t < 1000; ++t) {
      AlgebraElement a = zero_element(desc), b = zero_element(desc);
      for (double& v : a.data) v = rng.uniform(-1, 1);
      for (double& v : b.data) v = rng.uniform(-1, 1);

      AlgebraElement lhs = involution(algebra_mul(a, b));
      AlgebraElement rhs = algebra_mul(involution(b), involution(a));
      for (std::size_t i = 0; i < lhs.data.size(); ++i)
        c.expect(std::abs(lhs.data[i] - rhs.data[i]) <= 1e-9,
                 "(ab)* != b*a* on " + desc.str());

      double na = operator_norm(a), nb = operator_norm(b);
      double cstar = operator_norm(algebra_mul(involution(a), a));
      c.expect(std::abs(cstar - na * na) <= 1e-9 * (1.0 + na * na),
               "||a*a|| != ||a||^2 on " + desc.str());
      c.expect(operator_norm(algebra_mul(a, b)) <= na * nb + 1e-9,
               "||ab|| > ||a||||b|| on " + desc.str());
    }
  }
  // group product vs the brute-force oracle, exact
  for (int d = 2; d <= 4; ++d) {
    auto desc = AlgebraDescriptor::group(d);
    int trials = d == 4 ? 200 : 1000;
    for (int t = 0; t < trials; ++t) {
      AlgebraElement a = zero_element(desc), b = zero_element(desc);
      for (double& v : a.data) v = rng.uniform(-1, 1);
      for (double& v : b.data) v = rng.uniform(-1, 1);
      std::vector<double> want = oracles::group_conv_brute(d, a.data, b.data);
      AlgebraElement got = algebra_mul(a, b);
      for (std::size_t i = 0; i < want.size(); ++i)
        c.expect(got.data[i] == want[i], "group product differs from the oracle at d=" +
                                             std::to_string(d));
    }
  }
}

// ---------------------------------------------------------------- criterion 2

void diagonal_equivalence(Check& c) {
  auto desc = AlgebraDescriptor::diagonal(3);
  const std::vector<int> widths = {16, 16, 16, 16, 16};  // depth 4
  Network net = init_network(desc, widths, 2024);

  Rng rng(2025);
  std::vector<Sample> data;
  for (int i = 0; i < 36; ++i) {
    std::vector<double> x(16), t(16);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : t) v = rng.uniform(-1, 1);
    data.push_back(make_matrix_sample(desc, i % 3, x, t));
  }

  // three independently coded real nets seeded from the diagonal slices
  std::vector<oracles::RealMlp> refs(3);
  std::vector<oracles::RealAdam> opts(3);
  for (int j = 0; j < 3; ++j) {
    refs[j].widths = widths;
    for (const Layer& l : net.layers) {
      std::vector<double> w;
      for (int k = 0; k < l.weights.rows(); ++k)
        for (int q = 0; q < l.weights.cols(); ++q)
          w.push_back(extract_submodel(l.weights.get(k, q), j));
      refs[j].weights.push_back(std::move(w));
      std::vector<double> b;
      for (int k = 0; k < l.bias->entries(); ++k)
        b.push_back(extract_submodel(l.bias->get(k), j));
      refs[j].biases.push_back(std::move(b));
    }
    opts[j].lr = 1e-3;
    opts[j].init(refs[j]);
  }

  // forward agreement before training
  for (const Sample& s : data) {
    std::vector<double> x(16);
    for (int l = 0; l < 16; ++l) x[l] = s.input[l * 3 + s.submodel];
    std::vector<double> want = refs[s.submodel].forward(x);
    std::vector<Sample> one = {s};
    FastNet f;
    f.refresh(net);
    Eigen::MatrixXd out = forward_batch(net, f, one, {0}, nullptr);
    for (int k = 0; k < 16; ++k)
      c.expect(std::abs(out(k * 3 + s.submodel, 0) - want[k]) <= 1e-9,
               "forward mismatch before training");
  }

  FastNet fast;
  fast.refresh(net);
  AdamState st = AdamState::create(net, 1e-3);
  const int B = 12;
  LossSpec spec{LossSpec::Kind::MSEDiagonal, 0.5};
  for (int step = 0; step < 50; ++step) {
    std::vector<int> idx;
    for (int i = 0; i < B; ++i) idx.push_back((step * B + i) % static_cast<int>(data.size()));
    ParamGrads g = ParamGrads::zeros_like(net);
    grad_with(net, fast, data, idx, spec, g);
    adam_step(net, g, st);
    fast.refresh(net);
    for (int j = 0; j < 3; ++j) {
      std::vector<std::vector<double>> gw, gb;
      for (const auto& w : refs[j].weights) gw.emplace_back(w.size(), 0.0);
      for (const auto& b : refs[j].biases) gb.emplace_back(b.size(), 0.0);
      for (int i : idx) {
        if (data[i].submodel != j) continue;
        std::vector<double> x(16);
        for (int l = 0; l < 16; ++l) x[l] = data[i].input[l * 3 + j];
        oracles::mlp_mse_backprop(refs[j], x, data[i].target, 1.0 / B, gw, gb);
      }
      opts[j].step(refs[j], gw, gb);
    }
  }

  for (int j = 0; j < 3; ++j)
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      const Layer& l = net.layers[li];
      for (int k = 0; k < l.weights.rows(); ++k)
        for (int q = 0; q < l.weights.cols(); ++q)
          c.expect(std::abs(extract_submodel(l.weights.get(k, q), j) -
                            refs[j].weights[li][k * l.weights.cols() + q]) <= 1e-9,
                   "weights diverge from the independent real nets after 50 steps");
      for (int k = 0; k < l.bias->entries(); ++k)
        c.expect(std::abs(extract_submodel(l.bias->get(k), j) - refs[j].biases[li][k]) <= 1e-9,
                 "biases diverge from the independent real nets after 50 steps");
    }
}

// ---------------------------------------------------------------- criterion 3

void circulant_dft_equivalence(Check& c) {
  using cd = std::complex<double>;
  for (int d : {2, 3, 8}) {
    auto desc = AlgebraDescriptor::circulant(d);
    Network net = init_network(desc, {3, 5, 2}, 300 + d,
                               {.activation = Activation::Identity,
                                .last_activation = Activation::Identity});
    Rng rng(400 + d);
    AlgebraTensor x(desc, {3});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    AlgebraTensor y = forward(net, x);
    for (int j = 0; j < d; ++j) {
      std::vector<cd> h(3);
      for (int l = 0; l < 3; ++l) h[l] = oracles::dft(x.get(l).data)[j];
      for (const Layer& layer : net.layers) {
        std::vector<cd> nxt(layer.weights.rows());
        for (int k = 0; k < layer.weights.rows(); ++k) {
          cd acc = layer.bias ? oracles::dft(layer.bias->get(k).data)[j] : cd{0.0, 0.0};
          for (int l = 0; l < layer.weights.cols(); ++l)
            acc += oracles::dft(layer.weights.get(k, l).data)[j] * h[l];
          nxt[k] = acc;
        }
        h = std::move(nxt);
      }
      for (int k = 0; k < 2; ++k)
        c.expect(std::abs(circulant_dft(y.get(k))[j] - h[k]) < 1e-8,
                 "circulant forward differs from the Fourier-component net at d=" +
                     std::to_string(d));
    }
  }
}

// ---------------------------------------------------------------- criterion 4

void group_equivariance(Check& c) {
  auto desc = AlgebraDescriptor::group(3);
  const SymmetricGroup& G = SymmetricGroup::get(3);
  for (int trial = 0; trial < 5; ++trial) {
    Network net = init_network(desc, {3, 6, 6, 6, 2}, 500 + trial);  // 4 layers
    Rng rng(600 + trial);
    AlgebraTensor x(desc, {3});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    AlgebraTensor y = forward(net, x);
    for (int h = 0; h < 6; ++h) {
      AlgebraTensor xt(desc, {3});
      for (int e = 0; e < 3; ++e)
        for (int g = 0; g < 6; ++g) xt.data[e * 6 + g] = x.data[e * 6 + G.compose[g][h]];
      AlgebraTensor yt = forward(net, xt);
      double mean_orig = 0.0, mean_trans = 0.0;
      for (int e = 0; e < 2; ++e)
        for (int g = 0; g < 6; ++g) {
          c.expect(std::abs(yt.data[e * 6 + g] - y.data[e * 6 + G.compose[g][h]]) <= 1e-9,
                   "right translation does not commute with forward");
          mean_orig += y.data[e * 6 + g];
          mean_trans += yt.data[e * 6 + g];
        }
      c.expect(std::abs(mean_orig - mean_trans) <= 1e-9,
               "mean-over-group readout is not invariant");
    }
  }
}

// ---------------------------------------------------------------- criterion 5

void gradient_correctness(Check& c) {
  Rng rng(700);
  auto run = [&](const AlgebraDescriptor& desc, const std::vector<int>& widths,
                 const LossSpec& spec) {
    Network net = init_network(desc, widths, 701);
    if (net.param_count() > 2000) {
      c.expect(false, "test net exceeds the parameter budget");
      return;
    }
    std::vector<Sample> batch;
    int D = desc.rep_dim();
    bool group = desc.kind == AlgebraKind::Group;
    for (int i = 0; i < 4; ++i) {
      if (group) {
        Sample s;
        s.input.resize(static_cast<std::size_t>(widths.front()) * D);
        for (double& v : s.input) v = rng.uniform(-1, 1);
        s.target.assign(widths.back(), 0.0);
        s.target[i % widths.back()] = 1.0;
        batch.push_back(std::move(s));
      } else {
        std::vector<double> x(widths.front()), t(widths.back());
        for (double& v : x) v = rng.uniform(-1, 1);
        for (double& v : t) v = rng.uniform(-1, 1);
        batch.push_back(make_matrix_sample(desc, i % desc.submodel_count(), x, t));
      }
    }
    ParamGrads g = ParamGrads::zeros_like(net);
    grad(net, batch, spec, g);
    std::vector<double*> ptrs;
    std::vector<double> flat;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      for (double& v : net.layers[li].weights.data) ptrs.push_back(&v);
      flat.insert(flat.end(), g.weights[li].begin(), g.weights[li].end());
      if (net.layers[li].bias) {
        for (double& v : net.layers[li].bias->data) ptrs.push_back(&v);
        flat.insert(flat.end(), g.bias[li].begin(), g.bias[li].end());
      }
    }
    const double h = 1e-5;
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      double save = *ptrs[i];
      *ptrs[i] = save + h;
      double lp = batch_loss(net, batch, spec);
      *ptrs[i] = save - h;
      double lm = batch_loss(net, batch, spec);
      *ptrs[i] = save;
      double fd = (lp - lm) / (2 * h);
      c.expect(std::abs(flat[i] - fd) / (std::abs(fd) + 1e-8) < 1e-4,
               "finite-difference mismatch on " + desc.str());
    }
  };
  LossSpec mse{LossSpec::Kind::MSEDiagonal, 0.5};
  run(AlgebraDescriptor::diagonal(4), {6, 8, 4}, mse);
  run(AlgebraDescriptor::dense(4), {6, 8, 4}, mse);
  run(AlgebraDescriptor::block_diagonal({2, 2}), {6, 8, 4}, mse);
  run(AlgebraDescriptor::circulant(5), {6, 8, 4}, mse);
  run(AlgebraDescriptor::group(3), {4, 6, 3}, {LossSpec::Kind::CrossEntropyDiagonal, 0.0});
}

// ------------------------------------------------------------- criteria 6 - 8

ExperimentConfig classify_base(int d, int spc, std::uint64_t seed, const std::string& algebra,
                               const std::string& out) {
  ExperimentConfig cfg;
  cfg.task = "classify";
  cfg.algebra = algebra;
  cfg.d = d;
  cfg.hidden = 32;
  cfg.layers = 3;
  cfg.epochs = 10;
  cfg.batch_size = 32;
  cfg.lr = 2e-4;
  cfg.seed = seed;
  cfg.samples_per_class = spc;
  cfg.out_dir = out;
  return cfg;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

void interaction_effect(Check& c) {
  std::vector<double> dense5, diag5;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const char* alg : {"dense", "diagonal"}) {
      std::string out = work("c6_d5_" + std::string(alg) + "_" + std::to_string(seed));
      run_experiment(classify_base(5, 100, seed, alg, out));
      (std::string(alg) == "dense" ? dense5 : diag5).push_back(read_summary(out).metric_value);
    }
  }
  c.expect(mean_of(dense5) >= mean_of(diag5),
           "d=5: dense mean accuracy below diagonal (" + std::to_string(mean_of(dense5)) + " vs " +
               std::to_string(mean_of(diag5)) + ")");

  std::vector<double> dense20, diag20;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const char* alg : {"dense", "diagonal"}) {
      std::string out = work("c6_d20_" + std::string(alg) + "_" + std::to_string(seed));
      run_experiment(classify_base(20, 500, seed, alg, out));
      (std::string(alg) == "dense" ? dense20 : diag20).push_back(read_summary(out).metric_value);
    }
  }
  double gap = mean_of(dense20) - mean_of(diag20);
  c.expect(gap >= 0.05, "d=20: dense-diagonal gap " + std::to_string(gap) + " < 0.05 (" +
                            std::to_string(mean_of(dense20)) + " vs " +
                            std::to_string(mean_of(diag20)) + ")");
}

void sum_of_digits(Check& c) {
  ExperimentConfig cfg;
  cfg.task = "digitsum";
  cfg.algebra = "group";
  cfg.d = 3;
  cfg.hidden = 27;
  cfg.layers = 4;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  cfg.seed = 1;
  cfg.train_tuples = 1000;
  cfg.eval_tuples = 10000;
  cfg.out_dir = work("c7_group");
  run_experiment(cfg);
  double group_acc = read_summary(cfg.out_dir).metric_value;

  cfg.baseline = "deepset";
  cfg.out_dir = work("c7_deepset");
  run_experiment(cfg);
  double base_acc = read_summary(cfg.out_dir).metric_value;

  c.expect(group_acc - base_acc >= 0.10,
           "group accuracy " + std::to_string(group_acc) + " does not beat the baseline " +
               std::to_string(base_acc) + " by 10 points");
}

std::vector<double> psnr_curve(const std::string& dir) {
  // mean rows (submodel -1) of metrics.csv, in logged order
  std::ifstream in(dir + "/metrics.csv");
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() == 6 && f[3] == "psnr" && f[5] == "-1") out.push_back(std::stod(f[4]));
  }
  return out;
}

void nir_trend(Check& c) {
  ExperimentConfig cfg;
  cfg.task = "nir2d";
  cfg.d = 5;
  cfg.hidden = 64;
  cfg.layers = 4;
  cfg.lr = 1e-4;
  cfg.seed = 1;
  cfg.iterations = 500;
  cfg.log_every = 100;
  cfg.nir_batch = 512;

  cfg.algebra = "dense";
  cfg.out_dir = work("c8_dense");
  run_experiment(cfg);
  cfg.algebra = "diagonal";
  cfg.out_dir = work("c8_diag");
  run_experiment(cfg);

  std::vector<double> dn = psnr_curve(work("c8_dense")), dg = psnr_curve(work("c8_diag"));
  c.expect(dn.size() == dg.size() && !dn.empty(), "psnr curves missing or mismatched");
  if (dn.size() == dg.size() && !dn.empty()) {
    c.expect(dn.back() >= dg.back(), "dense psnr " + std::to_string(dn.back()) +
                                         " below diagonal " + std::to_string(dg.back()) +
                                         " at the last checkpoint");
    int dominated = 0;
    for (std::size_t i = 0; i < dn.size(); ++i) dominated += dn[i] >= dg[i];
    c.expect(dominated * 5 >= static_cast<int>(dn.size()) * 4,
             "dense dominates only " + std::to_string(dominated) + "/" +
                 std::to_string(dn.size()) + " checkpoints");
  }
}

// ---------------------------------------------------------------- criterion 9

void determinism_serialization(Check& c) {
  ExperimentConfig cfg = classify_base(2, 10, 9, "dense", work("c9_a"));
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.epochs = 2;
  cfg.eval_per_class_per_submodel = 2;
  run_experiment(cfg);
  cfg.out_dir = work("c9_b");
  run_experiment(cfg);
  c.expect(slurp(work("c9_a") + "/metrics.csv") == slurp(work("c9_b") + "/metrics.csv"),
           "metrics.csv differs between identical runs");
  c.expect(!slurp(work("c9_a") + "/metrics.csv").empty(), "metrics.csv is empty");

  auto desc = AlgebraDescriptor::dense(3);
  Network net = init_network(desc, {4, 6, 3}, 91);
  save_checkpoint(work("c9_ck.bin"), net, nullptr, 7);
  Checkpoint ck = load_checkpoint(work("c9_ck.bin"));
  Rng rng(92);
  std::vector<double> x(4);
  for (double& v : x) v = rng.uniform(-1, 1);
  for (int j = 0; j < 3; ++j) {
    std::vector<Sample> one = {make_matrix_sample(desc, j, x, {})};
    FastNet f1, f2;
    f1.refresh(net);
    f2.refresh(ck.net);
    Eigen::MatrixXd y1 = forward_batch(net, f1, one, {0}, nullptr);
    Eigen::MatrixXd y2 = forward_batch(ck.net, f2, one, {0}, nullptr);
    c.expect((y1 - y2).cwiseAbs().maxCoeff() == 0.0,
             "checkpoint round-trip changes forward outputs");
  }
}

// --------------------------------------------------------------- criterion 10

void block_reduction(Check& c) {
  Rng rng(1000);
  auto compare = [&](const AlgebraDescriptor& blk, const AlgebraDescriptor& ref) {
    Network a = init_network(blk, {4, 6, 3}, 77);
    Network b = init_network(ref, {4, 6, 3}, 77);
    for (std::size_t li = 0; li < a.layers.size(); ++li) {
      c.expect(a.layers[li].weights.data == b.layers[li].weights.data,
               "initial storage differs between " + blk.str() + " and " + ref.str());
    }
    std::vector<Sample> batch;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> x(4), t(3);
      for (double& v : x) v = rng.uniform(-1, 1);
      for (double& v : t) v = rng.uniform(-1, 1);
      batch.push_back(make_matrix_sample(blk, i % blk.submodel_count(), x, t));
    }
    FastNet fa, fb;
    fa.refresh(a);
    fb.refresh(b);
    std::vector<int> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    Eigen::MatrixXd ya = forward_batch(a, fa, batch, idx, nullptr);
    Eigen::MatrixXd yb = forward_batch(b, fb, batch, idx, nullptr);
    c.expect((ya - yb).cwiseAbs().maxCoeff() == 0.0,
             "forward differs between " + blk.str() + " and " + ref.str());

    LossSpec spec{LossSpec::Kind::MSEDiagonal, 0.5};
    ParamGrads ga = ParamGrads::zeros_like(a), gb = ParamGrads::zeros_like(b);
    grad(a, batch, spec, ga);
    grad(b, batch, spec, gb);
    for (std::size_t li = 0; li < a.layers.size(); ++li) {
      c.expect(ga.weights[li] == gb.weights[li],
               "weight gradients differ between " + blk.str() + " and " + ref.str());
      c.expect(ga.bias[li] == gb.bias[li],
               "bias gradients differ between " + blk.str() + " and " + ref.str());
    }
  };
  compare(AlgebraDescriptor::block_diagonal({1, 1, 1}), AlgebraDescriptor::diagonal(3));
  compare(AlgebraDescriptor::block_diagonal({3}), AlgebraDescriptor::dense(3));
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / "csnet_acceptance";
  fs::create_directories(g_work);

  struct Criterion {
    int num;
    const char* name;
    std::function<void(Check&)> fn;
    double budget_s;
  };
  std::vector<Criterion> criteria = {
      {1, "algebra axiom suite", axioms, 10.0},
      {2, "diagonal-backend equivalence with independent real nets", diagonal_equivalence, 30.0},
      {3, "circulant forward equals the Fourier-component nets", circulant_dft_equivalence, 30.0},
      {4, "symmetric-group net equivariance and invariant readout", group_equivariance, 30.0},
      {5, "gradients match central finite differences", gradient_correctness, 60.0},
      {6, "classification interaction effect (dense vs diagonal)", interaction_effect, 900.0},
      {7, "sum-of-digits group net vs set-pooling baseline", sum_of_digits, 900.0},
      {8, "implicit image regression psnr trend", nir_trend, 1200.0},
      {9, "run determinism and checkpoint round-trip", determinism_serialization, 120.0},
      {10, "block-diagonal reduction to diagonal and dense", block_reduction, 30.0},
  };

  int failures = 0;
  for (auto& cr : criteria) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.fn(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.budget_s)
      c.expect(false, "runtime " + std::to_string(secs) + "s exceeds the " +
                          std::to_string(cr.budget_s) + "s budget");
    std::printf("%s criterion %2d [%7.1fs] %s%s%s\n", c.ok ? "PASS" : "FAIL", cr.num, secs,
                cr.name, c.ok ? "" : " -- ", c.detail.c_str());
    std::fflush(stdout);
    failures += !c.ok;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
