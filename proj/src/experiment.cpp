#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rng.hpp"

namespace csnet {

namespace {

[[noreturn]] void cfg_fail(const std::string& msg) { throw std::invalid_argument(msg); }
[[noreturn]] void run_fail(const std::string& msg) { throw std::runtime_error(msg); }

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    cfg_fail("config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    cfg_fail("config: bad number for " + key + ": '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") cfg.task = value;
  else if (key == "algebra") cfg.algebra = value;
  else if (key == "d") cfg.d = parse_int(value, key);
  else if (key == "block_sizes") {
    cfg.block_sizes.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!trim(part).empty()) cfg.block_sizes.push_back(parse_int(trim(part), key));
  } else if (key == "hidden") cfg.hidden = parse_int(value, key);
  else if (key == "layers") cfg.layers = parse_int(value, key);
  else if (key == "epochs") cfg.epochs = parse_int(value, key);
  else if (key == "batch_size") cfg.batch_size = parse_int(value, key);
  else if (key == "lr") cfg.lr = parse_double(value, key);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "offdiag_scale") cfg.offdiag_scale = parse_double(value, key);
  else if (key == "offdiag_weight") cfg.offdiag_weight = parse_double(value, key);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "data_dir") cfg.data_dir = value;
  else if (key == "samples_per_class") cfg.samples_per_class = parse_int(value, key);
  else if (key == "eval_per_class_per_submodel")
    cfg.eval_per_class_per_submodel = parse_int(value, key);
  else if (key == "iterations") cfg.iterations = parse_int(value, key);
  else if (key == "log_every") cfg.log_every = parse_int(value, key);
  else if (key == "nir_batch") cfg.nir_batch = parse_int(value, key);
  else if (key == "fourier_sigma") cfg.fourier_sigma = parse_double(value, key);
  else if (key == "train_tuples") cfg.train_tuples = parse_int(value, key);
  else if (key == "eval_tuples") cfg.eval_tuples = parse_int(value, key);
  else if (key == "baseline") cfg.baseline = value;
  else cfg_fail("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) cfg_fail("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      cfg_fail("config: line " + std::to_string(lineno) + " is not key=value");
    apply_config_entry(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

AlgebraDescriptor descriptor_from_config(const ExperimentConfig& cfg) {
  if (cfg.algebra == "diagonal") return AlgebraDescriptor::diagonal(cfg.d);
  if (cfg.algebra == "dense") return AlgebraDescriptor::dense(cfg.d);
  if (cfg.algebra == "circulant") return AlgebraDescriptor::circulant(cfg.d);
  if (cfg.algebra == "group") return AlgebraDescriptor::group(cfg.d);
  if (cfg.algebra == "block") {
    int sum = std::accumulate(cfg.block_sizes.begin(), cfg.block_sizes.end(), 0);
    if (cfg.block_sizes.empty() || sum != cfg.d)
      cfg_fail("config: block_sizes must be set and sum to d");
    return AlgebraDescriptor::block_diagonal(cfg.block_sizes);
  }
  cfg_fail("config: unknown algebra '" + cfg.algebra + "'");
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.task != "classify" && cfg.task != "nir2d" && cfg.task != "digitsum")
    cfg_fail("config: task must be classify, nir2d, or digitsum (got '" + cfg.task + "')");
  if (cfg.d <= 0) cfg_fail("config: d must be positive");
  if (cfg.hidden <= 0 || cfg.layers < 2) cfg_fail("config: need hidden > 0 and layers >= 2");
  if (cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.lr <= 0) cfg_fail("config: bad training knobs");
  if (cfg.task == "digitsum") {
    if (cfg.baseline.empty() && cfg.algebra != "group")
      cfg_fail("config: digitsum requires algebra=group or baseline=deepset");
    if (!cfg.baseline.empty() && cfg.baseline != "deepset")
      cfg_fail("config: unknown baseline '" + cfg.baseline + "'");
  } else {
    if (cfg.algebra == "group") cfg_fail("config: the group backend only supports digitsum");
    if (!cfg.baseline.empty()) cfg_fail("config: baseline applies to digitsum only");
  }
  if (cfg.task == "digitsum" && cfg.baseline.empty())
    descriptor_from_config(cfg).validate();
  else if (cfg.task != "digitsum")
    descriptor_from_config(cfg).validate();
}

std::string config_canonical(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "algebra=" << cfg.algebra << "\n";
  os << "baseline=" << cfg.baseline << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "block_sizes=";
  for (std::size_t i = 0; i < cfg.block_sizes.size(); ++i)
    os << (i ? "," : "") << cfg.block_sizes[i];
  os << "\n";
  os << "d=" << cfg.d << "\n";
  os << "data_dir=" << cfg.data_dir << "\n";
  os << "epochs=" << cfg.epochs << "\n";
  os << "eval_per_class_per_submodel=" << cfg.eval_per_class_per_submodel << "\n";
  os << "eval_tuples=" << cfg.eval_tuples << "\n";
  os << "fourier_sigma=" << cfg.fourier_sigma << "\n";
  os << "hidden=" << cfg.hidden << "\n";
  os << "iterations=" << cfg.iterations << "\n";
  os << "layers=" << cfg.layers << "\n";
  os << "log_every=" << cfg.log_every << "\n";
  os << "lr=" << cfg.lr << "\n";
  os << "nir_batch=" << cfg.nir_batch << "\n";
  os << "offdiag_scale=" << cfg.offdiag_scale << "\n";
  os << "offdiag_weight=" << cfg.offdiag_weight << "\n";
  os << "out_dir=" << cfg.out_dir << "\n";
  os << "samples_per_class=" << cfg.samples_per_class << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "task=" << cfg.task << "\n";
  os << "train_tuples=" << cfg.train_tuples << "\n";
  return os.str();
}

namespace {

std::string effective_data_dir(const ExperimentConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  const char* env = std::getenv("CSNET_DATA_DIR");
  return env ? env : "";
}

std::vector<int> net_widths(int in, int hidden, int layers, int out) {
  std::vector<int> w = {in};
  for (int i = 0; i < layers - 1; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) run_fail("cannot write " + path);
  out << content;
}

struct RunDir {
  std::filesystem::path dir;
  explicit RunDir(const ExperimentConfig& cfg) : dir(cfg.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) run_fail("cannot create output directory " + cfg.out_dir);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

void write_run_info(const RunDir& rd, const ExperimentConfig& cfg, std::size_t param_count) {
  std::ostringstream os;
  os << "version=" << kVersion << "\n"
     << "seed=" << cfg.seed << "\n"
     << "task=" << cfg.task << "\n"
     << "param_count=" << param_count << "\n";
  write_text(rd.path("run_info.txt"), os.str());
}

void write_summary(const RunDir& rd, const ExperimentConfig& cfg, const std::string& metric,
                   double value) {
  std::ostringstream os;
  os.precision(17);
  std::string alg = cfg.baseline.empty() ? cfg.algebra : cfg.baseline;
  os << "task," << cfg.task << "\nalgebra," << alg << "\nseed," << cfg.seed << "\nmetric,"
     << metric << "\nvalue," << value << "\n";
  write_text(rd.path("summary.csv"), os.str());
}

// ------------------------------------------------------------------ classify

struct ClassifyData {
  std::vector<Sample> train;
  std::vector<std::vector<Sample>> eval_by_submodel;
};

ClassifyData build_classify_data(const ExperimentConfig& cfg, const AlgebraDescriptor& desc) {
  std::string dd = effective_data_dir(cfg);
  ImageDataset train_ds, eval_ds;
  bool have_eval = true;
  if (!dd.empty() &&
      std::filesystem::exists(std::filesystem::path(dd) / "train-images-idx3-ubyte")) {
    auto p = std::filesystem::path(dd);
    train_ds = load_idx((p / "train-images-idx3-ubyte").string(),
                        (p / "train-labels-idx1-ubyte").string());
    if (std::filesystem::exists(p / "t10k-images-idx3-ubyte"))
      eval_ds = load_idx((p / "t10k-images-idx3-ubyte").string(),
                         (p / "t10k-labels-idx1-ubyte").string());
    else
      have_eval = false;
  } else {
    train_ds = synthetic_digits(cfg.samples_per_class, cfg.seed ^ 0x5EEDull);
    eval_ds = synthetic_digits(cfg.eval_per_class_per_submodel * cfg.d, cfg.seed ^ 0xE7A1ull);
  }

  SubmodelPartition part = partition_balanced(train_ds, cfg.d, cfg.seed);
  ClassifyData out;
  auto add = [&](std::vector<Sample>& dst, const ImageDataset& ds, int j, int idx) {
    std::vector<double> t(10, 0.0);
    t[ds.labels[idx]] = 1.0;
    dst.push_back(make_matrix_sample(
        desc, j, downsample2(ds.images.data() + static_cast<std::size_t>(idx) * 784), t));
  };
  for (int j = 0; j < cfg.d; ++j)
    for (int idx : part.subsets[j]) add(out.train, train_ds, j, idx);

  out.eval_by_submodel.resize(cfg.d);
  if (have_eval) {
    SubmodelPartition epart = partition_balanced(eval_ds, cfg.d, cfg.seed + 1);
    for (int j = 0; j < cfg.d; ++j)
      for (int idx : epart.subsets[j]) add(out.eval_by_submodel[j], eval_ds, j, idx);
  } else {
    for (int j = 0; j < cfg.d; ++j)
      for (int idx : part.subsets[j]) add(out.eval_by_submodel[j], train_ds, j, idx);
  }
  return out;
}

// argmax accuracy on the active sub-model's output slice
double slice_accuracy(const Network& net, const std::vector<Sample>& samples,
                      const AlgebraDescriptor& desc) {
  if (samples.empty()) return 0.0;
  FastNet fast;
  fast.refresh(net);
  std::vector<int> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Eigen::MatrixXd out = forward_batch(net, fast, samples, idx, nullptr);
  const Realization& r = realization_for(desc);
  int D = r.dim;
  int classes = static_cast<int>(samples[0].target.size());
  int correct = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    int col = sample_column(desc, samples[s].submodel);
    int best = 0;
    double bestv = -1e300;
    for (int k = 0; k < classes; ++k) {
      double v = out(k * D + col, static_cast<int>(s));
      if (v > bestv) {
        bestv = v;
        best = k;
      }
    }
    int label = static_cast<int>(std::max_element(samples[s].target.begin(),
                                                  samples[s].target.end()) -
                                 samples[s].target.begin());
    correct += best == label;
  }
  return static_cast<double>(correct) / samples.size();
}

void run_classify(const ExperimentConfig& cfg, const RunDir& rd) {
  AlgebraDescriptor desc = descriptor_from_config(cfg);
  ClassifyData data = build_classify_data(cfg, desc);
  Network net = init_network(desc, net_widths(196, cfg.hidden, cfg.layers, 10), cfg.seed,
                             {.offdiag_scale = cfg.offdiag_scale});
  write_run_info(rd, cfg, net.param_count());

  // classification trains squared error against one-hot targets on the
  // diagonal slice, with the off-diagonal suppression term
  LossSpec spec{LossSpec::Kind::MSEDiagonal, cfg.offdiag_weight};
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  tc.checkpoint_path = rd.path("checkpoint.bin");
  tc.config_digest = fnv1a64(config_canonical(cfg));

  EvalFn eval = [&](const Network& n, int epoch, long long step) {
    std::vector<MetricRow> rows;
    double mean = 0.0;
    for (int j = 0; j < cfg.d; ++j) {
      double acc = slice_accuracy(n, data.eval_by_submodel[j], desc);
      mean += acc / cfg.d;
      rows.push_back({epoch, step, 0.0, "accuracy", acc, j});
    }
    rows.push_back({epoch, step, 0.0, "accuracy", mean, -1});
    return rows;
  };
  TrainResult res = train_loop(net, data.train, spec, tc, eval);
  write_metrics_csv(rd.path("metrics.csv"), res.log);

  std::ostringstream acc;
  acc.precision(17);
  acc << "submodel,accuracy\n";
  double mean = 0.0;
  for (int j = 0; j < cfg.d; ++j) {
    double a = slice_accuracy(net, data.eval_by_submodel[j], desc);
    mean += a / cfg.d;
    acc << j << "," << a << "\n";
  }
  acc << "mean," << mean << "\n";
  write_text(rd.path("accuracy.csv"), acc.str());
  write_summary(rd, cfg, "final_accuracy", mean);
}

// --------------------------------------------------------------------- nir2d

void run_nir(const ExperimentConfig& cfg, const RunDir& rd) {
  AlgebraDescriptor desc = descriptor_from_config(cfg);
  std::string dd = effective_data_dir(cfg);

  std::vector<Image> targets;
  for (int j = 0; j < cfg.d; ++j) {
    auto p = std::filesystem::path(dd.empty() ? "." : dd) / ("nir_" + std::to_string(j) + ".ppm");
    if (!dd.empty() && std::filesystem::exists(p))
      targets.push_back(load_ppm(p.string()));
    else
      targets.push_back(procedural_image(j, 128));
    if (targets.back().width != targets[0].width || targets.back().height != targets[0].height)
      run_fail("nir2d: target images must share one size");
  }
  int W = targets[0].width, H = targets[0].height, n_pix = W * H;

  std::vector<double> B = make_fourier_matrix(cfg.fourier_sigma, cfg.seed ^ 0xF00ull);
  std::vector<std::vector<double>> feats(n_pix);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      feats[y * W + x] = fourier_features((x + 0.5) / W, (y + 0.5) / H, B);

  Network net = init_network(desc, net_widths(320, cfg.hidden, cfg.layers, 3), cfg.seed,
                             {.offdiag_scale = cfg.offdiag_scale});
  write_run_info(rd, cfg, net.param_count());
  // implicit image regression trains the Huber loss on the diagonal slice,
  // with the off-diagonal suppression term
  LossSpec spec{LossSpec::Kind::HuberDiagonal, cfg.offdiag_weight};
  const Realization& r = realization_for(desc);
  int D = r.dim;

  auto target_rgb = [&](int j, int pix, int ch) { return targets[j].rgb[pix * 3 + ch]; };
  auto make_sample = [&](int j, int pix) {
    return make_matrix_sample(desc, j, feats[pix],
                              {target_rgb(j, pix, 0), target_rgb(j, pix, 1), target_rgb(j, pix, 2)});
  };

  // fixed evaluation pixel subset per sub-model
  Rng eval_rng(cfg.seed ^ 0xE7A1ull);
  int n_eval = std::min(n_pix, 2048);
  std::vector<int> eval_pix(n_eval);
  for (int& p : eval_pix) p = static_cast<int>(eval_rng.below(n_pix));

  FastNet fast;
  fast.refresh(net);
  AdamState opt = AdamState::create(net, cfg.lr);

  auto predict = [&](int j, const std::vector<int>& pix, std::vector<double>& rgb_out) {
    // chunked batched forward; writes r,g,b triples for each pixel
    rgb_out.resize(pix.size() * 3);
    const int chunk = 2048;
    int col = sample_column(desc, j);
    for (std::size_t start = 0; start < pix.size(); start += chunk) {
      std::size_t end = std::min(pix.size(), start + chunk);
      std::vector<Sample> batch;
      std::vector<int> idx;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(make_sample(j, pix[i]));
        idx.push_back(static_cast<int>(idx.size()));
      }
      Eigen::MatrixXd out = forward_batch(net, fast, batch, idx, nullptr);
      for (std::size_t i = start; i < end; ++i)
        for (int ch = 0; ch < 3; ++ch)
          rgb_out[i * 3 + ch] =
              std::clamp(out(ch * D + col, static_cast<int>(i - start)), 0.0, 1.0);
    }
  };

  auto eval_psnr = [&](const std::vector<int>& pix, int j) {
    std::vector<double> pred, truth;
    predict(j, pix, pred);
    truth.reserve(pix.size() * 3);
    for (int p : pix)
      for (int ch = 0; ch < 3; ++ch) truth.push_back(target_rgb(j, p, ch));
    return psnr(pred, truth);
  };

  std::vector<MetricRow> log;
  Rng rng(cfg.seed ^ 0x7EA1ull);
  double last_loss = 0.0;
  auto log_point = [&](int iter) {
    double mean = 0.0;
    for (int j = 0; j < cfg.d; ++j) {
      double p = eval_psnr(eval_pix, j);
      mean += p / cfg.d;
      log.push_back({iter / std::max(1, cfg.log_every), iter, last_loss, "psnr", p, j});
    }
    log.push_back({iter / std::max(1, cfg.log_every), iter, last_loss, "psnr", mean, -1});
  };

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    std::vector<Sample> batch;
    std::vector<int> idx;
    for (int i = 0; i < cfg.nir_batch; ++i) {
      int j = static_cast<int>(rng.below(cfg.d));
      batch.push_back(make_sample(j, static_cast<int>(rng.below(n_pix))));
      idx.push_back(i);
    }
    ParamGrads g = ParamGrads::zeros_like(net);
    last_loss = grad_with(net, fast, batch, idx, spec, g);
    adam_step(net, g, opt);
    fast.refresh(net);
    if (cfg.log_every > 0 && iter % cfg.log_every == 0) log_point(iter);
  }
  if (cfg.log_every <= 0 || cfg.iterations % std::max(1, cfg.log_every) != 0)
    log_point(cfg.iterations);
  write_metrics_csv(rd.path("metrics.csv"), log);
  save_checkpoint(rd.path("checkpoint.bin"), net, &opt, fnv1a64(config_canonical(cfg)));

  // full reconstructions and final PSNR
  std::vector<int> all_pix(n_pix);
  std::iota(all_pix.begin(), all_pix.end(), 0);
  std::ostringstream ps;
  ps.precision(17);
  ps << "submodel,psnr\n";
  double mean = 0.0;
  for (int j = 0; j < cfg.d; ++j) {
    Image recon;
    recon.width = W;
    recon.height = H;
    predict(j, all_pix, recon.rgb);
    save_ppm(rd.path("recon_" + std::to_string(j) + ".ppm"), recon);
    save_ppm(rd.path("target_" + std::to_string(j) + ".ppm"), targets[j]);
    double p = psnr(recon.rgb, targets[j].rgb);
    mean += p / cfg.d;
    ps << j << "," << p << "\n";
  }
  ps << "mean," << mean << "\n";
  write_text(rd.path("psnr.csv"), ps.str());
  write_summary(rd, cfg, "final_psnr", mean);
}

// ------------------------------------------------------------------ digitsum

void run_digitsum(const ExperimentConfig& cfg, const RunDir& rd) {
  std::string dd = effective_data_dir(cfg);
  ImageDataset img_ds;
  if (!dd.empty() &&
      std::filesystem::exists(std::filesystem::path(dd) / "train-images-idx3-ubyte")) {
    auto p = std::filesystem::path(dd);
    img_ds = load_idx((p / "train-images-idx3-ubyte").string(),
                      (p / "train-labels-idx1-ubyte").string());
  } else {
    img_ds = synthetic_digits(200, cfg.seed ^ 0xD161ull);
  }
  DigitEncoder enc = train_digit_encoder(img_ds, cfg.seed ^ 0xE4Cull);
  DigitSumDataset train = build_digit_sum(img_ds, enc, cfg.d, cfg.train_tuples, cfg.seed ^ 0x111ull);
  DigitSumDataset eval = build_digit_sum(img_ds, enc, cfg.d, cfg.eval_tuples, cfg.seed ^ 0x222ull);

  if (cfg.baseline == "deepset") {
    DeepSet m = DeepSet::init(cfg.seed);
    write_run_info(rd, cfg, m.param_count());
    std::vector<double> losses = train_deepset(m, train, cfg.epochs, cfg.batch_size, cfg.lr,
                                               cfg.seed);
    std::vector<MetricRow> log;
    for (std::size_t e = 0; e < losses.size(); ++e)
      log.push_back({static_cast<int>(e + 1), static_cast<long long>(e + 1), losses[e],
                     "train_loss", losses[e], -1});
    double acc = deepset_accuracy(m, eval);
    log.push_back({cfg.epochs, static_cast<long long>(losses.size()), 0.0, "accuracy", acc, -1});
    write_metrics_csv(rd.path("metrics.csv"), log);
    std::ostringstream os;
    os.precision(17);
    os << "submodel,accuracy\nmean," << acc << "\n";
    write_text(rd.path("accuracy.csv"), os.str());
    write_summary(rd, cfg, "final_accuracy", acc);
    return;
  }

  AlgebraDescriptor desc = descriptor_from_config(cfg);
  const SymmetricGroup& G = SymmetricGroup::get(cfg.d);
  auto lift_sample = [&](const DigitSumDataset& ds, std::size_t i) {
    std::vector<std::vector<double>> z(cfg.d, std::vector<double>(ds.feat_dim));
    for (int e = 0; e < cfg.d; ++e)
      for (int c = 0; c < ds.feat_dim; ++c)
        z[e][c] = ds.features[(i * cfg.d + e) * ds.feat_dim + c];
    std::vector<AlgebraElement> lifted = group_lift(G, z);
    Sample s;
    s.input.reserve(lifted.size() * desc.elem_size());
    for (const auto& el : lifted) s.input.insert(s.input.end(), el.data.begin(), el.data.end());
    s.target.assign(10, 0.0);
    s.target[ds.labels[i]] = 1.0;
    return s;
  };
  std::vector<Sample> train_s, eval_s;
  for (std::size_t i = 0; i < train.labels.size(); ++i) train_s.push_back(lift_sample(train, i));
  for (std::size_t i = 0; i < eval.labels.size(); ++i) eval_s.push_back(lift_sample(eval, i));

  Network net = init_network(desc, net_widths(cfg.d * 32, cfg.hidden, cfg.layers, 10), cfg.seed,
                             {.offdiag_scale = cfg.offdiag_scale});
  write_run_info(rd, cfg, net.param_count());

  int D = desc.rep_dim();
  auto accuracy = [&](const Network& n, const std::vector<Sample>& samples,
                      const std::vector<int>& labels) {
    FastNet fast;
    fast.refresh(n);
    const int chunk = 1024;
    int correct = 0;
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
      std::size_t end = std::min(samples.size(), start + chunk);
      std::vector<int> idx;
      for (std::size_t i = start; i < end; ++i) idx.push_back(static_cast<int>(i));
      Eigen::MatrixXd out = forward_batch(n, fast, samples, idx, nullptr);
      for (std::size_t i = start; i < end; ++i) {
        int best = 0;
        double bestv = -1e300;
        for (int k = 0; k < 10; ++k) {
          double v = 0.0;
          for (int g = 0; g < D; ++g) v += out(k * D + g, static_cast<int>(i - start));
          if (v > bestv) {
            bestv = v;
            best = k;
          }
        }
        correct += best == labels[i];
      }
    }
    return static_cast<double>(correct) / samples.size();
  };

  LossSpec spec{LossSpec::Kind::CrossEntropyDiagonal, 0.0};
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.lr = cfg.lr;
  tc.seed = cfg.seed;
  tc.checkpoint_path = rd.path("checkpoint.bin");
  tc.config_digest = fnv1a64(config_canonical(cfg));
  EvalFn eval_fn = [&](const Network& n, int epoch, long long step) {
    std::vector<MetricRow> rows;
    if (epoch % 10 == 0 || epoch == cfg.epochs)
      rows.push_back({epoch, step, 0.0, "accuracy", accuracy(n, eval_s, eval.labels), -1});
    return rows;
  };
  TrainResult res = train_loop(net, train_s, spec, tc, eval_fn);
  write_metrics_csv(rd.path("metrics.csv"), res.log);

  double acc = accuracy(net, eval_s, eval.labels);
  std::ostringstream os;
  os.precision(17);
  os << "submodel,accuracy\nmean," << acc << "\n";
  write_text(rd.path("accuracy.csv"), os.str());
  write_summary(rd, cfg, "final_accuracy", acc);
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  RunDir rd(cfg);
  write_text(rd.path("config.txt"), config_canonical(cfg));
  if (cfg.task == "classify") run_classify(cfg, rd);
  else if (cfg.task == "nir2d") run_nir(cfg, rd);
  else run_digitsum(cfg, rd);
}

RunSummary read_summary(const std::string& run_dir) {
  std::ifstream in(std::filesystem::path(run_dir) / "summary.csv");
  if (!in) run_fail("no summary.csv in " + run_dir + " (incomplete run?)");
  RunSummary s;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t c = line.find(',');
    if (c == std::string::npos) continue;
    std::string k = line.substr(0, c), v = line.substr(c + 1);
    if (k == "task") s.task = v;
    else if (k == "algebra") s.algebra = v;
    else if (k == "seed") s.seed = std::stoull(v);
    else if (k == "metric") s.metric_name = v;
    else if (k == "value") s.metric_value = std::stod(v);
  }
  if (s.task.empty() || s.metric_name.empty()) run_fail("malformed summary.csv in " + run_dir);
  return s;
}

std::string compare_report(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2) run_fail("report needs at least two run directories");
  std::vector<RunSummary> all;
  for (const auto& d : run_dirs) all.push_back(read_summary(d));
  for (const auto& s : all)
    if (s.task != all[0].task)
      run_fail("report: runs mix tasks (" + all[0].task + " vs " + s.task + ")");

  std::map<std::string, std::vector<double>> groups;
  for (const auto& s : all) groups[s.algebra].push_back(s.metric_value);

  std::string best;
  double best_mean = -1e300;
  std::map<std::string, std::pair<double, double>> stats;
  for (const auto& [name, vals] : groups) {
    double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    stats[name] = {mean, sd};
    if (mean > best_mean) {
      best_mean = mean;
      best = name;
    }
  }

  std::ostringstream os;
  os.precision(6);
  os << "task: " << all[0].task << "  metric: " << all[0].metric_name << "\n";
  for (const auto& [name, ms] : stats) {
    os << (name == best ? "* " : "  ") << name << ": " << ms.first << " +- " << ms.second << "  (n="
       << groups[name].size() << ")\n";
  }
  os << "* highest mean\n";
  return os.str();
}

int selftest(std::vector<std::string>& lines) {
  int failures = 0;
  auto record = [&](const std::string& name, bool ok) {
    lines.push_back(std::string(ok ? "PASS " : "FAIL ") + name);
    if (!ok) ++failures;
  };

  // involution and norm laws on random elements of every backend
  {
    bool ok = true;
    Rng rng(101);
    for (auto desc : {AlgebraDescriptor::diagonal(4), AlgebraDescriptor::dense(3),
                      AlgebraDescriptor::block_diagonal({2, 2}), AlgebraDescriptor::circulant(4),
                      AlgebraDescriptor::group(3)}) {
      for (int t = 0; t < 200 && ok; ++t) {
        AlgebraElement a = zero_element(desc), b = zero_element(desc);
        for (double& v : a.data) v = rng.uniform(-1, 1);
        for (double& v : b.data) v = rng.uniform(-1, 1);
        AlgebraElement lhs = involution(algebra_mul(a, b));
        AlgebraElement rhs = algebra_mul(involution(b), involution(a));
        for (std::size_t i = 0; i < lhs.data.size(); ++i)
          if (std::abs(lhs.data[i] - rhs.data[i]) > 1e-9) ok = false;
        double na = operator_norm(a);
        if (std::abs(operator_norm(algebra_mul(involution(a), a)) - na * na) > 1e-9 * (1 + na * na))
          ok = false;
        if (operator_norm(algebra_mul(a, b)) > na * operator_norm(b) + 1e-9) ok = false;
      }
    }
    record("algebra identities", ok);
  }

  // gradient vs finite differences on a small dense net
  {
    bool ok = true;
    AlgebraDescriptor desc = AlgebraDescriptor::dense(2);
    Network net = init_network(desc, {3, 4, 2}, 11);
    Rng rng(12);
    std::vector<Sample> batch;
    for (int i = 0; i < 3; ++i) {
      std::vector<double> x(3), t(2);
      for (double& v : x) v = rng.uniform(-1, 1);
      for (double& v : t) v = rng.uniform(-1, 1);
      batch.push_back(make_matrix_sample(desc, i % 2, x, t));
    }
    LossSpec spec{LossSpec::Kind::MSEDiagonal, 0.5};
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
    for (int t = 0; t < 20; ++t) {
      std::size_t i = rng.below(ptrs.size());
      double save = *ptrs[i];
      const double h = 1e-5;
      *ptrs[i] = save + h;
      double lp = batch_loss(net, batch, spec);
      *ptrs[i] = save - h;
      double lm = batch_loss(net, batch, spec);
      *ptrs[i] = save;
      double fd = (lp - lm) / (2 * h);
      if (std::abs(flat[i] - fd) / (std::abs(fd) + 1e-8) > 1e-4) ok = false;
    }
    record("gradient finite differences", ok);
  }

  // symmetry-group net equivariance under right translation
  {
    bool ok = true;
    AlgebraDescriptor desc = AlgebraDescriptor::group(3);
    const SymmetricGroup& G = SymmetricGroup::get(3);
    Network net = init_network(desc, {2, 3, 2}, 13);
    Rng rng(14);
    AlgebraTensor x(desc, {2});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    AlgebraTensor y = forward(net, x);
    for (int h = 0; h < 6 && ok; ++h) {
      AlgebraTensor xt(desc, {2});
      for (int e = 0; e < 2; ++e)
        for (int g = 0; g < 6; ++g) xt.data[e * 6 + g] = x.data[e * 6 + G.compose[g][h]];
      AlgebraTensor yt = forward(net, xt);
      for (int e = 0; e < 2; ++e)
        for (int g = 0; g < 6; ++g)
          if (std::abs(yt.data[e * 6 + g] - y.data[e * 6 + G.compose[g][h]]) > 1e-9) ok = false;
    }
    record("group equivariance", ok);
  }

  // training determinism
  {
    AlgebraDescriptor desc = AlgebraDescriptor::diagonal(2);
    Rng rng(15);
    std::vector<Sample> data;
    for (int i = 0; i < 16; ++i) {
      std::vector<double> x(2), t(1);
      for (double& v : x) v = rng.uniform(-1, 1);
      t[0] = rng.uniform(-1, 1);
      data.push_back(make_matrix_sample(desc, i % 2, x, t));
    }
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.lr = 1e-3;
    tc.seed = 5;
    Network n1 = init_network(desc, {2, 3, 1}, 6);
    Network n2 = init_network(desc, {2, 3, 1}, 6);
    TrainResult r1 = train_loop(n1, data, {}, tc);
    TrainResult r2 = train_loop(n2, data, {}, tc);
    bool ok = r1.log.size() == r2.log.size();
    for (std::size_t i = 0; ok && i < r1.log.size(); ++i)
      if (r1.log[i].loss != r2.log[i].loss) ok = false;
    for (std::size_t li = 0; ok && li < n1.layers.size(); ++li)
      if (n1.layers[li].weights.data != n2.layers[li].weights.data) ok = false;
    record("training determinism", ok);
  }

  return failures;
}

}  // namespace csnet
