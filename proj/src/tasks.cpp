#include "tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rng.hpp"
#include "train.hpp"

namespace csnet {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail("truncated IDX file: " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imf(images_path, std::ios::binary);
  if (!imf) fail("cannot open image file: " + images_path);
  if (read_u32_be(imf, "image magic") != 0x00000803u)
    fail("bad IDX image magic in " + images_path);
  std::uint32_t n = read_u32_be(imf, "image count");
  std::uint32_t rows = read_u32_be(imf, "rows");
  std::uint32_t cols = read_u32_be(imf, "cols");
  if (rows != 28 || cols != 28) fail("expected 28x28 images");
  if (n > 10'000'000u) fail("implausible image count");

  ImageDataset ds;
  ds.n = static_cast<int>(n);
  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 784);
  imf.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!imf) fail("truncated IDX image payload in " + images_path);
  ds.images.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) ds.images[i] = raw[i] / 255.0;

  std::ifstream lbf(labels_path, std::ios::binary);
  if (!lbf) fail("cannot open label file: " + labels_path);
  if (read_u32_be(lbf, "label magic") != 0x00000801u)
    fail("bad IDX label magic in " + labels_path);
  std::uint32_t ln = read_u32_be(lbf, "label count");
  if (ln != n) fail("label count does not match image count");
  std::vector<unsigned char> lraw(ln);
  lbf.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
  if (!lbf) fail("truncated IDX label payload in " + labels_path);
  ds.labels.resize(ln);
  for (std::size_t i = 0; i < lraw.size(); ++i) {
    if (lraw[i] >= 10) fail("label out of range");
    ds.labels[i] = lraw[i];
  }
  return ds;
}

void save_idx(const ImageDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  std::ofstream imf(images_path, std::ios::binary);
  if (!imf) fail("cannot write " + images_path);
  write_u32_be(imf, 0x00000803u);
  write_u32_be(imf, static_cast<std::uint32_t>(ds.n));
  write_u32_be(imf, 28);
  write_u32_be(imf, 28);
  for (double v : ds.images)
    imf.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));

  std::ofstream lbf(labels_path, std::ios::binary);
  if (!lbf) fail("cannot write " + labels_path);
  write_u32_be(lbf, 0x00000801u);
  write_u32_be(lbf, static_cast<std::uint32_t>(ds.n));
  for (int l : ds.labels) lbf.put(static_cast<char>(l));
}

ImageDataset synthetic_digits(int per_class, std::uint64_t seed) {
  if (per_class <= 0) fail("per_class must be positive");
  ImageDataset ds;
  ds.n = per_class * 10;
  ds.images.assign(static_cast<std::size_t>(ds.n) * 784, 0.0);
  ds.labels.resize(ds.n);

  struct Stroke {
    double x0, y0, x1, y1;
  };
  // Each class is a fixed set of stroke-pattern variants ("writing styles");
  // the dataset seed only drives per-sample style choice and jitter, so
  // independently seeded datasets share the same 10 classes.
  constexpr int kVariants = 6;
  int idx = 0;
  for (int c = 0; c < 10; ++c) {
    std::vector<std::vector<Stroke>> styles(kVariants);
    for (int v = 0; v < kVariants; ++v) {
      Rng proto_rng(0xC1A55ULL * static_cast<std::uint64_t>(c + 1) +
                    0x51DE5ULL * static_cast<std::uint64_t>(v));
      for (int s = 0; s < 3; ++s)
        styles[v].push_back({proto_rng.uniform(5, 23), proto_rng.uniform(5, 23),
                             proto_rng.uniform(5, 23), proto_rng.uniform(5, 23)});
    }
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(c + 1)));
    for (int i = 0; i < per_class; ++i, ++idx) {
      double* img = ds.images.data() + static_cast<std::size_t>(idx) * 784;
      const std::vector<Stroke>& proto = styles[rng.below(kVariants)];
      // random affine distortion per sample: rotation, scale, translation
      double th = rng.uniform(-0.25, 0.25);
      double sc = rng.uniform(0.9, 1.1);
      double tx = rng.uniform(-2.0, 2.0), ty = rng.uniform(-2.0, 2.0);
      double ca = sc * std::cos(th), sa = sc * std::sin(th);
      auto warp_x = [&](double x, double y) { return 14.0 + ca * (x - 14) - sa * (y - 14) + tx; };
      auto warp_y = [&](double x, double y) { return 14.0 + sa * (x - 14) + ca * (y - 14) + ty; };
      for (const Stroke& st : proto) {
        double x0 = warp_x(st.x0, st.y0) + rng.normal() * 0.7;
        double y0 = warp_y(st.x0, st.y0) + rng.normal() * 0.7;
        double x1 = warp_x(st.x1, st.y1) + rng.normal() * 0.7;
        double y1 = warp_y(st.x1, st.y1) + rng.normal() * 0.7;
        for (int t = 0; t <= 40; ++t) {
          double px = x0 + (x1 - x0) * t / 40.0;
          double py = y0 + (y1 - y0) * t / 40.0;
          int xlo = std::max(0, static_cast<int>(px) - 3);
          int xhi = std::min(27, static_cast<int>(px) + 3);
          int ylo = std::max(0, static_cast<int>(py) - 3);
          int yhi = std::min(27, static_cast<int>(py) + 3);
          for (int y = ylo; y <= yhi; ++y)
            for (int x = xlo; x <= xhi; ++x) {
              double d2 = (x - px) * (x - px) + (y - py) * (y - py);
              img[y * 28 + x] += 0.35 * std::exp(-d2 / 1.8);
            }
        }
      }
      for (int p = 0; p < 784; ++p)
        img[p] = std::min(1.0, img[p] + 0.12 * rng.uniform());  // background noise
      ds.labels[idx] = c;
    }
  }
  return ds;
}

std::vector<double> downsample2(const double* img784) {
  std::vector<double> out(196);
  for (int y = 0; y < 14; ++y)
    for (int x = 0; x < 14; ++x)
      out[y * 14 + x] = 0.25 * (img784[(2 * y) * 28 + 2 * x] + img784[(2 * y) * 28 + 2 * x + 1] +
                                img784[(2 * y + 1) * 28 + 2 * x] +
                                img784[(2 * y + 1) * 28 + 2 * x + 1]);
  return out;
}

SubmodelPartition partition_balanced(const ImageDataset& ds, int d, std::uint64_t seed) {
  if (d <= 0) fail("partition: d must be positive");
  std::vector<std::vector<int>> by_class(10);
  for (int i = 0; i < ds.n; ++i) by_class[ds.labels[i]].push_back(i);
  int k = ds.n;
  for (const auto& cls : by_class) k = std::min<int>(k, static_cast<int>(cls.size()) / d);
  if (k <= 0) fail("partition: not enough samples per class for " + std::to_string(d) +
                   " balanced subsets");
  Rng rng(seed);
  for (auto& cls : by_class) rng.shuffle(cls);
  SubmodelPartition part;
  part.per_class = k;
  part.subsets.assign(d, {});
  for (int s = 0; s < d; ++s)
    for (int c = 0; c < 10; ++c)
      for (int i = 0; i < k; ++i) part.subsets[s].push_back(by_class[c][s * k + i]);
  return part;
}

// ---------------------------------------------------------------------------

namespace {

int ppm_token(std::istream& in) {
  // skip whitespace and '#' comments, then read a nonnegative integer
  int c = in.get();
  while (in) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (!in || !std::isdigit(c)) fail("malformed PPM header");
  int v = 0;
  while (in && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  char p, six;
  in.get(p);
  in.get(six);
  if (p != 'P' || six != '6') fail("not a binary PPM file: " + path);
  Image img;
  img.width = ppm_token(in);
  img.height = ppm_token(in);
  int maxval = ppm_token(in);
  if (maxval != 255) fail("unsupported PPM maxval");
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) fail("truncated PPM payload in " + path);
  img.rgb.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) img.rgb[i] = raw[i] / 255.0;
  return img;
}

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.rgb)
    out.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
}

Image procedural_image(int index, int size) {
  Image img;
  img.width = img.height = size;
  img.rgb.resize(static_cast<std::size_t>(size) * size * 3);
  Rng rng(1234u + static_cast<std::uint64_t>(index));
  // three sinusoidal plane waves plus a radial term per channel
  double fx[3][3], fy[3][3], ph[3][3], cx[3], cy[3];
  for (int ch = 0; ch < 3; ++ch) {
    for (int w = 0; w < 3; ++w) {
      fx[ch][w] = rng.uniform(0.5, 4.0);
      fy[ch][w] = rng.uniform(0.5, 4.0);
      ph[ch][w] = rng.uniform(0.0, 6.28318530717958648);
    }
    cx[ch] = rng.uniform(0.25, 0.75);
    cy[ch] = rng.uniform(0.25, 0.75);
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double u = (x + 0.5) / size, v = (y + 0.5) / size;
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int w = 0; w < 3; ++w)
          acc += std::sin(6.28318530717958648 * (fx[ch][w] * u + fy[ch][w] * v) + ph[ch][w]);
        double r = std::hypot(u - cx[ch], v - cy[ch]);
        acc += 2.0 * std::cos(6.0 * r);
        img.rgb[(static_cast<std::size_t>(y) * size + x) * 3 + ch] = 0.5 + acc / 10.0;
      }
    }
  for (double& v : img.rgb) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<double> make_fourier_matrix(double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> B(320);
  for (double& v : B) v = sigma * rng.normal();
  return B;
}

std::vector<double> fourier_features(double x, double y, const std::vector<double>& B) {
  if (B.size() != 320) fail("fourier matrix must hold 160 frequency pairs");
  std::vector<double> out(320);
  for (int k = 0; k < 160; ++k) {
    double a = 6.28318530717958648 * (B[2 * k] * x + B[2 * k + 1] * y);
    out[k] = std::cos(a);
    out[160 + k] = std::sin(a);
  }
  return out;
}

NIRDataset build_nir(const Image& img, double sigma, std::uint64_t seed) {
  NIRDataset ds;
  ds.width = img.width;
  ds.height = img.height;
  ds.B = make_fourier_matrix(sigma, seed);
  ds.coords.reserve(static_cast<std::size_t>(img.width) * img.height * 2);
  ds.colors = img.rgb;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      ds.coords.push_back((x + 0.5) / img.width);
      ds.coords.push_back((y + 0.5) / img.height);
    }
  return ds;
}

double psnr(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty()) fail("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double e = pred[i] - truth[i];
    mse += e * e;
  }
  mse /= pred.size();
  if (mse < 1e-12) return 120.0;
  return 10.0 * std::log10(1.0 / mse);
}

// ---------------------------------------------------------------------------

DigitEncoder train_digit_encoder(const ImageDataset& ds, std::uint64_t seed) {
  auto desc = AlgebraDescriptor::diagonal(1);
  DigitEncoder enc;
  enc.net = init_network(desc, {196, 64, 32, 10}, seed);
  std::vector<Sample> samples;
  samples.reserve(ds.n);
  for (int i = 0; i < ds.n; ++i) {
    std::vector<double> t(10, 0.0);
    t[ds.labels[i]] = 1.0;
    samples.push_back(
        make_matrix_sample(desc, 0, downsample2(ds.images.data() + std::size_t(i) * 784), t));
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.lr = 1e-3;
  cfg.seed = seed;
  train_loop(enc.net, samples, {LossSpec::Kind::CrossEntropyDiagonal, 0.0}, cfg);
  return enc;
}

std::vector<double> DigitEncoder::encode(const double* img784) const {
  std::vector<double> h = downsample2(img784);
  // first two layers only: the 32-dimensional penultimate activations
  for (int li = 0; li < 2; ++li) {
    const Layer& l = net.layers[li];
    int n_out = l.weights.rows(), n_in = l.weights.cols();
    std::vector<double> y(n_out);
    for (int k = 0; k < n_out; ++k) {
      double acc = l.bias ? l.bias->data[k] : 0.0;
      const double* wrow = l.weights.data.data() + static_cast<std::size_t>(k) * n_in;
      for (int c = 0; c < n_in; ++c) acc += wrow[c] * h[c];
      y[k] = scalar_activate(l.activation, acc);
    }
    h = std::move(y);
  }
  return h;
}

DigitSumDataset build_digit_sum(const ImageDataset& ds, const DigitEncoder& enc, int d, int size,
                                std::uint64_t seed) {
  if (d <= 0 || size <= 0) fail("build_digit_sum: bad arguments");
  std::vector<std::vector<int>> by_class(10);
  for (int i = 0; i < ds.n; ++i) by_class[ds.labels[i]].push_back(i);
  for (const auto& cls : by_class)
    if (cls.empty()) fail("build_digit_sum: a digit class has no images");

  // encode every image once
  std::vector<double> codes(static_cast<std::size_t>(ds.n) * 32);
  for (int i = 0; i < ds.n; ++i) {
    auto z = enc.encode(ds.images.data() + static_cast<std::size_t>(i) * 784);
    std::copy(z.begin(), z.end(), codes.begin() + static_cast<std::size_t>(i) * 32);
  }

  DigitSumDataset out;
  out.d = d;
  out.features.reserve(static_cast<std::size_t>(size) * d * 32);
  out.labels.reserve(size);
  Rng rng(seed);
  std::vector<int> digits(d);
  for (int s = 0; s < size; ++s) {
    // rejection sampling keeps the distribution uniform over admissible tuples
    int sum;
    do {
      sum = 0;
      for (int& v : digits) {
        v = static_cast<int>(rng.below(10));
        sum += v;
      }
    } while (sum >= 10);
    for (int v : digits) {
      int pick = by_class[v][rng.below(by_class[v].size())];
      const double* z = codes.data() + static_cast<std::size_t>(pick) * 32;
      out.features.insert(out.features.end(), z, z + 32);
    }
    out.labels.push_back(sum);
  }
  return out;
}

// ---------------------------------------------------------------------------

DeepSet DeepSet::init(std::uint64_t seed) {
  DeepSet m;
  m.widths = {m.in_dim, m.hidden, m.hidden, m.hidden, m.hidden, m.classes};
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < m.widths.size(); ++i) {
    int n_in = m.widths[i], n_out = m.widths[i + 1];
    double limit = std::sqrt(6.0 / (n_in + n_out));
    std::vector<double> w(static_cast<std::size_t>(n_out) * n_in);
    for (double& v : w) v = rng.uniform(-limit, limit);
    m.w.push_back(std::move(w));
    m.b.emplace_back(n_out, 0.0);
  }
  return m;
}

std::size_t DeepSet::param_count() const {
  std::size_t n = 0;
  for (const auto& v : w) n += v.size();
  for (const auto& v : b) n += v.size();
  return n;
}

std::vector<double> DeepSet::forward(const double* z, int d) const {
  std::vector<double> pool(hidden, 0.0);
  for (int e = 0; e < d; ++e) {
    std::vector<double> h(z + static_cast<std::size_t>(e) * in_dim,
                          z + static_cast<std::size_t>(e + 1) * in_dim);
    for (int li = 0; li < 4; ++li) {
      int n_in = widths[li], n_out = widths[li + 1];
      std::vector<double> y(n_out);
      for (int k = 0; k < n_out; ++k) {
        double acc = b[li][k];
        for (int c = 0; c < n_in; ++c) acc += w[li][static_cast<std::size_t>(k) * n_in + c] * h[c];
        y[k] = std::tanh(acc);
      }
      h = std::move(y);
    }
    for (int k = 0; k < hidden; ++k) pool[k] += h[k];
  }
  std::vector<double> logits(classes);
  for (int k = 0; k < classes; ++k) {
    double acc = b[4][k];
    for (int c = 0; c < hidden; ++c) acc += w[4][static_cast<std::size_t>(k) * hidden + c] * pool[c];
    logits[k] = acc;
  }
  return logits;
}

double deepset_backprop(const DeepSet& m, const double* z, int d, int label, double weight,
                        std::vector<std::vector<double>>& gw,
                        std::vector<std::vector<double>>& gb) {
  // forward, keeping every element's post-tanh activations
  std::vector<std::vector<std::vector<double>>> acts(d);  // acts[e][li] after layer li
  std::vector<double> pool(m.hidden, 0.0);
  for (int e = 0; e < d; ++e) {
    std::vector<double> h(z + static_cast<std::size_t>(e) * m.in_dim,
                          z + static_cast<std::size_t>(e + 1) * m.in_dim);
    acts[e].resize(4);
    for (int li = 0; li < 4; ++li) {
      int n_in = m.widths[li], n_out = m.widths[li + 1];
      std::vector<double> y(n_out);
      for (int k = 0; k < n_out; ++k) {
        double acc = m.b[li][k];
        for (int c = 0; c < n_in; ++c)
          acc += m.w[li][static_cast<std::size_t>(k) * n_in + c] * h[c];
        y[k] = std::tanh(acc);
      }
      acts[e][li] = y;
      h = std::move(y);
    }
    for (int k = 0; k < m.hidden; ++k) pool[k] += acts[e][3][k];
  }
  std::vector<double> logits(m.classes);
  for (int k = 0; k < m.classes; ++k) {
    double acc = m.b[4][k];
    for (int c = 0; c < m.hidden; ++c)
      acc += m.w[4][static_cast<std::size_t>(k) * m.hidden + c] * pool[c];
    logits[k] = acc;
  }

  // softmax cross-entropy
  double mx = *std::max_element(logits.begin(), logits.end());
  double zsum = 0.0;
  std::vector<double> p(m.classes);
  for (int k = 0; k < m.classes; ++k) zsum += (p[k] = std::exp(logits[k] - mx));
  for (double& v : p) v /= zsum;
  double loss = -std::log(std::max(p[label], 1e-300));

  std::vector<double> dlog(m.classes);
  for (int k = 0; k < m.classes; ++k) dlog[k] = (p[k] - (k == label ? 1.0 : 0.0)) * weight;
  std::vector<double> dpool(m.hidden, 0.0);
  for (int k = 0; k < m.classes; ++k) {
    gb[4][k] += dlog[k];
    for (int c = 0; c < m.hidden; ++c) {
      gw[4][static_cast<std::size_t>(k) * m.hidden + c] += dlog[k] * pool[c];
      dpool[c] += m.w[4][static_cast<std::size_t>(k) * m.hidden + c] * dlog[k];
    }
  }

  for (int e = 0; e < d; ++e) {
    std::vector<double> dh = dpool;  // gradient at the element's final activation
    for (int li = 3; li >= 0; --li) {
      int n_in = m.widths[li], n_out = m.widths[li + 1];
      // through tanh
      for (int k = 0; k < n_out; ++k) dh[k] *= 1.0 - acts[e][li][k] * acts[e][li][k];
      const double* hin = li == 0 ? z + static_cast<std::size_t>(e) * m.in_dim
                                  : acts[e][li - 1].data();
      std::vector<double> dprev(n_in, 0.0);
      for (int k = 0; k < n_out; ++k) {
        gb[li][k] += dh[k];
        for (int c = 0; c < n_in; ++c) {
          gw[li][static_cast<std::size_t>(k) * n_in + c] += dh[k] * hin[c];
          dprev[c] += m.w[li][static_cast<std::size_t>(k) * n_in + c] * dh[k];
        }
      }
      dh = std::move(dprev);
    }
  }
  return loss * weight;
}

std::vector<double> train_deepset(DeepSet& m, const DigitSumDataset& train, int epochs,
                                  int batch_size, double lr, std::uint64_t seed) {
  const int n = static_cast<int>(train.labels.size());
  std::vector<std::vector<double>> mw, vw, mb, vb;
  for (const auto& v : m.w) {
    mw.emplace_back(v.size(), 0.0);
    vw.emplace_back(v.size(), 0.0);
  }
  for (const auto& v : m.b) {
    mb.emplace_back(v.size(), 0.0);
    vb.emplace_back(v.size(), 0.0);
  }
  long long t = 0;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  std::vector<double> epoch_loss;
  const std::size_t tuple = static_cast<std::size_t>(train.d) * train.feat_dim;
  for (int ep = 0; ep < epochs; ++ep) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int n_batches = 0;
    for (int start = 0; start < n; start += batch_size) {
      int end = std::min(n, start + batch_size);
      int B = end - start;
      std::vector<std::vector<double>> gw, gb;
      for (const auto& v : m.w) gw.emplace_back(v.size(), 0.0);
      for (const auto& v : m.b) gb.emplace_back(v.size(), 0.0);
      double loss = 0.0;
      for (int i = start; i < end; ++i)
        loss += deepset_backprop(m, train.features.data() + order[i] * tuple, train.d,
                                 train.labels[order[i]], 1.0 / B, gw, gb);
      ++t;
      double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
      double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
      for (std::size_t li = 0; li < m.w.size(); ++li) {
        for (std::size_t i = 0; i < m.w[li].size(); ++i) {
          mw[li][i] = 0.9 * mw[li][i] + 0.1 * gw[li][i];
          vw[li][i] = 0.999 * vw[li][i] + 0.001 * gw[li][i] * gw[li][i];
          m.w[li][i] -= lr * (mw[li][i] / bc1) / (std::sqrt(vw[li][i] / bc2) + 1e-8);
        }
        for (std::size_t i = 0; i < m.b[li].size(); ++i) {
          mb[li][i] = 0.9 * mb[li][i] + 0.1 * gb[li][i];
          vb[li][i] = 0.999 * vb[li][i] + 0.001 * gb[li][i] * gb[li][i];
          m.b[li][i] -= lr * (mb[li][i] / bc1) / (std::sqrt(vb[li][i] / bc2) + 1e-8);
        }
      }
      loss_sum += loss;
      ++n_batches;
    }
    epoch_loss.push_back(loss_sum / n_batches);
  }
  return epoch_loss;
}

double deepset_accuracy(const DeepSet& m, const DigitSumDataset& ds) {
  const std::size_t tuple = static_cast<std::size_t>(ds.d) * ds.feat_dim;
  int correct = 0;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    auto logits = m.forward(ds.features.data() + i * tuple, ds.d);
    int arg = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (arg == ds.labels[i]) ++correct;
  }
  return ds.labels.empty() ? 0.0 : static_cast<double>(correct) / ds.labels.size();
}

}  // namespace csnet
