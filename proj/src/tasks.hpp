#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "net.hpp"

namespace csnet {

// ---------------------------------------------------------------------------
// Image classification data

// 28x28 grayscale images in [0,1] with labels in {0..9}.
struct ImageDataset {
  int n = 0;
  std::vector<double> images;  // n * 784
  std::vector<int> labels;
};

// Big-endian IDX files (magic 0x00000803 for images, 0x00000801 for labels).
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const ImageDataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Deterministic synthetic 10-class dataset (blurred jittered strokes around a
// per-class prototype); used when no IDX files are supplied.
ImageDataset synthetic_digits(int per_class, std::uint64_t seed);

// 2x2 average pooling of a 28x28 image -> 196 features.
std::vector<double> downsample2(const double* img784);

// Mutually exclusive, class-balanced, seeded subsets of equal size.
struct SubmodelPartition {
  std::vector<std::vector<int>> subsets;
  int per_class = 0;
};
SubmodelPartition partition_balanced(const ImageDataset& ds, int d, std::uint64_t seed);

// ---------------------------------------------------------------------------
// 2D implicit representation data

struct Image {
  int width = 0, height = 0;
  std::vector<double> rgb;  // h*w*3 in [0,1]
};

Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

// Deterministic smooth procedural test images (index selects the pattern).
Image procedural_image(int index, int size);

// cos/sin features of 2*pi*B*coord for a 2x160 frequency matrix B stored as
// 160 (bx, by) pairs; output is 320-dimensional in [-1,1].
std::vector<double> fourier_features(double x, double y, const std::vector<double>& B);

// Gaussian frequency matrix (scale sigma), 160 pairs.
std::vector<double> make_fourier_matrix(double sigma, std::uint64_t seed);

struct NIRDataset {
  int width = 0, height = 0;
  std::vector<double> coords;  // per pixel: (x, y) in [0,1]^2
  std::vector<double> colors;  // per pixel: r, g, b
  std::vector<double> B;       // 160 frequency pairs
};
NIRDataset build_nir(const Image& img, double sigma, std::uint64_t seed);

// 10*log10(1/MSE), capped at 120 dB for MSE < 1e-12.
double psnr(const std::vector<double>& pred, const std::vector<double>& truth);

// ---------------------------------------------------------------------------
// Sum-of-digits data

// Frozen feature extractor: a small real-valued classifier trained for one
// epoch whose 32-dimensional penultimate activations become digit features.
struct DigitEncoder {
  Network net;  // scalar backend, widths 196 -> 64 -> 32 -> 10
  std::vector<double> encode(const double* img784) const;
};
DigitEncoder train_digit_encoder(const ImageDataset& ds, std::uint64_t seed);

struct DigitSumDataset {
  int d = 0;
  int feat_dim = 32;
  std::vector<double> features;  // n * d * feat_dim
  std::vector<int> labels;       // digit sums, all < 10
};

// Uniformly sampled digit tuples with sum < 10, encoded through `enc`.
DigitSumDataset build_digit_sum(const ImageDataset& ds, const DigitEncoder& enc, int d, int size,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// DeepSet baseline: shared 4-layer tanh MLP per element, sum pooling, linear
// classifier. Hidden width 84.
struct DeepSet {
  int in_dim = 32, hidden = 84, classes = 10;
  // layers 0..3: the shared element network; layer 4: the classifier
  std::vector<std::vector<double>> w, b;
  std::vector<int> widths;  // {in, h, h, h, h, classes}

  static DeepSet init(std::uint64_t seed);
  std::size_t param_count() const;
  std::vector<double> forward(const double* z, int d) const;  // z: d*in_dim
};

// Cross-entropy gradient for one tuple, scaled by `weight`; accumulates into
// gw/gb (same shapes as w/b). Returns the sample loss times weight.
double deepset_backprop(const DeepSet& m, const double* z, int d, int label, double weight,
                        std::vector<std::vector<double>>& gw,
                        std::vector<std::vector<double>>& gb);

// Adam training on a DigitSumDataset; returns per-epoch mean training loss.
std::vector<double> train_deepset(DeepSet& m, const DigitSumDataset& train, int epochs,
                                  int batch_size, double lr, std::uint64_t seed);

double deepset_accuracy(const DeepSet& m, const DigitSumDataset& ds);

}  // namespace csnet
