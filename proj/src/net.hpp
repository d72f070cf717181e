#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "algebra.hpp"

namespace csnet {

// Vector or matrix with algebra-valued entries. Storage is flat,
// entry-major: entry e occupies [e*S, (e+1)*S) where S = desc.elem_size().
struct AlgebraTensor {
  AlgebraDescriptor desc;
  std::vector<int> shape;  // (len) or (rows, cols)
  std::vector<double> data;

  AlgebraTensor() = default;
  AlgebraTensor(AlgebraDescriptor d, std::vector<int> sh);

  int entries() const;
  int rows() const { return shape[0]; }
  int cols() const { return shape.size() == 2 ? shape[1] : 1; }

  AlgebraElement get(int e) const;
  void set(int e, const AlgebraElement& v);
  AlgebraElement get(int r, int c) const { return get(r * cols() + c); }
  void set(int r, int c, const AlgebraElement& v) { set(r * cols() + c, v); }

  static AlgebraTensor from_elements(const AlgebraDescriptor& d,
                                     const std::vector<AlgebraElement>& elems);
};

enum class Activation : std::uint32_t { LeakyReLU = 0, Tanh = 1, Identity = 2 };

constexpr double kLeakyReluSlope = 0.01;

double scalar_activate(Activation a, double x);
double scalar_activate_grad(Activation a, double x);

struct LayerSpec {
  int in_width = 0;
  int out_width = 0;
  bool has_bias = true;
  Activation activation = Activation::LeakyReLU;
};

struct Layer {
  AlgebraTensor weights;             // out_width x in_width
  std::optional<AlgebraTensor> bias; // out_width
  Activation activation = Activation::LeakyReLU;
};

struct Network {
  AlgebraDescriptor desc;
  std::vector<Layer> layers;

  int in_width() const { return layers.front().weights.cols(); }
  int out_width() const { return layers.back().weights.rows(); }
  std::size_t param_count() const;  // scalars
};

// y_k = sum_l W[k,l] x[l] (+ b[k])
AlgebraTensor affine_apply(const AlgebraTensor& W, const AlgebraTensor* b,
                           const AlgebraTensor& x);

// Matrix kinds: the scalar nonlinearity hits the diagonal entries of each
// element, off-diagonal entries pass through. Group kind: elementwise on all
// stored values.
AlgebraTensor activate(const AlgebraTensor& x, Activation a);

AlgebraTensor forward(const Network& net, const AlgebraTensor& x);

// Forward through the first `depth` layers only (activations included).
AlgebraTensor forward_partial(const Network& net, const AlgebraTensor& x, int depth);

struct InitOptions {
  double offdiag_scale = 0.1;
  // bias default: on for matrix kinds, off for the group kind
  std::optional<bool> bias;
  Activation activation = Activation::LeakyReLU;
  Activation last_activation = Activation::Identity;
};

// Deterministic per seed. Diagonal slots (the identity coefficient for the
// group kind) draw Glorot-uniform over the real widths; every other slot
// draws at offdiag_scale times that. Biases start at zero.
Network init_network(const AlgebraDescriptor& desc, const std::vector<int>& widths,
                     std::uint64_t seed, const InitOptions& opts = {});

void serialize_tensor(const AlgebraTensor& t, std::vector<std::uint8_t>& out);
AlgebraTensor deserialize_tensor(const std::uint8_t* buf, std::size_t len, std::size_t& off);

}  // namespace csnet
