#include "net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "rng.hpp"

namespace csnet {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

AlgebraTensor::AlgebraTensor(AlgebraDescriptor d, std::vector<int> sh)
    : desc(std::move(d)), shape(std::move(sh)) {
  desc.validate();
  if (shape.empty() || shape.size() > 2) fail("tensor shape must be 1- or 2-dimensional");
  for (int s : shape)
    if (s <= 0) fail("tensor dimensions must be positive");
  data.assign(static_cast<std::size_t>(entries()) * desc.elem_size(), 0.0);
}

int AlgebraTensor::entries() const {
  int n = 1;
  for (int s : shape) n *= s;
  return n;
}

AlgebraElement AlgebraTensor::get(int e) const {
  int S = desc.elem_size();
  return AlgebraElement(desc, std::vector<double>(data.begin() + static_cast<std::size_t>(e) * S,
                                                  data.begin() + static_cast<std::size_t>(e + 1) * S));
}

void AlgebraTensor::set(int e, const AlgebraElement& v) {
  if (!(v.desc == desc)) fail("tensor/element descriptor mismatch");
  int S = desc.elem_size();
  std::copy(v.data.begin(), v.data.end(), data.begin() + static_cast<std::size_t>(e) * S);
}

AlgebraTensor AlgebraTensor::from_elements(const AlgebraDescriptor& d,
                                           const std::vector<AlgebraElement>& elems) {
  AlgebraTensor t(d, {static_cast<int>(elems.size())});
  for (std::size_t i = 0; i < elems.size(); ++i) t.set(static_cast<int>(i), elems[i]);
  return t;
}

double scalar_activate(Activation a, double x) {
  switch (a) {
    case Activation::LeakyReLU: return x >= 0.0 ? x : kLeakyReluSlope * x;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: return x;
  }
  fail("bad activation");
}

double scalar_activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::LeakyReLU: return x >= 0.0 ? 1.0 : kLeakyReluSlope;
    case Activation::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  fail("bad activation");
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) {
    n += l.weights.data.size();
    if (l.bias) n += l.bias->data.size();
  }
  return n;
}

AlgebraTensor affine_apply(const AlgebraTensor& W, const AlgebraTensor* b,
                           const AlgebraTensor& x) {
  if (!(W.desc == x.desc)) fail("affine: descriptor mismatch");
  if (W.shape.size() != 2 || x.shape.size() != 1) fail("affine: W must be a matrix and x a vector");
  if (W.cols() != x.rows()) fail("affine: widths do not chain");
  if (b && (!(b->desc == W.desc) || b->entries() != W.rows()))
    fail("affine: bias shape mismatch");

  int S = W.desc.elem_size();
  AlgebraTensor y(W.desc, {W.rows()});
  for (int k = 0; k < W.rows(); ++k) {
    AlgebraElement acc = b ? b->get(k) : zero_element(W.desc);
    for (int l = 0; l < W.cols(); ++l)
      acc = algebra_add(acc, algebra_mul(W.get(k, l), x.get(l)));
    std::copy(acc.data.begin(), acc.data.end(), y.data.begin() + static_cast<std::size_t>(k) * S);
  }
  return y;
}

AlgebraTensor activate(const AlgebraTensor& x, Activation a) {
  if (a == Activation::Identity) return x;
  const Realization& r = realization_for(x.desc);
  AlgebraTensor y = x;
  int S = x.desc.elem_size();
  for (int e = 0; e < x.entries(); ++e) {
    double* elem = y.data.data() + static_cast<std::size_t>(e) * S;
    if (r.activate_all) {
      for (int s = 0; s < S; ++s) elem[s] = scalar_activate(a, elem[s]);
    } else {
      for (int s : r.diag_slots) elem[s] = scalar_activate(a, elem[s]);
    }
  }
  return y;
}

AlgebraTensor forward(const Network& net, const AlgebraTensor& x) {
  return forward_partial(net, x, static_cast<int>(net.layers.size()));
}

AlgebraTensor forward_partial(const Network& net, const AlgebraTensor& x, int depth) {
  if (!(x.desc == net.desc)) fail("forward: descriptor mismatch");
  AlgebraTensor h = x;
  for (int i = 0; i < depth; ++i) {
    const Layer& l = net.layers[i];
    h = affine_apply(l.weights, l.bias ? &*l.bias : nullptr, h);
    h = activate(h, l.activation);
  }
  return h;
}

Network init_network(const AlgebraDescriptor& desc, const std::vector<int>& widths,
                     std::uint64_t seed, const InitOptions& opts) {
  desc.validate();
  if (widths.size() < 2) fail("init: need at least input and output widths");
  for (int w : widths)
    if (w <= 0) fail("init: widths must be positive");

  bool with_bias = opts.bias.value_or(desc.kind != AlgebraKind::Group);
  const Realization& r = realization_for(desc);
  int S = desc.elem_size();
  std::vector<char> is_diag(S, 0);
  if (desc.kind == AlgebraKind::Group) {
    is_diag[0] = 1;  // identity coefficient
  } else {
    for (int s : r.diag_slots) is_diag[s] = 1;
  }

  Rng rng(seed);
  Network net;
  net.desc = desc;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    int fan_in = widths[i], fan_out = widths[i + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Layer layer;
    layer.weights = AlgebraTensor(desc, {fan_out, fan_in});
    for (int e = 0; e < layer.weights.entries(); ++e)
      for (int s = 0; s < S; ++s) {
        double v = rng.uniform(-limit, limit);
        if (!is_diag[s]) v *= opts.offdiag_scale;
        layer.weights.data[static_cast<std::size_t>(e) * S + s] = v;
      }
    if (with_bias) layer.bias = AlgebraTensor(desc, {fan_out});
    layer.activation = (i + 2 == widths.size()) ? opts.last_activation : opts.activation;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void serialize_tensor(const AlgebraTensor& t, std::vector<std::uint8_t>& out) {
  serialize_descriptor(t.desc, out);
  out.push_back(static_cast<std::uint8_t>(t.shape.size()));
  auto put_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  for (int s : t.shape) put_u32(static_cast<std::uint32_t>(s));
  for (double v : t.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

AlgebraTensor deserialize_tensor(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  AlgebraDescriptor desc = deserialize_descriptor(buf, len, off);
  if (off >= len) fail("truncated serialized tensor");
  int ndim = buf[off++];
  if (ndim < 1 || ndim > 2) fail("bad tensor rank");
  auto get_u32 = [buf, len, &off]() {
    if (off + 4 > len) fail("truncated serialized tensor");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[off + i]) << (8 * i);
    off += 4;
    return v;
  };
  std::vector<int> shape;
  for (int i = 0; i < ndim; ++i) shape.push_back(static_cast<int>(get_u32()));
  AlgebraTensor t(desc, shape);
  for (double& v : t.data) {
    if (off + 8 > len) fail("truncated serialized tensor");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[off + b]) << (8 * b);
    off += 8;
    std::memcpy(&v, &bits, 8);
    if (!std::isfinite(v)) fail("non-finite value in serialized tensor");
  }
  return t;
}

}  // namespace csnet
