#include "algebra.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace csnet {

namespace {

long long factorial(int n) {
  long long f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_same(const AlgebraElement& a, const AlgebraElement& b) {
  if (!(a.desc == b.desc)) fail("algebra descriptor mismatch: " + a.desc.str() + " vs " + b.desc.str());
}

}  // namespace

const char* kind_name(AlgebraKind k) {
  switch (k) {
    case AlgebraKind::Diagonal: return "diagonal";
    case AlgebraKind::Dense: return "dense";
    case AlgebraKind::BlockDiagonal: return "blockdiagonal";
    case AlgebraKind::Circulant: return "circulant";
    case AlgebraKind::Group: return "group";
  }
  fail("bad kind");
}

AlgebraKind kind_from_name(const std::string& name) {
  for (AlgebraKind k : {AlgebraKind::Diagonal, AlgebraKind::Dense, AlgebraKind::BlockDiagonal,
                        AlgebraKind::Circulant, AlgebraKind::Group}) {
    if (name == kind_name(k)) return k;
  }
  fail("unknown algebra kind: " + name);
}

AlgebraDescriptor AlgebraDescriptor::diagonal(int d) {
  AlgebraDescriptor a{AlgebraKind::Diagonal, d, {}};
  a.validate();
  return a;
}
AlgebraDescriptor AlgebraDescriptor::dense(int d) {
  AlgebraDescriptor a{AlgebraKind::Dense, d, {}};
  a.validate();
  return a;
}
AlgebraDescriptor AlgebraDescriptor::block_diagonal(std::vector<int> sizes) {
  int d = std::accumulate(sizes.begin(), sizes.end(), 0);
  AlgebraDescriptor a{AlgebraKind::BlockDiagonal, d, std::move(sizes)};
  a.validate();
  return a;
}
AlgebraDescriptor AlgebraDescriptor::circulant(int d) {
  AlgebraDescriptor a{AlgebraKind::Circulant, d, {}};
  a.validate();
  return a;
}
AlgebraDescriptor AlgebraDescriptor::group(int d) {
  AlgebraDescriptor a{AlgebraKind::Group, d, {}};
  a.validate();
  return a;
}

void AlgebraDescriptor::validate() const {
  if (order <= 0) fail("algebra order must be positive");
  if (kind == AlgebraKind::BlockDiagonal) {
    if (block_sizes.empty()) fail("blockdiagonal requires block sizes");
    int sum = 0;
    for (int s : block_sizes) {
      if (s <= 0) fail("block sizes must be positive");
      sum += s;
    }
    if (sum != order) fail("block sizes must sum to the order");
  } else if (!block_sizes.empty()) {
    fail("block sizes only apply to the blockdiagonal kind");
  }
  if (kind == AlgebraKind::Group && order > 6) fail("group kind is limited to S_d with d <= 6");
}

int AlgebraDescriptor::elem_size() const {
  switch (kind) {
    case AlgebraKind::Diagonal: return order;
    case AlgebraKind::Dense: return order * order;
    case AlgebraKind::BlockDiagonal: {
      int n = 0;
      for (int s : block_sizes) n += s * s;
      return n;
    }
    case AlgebraKind::Circulant: return order;
    case AlgebraKind::Group: return static_cast<int>(factorial(order));
  }
  fail("bad kind");
}

int AlgebraDescriptor::rep_dim() const {
  return kind == AlgebraKind::Group ? static_cast<int>(factorial(order)) : order;
}

int AlgebraDescriptor::submodel_count() const {
  if (kind == AlgebraKind::Group) fail("group kind has no scalar sub-model slots");
  return order;
}

std::string AlgebraDescriptor::str() const {
  std::string s = std::string(kind_name(kind)) + ":" + std::to_string(order);
  if (kind == AlgebraKind::BlockDiagonal) {
    s += "[";
    for (std::size_t i = 0; i < block_sizes.size(); ++i)
      s += (i ? "," : "") + std::to_string(block_sizes[i]);
    s += "]";
  }
  return s;
}

const SymmetricGroup& SymmetricGroup::get(int d) {
  static std::mutex mu;
  static std::map<int, SymmetricGroup> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;
  if (d <= 0 || d > 6) fail("symmetric group supported for 1 <= d <= 6");

  SymmetricGroup g;
  g.d = d;
  std::vector<int> p(d);
  std::iota(p.begin(), p.end(), 0);
  std::map<std::vector<int>, int> index;
  do {
    index[p] = static_cast<int>(g.elements.size());
    g.elements.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));

  int n = g.size();
  g.compose.assign(n, std::vector<int>(n));
  g.inverse.assign(n, -1);
  std::vector<int> tmp(d), inv(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < d; ++k) tmp[k] = g.elements[i][g.elements[j][k]];
      g.compose[i][j] = index.at(tmp);
    }
    for (int k = 0; k < d; ++k) inv[g.elements[i][k]] = k;
    g.inverse[i] = index.at(inv);
  }
  return cache.emplace(d, std::move(g)).first->second;
}

AlgebraElement::AlgebraElement(AlgebraDescriptor d, std::vector<double> v)
    : desc(std::move(d)), data(std::move(v)) {
  desc.validate();
  if (static_cast<int>(data.size()) != desc.elem_size())
    fail("element storage size does not match descriptor " + desc.str());
}

AlgebraElement zero_element(const AlgebraDescriptor& desc) {
  return AlgebraElement(desc, std::vector<double>(desc.elem_size(), 0.0));
}

AlgebraElement identity_element(const AlgebraDescriptor& desc) {
  AlgebraElement e = zero_element(desc);
  switch (desc.kind) {
    case AlgebraKind::Diagonal:
      std::fill(e.data.begin(), e.data.end(), 1.0);
      break;
    case AlgebraKind::Dense:
      for (int i = 0; i < desc.order; ++i) e.data[i * desc.order + i] = 1.0;
      break;
    case AlgebraKind::BlockDiagonal: {
      int off = 0;
      for (int s : desc.block_sizes) {
        for (int i = 0; i < s; ++i) e.data[off + i * s + i] = 1.0;
        off += s * s;
      }
      break;
    }
    case AlgebraKind::Circulant:
      e.data[0] = 1.0;
      break;
    case AlgebraKind::Group:
      e.data[0] = 1.0;  // delta at the identity permutation
      break;
  }
  return e;
}

AlgebraElement algebra_add(const AlgebraElement& a, const AlgebraElement& b) {
  check_same(a, b);
  AlgebraElement c = a;
  for (int i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

AlgebraElement algebra_sub(const AlgebraElement& a, const AlgebraElement& b) {
  check_same(a, b);
  AlgebraElement c = a;
  for (int i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

AlgebraElement algebra_scale(double s, const AlgebraElement& a) {
  AlgebraElement c = a;
  for (double& v : c.data) v *= s;
  return c;
}

AlgebraElement algebra_mul(const AlgebraElement& a, const AlgebraElement& b) {
  check_same(a, b);
  const AlgebraDescriptor& d = a.desc;
  AlgebraElement c = zero_element(d);
  switch (d.kind) {
    case AlgebraKind::Diagonal:
      for (int i = 0; i < d.order; ++i) c.data[i] = a.data[i] * b.data[i];
      break;
    case AlgebraKind::Dense: {
      using M = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> C(
          c.data.data(), d.order, d.order);
      C = M(a.data.data(), d.order, d.order) * M(b.data.data(), d.order, d.order);
      break;
    }
    case AlgebraKind::BlockDiagonal: {
      int off = 0;
      for (int s : d.block_sizes) {
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j) {
            double acc = 0.0;
            for (int k = 0; k < s; ++k) acc += a.data[off + i * s + k] * b.data[off + k * s + j];
            c.data[off + i * s + j] = acc;
          }
        off += s * s;
      }
      break;
    }
    case AlgebraKind::Circulant:
      // circular convolution of first columns
      for (int n = 0; n < d.order; ++n) {
        double acc = 0.0;
        for (int q = 0; q < d.order; ++q) acc += a.data[(n - q + d.order) % d.order] * b.data[q];
        c.data[n] = acc;
      }
      break;
    case AlgebraKind::Group: {
      const SymmetricGroup& G = SymmetricGroup::get(d.order);
      int n = G.size();
      for (int g = 0; g < n; ++g) {
        double acc = 0.0;
        for (int h = 0; h < n; ++h) acc += a.data[h] * b.data[G.compose[G.inverse[h]][g]];
        c.data[g] = acc;
      }
      break;
    }
  }
  return c;
}

AlgebraElement involution(const AlgebraElement& a) {
  const AlgebraDescriptor& d = a.desc;
  AlgebraElement c = a;
  switch (d.kind) {
    case AlgebraKind::Diagonal:
      break;
    case AlgebraKind::Dense:
      for (int i = 0; i < d.order; ++i)
        for (int j = 0; j < d.order; ++j) c.data[i * d.order + j] = a.data[j * d.order + i];
      break;
    case AlgebraKind::BlockDiagonal: {
      int off = 0;
      for (int s : d.block_sizes) {
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j) c.data[off + i * s + j] = a.data[off + j * s + i];
        off += s * s;
      }
      break;
    }
    case AlgebraKind::Circulant:
      for (int i = 1; i < d.order; ++i) c.data[i] = a.data[d.order - i];
      break;
    case AlgebraKind::Group: {
      const SymmetricGroup& G = SymmetricGroup::get(d.order);
      for (int g = 0; g < G.size(); ++g) c.data[g] = a.data[G.inverse[g]];
      break;
    }
  }
  return c;
}

std::vector<std::complex<double>> circulant_dft(const AlgebraElement& a) {
  if (a.desc.kind != AlgebraKind::Circulant) fail("circulant_dft requires a circulant element");
  int d = a.desc.order;
  std::vector<std::complex<double>> out(d);
  for (int k = 0; k < d; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < d; ++i) {
      double ang = 2.0 * M_PI * static_cast<double>(i) * static_cast<double>(k) / d;
      acc += a.data[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

double operator_norm(const AlgebraElement& a) {
  const AlgebraDescriptor& d = a.desc;
  switch (d.kind) {
    case AlgebraKind::Diagonal: {
      double m = 0.0;
      for (double v : a.data) m = std::max(m, std::abs(v));
      return m;
    }
    case AlgebraKind::Circulant: {
      double m = 0.0;
      for (const auto& ev : circulant_dft(a)) m = std::max(m, std::abs(ev));
      return m;
    }
    case AlgebraKind::BlockDiagonal: {
      double m = 0.0;
      int off = 0;
      for (int s : d.block_sizes) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> B(
            a.data.data() + off, s, s);
        m = std::max(m, Eigen::JacobiSVD<Eigen::MatrixXd>(B).singularValues()(0));
        off += s * s;
      }
      return m;
    }
    case AlgebraKind::Dense:
    case AlgebraKind::Group: {
      std::vector<double> r = realize(a);
      int n = d.rep_dim();
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
          r.data(), n, n);
      if (n <= 32) return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
      return Eigen::BDCSVD<Eigen::MatrixXd>(M).singularValues()(0);
    }
  }
  fail("bad kind");
}

AlgebraElement embed_submodel(const AlgebraDescriptor& desc, int j, double v) {
  if (desc.kind == AlgebraKind::Group) fail("embed_submodel is undefined for the group kind");
  if (j < 0 || j >= desc.submodel_count()) fail("sub-model index out of range");
  AlgebraElement e = zero_element(desc);
  switch (desc.kind) {
    case AlgebraKind::Diagonal:
      e.data[j] = v;
      break;
    case AlgebraKind::Dense:
      e.data[j * desc.order + j] = v;
      break;
    case AlgebraKind::BlockDiagonal: {
      int off = 0, base = 0;
      for (int s : desc.block_sizes) {
        if (j < base + s) {
          int r = j - base;
          e.data[off + r * s + r] = v;
          break;
        }
        off += s * s;
        base += s;
      }
      break;
    }
    case AlgebraKind::Circulant: {
      // real element whose spectrum is v at Fourier slot j (and the
      // conjugate-mirror slot, keeping the storage real)
      int d = desc.order;
      int jm = (d - j) % d;
      for (int i = 0; i < d; ++i) {
        double ang = 2.0 * M_PI * static_cast<double>(i) * static_cast<double>(j) / d;
        double val = v * std::cos(ang) / d;
        if (jm != j) val *= 2.0;
        e.data[i] = val;
      }
      break;
    }
    case AlgebraKind::Group:
      break;  // unreachable
  }
  return e;
}

double extract_submodel(const AlgebraElement& a, int j) {
  const AlgebraDescriptor& desc = a.desc;
  if (desc.kind == AlgebraKind::Group) fail("extract_submodel is undefined for the group kind");
  if (j < 0 || j >= desc.submodel_count()) fail("sub-model index out of range");
  switch (desc.kind) {
    case AlgebraKind::Diagonal:
      return a.data[j];
    case AlgebraKind::Dense:
      return a.data[j * desc.order + j];
    case AlgebraKind::BlockDiagonal: {
      int off = 0, base = 0;
      for (int s : desc.block_sizes) {
        if (j < base + s) {
          int r = j - base;
          return a.data[off + r * s + r];
        }
        off += s * s;
        base += s;
      }
      return 0.0;
    }
    case AlgebraKind::Circulant:
      return circulant_dft(a)[j].real();
    case AlgebraKind::Group:
      break;
  }
  return 0.0;
}

std::vector<AlgebraElement> group_lift(const SymmetricGroup& G,
                                       const std::vector<std::vector<double>>& z) {
  if (static_cast<int>(z.size()) != G.d) fail("group_lift expects d feature vectors");
  std::size_t n = z.empty() ? 0 : z[0].size();
  for (const auto& v : z)
    if (v.size() != n) fail("group_lift feature vectors must share a dimension");
  AlgebraDescriptor desc = AlgebraDescriptor::group(G.d);
  std::vector<AlgebraElement> out;
  out.reserve(G.d * n);
  for (int k = 0; k < G.d; ++k) {
    for (std::size_t c = 0; c < n; ++c) {
      AlgebraElement e = zero_element(desc);
      for (int g = 0; g < G.size(); ++g) {
        // (g . z)[k] = z[g^{-1}(k)]
        int src = G.elements[G.inverse[g]][k];
        e.data[g] = z[src][c];
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

const Realization& realization_for(const AlgebraDescriptor& desc) {
  static std::mutex mu;
  static std::map<std::string, Realization> cache;
  std::lock_guard<std::mutex> lock(mu);
  std::string key = desc.str();
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  Realization r;
  int D = desc.rep_dim();
  r.dim = D;
  r.idx.assign(static_cast<std::size_t>(D) * D, -1);
  switch (desc.kind) {
    case AlgebraKind::Diagonal:
      for (int p = 0; p < D; ++p) r.idx[p * D + p] = p;
      break;
    case AlgebraKind::Dense:
      for (int p = 0; p < D; ++p)
        for (int q = 0; q < D; ++q) r.idx[p * D + q] = p * D + q;
      break;
    case AlgebraKind::BlockDiagonal: {
      int off = 0, base = 0;
      for (int s : desc.block_sizes) {
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j) r.idx[(base + i) * D + (base + j)] = off + i * s + j;
        off += s * s;
        base += s;
      }
      break;
    }
    case AlgebraKind::Circulant:
      for (int p = 0; p < D; ++p)
        for (int q = 0; q < D; ++q) r.idx[p * D + q] = (p - q + D) % D;
      break;
    case AlgebraKind::Group: {
      const SymmetricGroup& G = SymmetricGroup::get(desc.order);
      for (int p = 0; p < D; ++p)
        for (int q = 0; q < D; ++q) r.idx[p * D + q] = G.compose[p][G.inverse[q]];
      r.activate_all = true;
      break;
    }
  }
  for (int p = 0; p < D; ++p) {
    int s = r.idx[p * D + p];
    if (s >= 0 && std::find(r.diag_slots.begin(), r.diag_slots.end(), s) == r.diag_slots.end())
      r.diag_slots.push_back(s);
  }
  return cache.emplace(std::move(key), std::move(r)).first->second;
}

std::vector<double> realize(const AlgebraElement& a) {
  const Realization& r = realization_for(a.desc);
  std::vector<double> m(r.idx.size(), 0.0);
  for (std::size_t i = 0; i < r.idx.size(); ++i)
    if (r.idx[i] >= 0) m[i] = a.data[r.idx[i]];
  return m;
}

namespace {

void put_u32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  if (off + 4 > len) fail("truncated serialized data");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[off + i]) << (8 * i);
  off += 4;
  return v;
}

}  // namespace

void serialize_descriptor(const AlgebraDescriptor& desc, std::vector<std::uint8_t>& out) {
  put_u32(static_cast<std::uint32_t>(desc.kind), out);
  put_u32(static_cast<std::uint32_t>(desc.order), out);
  put_u32(static_cast<std::uint32_t>(desc.block_sizes.size()), out);
  for (int s : desc.block_sizes) put_u32(static_cast<std::uint32_t>(s), out);
}

AlgebraDescriptor deserialize_descriptor(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  AlgebraDescriptor d;
  std::uint32_t kind = get_u32(buf, len, off);
  if (kind > 4) fail("bad kind tag in serialized descriptor");
  d.kind = static_cast<AlgebraKind>(kind);
  d.order = static_cast<int>(get_u32(buf, len, off));
  std::uint32_t m = get_u32(buf, len, off);
  for (std::uint32_t i = 0; i < m; ++i)
    d.block_sizes.push_back(static_cast<int>(get_u32(buf, len, off)));
  d.validate();
  return d;
}

void serialize_element(const AlgebraElement& a, std::vector<std::uint8_t>& out) {
  serialize_descriptor(a.desc, out);
  static_assert(sizeof(double) == 8);
  for (double v : a.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

AlgebraElement deserialize_element(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  AlgebraDescriptor d = deserialize_descriptor(buf, len, off);
  int n = d.elem_size();
  if (off + 8u * n > len) fail("truncated serialized element");
  std::vector<double> data(n);
  for (int i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[off + b]) << (8 * b);
    off += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    if (!std::isfinite(v)) fail("non-finite value in serialized element");
    data[i] = v;
  }
  return AlgebraElement(std::move(d), std::move(data));
}

}  // namespace csnet
