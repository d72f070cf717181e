#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace csnet {

// Finite-dimensional C*-algebra backends. Every element is stored as a flat
// real vector; the meaning of the storage depends on the kind:
//   Diagonal      d scalars, the diagonal
//   Dense         d*d scalars, row-major
//   BlockDiagonal concatenated row-major blocks of sizes d_1..d_m
//   Circulant     d scalars, the first column
//   Group         d! scalars, one per element of S_d (lexicographic order)
enum class AlgebraKind : std::uint32_t {
  Diagonal = 0,
  Dense = 1,
  BlockDiagonal = 2,
  Circulant = 3,
  Group = 4,
};

const char* kind_name(AlgebraKind k);
AlgebraKind kind_from_name(const std::string& name);

struct AlgebraDescriptor {
  AlgebraKind kind = AlgebraKind::Diagonal;
  int order = 1;                 // d; for Group, the d of S_d
  std::vector<int> block_sizes;  // BlockDiagonal only, sums to order

  static AlgebraDescriptor diagonal(int d);
  static AlgebraDescriptor dense(int d);
  static AlgebraDescriptor block_diagonal(std::vector<int> sizes);
  static AlgebraDescriptor circulant(int d);
  static AlgebraDescriptor group(int d);

  void validate() const;  // throws std::invalid_argument on a bad descriptor

  int elem_size() const;  // scalars per element
  int rep_dim() const;    // matrix order of the regular realization
  bool is_matrix_kind() const { return kind != AlgebraKind::Group; }

  // Number of scalar sub-models carried by one element: the d diagonal
  // slots for matrix kinds, the d Fourier slots for Circulant.
  int submodel_count() const;

  bool operator==(const AlgebraDescriptor& o) const = default;
  std::string str() const;
};

// Enumerated symmetric group S_d with composition and inverse tables.
// elements[0] is the identity; elements are in lexicographic order.
struct SymmetricGroup {
  int d = 0;
  std::vector<std::vector<int>> elements;  // images: elements[i][k] = sigma_i(k)
  std::vector<std::vector<int>> compose;   // compose[i][j] = index of sigma_i . sigma_j
  std::vector<int> inverse;

  int size() const { return static_cast<int>(elements.size()); }

  // Cached per d; d <= 6.
  static const SymmetricGroup& get(int d);
};

struct AlgebraElement {
  AlgebraDescriptor desc;
  std::vector<double> data;

  AlgebraElement() = default;
  AlgebraElement(AlgebraDescriptor d, std::vector<double> v);

  double operator[](int i) const { return data[i]; }
  double& operator[](int i) { return data[i]; }
  int size() const { return static_cast<int>(data.size()); }
};

AlgebraElement zero_element(const AlgebraDescriptor& desc);
AlgebraElement identity_element(const AlgebraDescriptor& desc);

AlgebraElement algebra_add(const AlgebraElement& a, const AlgebraElement& b);
AlgebraElement algebra_sub(const AlgebraElement& a, const AlgebraElement& b);
AlgebraElement algebra_scale(double s, const AlgebraElement& a);
AlgebraElement algebra_mul(const AlgebraElement& a, const AlgebraElement& b);
AlgebraElement involution(const AlgebraElement& a);

// Largest singular value of the regular realization. For Circulant this is
// the max modulus over the DFT eigenvalues; for Group, the operator norm of
// the left-regular-representation matrix.
double operator_norm(const AlgebraElement& a);

// Eigenvalues of a circulant element: k-th value = sum_i a_i w^((i-1)k),
// w = exp(2 pi i / d).
std::vector<std::complex<double>> circulant_dft(const AlgebraElement& a);

// Place a scalar on sub-model slot j (diagonal slot for matrix kinds,
// Fourier slot for Circulant). extract_submodel is its left inverse.
// Undefined for the Group kind (throws).
AlgebraElement embed_submodel(const AlgebraDescriptor& desc, int j, double v);
double extract_submodel(const AlgebraElement& a, int j);

// Lift d feature vectors (each of dimension n) into d*n Group-kind elements
// over S_d: element (k*n + c) evaluated at g is coordinate c of the feature
// block that g moves into slot k, i.e. z[g^{-1}(k)][c].
std::vector<AlgebraElement> group_lift(const SymmetricGroup& G,
                                       const std::vector<std::vector<double>>& z);

// Linear index map from element storage onto the regular realization matrix:
// realization[p][q] = data[idx[p*dim+q]] (zero where idx is -1).
struct Realization {
  int dim = 0;
  std::vector<int> idx;         // dim*dim entries, storage slot or -1
  std::vector<int> diag_slots;  // storage slots on the matrix diagonal (deduped)
  bool activate_all = false;    // Group: nonlinearity hits every stored value
};

const Realization& realization_for(const AlgebraDescriptor& desc);

// Row-major dim x dim realization matrix of a.
std::vector<double> realize(const AlgebraElement& a);

// Serialization: descriptor header (kind, order, block sizes as u32 LE)
// followed by the storage as little-endian 64-bit floats.
void serialize_descriptor(const AlgebraDescriptor& desc, std::vector<std::uint8_t>& out);
AlgebraDescriptor deserialize_descriptor(const std::uint8_t* buf, std::size_t len, std::size_t& off);
void serialize_element(const AlgebraElement& a, std::vector<std::uint8_t>& out);
AlgebraElement deserialize_element(const std::uint8_t* buf, std::size_t len, std::size_t& off);

}  // namespace csnet
