#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace hoq {

using cplx = std::complex<double>;

inline constexpr double kDefaultTol = 1e-9;

// Row-major dense complex matrix. Multi-qubit bases are indexed
// lexicographically: |b1 ... bk> sits at b1*2^{k-1} + ... + bk.
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> a;

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}
  ComplexMatrix(std::size_t r, std::size_t c, std::vector<cplx> entries);

  cplx &at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const cplx &at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  bool square() const { return rows == cols; }

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix zero(std::size_t r, std::size_t c);
};

ComplexMatrix operator+(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator-(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator*(cplx s, const ComplexMatrix &a);

ComplexMatrix adjoint(const ComplexMatrix &m);
cplx trace(const ComplexMatrix &m);
ComplexMatrix tensor(const ComplexMatrix &a, const ComplexMatrix &b);
bool approx_equal(const ComplexMatrix &a, const ComplexMatrix &b, double tol);

// Eigenvalues of a (near-)Hermitian matrix, ascending.
std::vector<double> hermitian_eigenvalues(const ComplexMatrix &m);
// Sum of singular values.
double trace_norm(const ComplexMatrix &m);

bool is_hermitian(const ComplexMatrix &m, double tol);
bool is_positive(const ComplexMatrix &m, double tol);
bool is_density(const ComplexMatrix &m, double tol);
bool is_unitary(const ComplexMatrix &u, double tol);

// b - a positive within tol, for Hermitian a, b of equal dimension.
bool loewner_leq(const ComplexMatrix &a, const ComplexMatrix &b, double tol);

// Shares its matrix storage: copies are refcount bumps, every
// transformation builds a fresh matrix. Trace is cached at construction.
struct DensityMatrix {
  std::size_t dim = 1;

  DensityMatrix();
  explicit DensityMatrix(ComplexMatrix m);

  const ComplexMatrix &mat() const { return *mat_; }
  double trace_real() const { return tr_; }
  bool validate(double tol) const { return is_density(mat(), tol); }

  // 1x1 state [p]; DM_1 scalars double as probabilities.
  static DensityMatrix scalar(double p);
  static DensityMatrix zero(std::size_t dim);

 private:
  std::shared_ptr<const ComplexMatrix> mat_;
  double tr_ = 0.0;
};

bool loewner_leq(const DensityMatrix &a, const DensityMatrix &b, double tol);

// Quantum operation in operator-sum form; every Kraus factor is out_dim x in_dim.
struct QuantumOp {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  std::vector<ComplexMatrix> kraus;

  QuantumOp() = default;
  QuantumOp(std::size_t in, std::size_t out, std::vector<ComplexMatrix> ks);

  static QuantumOp identity(std::size_t dim);
  static QuantumOp zero(std::size_t in, std::size_t out);
  // rho |-> U rho U^dag
  static QuantumOp unitary(const ComplexMatrix &u);
};

DensityMatrix apply_qo(const QuantumOp &e, const DensityMatrix &rho);
QuantumOp qo_compose(const QuantumOp &f, const QuantumOp &e);
ComplexMatrix m_matrix(const QuantumOp &e);

// Last element of a Loewner-increasing chain once consecutive trace-norm
// distance drops below tol; throws on an order violation.
DensityMatrix chain_sup(const std::vector<DensityMatrix> &chain, double tol);

// <b_i| as a 2^{n-1} x 2^n matrix: I_{2^{i-1}} (x) <b| (x) I_{2^{n-i}}.
ComplexMatrix measurement_bra(std::size_t n, std::size_t i, int b);

// H, X, Y, Z, S, T, CNOT; throws on unknown names.
ComplexMatrix gate_by_name(const std::string &name);
// |0><0|, |1><1|, |+><+| by the names "0", "1", "+".
DensityMatrix ket_density(const std::string &name);

}  // namespace hoq
