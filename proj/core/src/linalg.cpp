#include "hoq/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hoq {

namespace {

Eigen::MatrixXcd to_eigen(const ComplexMatrix &m) {
  Eigen::MatrixXcd e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(i, j) = m.at(i, j);
  return e;
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t r, std::size_t c, std::vector<cplx> entries)
    : rows(r), cols(c), a(std::move(entries)) {
  if (a.size() != rows * cols)
    throw std::invalid_argument("ComplexMatrix: entry count != rows*cols");
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::zero(std::size_t r, std::size_t c) {
  return ComplexMatrix(r, c);
}

ComplexMatrix operator+(const ComplexMatrix &a, const ComplexMatrix &b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("matrix +: shape mismatch");
  ComplexMatrix r(a.rows, a.cols);
  for (std::size_t k = 0; k < r.a.size(); ++k) r.a[k] = a.a[k] + b.a[k];
  return r;
}

ComplexMatrix operator-(const ComplexMatrix &a, const ComplexMatrix &b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("matrix -: shape mismatch");
  ComplexMatrix r(a.rows, a.cols);
  for (std::size_t k = 0; k < r.a.size(); ++k) r.a[k] = a.a[k] - b.a[k];
  return r;
}

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b) {
  if (a.cols != b.rows) throw std::invalid_argument("matrix *: shape mismatch");
  ComplexMatrix r(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      cplx aik = a.at(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols; ++j) r.at(i, j) += aik * b.at(k, j);
    }
  return r;
}

ComplexMatrix operator*(cplx s, const ComplexMatrix &a) {
  ComplexMatrix r = a;
  for (auto &x : r.a) x *= s;
  return r;
}

ComplexMatrix adjoint(const ComplexMatrix &m) {
  ComplexMatrix r(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) r.at(j, i) = std::conj(m.at(i, j));
  return r;
}

cplx trace(const ComplexMatrix &m) {
  if (!m.square()) throw std::invalid_argument("trace: non-square");
  cplx t{};
  for (std::size_t i = 0; i < m.rows; ++i) t += m.at(i, i);
  return t;
}

ComplexMatrix tensor(const ComplexMatrix &a, const ComplexMatrix &b) {
  ComplexMatrix r(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) {
      cplx aij = a.at(i, j);
      if (aij == cplx{}) continue;
      for (std::size_t k = 0; k < b.rows; ++k)
        for (std::size_t l = 0; l < b.cols; ++l)
          r.at(i * b.rows + k, j * b.cols + l) = aij * b.at(k, l);
    }
  return r;
}

bool approx_equal(const ComplexMatrix &a, const ComplexMatrix &b, double tol) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t k = 0; k < a.a.size(); ++k)
    if (std::abs(a.a[k] - b.a[k]) > tol) return false;
  return true;
}

std::vector<double> hermitian_eigenvalues(const ComplexMatrix &m) {
  if (!m.square()) throw std::invalid_argument("hermitian_eigenvalues: non-square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(to_eigen(m),
                                                         Eigen::EigenvaluesOnly);
  const auto &ev = solver.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double trace_norm(const ComplexMatrix &m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(m));
  return svd.singularValues().sum();
}

bool is_hermitian(const ComplexMatrix &m, double tol) {
  if (!m.square()) return false;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i; j < m.cols; ++j)
      if (std::abs(m.at(i, j) - std::conj(m.at(j, i))) > tol) return false;
  return true;
}

bool is_positive(const ComplexMatrix &m, double tol) {
  if (!is_hermitian(m, tol)) return false;
  for (double ev : hermitian_eigenvalues(m))
    if (ev < -tol) return false;
  return true;
}

bool is_density(const ComplexMatrix &m, double tol) {
  if (!m.square()) throw std::invalid_argument("is_density: non-square");
  return is_positive(m, tol) && trace(m).real() <= 1.0 + tol;
}

bool is_unitary(const ComplexMatrix &u, double tol) {
  if (!u.square()) return false;
  return approx_equal(adjoint(u) * u, ComplexMatrix::identity(u.rows), tol);
}

bool loewner_leq(const ComplexMatrix &a, const ComplexMatrix &b, double tol) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("loewner_leq: dimension mismatch");
  return is_positive(b - a, tol);
}

DensityMatrix::DensityMatrix() : DensityMatrix(ComplexMatrix::zero(1, 1)) {}

DensityMatrix::DensityMatrix(ComplexMatrix m) : dim(m.rows) {
  if (!m.square() || m.rows == 0)
    throw std::invalid_argument("DensityMatrix: need square non-empty matrix");
  mat_ = std::make_shared<const ComplexMatrix>(std::move(m));
  tr_ = trace(*mat_).real();
}

DensityMatrix DensityMatrix::scalar(double p) {
  ComplexMatrix m(1, 1);
  m.at(0, 0) = p;
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::zero(std::size_t dim) {
  return DensityMatrix(ComplexMatrix::zero(dim, dim));
}

bool loewner_leq(const DensityMatrix &a, const DensityMatrix &b, double tol) {
  return loewner_leq(a.mat(), b.mat(), tol);
}

QuantumOp::QuantumOp(std::size_t in, std::size_t out, std::vector<ComplexMatrix> ks)
    : in_dim(in), out_dim(out), kraus(std::move(ks)) {
  for (const auto &k : kraus)
    if (k.rows != out_dim || k.cols != in_dim)
      throw std::invalid_argument("QuantumOp: Kraus factor shape mismatch");
}

QuantumOp QuantumOp::identity(std::size_t dim) {
  return QuantumOp(dim, dim, {ComplexMatrix::identity(dim)});
}

QuantumOp QuantumOp::zero(std::size_t in, std::size_t out) {
  return QuantumOp(in, out, {});
}

QuantumOp QuantumOp::unitary(const ComplexMatrix &u) {
  if (!u.square()) throw std::invalid_argument("QuantumOp::unitary: non-square");
  return QuantumOp(u.rows, u.rows, {u});
}

DensityMatrix apply_qo(const QuantumOp &e, const DensityMatrix &rho) {
  if (rho.dim != e.in_dim) throw std::invalid_argument("apply_qo: dimension mismatch");
  ComplexMatrix out = ComplexMatrix::zero(e.out_dim, e.out_dim);
  for (const auto &k : e.kraus) out = out + k * rho.mat() * adjoint(k);
  return DensityMatrix(std::move(out));
}

QuantumOp qo_compose(const QuantumOp &f, const QuantumOp &e) {
  if (e.out_dim != f.in_dim) throw std::invalid_argument("qo_compose: dimension mismatch");
  std::vector<ComplexMatrix> ks;
  ks.reserve(f.kraus.size() * e.kraus.size());
  for (const auto &fk : f.kraus)
    for (const auto &ek : e.kraus) ks.push_back(fk * ek);
  return QuantumOp(e.in_dim, f.out_dim, std::move(ks));
}

ComplexMatrix m_matrix(const QuantumOp &e) {
  ComplexMatrix m = ComplexMatrix::zero(e.in_dim, e.in_dim);
  for (const auto &k : e.kraus) m = m + adjoint(k) * k;
  return m;
}

DensityMatrix chain_sup(const std::vector<DensityMatrix> &chain, double tol) {
  if (chain.empty()) throw std::invalid_argument("chain_sup: empty chain");
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    if (!loewner_leq(chain[i], chain[i + 1], kDefaultTol))
      throw std::runtime_error("chain_sup: chain is not Loewner-increasing at step " +
                               std::to_string(i));
    if (trace_norm(chain[i + 1].mat() - chain[i].mat()) < tol) return chain[i + 1];
  }
  return chain.back();
}

ComplexMatrix measurement_bra(std::size_t n, std::size_t i, int b) {
  if (i < 1 || i > n) throw std::invalid_argument("measurement_bra: index out of range");
  ComplexMatrix bra(1, 2);
  bra.at(0, b == 0 ? 0 : 1) = 1.0;
  std::size_t left = std::size_t{1} << (i - 1);
  std::size_t right = std::size_t{1} << (n - i);
  return tensor(tensor(ComplexMatrix::identity(left), bra),
                ComplexMatrix::identity(right));
}

ComplexMatrix gate_by_name(const std::string &name) {
  const double s = 1.0 / std::sqrt(2.0);
  const cplx im{0.0, 1.0};
  if (name == "H") return ComplexMatrix(2, 2, {s, s, s, -s});
  if (name == "X") return ComplexMatrix(2, 2, {0, 1, 1, 0});
  if (name == "Y") return ComplexMatrix(2, 2, {0, -im, im, 0});
  if (name == "Z") return ComplexMatrix(2, 2, {1, 0, 0, -1});
  if (name == "S") return ComplexMatrix(2, 2, {1, 0, 0, im});
  if (name == "T") return ComplexMatrix(2, 2, {1, 0, 0, std::exp(im * (M_PI / 4.0))});
  if (name == "CNOT")
    return ComplexMatrix(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  if (name == "I") return ComplexMatrix::identity(2);
  throw std::invalid_argument("gate_by_name: unknown gate " + name);
}

DensityMatrix ket_density(const std::string &name) {
  if (name == "0") return DensityMatrix(ComplexMatrix(2, 2, {1, 0, 0, 0}));
  if (name == "1") return DensityMatrix(ComplexMatrix(2, 2, {0, 0, 0, 1}));
  if (name == "+")
    return DensityMatrix(ComplexMatrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
  throw std::invalid_argument("ket_density: unknown ket " + name);
}

}  // namespace hoq
