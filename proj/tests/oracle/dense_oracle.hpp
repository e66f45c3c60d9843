#pragma once

// Test-only reference implementations. Nothing here calls into the matrix-free kernel or the
// Chebyshev propagator; the Hamiltonian is assembled from Kronecker products and propagated
// through a dense eigendecomposition.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;

/// Lowest eigenvalue of [[|delta|, c3/R^3], [c3/R^3, 0]] by numerical diagonalization.
inline double lowest_pair_eigenvalue(double delta, double c3, double r) {
  Eigen::Matrix2d m;
  const double c = c3 / (r * r * r);
  m << std::abs(delta), c, c, 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
  return es.eigenvalues()(0);
}

/// Single-site operator at position `site` (0-based, atom k <-> bit k) in an n-site register.
/// The register index is sum_k n_k 2^k, so site 0 is the rightmost Kronecker factor.
inline Matrix embed(const Matrix& op, int site, int n) {
  Matrix out = Matrix::Identity(1, 1);
  for (int k = n - 1; k >= 0; --k) {
    const Matrix factor = (k == site) ? op : Matrix::Identity(2, 2);
    out = Eigen::kroneckerProduct(out, factor).eval();
  }
  return out;
}

/// H = Omega/2 sum sigma_x + sum_{i<j} V_ij n_i n_j - detuning sum n_i.
inline Matrix dense_hamiltonian(const std::vector<std::vector<double>>& v, double omega, double detuning = 0.0) {
  const int n = static_cast<int>(v.size());
  Matrix sx(2, 2);
  sx << 0, 1, 1, 0;
  Matrix num(2, 2);
  num << 0, 0, 0, 1;
  const auto dim = static_cast<Eigen::Index>(1) << n;
  Matrix h = Matrix::Zero(dim, dim);
  std::vector<Matrix> ni;
  for (int i = 0; i < n; ++i) {
    h += 0.5 * omega * embed(sx, i, n);
    ni.push_back(embed(num, i, n));
    h -= detuning * ni.back();
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) h += v[i][j] * ni[i] * ni[j];
  }
  return h;
}

class SpectralPropagator {
 public:
  explicit SpectralPropagator(const Matrix& h) : es_(h) {}

  CVector propagate(const CVector& psi0, double t) const {
    const Eigen::MatrixXcd u = es_.eigenvectors().cast<std::complex<double>>();
    CVector coeffs = u.adjoint() * psi0;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
      coeffs(k) *= std::polar(1.0, -es_.eigenvalues()(k) * t);
    }
    return u * coeffs;
  }

 private:
  Eigen::SelfAdjointEigenSolver<Matrix> es_;
};

}  // namespace oracle
