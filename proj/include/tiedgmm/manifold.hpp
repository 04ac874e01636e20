#pragma once

// Geometry of the special orthogonal group SO(n), treated as an embedded
// submanifold of R^{n x n} with the Euclidean metric. Tangent vectors at Y
// have the form A*Y with A skew-symmetric; vector transport is the identity.

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "tiedgmm/errors.hpp"

namespace tiedgmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Retraction { Qr, Polar, Cayley };

// Which auxiliary skew matrix the tangent projection builds. On the manifold
// the second form equals half the first.
enum class ProjForm { SkewGy, SkewHalfOffset };

// Skew(M) = M - M^T. Note the convention carries the factor of two relative
// to the symmetric/antisymmetric split (M - M^T, not (M - M^T)/2); the
// optimizer's learning rate absorbs the constant.
inline Matrix skew(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("skew: input must be square");
  }
  return m - m.transpose();
}

inline double orthogonality_defect(const Matrix& y) {
  return (y.transpose() * y - Matrix::Identity(y.cols(), y.cols())).norm();
}

inline bool is_special_orthogonal(const Matrix& y, double tol = 1e-8,
                                  double det_tol = 1e-6) {
  if (y.rows() != y.cols()) return false;
  if (orthogonality_defect(y) > tol) return false;
  return std::abs(y.determinant() - 1.0) <= det_tol;
}

// Tangency defect ||Y^T xi + xi^T Y||_F; zero iff xi = A*Y with A skew.
inline double tangency_defect(const Matrix& y, const Matrix& xi) {
  return (y.transpose() * xi + xi.transpose() * y).norm();
}

// Projects a Euclidean gradient G onto the tangent space at Y: returns A*Y
// with A = Skew(G Y^T), or A = Skew((I - Y Y^T / 2) G Y^T) for the offset
// form.
inline Matrix tangent_project(const Matrix& y, const Matrix& g,
                              ProjForm form = ProjForm::SkewGy) {
  if (y.rows() != y.cols() || g.rows() != y.rows() || g.cols() != y.cols()) {
    throw DimensionError("tangent_project: shape mismatch");
  }
  Matrix a;
  if (form == ProjForm::SkewGy) {
    a = skew(g * y.transpose());
  } else {
    const Matrix offset =
        (Matrix::Identity(y.rows(), y.rows()) - 0.5 * y * y.transpose());
    a = skew(offset * g * y.transpose());
  }
  return a * y;
}

// Vector transport associated with all three retractions here is the
// identity map: the tangent representation is carried over verbatim.
inline const Matrix& transport(const Matrix& xi) { return xi; }

namespace detail {

// Fixes the QR sign ambiguity so that diag(R) > 0, making Q unique.
inline Matrix qr_positive_diag(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    if (r(j, j) == 0.0) {
      throw SingularityError("qr retraction: rank-deficient Y + xi");
    }
  }
  return q;
}

}  // namespace detail

// R_Y(xi) = Q factor of qr(Y + xi), diag(R) > 0. For xi = A*Y with A skew,
// det(Y + xi) = det(I + A) > 0, so the result stays in SO(n).
inline Matrix retract_qr(const Matrix& y, const Matrix& xi) {
  return detail::qr_positive_diag(y + xi);
}

// Polar retraction: U V^T from the SVD of Y + xi.
inline Matrix retract_polar(const Matrix& y, const Matrix& xi) {
  Eigen::JacobiSVD<Matrix> svd(y + xi,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().minCoeff() <= 0.0) {
    throw SingularityError("polar retraction: rank-deficient Y + xi");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

// Cayley retraction: (I - A/2)^{-1} (I + A/2) Y with A = xi Y^T.
inline Matrix retract_cayley(const Matrix& y, const Matrix& xi) {
  const Eigen::Index n = y.rows();
  const Matrix a = xi * y.transpose();
  const Matrix lhs = Matrix::Identity(n, n) - 0.5 * a;
  Eigen::PartialPivLU<Matrix> lu(lhs);
  const Matrix result = lu.solve((Matrix::Identity(n, n) + 0.5 * a) * y);
  const double residual = (lhs * result - (y + 0.5 * a * y)).norm();
  if (!result.allFinite() || residual > 1e-6 * (1.0 + result.norm())) {
    throw SingularityError("cayley retraction: I - A/2 is singular");
  }
  return result;
}

inline Matrix retract(const Matrix& y, const Matrix& xi, Retraction kind) {
  switch (kind) {
    case Retraction::Qr:
      return retract_qr(y, xi);
    case Retraction::Polar:
      return retract_polar(y, xi);
    case Retraction::Cayley:
      return retract_cayley(y, xi);
  }
  throw ConfigError("retract: unknown retraction kind");
}

// Haar-ish random element of SO(n): QR of a standard Gaussian matrix with
// the positive-diagonal convention, then one column flipped if det = -1.
inline Matrix random_orthogonal(int n, std::uint64_t seed) {
  if (n < 1) throw DimensionError("random_orthogonal: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  Matrix q = detail::qr_positive_diag(m);
  if (q.determinant() < 0.0) q.col(0) = -q.col(0);
  return q;
}

}  // namespace tiedgmm
