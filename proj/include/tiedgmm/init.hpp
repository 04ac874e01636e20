#pragma once

// Parameter initialization: k-means++ seeded means, identity shared factor
// and unit diagonal precisions (matching whitened data), uniform weights.

#include <Eigen/Dense>
#include <random>

#include "tiedgmm/model.hpp"

namespace tiedgmm {

// k-means++ seeding: first center uniform, then each next center drawn with
// probability proportional to its squared distance from the chosen set.
inline Matrix kmeanspp_centers(const Matrix& x, int K, std::mt19937_64& rng) {
  const Eigen::Index l = x.rows();
  if (l < K) throw ConfigError("kmeanspp: need at least K rows");
  Matrix centers(K, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, l - 1);
  centers.row(0) = x.row(first(rng));
  Vector dist2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 1; k < K; ++k) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < l; ++i) {
        acc += dist2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    } else {
      pick = first(rng);  // all points coincide with chosen centers
    }
    centers.row(k) = x.row(pick);
    dist2 = dist2.cwiseMin(
        (x.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  return centers;
}

inline GmmParams init_params(const Matrix& x, int K, CovMode mode,
                             std::uint64_t seed, double omega = 1.0) {
  const int n = static_cast<int>(x.cols());
  if (x.rows() < K) throw ConfigError("init_params: need at least K rows");
  if (K < 1) throw ConfigError("init_params: K must be >= 1");
  GmmParams p;
  p.mode = mode;
  p.n = n;
  p.K = K;
  p.omega = omega;
  std::mt19937_64 rng(seed);
  p.mu = kmeanspp_centers(x, K, rng);
  // Unit precisions: softplus(dtilde) = 1, lambda = 1.
  p.dtilde = Matrix::Constant(K, n, softplus_inv(1.0, omega));
  p.alpha = Vector::Zero(K - 1);
  if (mode == CovMode::Plu) {
    p.plu = PluParams::identity(n);
  } else {
    p.u = Matrix::Identity(n, n);
  }
  if (mode == CovMode::Orthogonal) {
    p.lambda_tilde = Vector::Constant(K, softplus_inv(1.0, 1.0));
  }
  p.validate();
  return p;
}

}  // namespace tiedgmm
