#pragma once

// Gradient clipping rules: global-norm (GClip), coordinate-wise with a fixed
// threshold (CClip), and coordinate-wise with an adaptive threshold driven by
// a power-mean EMA of recent gradient magnitudes (ACClip).

#include <Eigen/Dense>
#include <cmath>

#include "tiedgmm/errors.hpp"

namespace tiedgmm {

enum class ClipMode { None, GClip, CClip, AcClip };

struct ClipConfig {
  ClipMode mode = ClipMode::None;
  double tau0 = 1.0;   // initial threshold
  double beta1 = 0.9;  // momentum decay
  double beta2 = 0.99; // threshold EMA decay (ACClip)
  double alpha = 2.0;  // moment power of the threshold EMA (ACClip)
  double eps = 1e-8;   // denominator guard (ACClip)

  void validate() const {
    if (tau0 <= 0.0) throw ConfigError("clip: tau0 must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("clip: beta1 in [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("clip: beta2 in [0,1)");
    if (alpha <= 0.0) throw ConfigError("clip: alpha must be > 0");
    if (eps <= 0.0) throw ConfigError("clip: eps must be > 0");
  }
};

// GCLIP(tau, m) = min{tau / ||m||, 1} m. A zero vector passes through.
inline Eigen::MatrixXd gclip(double tau, const Eigen::MatrixXd& m) {
  const double norm = m.norm();
  if (norm == 0.0) return m;
  return std::min(tau / norm, 1.0) * m;
}

// CCLIP(tau, m) = min{tau / |m|, 1} m elementwise: each coordinate clamped
// to magnitude tau_i with its sign preserved.
inline Eigen::MatrixXd cclip(const Eigen::MatrixXd& tau,
                             const Eigen::MatrixXd& m) {
  if (tau.rows() != m.rows() || tau.cols() != m.cols()) {
    throw DimensionError("cclip: tau and m shapes differ");
  }
  return m.array().min(tau.array()).max(-tau.array());
}

// ACCLIP(tau, m) = min{tau / (|m| + eps), 1} m elementwise.
inline Eigen::MatrixXd acclip(const Eigen::MatrixXd& tau,
                              const Eigen::MatrixXd& m, double eps) {
  if (tau.rows() != m.rows() || tau.cols() != m.cols()) {
    throw DimensionError("acclip: tau and m shapes differ");
  }
  const auto scale =
      (tau.array() / (m.array().abs() + eps)).min(1.0);
  return scale * m.array();
}

// tau^alpha <- beta2 tau^alpha + (1 - beta2) |g|^alpha, elementwise.
inline Eigen::MatrixXd acclip_tau_update(const Eigen::MatrixXd& tau,
                                         const Eigen::MatrixXd& g,
                                         double beta2, double alpha) {
  if (tau.rows() != g.rows() || tau.cols() != g.cols()) {
    throw DimensionError("acclip_tau_update: tau and g shapes differ");
  }
  return (beta2 * tau.array().pow(alpha) +
          (1.0 - beta2) * g.array().abs().pow(alpha))
      .pow(1.0 / alpha);
}

}  // namespace tiedgmm
