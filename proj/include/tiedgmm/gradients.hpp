#pragma once

// Analytic Euclidean gradients of the regularized objective with respect to
// every parameter block. Derivatives flow through the softplus and softmax
// reparameterizations; the PLU blocks receive the shared-factor gradient via
// the product chain U = L (Utri + diag(s)).

#include <Eigen/Dense>
#include <vector>

#include "tiedgmm/model.hpp"

namespace tiedgmm {

struct GmmGrads {
  Matrix u;             // n x n (unconstrained / orthogonal modes)
  PluParams plu;        // plu mode blocks
  Matrix dtilde;        // K x n
  Vector lambda_tilde;  // K (orthogonal mode)
  Matrix mu;            // K x n
  Vector alpha;         // K - 1

  bool all_finite() const {
    bool ok = dtilde.allFinite() && mu.allFinite() && alpha.allFinite();
    if (u.size() > 0) ok = ok && u.allFinite();
    if (lambda_tilde.size() > 0) ok = ok && lambda_tilde.allFinite();
    if (plu.scale.size() > 0) {
      ok = ok && plu.lower.allFinite() && plu.upper.allFinite() &&
           plu.scale.allFinite();
    }
    return ok;
  }
};

inline GmmGrads grad(const Matrix& batch, const GmmParams& p,
                     const PriorConfig& cfg, double reg_scale = 1.0) {
  const Eigen::Index b = batch.rows();
  if (batch.cols() != p.n) throw DimensionError("grad: batch dimension");
  if (b < 1) throw ConfigError("grad: batch must be nonempty");

  const detail::ModelEval ev = detail::make_eval(p);
  const Matrix xu = batch * ev.u;
  const Matrix muu = p.mu * ev.u;
  const double log2pi = std::log(2.0 * std::numbers::pi);

  // Responsibilities.
  Matrix log_mix(b, p.K);
  std::vector<Matrix> t_k(p.K);
  for (int k = 0; k < p.K; ++k) {
    t_k[k] = xu.rowwise() - muu.row(k);
    const Vector q = ev.lambda(k) * (t_k[k].array().square().matrix() *
                                     ev.d.row(k).transpose());
    log_mix.col(k) = (ev.log_pi(k) + 0.5 * ev.log_det(k) -
                      0.5 * p.n * log2pi) -
                     0.5 * q.array();
  }
  const Vector row_max = log_mix.rowwise().maxCoeff();
  const Vector lse =
      row_max.array() +
      (log_mix.colwise() - row_max).array().exp().rowwise().sum().log();
  const Matrix resp = (log_mix.colwise() - lse).array().exp();
  const Vector r_sum = resp.colwise().sum();

  GmmGrads g;
  g.dtilde = Matrix::Zero(p.K, p.n);
  g.mu = Matrix::Zero(p.K, p.n);
  g.alpha = Vector::Zero(p.K - 1);
  Matrix g_u = Matrix::Zero(p.n, p.n);  // chain source for U
  Vector g_s = Vector::Zero(p.n);       // direct plu scale terms
  Vector g_lambda = Vector::Zero(p.K);
  Matrix g_d = Matrix::Zero(p.K, p.n);

  // NLL terms.
  for (int k = 0; k < p.K; ++k) {
    const Matrix rt = resp.col(k).asDiagonal() * t_k[k];  // b x n
    const Vector s_vec = rt.colwise().sum();
    const Vector c_vec = rt.cwiseProduct(t_k[k]).colwise().sum();
    const Vector d_row = ev.d.row(k);
    g.mu.row(k) -=
        ev.lambda(k) * (ev.u * d_row.cwiseProduct(s_vec)).transpose();
    g_d.row(k) += (-0.5 * r_sum(k) * d_row.cwiseInverse() +
                   0.5 * ev.lambda(k) * c_vec)
                      .transpose();
    if (p.mode == CovMode::Orthogonal) {
      g_lambda(k) += -0.5 * p.n * r_sum(k) / ev.lambda(k) +
                     0.5 * d_row.dot(c_vec);
    }
    const Matrix v_k = batch.rowwise() - p.mu.row(k);
    g_u += ev.lambda(k) * (v_k.transpose() * rt) * d_row.asDiagonal();
  }
  const Vector pi = weights_from_alpha(p.alpha);
  g.alpha += (static_cast<double>(b) * pi - r_sum).head(p.K - 1);

  Matrix u_inv_t;
  if (p.mode == CovMode::Unconstrained) {
    Eigen::PartialPivLU<Matrix> lu(ev.u);
    u_inv_t = lu.inverse().transpose();
    if (!u_inv_t.allFinite()) {
      throw NumericError("grad: singular shared factor");
    }
    g_u -= static_cast<double>(b) * u_inv_t;
  } else if (p.mode == CovMode::Plu) {
    g_s -= static_cast<double>(b) * p.plu.scale.cwiseInverse();
  }

  // Wishart prior on the shared factor (omitted in orthogonal mode).
  if (p.mode != CovMode::Orthogonal && cfg.w_wishart != 0.0) {
    const double w1 = reg_scale * cfg.w_wishart;
    g_u += w1 * cfg.s_inv * ev.u;
    if (p.mode == CovMode::Unconstrained) {
      g_u -= w1 * u_inv_t;
    } else {
      g_s -= w1 * p.plu.scale.cwiseInverse();
    }
  }

  // Gamma prior on the diagonals.
  if (cfg.w_gamma != 0.0) {
    const double w2 = reg_scale * cfg.w_gamma;
    g_d.array() += w2 * (0.5 * cfg.gamma_s -
                         0.5 * p.n / ev.d.array());
  }

  // Gaussian prior on the means.
  if (cfg.w_mean != 0.0) {
    if (cfg.shrinkage <= 0.0) {
      throw ConfigError("grad: shrinkage must be > 0");
    }
    const double w3 = reg_scale * cfg.w_mean;
    const double sign = cfg.paper_literal_psi3 ? 1.0 : -1.0;
    for (int k = 0; k < p.K; ++k) {
      const Vector w = p.mu.row(k).transpose() - cfg.mu_p;
      const Vector wt = ev.u.transpose() * w;
      const Vector d_row = ev.d.row(k);
      g.mu.row(k) += w3 * cfg.shrinkage * ev.lambda(k) *
                     (ev.u * d_row.cwiseProduct(wt)).transpose();
      g_d.row(k) += w3 * (0.5 * cfg.shrinkage * ev.lambda(k) *
                              wt.array().square() +
                          sign * 0.5 / d_row.array())
                        .matrix()
                        .transpose();
      if (p.mode == CovMode::Orthogonal) {
        g_lambda(k) +=
            w3 * (0.5 * cfg.shrinkage * d_row.dot(wt.cwiseProduct(wt)) +
                  sign * 0.5 * p.n / ev.lambda(k));
      }
      g_u += w3 * cfg.shrinkage * ev.lambda(k) * w *
             d_row.cwiseProduct(wt).transpose();
    }
    if (p.mode == CovMode::Unconstrained) {
      g_u += w3 * sign * p.K * u_inv_t;
    } else if (p.mode == CovMode::Plu) {
      g_s += w3 * sign * p.K * p.plu.scale.cwiseInverse();
    }
  }

  // Dirichlet prior on the logits.
  if (cfg.w_dirichlet != 0.0) {
    const double wd = reg_scale * cfg.w_dirichlet;
    g.alpha += wd * cfg.zeta * (p.K * pi.head(p.K - 1).array() - 1.0).matrix();
  }

  // Reparameterization chains.
  g.dtilde = g_d.cwiseProduct(softplus_grad(p.dtilde, p.omega));
  if (p.mode == CovMode::Orthogonal) {
    g.lambda_tilde = g_lambda.cwiseProduct(softplus_grad(p.lambda_tilde, 1.0));
  }
  if (p.mode == CovMode::Plu) {
    const Eigen::Index n = p.n;
    Matrix l = Matrix::Identity(n, n);
    l += p.plu.lower.triangularView<Eigen::StrictlyLower>().toDenseMatrix();
    Matrix m = p.plu.upper.triangularView<Eigen::StrictlyUpper>()
                   .toDenseMatrix();
    m.diagonal() = p.plu.scale;
    const Matrix lt_gu = l.transpose() * g_u;
    g.plu.lower = (g_u * m.transpose())
                      .triangularView<Eigen::StrictlyLower>()
                      .toDenseMatrix();
    g.plu.upper = lt_gu.triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
    g.plu.scale = lt_gu.diagonal() + g_s;
  } else {
    g.u = g_u;
  }

  if (!g.all_finite()) throw NumericError("grad: non-finite gradient");
  return g;
}

}  // namespace tiedgmm
