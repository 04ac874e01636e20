#pragma once

// Flexibly-tied Gaussian mixture: all component precisions share one dense
// factor U, with per-component diagonals,
//
//   precision_k = U D_k U^T                (unconstrained, plu)
//   precision_k = lambda_k U D_k U^T       (orthogonal; U in SO(n))
//
// Diagonals and scales are kept positive through a softplus
// reparameterization, and mixture weights through logits with the last
// component pinned to zero. The regularized objective adds Wishart, Gamma,
// Gaussian-mean and Dirichlet negative-log-prior terms to the batch NLL.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tiedgmm/errors.hpp"
#include "tiedgmm/manifold.hpp"

namespace tiedgmm {

enum class CovMode { Unconstrained, Plu, Orthogonal };

inline std::string to_string(CovMode mode) {
  switch (mode) {
    case CovMode::Unconstrained: return "unconstrained";
    case CovMode::Plu: return "plu";
    case CovMode::Orthogonal: return "orthogonal";
  }
  return "unknown";
}

inline CovMode cov_mode_from_string(const std::string& s) {
  if (s == "unconstrained") return CovMode::Unconstrained;
  if (s == "plu") return CovMode::Plu;
  if (s == "orthogonal") return CovMode::Orthogonal;
  throw ConfigError("unknown covariance mode: " + s);
}

// ---------------------------------------------------------------------------
// Softplus reparameterization, sharpness omega.

inline double softplus(double x, double omega = 1.0) {
  const double z = omega * x;
  if (z > 30.0) return x;
  return std::log1p(std::exp(z)) / omega;
}

inline double softplus_inv(double y, double omega = 1.0) {
  if (!(y > 0.0)) {
    throw std::domain_error("softplus_inv: input must be positive");
  }
  const double z = omega * y;
  if (z > 30.0) return y;
  return std::log(std::expm1(z)) / omega;
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Eigen::MatrixXd softplus(const Eigen::MatrixXd& x, double omega = 1.0) {
  return x.unaryExpr([omega](double v) { return softplus(v, omega); });
}

inline Eigen::MatrixXd softplus_grad(const Eigen::MatrixXd& x,
                                     double omega = 1.0) {
  return x.unaryExpr([omega](double v) { return logistic(omega * v); });
}

// ---------------------------------------------------------------------------
// Mixture weights from logits (last logit pinned to zero).

inline Vector weights_from_alpha(const Vector& alpha) {
  const Eigen::Index k_total = alpha.size() + 1;
  Vector full(k_total);
  full.head(alpha.size()) = alpha;
  full(k_total - 1) = 0.0;
  const double shift = full.maxCoeff();
  Vector e = (full.array() - shift).exp();
  return e / e.sum();
}

inline Vector log_weights_from_alpha(const Vector& alpha) {
  const Eigen::Index k_total = alpha.size() + 1;
  Vector full(k_total);
  full.head(alpha.size()) = alpha;
  full(k_total - 1) = 0.0;
  const double shift = full.maxCoeff();
  const double lse = shift + std::log((full.array() - shift).exp().sum());
  return full.array() - lse;
}

// ---------------------------------------------------------------------------
// PLU factorization of the shared factor: U = L (Utri + diag(s)) with L unit
// lower triangular and Utri strictly upper, so det U = prod(s).

struct PluParams {
  Matrix lower;  // strictly lower entries are free; rest ignored
  Matrix upper;  // strictly upper entries are free; rest ignored
  Vector scale;  // nonzero diagonal s

  static PluParams identity(int n) {
    PluParams p;
    p.lower = Matrix::Zero(n, n);
    p.upper = Matrix::Zero(n, n);
    p.scale = Vector::Ones(n);
    return p;
  }
};

inline Matrix plu_build(const PluParams& p) {
  const Eigen::Index n = p.scale.size();
  if (p.lower.rows() != n || p.lower.cols() != n || p.upper.rows() != n ||
      p.upper.cols() != n) {
    throw DimensionError("plu_build: inconsistent block shapes");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.scale(i) == 0.0) {
      throw SingularityError("plu_build: zero diagonal scale");
    }
  }
  Matrix l = Matrix::Identity(n, n);
  l += p.lower.triangularView<Eigen::StrictlyLower>().toDenseMatrix();
  Matrix m = p.upper.triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
  m.diagonal() = p.scale;
  return l * m;
}

// log det(precision_k) = sum_i log s_i^2 + sum_i log d_ki.
inline double plu_logdet(const PluParams& p, const Vector& d_row) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.scale.size(); ++i) {
    if (p.scale(i) == 0.0) {
      throw SingularityError("plu_logdet: zero diagonal scale");
    }
    acc += std::log(p.scale(i) * p.scale(i));
  }
  return acc + d_row.array().log().sum();
}

// ---------------------------------------------------------------------------
// Parameter pack.

struct GmmParams {
  CovMode mode = CovMode::Unconstrained;
  int n = 0;
  int K = 0;
  double omega = 1.0;   // softplus sharpness for the diagonals
  Matrix u;             // n x n shared factor (unconstrained / orthogonal)
  PluParams plu;        // plu mode
  Matrix dtilde;        // K x n pre-softplus diagonals
  Vector lambda_tilde;  // K pre-softplus scales (orthogonal mode)
  Matrix mu;            // K x n means, one row per component
  Vector alpha;         // K-1 weight logits

  Matrix build_u() const {
    return mode == CovMode::Plu ? plu_build(plu) : u;
  }
  Matrix diagonals() const { return softplus(dtilde, omega); }
  Vector scales() const {
    if (mode != CovMode::Orthogonal) return Vector::Ones(K);
    return lambda_tilde.unaryExpr([](double v) { return softplus(v, 1.0); });
  }
  Vector weights() const { return weights_from_alpha(alpha); }

  void validate() const {
    if (n < 1 || K < 1) throw ConfigError("params: n and K must be >= 1");
    if (dtilde.rows() != K || dtilde.cols() != n) {
      throw DimensionError("params: dtilde must be K x n");
    }
    if (mu.rows() != K || mu.cols() != n) {
      throw DimensionError("params: mu must be K x n");
    }
    if (alpha.size() != K - 1) {
      throw DimensionError("params: alpha must have K - 1 entries");
    }
    if (mode == CovMode::Plu) {
      if (plu.scale.size() != n) {
        throw DimensionError("params: plu scale must have n entries");
      }
    } else if (u.rows() != n || u.cols() != n) {
      throw DimensionError("params: u must be n x n");
    }
    if (mode == CovMode::Orthogonal) {
      if (lambda_tilde.size() != K) {
        throw DimensionError("params: lambda_tilde must have K entries");
      }
      if (orthogonality_defect(u) > 1e-8) {
        throw ConfigError("params: u is not orthogonal in constrained mode");
      }
    }
  }
};

// Dense component covariances (inverse of each precision).
inline std::vector<Matrix> covariances(const GmmParams& p) {
  const Matrix u = p.build_u();
  const Matrix d = p.diagonals();
  const Vector lambda = p.scales();
  Eigen::PartialPivLU<Matrix> lu(u);
  if (!lu.inverse().allFinite()) {
    throw NumericError("covariances: singular shared factor");
  }
  const Matrix u_inv = lu.inverse();
  std::vector<Matrix> out;
  out.reserve(p.K);
  for (int k = 0; k < p.K; ++k) {
    // (lambda U D U^T)^{-1} = U^{-T} D^{-1} U^{-1} / lambda
    const Matrix sigma = u_inv.transpose() *
                         d.row(k).cwiseInverse().asDiagonal() * u_inv /
                         lambda(k);
    if (!sigma.allFinite()) {
      throw NumericError("covariances: non-finite covariance for component " +
                         std::to_string(k));
    }
    out.push_back(0.5 * (sigma + sigma.transpose()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batched density evaluation.

namespace detail {

inline double log_abs_det(const Matrix& m) {
  Eigen::PartialPivLU<Matrix> lu(m);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double piv = lu.matrixLU()(i, i);
    if (piv == 0.0 || !std::isfinite(piv)) {
      throw std::domain_error("log_abs_det: singular matrix");
    }
    acc += std::log(std::abs(piv));
  }
  return acc;
}

struct ModelEval {
  Matrix u;           // assembled shared factor
  Matrix d;           // K x n positive diagonals
  Vector lambda;      // K scales (ones outside orthogonal mode)
  Vector log_det;     // K, log det(precision_k)
  Vector log_pi;      // K
};

inline ModelEval make_eval(const GmmParams& p) {
  ModelEval ev;
  ev.u = p.build_u();
  ev.d = p.diagonals();
  ev.lambda = p.scales();
  ev.log_pi = log_weights_from_alpha(p.alpha);
  ev.log_det.resize(p.K);
  double shared = 0.0;
  switch (p.mode) {
    case CovMode::Unconstrained:
      shared = 2.0 * log_abs_det(ev.u);
      break;
    case CovMode::Plu:
      shared = p.plu.scale.array().square().log().sum();
      break;
    case CovMode::Orthogonal:
      shared = 0.0;  // |det U| = 1 on the manifold
      break;
  }
  for (int k = 0; k < p.K; ++k) {
    ev.log_det(k) = shared + ev.d.row(k).array().log().sum() +
                    p.n * std::log(ev.lambda(k));
  }
  return ev;
}

// b x K matrix of per-point component log densities log N(x_i; mu_k, ...).
inline Matrix component_log_density_matrix(const Matrix& batch,
                                           const GmmParams& p,
                                           const ModelEval& ev) {
  const Eigen::Index b = batch.rows();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Matrix xu = batch * ev.u;   // rows are x_i^T U
  const Matrix muu = p.mu * ev.u;   // rows are mu_k^T U
  Matrix out(b, p.K);
  for (int k = 0; k < p.K; ++k) {
    const Matrix t = xu.rowwise() - muu.row(k);
    const Vector q =
        ev.lambda(k) * (t.array().square().matrix() * ev.d.row(k).transpose());
    out.col(k) = (0.5 * ev.log_det(k) - 0.5 * p.n * log2pi) -
                 0.5 * q.array();
  }
  return out;
}

// Row-wise logsumexp of (log densities + log weights).
inline Vector log_mixture_density(const Matrix& comp_log_density,
                                  const Vector& log_pi) {
  Matrix shifted = comp_log_density;
  shifted.rowwise() += log_pi.transpose();
  const Vector row_max = shifted.rowwise().maxCoeff();
  const Vector rest =
      (shifted.colwise() - row_max).array().exp().rowwise().sum().log();
  return row_max + rest;
}

}  // namespace detail

inline double component_log_density(const Vector& x, int k,
                                    const GmmParams& p) {
  if (x.size() != p.n) {
    throw DimensionError("component_log_density: point has wrong dimension");
  }
  if (k < 0 || k >= p.K) {
    throw ConfigError("component_log_density: component index out of range");
  }
  const detail::ModelEval ev = detail::make_eval(p);
  const Matrix row = x.transpose();
  const double value =
      detail::component_log_density_matrix(row, p, ev)(0, k);
  if (!std::isfinite(value)) {
    throw NumericError("component_log_density: non-finite value at component " +
                       std::to_string(k));
  }
  return value;
}

// Negative log-likelihood of a batch, summed over rows.
inline double nll(const Matrix& batch, const GmmParams& p) {
  if (batch.cols() != p.n) {
    throw DimensionError("nll: batch has wrong dimension");
  }
  if (batch.rows() < 1) throw ConfigError("nll: batch must be nonempty");
  const detail::ModelEval ev = detail::make_eval(p);
  const Matrix ld = detail::component_log_density_matrix(batch, p, ev);
  const double value = -detail::log_mixture_density(ld, ev.log_pi).sum();
  if (!std::isfinite(value)) throw NumericError("nll: non-finite value");
  return value;
}

// ---------------------------------------------------------------------------
// Negative-log-prior regularizers.

struct PriorConfig {
  Matrix s_inv;        // Wishart scale-matrix inverse
  double wishart_dof = 0.0;
  double gamma_s = 1.0;
  double shrinkage = 0.01;  // mean-prior strength
  Vector mu_p;              // mean-prior location
  double zeta = 0.99;       // Dirichlet concentration
  bool paper_literal_psi3 = false;  // keep the printed log-det sign
  double w_wishart = 1.0;
  double w_gamma = 1.0;
  double w_mean = 1.0;
  double w_dirichlet = 1.0;
};

// Wishart scale S = Cov(X) / K^{2/n} and Gamma scale from the diagonal,
// both computed once from the training matrix.
inline PriorConfig make_prior_from_data(const Matrix& x, int K) {
  const Eigen::Index l = x.rows();
  const Eigen::Index n = x.cols();
  if (l < 2) throw ConfigError("prior: need at least two rows");
  PriorConfig cfg;
  cfg.mu_p = x.colwise().mean();
  const Matrix centered = x.rowwise() - cfg.mu_p.transpose();
  const Matrix cov =
      centered.transpose() * centered / static_cast<double>(l - 1);
  const double k_factor =
      std::pow(static_cast<double>(K), 2.0 / static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector floored = es.eigenvalues().cwiseMax(1e-10);
  cfg.s_inv = k_factor * es.eigenvectors() *
              floored.cwiseInverse().asDiagonal() *
              es.eigenvectors().transpose();
  cfg.gamma_s = cov.trace() / (static_cast<double>(n) * k_factor);
  cfg.wishart_dof = static_cast<double>(n) + 2.0;
  return cfg;
}

// psi_1 = tr(U U^T S^{-1}) / 2 - log det(U U^T) / 2.
inline double reg_wishart(const GmmParams& p, const PriorConfig& cfg) {
  const Matrix u = p.build_u();
  if (cfg.s_inv.rows() != p.n || cfg.s_inv.cols() != p.n) {
    throw DimensionError("reg_wishart: S^{-1} must be n x n");
  }
  const double trace_term = 0.5 * (u * u.transpose() * cfg.s_inv).trace();
  double log_det_uut;
  if (p.mode == CovMode::Plu) {
    log_det_uut = p.plu.scale.array().square().log().sum();
  } else {
    log_det_uut = 2.0 * detail::log_abs_det(u);
  }
  return trace_term - 0.5 * log_det_uut;
}

// psi_2 = sum_k sum_i s d_ki / 2 - (n/2) log d_ki.
inline double reg_gamma(const GmmParams& p, const PriorConfig& cfg) {
  const Matrix d = p.diagonals();
  const double half_n = 0.5 * static_cast<double>(p.n);
  return (0.5 * cfg.gamma_s * d.array() - half_n * d.array().log()).sum();
}

// psi_3 = sum_k shrinkage/2 (mu_k - mu_p)^T precision_k (mu_k - mu_p)
//         -/+ log det(shrinkage/(2 pi) precision_k) / 2.
// The proper prior NLL carries the minus sign; paper_literal_psi3 restores
// the printed plus.
inline double reg_mean(const GmmParams& p, const PriorConfig& cfg) {
  if (cfg.shrinkage <= 0.0) {
    throw ConfigError("reg_mean: shrinkage must be > 0");
  }
  if (cfg.mu_p.size() != p.n) {
    throw DimensionError("reg_mean: mu_p must have n entries");
  }
  const detail::ModelEval ev = detail::make_eval(p);
  const double sign = cfg.paper_literal_psi3 ? 1.0 : -1.0;
  const double log_ratio =
      std::log(cfg.shrinkage / (2.0 * std::numbers::pi));
  double acc = 0.0;
  for (int k = 0; k < p.K; ++k) {
    const Vector w = p.mu.row(k).transpose() - cfg.mu_p;
    const Vector wt = ev.u.transpose() * w;
    const double quad =
        ev.lambda(k) * (ev.d.row(k).transpose().array() *
                        wt.array().square())
                           .sum();
    acc += 0.5 * cfg.shrinkage * quad +
           sign * 0.5 * (p.n * log_ratio + ev.log_det(k));
  }
  return acc;
}

// phi on a full K-vector of logits.
inline double reg_dirichlet_full(const Vector& alpha_full, double zeta) {
  const Eigen::Index k_total = alpha_full.size();
  const double shift = alpha_full.maxCoeff();
  const double lse =
      shift + std::log((alpha_full.array() - shift).exp().sum());
  return static_cast<double>(k_total) * zeta * lse - zeta * alpha_full.sum();
}

// phi = K zeta log(sum_k exp(alpha_k)) - zeta sum_k alpha_k, alpha_K = 0.
inline double reg_dirichlet(const GmmParams& p, const PriorConfig& cfg) {
  Vector full(p.K);
  full.head(p.K - 1) = p.alpha;
  full(p.K - 1) = 0.0;
  return reg_dirichlet_full(full, cfg.zeta);
}

// ---------------------------------------------------------------------------
// Full objective: batch NLL plus weighted regularizers. For minibatch
// stochastic gradients reg_scale = b/l keeps the sum of batch objectives over
// a partition equal to the full objective; full-batch evaluation uses 1.
inline double objective(const Matrix& batch, const GmmParams& p,
                        const PriorConfig& cfg, double reg_scale = 1.0) {
  double value = nll(batch, p);
  if (p.mode != CovMode::Orthogonal && cfg.w_wishart != 0.0) {
    value += reg_scale * cfg.w_wishart * reg_wishart(p, cfg);
  }
  if (cfg.w_gamma != 0.0) value += reg_scale * cfg.w_gamma * reg_gamma(p, cfg);
  if (cfg.w_mean != 0.0) value += reg_scale * cfg.w_mean * reg_mean(p, cfg);
  if (cfg.w_dirichlet != 0.0) {
    value += reg_scale * cfg.w_dirichlet * reg_dirichlet(p, cfg);
  }
  if (!std::isfinite(value)) throw NumericError("objective: non-finite value");
  return value;
}

}  // namespace tiedgmm
