#pragma once

// Stochastic first-order updates on the product manifold formed by the
// parameter pack: the shared factor lives on SO(n) in orthogonal mode, every
// other block is Euclidean. Each step updates a momentum buffer in Euclidean
// coordinates, clips it, projects onto the factor's tangent space (identity
// for Euclidean factors) and retracts. Momentum is carried verbatim between
// steps since vector transport is the identity.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tiedgmm/clipping.hpp"
#include "tiedgmm/gradients.hpp"
#include "tiedgmm/manifold.hpp"
#include "tiedgmm/model.hpp"

namespace tiedgmm {

enum class OptimMethod { ClippedSgd, Adam };

struct OptimizerConfig {
  OptimMethod method = OptimMethod::ClippedSgd;
  ClipConfig clip;
  Retraction retraction = Retraction::Qr;
  ProjForm proj_form = ProjForm::SkewGy;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Visits every parameter block in a fixed order together with its gradient
// and whether it lives on the SO(n) factor.
template <class Fn>
inline void for_each_factor(GmmParams& p, const GmmGrads& g, Fn&& fn) {
  switch (p.mode) {
    case CovMode::Unconstrained:
      fn(Eigen::Ref<Matrix>(p.u), Eigen::Ref<const Matrix>(g.u), false);
      break;
    case CovMode::Plu:
      fn(Eigen::Ref<Matrix>(p.plu.lower),
         Eigen::Ref<const Matrix>(g.plu.lower), false);
      fn(Eigen::Ref<Matrix>(p.plu.upper),
         Eigen::Ref<const Matrix>(g.plu.upper), false);
      fn(Eigen::Ref<Matrix>(p.plu.scale),
         Eigen::Ref<const Matrix>(g.plu.scale), false);
      break;
    case CovMode::Orthogonal:
      fn(Eigen::Ref<Matrix>(p.u), Eigen::Ref<const Matrix>(g.u), true);
      break;
  }
  fn(Eigen::Ref<Matrix>(p.dtilde), Eigen::Ref<const Matrix>(g.dtilde), false);
  if (p.mode == CovMode::Orthogonal) {
    fn(Eigen::Ref<Matrix>(p.lambda_tilde),
       Eigen::Ref<const Matrix>(g.lambda_tilde), false);
  }
  fn(Eigen::Ref<Matrix>(p.mu), Eigen::Ref<const Matrix>(g.mu), false);
  fn(Eigen::Ref<Matrix>(p.alpha), Eigen::Ref<const Matrix>(g.alpha), false);
}

struct FactorState {
  Matrix m;    // momentum buffer
  Matrix v;    // Adam second moment
  Matrix tau;  // elementwise threshold (cclip / acclip)
};

struct OptimState {
  std::vector<FactorState> factors;
  long t = 0;

  bool initialized() const { return !factors.empty(); }

  void init(GmmParams& params, const OptimizerConfig& cfg) {
    factors.clear();
    t = 0;
    // Gradients are only used for shapes here.
    GmmGrads zero;
    zero.u = Matrix::Zero(params.u.rows(), params.u.cols());
    zero.dtilde = Matrix::Zero(params.dtilde.rows(), params.dtilde.cols());
    zero.mu = Matrix::Zero(params.mu.rows(), params.mu.cols());
    zero.alpha = Vector::Zero(params.alpha.size());
    zero.lambda_tilde = Vector::Zero(params.lambda_tilde.size());
    if (params.mode == CovMode::Plu) {
      zero.plu.lower = Matrix::Zero(params.n, params.n);
      zero.plu.upper = Matrix::Zero(params.n, params.n);
      zero.plu.scale = Vector::Zero(params.n);
    }
    for_each_factor(params, zero,
                    [&](Eigen::Ref<Matrix> value, Eigen::Ref<const Matrix>,
                        bool) {
                      FactorState fs;
                      fs.m = Matrix::Zero(value.rows(), value.cols());
                      fs.v = Matrix::Zero(value.rows(), value.cols());
                      fs.tau = Matrix::Constant(value.rows(), value.cols(),
                                                cfg.clip.tau0);
                      factors.push_back(std::move(fs));
                    });
  }
};

// One optimizer step at learning rate eta. Factor order matches
// for_each_factor; each factor keeps its own momentum and threshold state.
inline void step(GmmParams& params, const GmmGrads& grads, OptimState& state,
                 const OptimizerConfig& cfg, double eta) {
  if (!(eta > 0.0)) throw ConfigError("step: eta must be > 0");
  if (!state.initialized()) state.init(params, cfg);
  state.t += 1;
  std::size_t idx = 0;
  for_each_factor(
      params, grads,
      [&](Eigen::Ref<Matrix> value, Eigen::Ref<const Matrix> g,
          bool on_manifold) {
        FactorState& fs = state.factors.at(idx++);
        Matrix dir;
        if (cfg.method == OptimMethod::Adam) {
          fs.m = cfg.adam_beta1 * fs.m + (1.0 - cfg.adam_beta1) * g;
          fs.v = cfg.adam_beta2 * fs.v.array().matrix() +
                 (1.0 - cfg.adam_beta2) * g.array().square().matrix();
          const double bc1 =
              1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
          const double bc2 =
              1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
          dir = ((fs.m.array() / bc1) /
                 ((fs.v.array() / bc2).sqrt() + cfg.adam_eps))
                    .matrix();
        } else {
          fs.m = cfg.clip.beta1 * fs.m + (1.0 - cfg.clip.beta1) * g;
          switch (cfg.clip.mode) {
            case ClipMode::None:
              dir = fs.m;
              break;
            case ClipMode::GClip:
              dir = gclip(cfg.clip.tau0, fs.m);
              break;
            case ClipMode::CClip:
              dir = cclip(fs.tau, fs.m);
              break;
            case ClipMode::AcClip:
              fs.tau = acclip_tau_update(fs.tau, g, cfg.clip.beta2,
                                         cfg.clip.alpha);
              dir = acclip(fs.tau, fs.m, cfg.clip.eps);
              break;
          }
        }
        if (on_manifold) {
          const Matrix xi = tangent_project(value, dir, cfg.proj_form);
          value = retract(value, (-eta * xi).eval(), cfg.retraction);
        } else {
          value -= eta * dir;
        }
      });
}

// Standalone ACClip update for a single buffer: threshold EMA from the raw
// gradient, momentum EMA, then the clip.
struct AcclipState {
  Matrix m;
  Matrix tau;

  static AcclipState init(Eigen::Index rows, Eigen::Index cols, double tau0) {
    AcclipState st;
    st.m = Matrix::Zero(rows, cols);
    st.tau = Matrix::Constant(rows, cols, tau0);
    return st;
  }
};

inline Matrix acclip_step(AcclipState& st, const Matrix& g,
                          const ClipConfig& cfg) {
  st.tau = acclip_tau_update(st.tau, g, cfg.beta2, cfg.alpha);
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * g;
  return acclip(st.tau, st.m, cfg.eps);
}

// Scrubs accumulated round-off from the SO(n) factor.
inline void reorthogonalize(GmmParams& params) {
  if (params.mode == CovMode::Orthogonal) {
    params.u = detail::qr_positive_diag(params.u);
  }
}

}  // namespace tiedgmm
