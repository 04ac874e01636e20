#pragma once

// The fit loop: minibatch first-order optimization of the regularized
// objective with per-epoch shuffling, a cosine-annealed warm-up schedule,
// and periodic re-orthogonalization of the SO(n) factor.

#include <Eigen/Dense>
#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "tiedgmm/data.hpp"
#include "tiedgmm/gradients.hpp"
#include "tiedgmm/init.hpp"
#include "tiedgmm/metrics.hpp"
#include "tiedgmm/model.hpp"
#include "tiedgmm/optimizer.hpp"
#include "tiedgmm/schedule.hpp"

namespace tiedgmm {

struct RunConfig {
  CovMode mode = CovMode::Orthogonal;
  std::string optimizer = "acclip-manifold";
  int epochs = 100;
  int batch_size = 16;
  int K = 5;
  std::uint64_t seed = 0;

  double eta_max = 0.05;
  double warmup_fraction = 0.05;
  double lr_floor_ratio = 0.01;

  ClipConfig clip;  // clip.mode applies to the sgd optimizer family
  Retraction retraction = Retraction::Qr;
  ProjForm proj_form = ProjForm::SkewGy;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double omega = 1.0;
  double zeta = 0.99;
  double shrinkage = 0.01;
  bool paper_literal_psi3 = false;
  double w_wishart = 1.0;
  double w_gamma = 1.0;
  double w_mean = 1.0;
  double w_dirichlet = 1.0;

  std::string pca_mode = "auto";  // off | auto | on
  double pca_var_threshold = 0.94;
  int pca_max_dim = 101;
  double train_fraction = 0.8;
  long reorth_every = 1000;

  bool manifold_optimizer() const {
    return optimizer.ends_with("-manifold");
  }
  std::string optimizer_method() const {
    const auto dash = optimizer.find('-');
    return optimizer.substr(0, dash);
  }

  void validate() const {
    const std::string method = optimizer_method();
    const bool manifold = manifold_optimizer();
    if (method != "adam" && method != "acclip" && method != "sgd") {
      throw ConfigError("config: unknown optimizer method: " + optimizer);
    }
    if (!manifold && !optimizer.ends_with("-euclidean")) {
      throw ConfigError("config: optimizer must end in -euclidean or "
                        "-manifold: " + optimizer);
    }
    if (manifold && mode != CovMode::Orthogonal) {
      throw ConfigError("config: manifold optimizers require orthogonal mode");
    }
    if (mode == CovMode::Orthogonal && !manifold) {
      throw ConfigError(
          "config: orthogonal mode requires a manifold optimizer");
    }
    if (mode == CovMode::Plu && manifold) {
      throw ConfigError("config: plu mode requires a euclidean optimizer");
    }
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (K < 1) throw ConfigError("config: K must be >= 1");
    if (shrinkage <= 0.0) throw ConfigError("config: shrinkage must be > 0");
    if (omega <= 0.0) throw ConfigError("config: omega must be > 0");
    if (pca_mode != "off" && pca_mode != "auto" && pca_mode != "on") {
      throw ConfigError("config: pca_mode must be off, auto or on");
    }
    clip.validate();
  }

  OptimizerConfig optimizer_config() const {
    OptimizerConfig oc;
    const std::string method = optimizer_method();
    if (method == "adam") {
      oc.method = OptimMethod::Adam;
    } else {
      oc.method = OptimMethod::ClippedSgd;
      oc.clip = clip;
      if (method == "acclip") oc.clip.mode = ClipMode::AcClip;
    }
    oc.retraction = retraction;
    oc.proj_form = proj_form;
    oc.adam_beta1 = adam_beta1;
    oc.adam_beta2 = adam_beta2;
    oc.adam_eps = adam_eps;
    return oc;
  }

  PriorConfig prior_config(const Matrix& train) const {
    PriorConfig prior = make_prior_from_data(train, K);
    prior.zeta = zeta;
    prior.shrinkage = shrinkage;
    prior.paper_literal_psi3 = paper_literal_psi3;
    prior.w_wishart = w_wishart;
    prior.w_gamma = w_gamma;
    prior.w_mean = w_mean;
    prior.w_dirichlet = w_dirichlet;
    return prior;
  }
};

namespace detail {

inline void scale_grads(GmmGrads& g, double factor) {
  g.dtilde *= factor;
  g.mu *= factor;
  g.alpha *= factor;
  if (g.u.size() > 0) g.u *= factor;
  if (g.lambda_tilde.size() > 0) g.lambda_tilde *= factor;
  if (g.plu.scale.size() > 0) {
    g.plu.lower *= factor;
    g.plu.upper *= factor;
    g.plu.scale *= factor;
  }
}

}  // namespace detail

struct FitResult {
  GmmParams params;
  FitReport report;
};

// Runs the epoch loop on preprocessed train/test matrices. The stochastic
// gradient is the mean over the minibatch of the per-point objective
// gradient, with the regularizer weighted by the batch fraction so its
// expectation matches the full-batch direction. Traces record the full
// train objective and the held-out average NLL once per epoch.
inline FitResult fit(const Matrix& train, const Matrix& test,
                     const RunConfig& cfg) {
  cfg.validate();
  if (train.rows() < cfg.K) {
    throw ConfigError("fit: fewer training rows than components");
  }
  const Eigen::Index l = train.rows();
  const Eigen::Index b = cfg.batch_size;

  std::mt19937_64 master(cfg.seed);
  const std::uint64_t init_seed = master();
  std::mt19937_64 shuffle_rng(master());

  FitResult result;
  result.params = init_params(train, cfg.K, cfg.mode, init_seed, cfg.omega);
  const PriorConfig prior = cfg.prior_config(train);
  const OptimizerConfig opt_cfg = cfg.optimizer_config();

  LrSchedule sched;
  sched.eta_max = cfg.eta_max;
  sched.total_epochs = cfg.epochs;
  sched.warmup_fraction = cfg.warmup_fraction;
  sched.steps_per_epoch = static_cast<int>((l + b - 1) / b);
  sched.floor_ratio = cfg.lr_floor_ratio;
  sched.validate();

  OptimState state;
  std::vector<Eigen::Index> order(l);
  for (Eigen::Index i = 0; i < l; ++i) order[i] = i;
  Matrix batch(b, train.cols());

  result.report.seed = cfg.seed;
  result.report.train_objective.reserve(cfg.epochs);
  result.report.test_avg_nll.reserve(cfg.epochs);
  result.report.epoch_seconds.reserve(cfg.epochs);

  long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Eigen::Index offset = 0; offset < l; offset += b) {
      const Eigen::Index take = std::min<Eigen::Index>(b, l - offset);
      batch.resize(take, train.cols());
      for (Eigen::Index i = 0; i < take; ++i) {
        batch.row(i) = train.row(order[offset + i]);
      }
      GmmGrads g = grad(batch, result.params, prior,
                        static_cast<double>(take) / static_cast<double>(l));
      detail::scale_grads(g, 1.0 / static_cast<double>(take));
      step(result.params, g, state, opt_cfg, lr_at(t, sched));
      ++t;
      if (cfg.reorth_every > 0 && t % cfg.reorth_every == 0) {
        reorthogonalize(result.params);
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    result.report.epoch_seconds.push_back(seconds);
    result.report.train_objective.push_back(
        objective(train, result.params, prior, 1.0));
    result.report.test_avg_nll.push_back(
        test.rows() > 0 ? avg_nll(test, result.params)
                        : std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

}  // namespace tiedgmm
