// Acceptance suite: each criterion prints exactly one PASS/FAIL line with
// the measured quantities; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tiedgmm/bench.hpp"
#include "tiedgmm/gradients.hpp"
#include "tiedgmm/init.hpp"
#include "tiedgmm/optimizer.hpp"
#include "tiedgmm/pipeline.hpp"

using namespace tiedgmm;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --------------------------------------------------------------------------
// Shared helpers.

GmmParams random_params(CovMode mode, int n, int K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GmmParams p;
  p.mode = mode;
  p.n = n;
  p.K = K;
  p.omega = 1.0;
  p.dtilde = Matrix::NullaryExpr(K, n, [&]() { return -1.5 + 3.0 * unif(rng); });
  p.mu = Matrix::NullaryExpr(K, n, [&]() { return gauss(rng); });
  p.alpha = Vector::NullaryExpr(K - 1, [&]() { return -1.0 + 2.0 * unif(rng); });
  switch (mode) {
    case CovMode::Unconstrained: {
      const Matrix q1 = random_orthogonal(n, seed * 2 + 1);
      const Matrix q2 = random_orthogonal(n, seed * 2 + 2);
      const Vector s = Vector::NullaryExpr(n, [&]() { return 0.6 + unif(rng); });
      p.u = q1 * s.asDiagonal() * q2;
      break;
    }
    case CovMode::Plu: {
      p.plu.lower = Matrix::NullaryExpr(n, n, [&]() { return 0.3 * gauss(rng); });
      p.plu.upper = Matrix::NullaryExpr(n, n, [&]() { return 0.3 * gauss(rng); });
      p.plu.scale = Vector::NullaryExpr(n, [&]() {
        const double mag = 0.5 + unif(rng);
        return unif(rng) < 0.5 ? -mag : mag;
      });
      break;
    }
    case CovMode::Orthogonal: {
      p.u = random_orthogonal(n, seed * 2 + 1);
      p.lambda_tilde =
          Vector::NullaryExpr(K, [&]() { return -1.0 + 2.0 * unif(rng); });
      break;
    }
  }
  return p;
}

Matrix random_batch(int rows, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.5);
  return Matrix::NullaryExpr(rows, n, [&]() { return gauss(rng); });
}

// --------------------------------------------------------------------------
// Criterion 1: analytic gradients vs central finite differences.

Outcome criterion_gradients() {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> pick_n(2, 8);
  std::uniform_int_distribution<int> pick_k(1, 4);
  std::uniform_int_distribution<int> pick_b(20, 40);
  const double h = 1e-5;
  double worst = 0.0;
  int instances = 0;
  for (auto mode :
       {CovMode::Unconstrained, CovMode::Plu, CovMode::Orthogonal}) {
    for (int trial = 0; trial < 34; ++trial) {
      const int n = pick_n(rng);
      const int K = pick_k(rng);
      GmmParams p = random_params(mode, n, K, 9000 + instances);
      const Matrix batch = random_batch(pick_b(rng), n, 700 + instances);
      PriorConfig cfg = make_prior_from_data(batch, K);
      cfg.paper_literal_psi3 = (trial % 2 == 0);
      GmmGrads g = grad(batch, p, cfg);
      for_each_factor(
          p, g,
          [&](Eigen::Ref<Matrix> value, Eigen::Ref<const Matrix> gv, bool) {
            if (value.size() == 0) return;
            Vector fd(value.size()), an(value.size());
            for (Eigen::Index i = 0; i < value.size(); ++i) {
              double* entry = value.data() + i;
              const double orig = *entry;
              *entry = orig + h;
              const double fp = objective(batch, p, cfg);
              *entry = orig - h;
              const double fm = objective(batch, p, cfg);
              *entry = orig;
              fd(i) = (fp - fm) / (2.0 * h);
              an(i) = gv.data()[i];
            }
            const double rel = (an - fd).norm() / std::max(fd.norm(), 1e-6);
            worst = std::max(worst, rel);
          });
      ++instances;
    }
  }
  Outcome out;
  out.pass = worst <= 1e-5 && instances >= 100;
  out.detail = "max relative error " + std::to_string(worst) + " over " +
               std::to_string(instances) + " instances";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 2: orthogonality through 10,000 steps per retraction.

Outcome criterion_orthogonality() {
  SyntheticSpec spec;
  spec.n = 5;
  spec.K = 5;
  spec.separation = 5.0;
  spec.size = 25000;
  spec.structure = SynthStructure::Orthogonal;
  spec.seed = 5;
  const Matrix raw = sample(synth_model(spec), spec.size, spec.seed + 1);
  const WhitenTransform whiten = fit_whiten(raw);
  const Matrix train = whiten.apply(raw);
  double worst = 0.0;
  for (auto kind : {Retraction::Qr, Retraction::Polar, Retraction::Cayley}) {
    GmmParams params = init_params(train, 5, CovMode::Orthogonal, 3);
    PriorConfig prior = make_prior_from_data(train, 5);
    OptimizerConfig opt;
    opt.method = OptimMethod::ClippedSgd;
    opt.clip.mode = ClipMode::AcClip;
    opt.retraction = kind;
    OptimState state;
    LrSchedule sched;
    sched.eta_max = 0.05;
    sched.total_epochs = 8;
    sched.steps_per_epoch = 1250;
    std::mt19937_64 order_rng(11);
    std::vector<Eigen::Index> order(train.rows());
    for (Eigen::Index i = 0; i < train.rows(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    const int b = 16;
    Matrix batch(b, train.cols());
    Eigen::Index cursor = 0;
    for (long t = 0; t < 10000; ++t) {
      for (int i = 0; i < b; ++i) {
        batch.row(i) = train.row(order[cursor]);
        cursor = (cursor + 1) % train.rows();
      }
      GmmGrads g = grad(batch, params, prior,
                        static_cast<double>(b) / train.rows());
      detail::scale_grads(g, 1.0 / b);
      step(params, g, state, opt, lr_at(t, sched));
      // No re-orthogonalization: the retraction itself must hold the bound.
      worst = std::max(worst, orthogonality_defect(params.u));
      if (worst > 1e-6) break;
    }
  }
  Outcome out;
  out.pass = worst <= 1e-6;
  out.detail = "max defect " + std::to_string(worst) +
               " over 10000 steps x {qr, polar, cayley}";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 3: high-separation recovery with the proposed method.

Outcome criterion_high_separation() {
  BenchConfig bench;
  bench.n = 5;
  bench.K = 5;
  bench.structure = SynthStructure::Orthogonal;
  bench.separations = {5.0};
  bench.sizes = {25000};
  bench.methods = {"acclip-manifold"};
  bench.num_seeds = 10;
  bench.seed0 = 0;
  bench.jobs = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));
  bench.base.epochs = 100;
  bench.base.batch_size = 16;
  const std::vector<BenchRow> rows = run_bench(bench);
  const BenchRow& r = rows.front();
  const double gap = r.avg_nll - r.truth_avg_nll;
  Outcome out;
  out.pass = gap <= 0.3 && r.mean_err <= 0.05 && r.cov_err <= 2.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "nll gap %.3f (<= 0.3), mean err %.5f (<= 0.05), cov err "
                "%.3f (<= 2.0), 10-seed means",
                gap, r.mean_err, r.cov_err);
  out.detail = buf;
  return out;
}

// --------------------------------------------------------------------------
// Criterion 4: separation ordering of the final test NLL for every method.

Outcome criterion_separation_ordering() {
  BenchConfig bench;
  bench.n = 5;
  bench.K = 5;
  bench.structure = SynthStructure::Random;
  bench.separations = {5.0, 1.0, 0.1};
  bench.sizes = {25000};
  bench.methods = {"adam-euclidean", "acclip-euclidean", "adam-manifold",
                   "acclip-manifold"};
  bench.num_seeds = 10;
  bench.seed0 = 0;
  bench.jobs = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));
  bench.base.epochs = 100;
  bench.base.batch_size = 16;
  const std::vector<BenchRow> rows = run_bench(bench);
  auto lookup = [&](double sep, const std::string& method) {
    for (const BenchRow& r : rows) {
      if (r.separation == sep && r.method == method) return r.avg_nll;
    }
    throw ConfigError("missing bench row");
  };
  Outcome out;
  out.pass = true;
  out.detail = "mean final test NLL (high, mid, low):";
  for (const std::string& method : bench.methods) {
    const double high = lookup(5.0, method);
    const double mid = lookup(1.0, method);
    const double low = lookup(0.1, method);
    const bool ordered = high < mid && mid < low;
    out.pass = out.pass && ordered;
    char buf[160];
    std::snprintf(buf, sizeof(buf), " %s %.3f/%.3f/%.3f%s", method.c_str(),
                  high, mid, low, ordered ? "" : " OUT-OF-ORDER");
    out.detail += buf;
  }
  return out;
}

// --------------------------------------------------------------------------
// Criterion 5: mode equivalence and determinant identities.

Outcome criterion_determinants() {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> pick_n(2, 10);
  std::uniform_int_distribution<int> pick_k(1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = pick_n(rng);
    const int K = pick_k(rng);
    const CovMode mode =
        (trial % 2 == 0) ? CovMode::Orthogonal : CovMode::Plu;
    const GmmParams p = random_params(mode, n, K, 3000 + trial);
    const detail::ModelEval ev = detail::make_eval(p);
    const Matrix u = p.build_u();
    const Matrix d = p.diagonals();
    const Vector lambda = p.scales();
    for (int k = 0; k < K; ++k) {
      const Matrix prec =
          lambda(k) * u * d.row(k).asDiagonal() * u.transpose();
      Eigen::PartialPivLU<Matrix> lu(prec);
      double dense = 0.0;
      for (int i = 0; i < n; ++i) {
        dense += std::log(std::abs(lu.matrixLU()(i, i)));
      }
      worst = std::max(worst, std::abs(ev.log_det(k) - dense));
    }
  }
  // Mode equivalence at identity shared factor and unit scales.
  double worst_eq = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 9;
    const int K = 1 + trial % 4;
    const Matrix batch = random_batch(30, n, 400 + trial);
    GmmParams uncon = init_params(batch, K, CovMode::Unconstrained, trial);
    GmmParams plu = uncon;
    plu.mode = CovMode::Plu;
    plu.plu = PluParams::identity(n);
    GmmParams orth = uncon;
    orth.mode = CovMode::Orthogonal;
    orth.lambda_tilde = Vector::Constant(K, softplus_inv(1.0, 1.0));
    const GmmParams noise = random_params(CovMode::Unconstrained, n, K,
                                          800 + trial);
    uncon.dtilde = plu.dtilde = orth.dtilde = noise.dtilde;
    uncon.mu = plu.mu = orth.mu = noise.mu;
    uncon.alpha = plu.alpha = orth.alpha = noise.alpha;
    const double base = nll(batch, uncon);
    worst_eq = std::max(worst_eq, std::abs(nll(batch, plu) - base));
    worst_eq = std::max(worst_eq, std::abs(nll(batch, orth) - base));
  }
  Outcome out;
  out.pass = worst <= 1e-9 && worst_eq <= 1e-10;
  out.detail = "max log-det deviation " + std::to_string(worst) +
               " over 1000 instances; max mode-equivalence deviation " +
               std::to_string(worst_eq);
  return out;
}

// --------------------------------------------------------------------------
// Criterion 6: full-batch gradient descent never increases the objective.

Outcome criterion_descent() {
  double worst_increase = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const CovMode mode = trial % 3 == 0   ? CovMode::Unconstrained
                         : trial % 3 == 1 ? CovMode::Plu
                                          : CovMode::Orthogonal;
    const int n = 2 + trial % 4;
    const int K = 1 + trial % 3;
    const Matrix batch = random_batch(40, n, 600 + trial);
    GmmParams p = init_params(batch, K, mode, trial);
    const PriorConfig prior = make_prior_from_data(batch, K);
    OptimizerConfig opt;
    opt.method = OptimMethod::ClippedSgd;
    opt.clip.mode = ClipMode::None;
    opt.clip.beta1 = 0.0;
    OptimState state;
    double prev = objective(batch, p, prior);
    for (int it = 0; it < 50; ++it) {
      step(p, grad(batch, p, prior), state, opt, 1e-4);
      const double now = objective(batch, p, prior);
      worst_increase = std::max(worst_increase, now - prev);
      prev = now;
    }
  }
  Outcome out;
  out.pass = worst_increase <= 1e-9;
  out.detail =
      "max per-step increase " + std::to_string(worst_increase) +
      " over 20 instances x 50 iterations";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 7: clipping rules against scalar brute-force oracles.

Outcome criterion_clipping() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 2.0);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd m(6, 1), tau(6, 1);
    for (int i = 0; i < 6; ++i) {
      m(i) = gauss(rng);
      tau(i) = unif(rng);
    }
    const double tau_g = unif(rng);
    // Scalar oracles evaluated coordinate by coordinate.
    const double norm = m.norm();
    const Eigen::MatrixXd g_out = gclip(tau_g, m);
    for (int i = 0; i < 6; ++i) {
      const double expect_g = std::min(tau_g / norm, 1.0) * m(i);
      worst = std::max(worst, std::abs(g_out(i) - expect_g));
      const double expect_c =
          std::min(tau(i) / std::abs(m(i)), 1.0) * m(i);
      worst = std::max(worst, std::abs(cclip(tau, m)(i) - expect_c));
      const double expect_a =
          std::min(tau(i) / (std::abs(m(i)) + 1e-8), 1.0) * m(i);
      worst = std::max(worst, std::abs(acclip(tau, m, 1e-8)(i) - expect_a));
    }
  }
  // Threshold EMA over 500 steps against a long-double scalar recurrence.
  ClipConfig cfg;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.99;
  cfg.alpha = 2.0;
  AcclipState st = AcclipState::init(1, 1, 1.0);
  long double tau_ref = 1.0L;
  long double m_ref = 0.0L;
  for (int t = 0; t < 500; ++t) {
    Eigen::MatrixXd g(1, 1);
    g << gauss(rng);
    const Eigen::MatrixXd clipped = acclip_step(st, g, cfg);
    tau_ref = std::pow(
        0.99L * std::pow(tau_ref, 2.0L) +
            0.01L * std::pow(std::abs(static_cast<long double>(g(0))), 2.0L),
        0.5L);
    m_ref = 0.9L * m_ref + 0.1L * static_cast<long double>(g(0));
    const long double clip_ref =
        std::min(tau_ref / (std::abs(m_ref) + 1e-8L), 1.0L) * m_ref;
    worst = std::max(worst,
                     std::abs(st.tau(0) - static_cast<double>(tau_ref)));
    worst = std::max(worst,
                     std::abs(clipped(0) - static_cast<double>(clip_ref)));
  }
  Outcome out;
  out.pass = worst <= 1e-12;
  out.detail = "max deviation from scalar oracles " + std::to_string(worst);
  return out;
}

// --------------------------------------------------------------------------
// Criterion 8: MAGIC-sized smoke run with the four stochastic methods.

Outcome criterion_real_scale() {
  // Stand-in for a user-supplied ~19k x 10 dataset.
  SyntheticSpec spec;
  spec.n = 10;
  spec.K = 6;
  spec.separation = 1.0;
  spec.eccentricity = 10.0;
  spec.size = 19020;
  spec.structure = SynthStructure::Random;
  spec.seed = 99;
  const Matrix raw = sample(synth_model(spec), spec.size, spec.seed + 1);

  struct MethodRun {
    std::string method;
    bool completed = false;
    bool finite = false;
    double final_nll = 0.0;
    double best_nll = 0.0;
    std::string error;
  };
  std::vector<MethodRun> runs{{"adam-euclidean"},
                              {"acclip-euclidean"},
                              {"adam-manifold"},
                              {"acclip-manifold"}};
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      MethodRun& run = runs[i];
      try {
        RunConfig cfg;
        cfg.K = 10;
        cfg.epochs = 100;
        cfg.batch_size = 16;
        cfg.seed = 7;
        apply_bench_method(cfg, run.method);
        const PipelineResult fitted = run_fit_pipeline(raw, cfg);
        run.completed = true;
        run.finite = true;
        run.best_nll = std::numeric_limits<double>::infinity();
        for (double v : fitted.report.test_avg_nll) {
          if (!std::isfinite(v)) run.finite = false;
          run.best_nll = std::min(run.best_nll, v);
        }
        for (double v : fitted.report.train_objective) {
          if (!std::isfinite(v)) run.finite = false;
        }
        run.final_nll = fitted.report.test_avg_nll.back();
      } catch (const std::exception& e) {
        run.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned i = 0; i < std::min<unsigned>(threads, 4); ++i) {
    pool.emplace_back(worker);
  }
  for (std::thread& th : pool) th.join();

  bool all_ok = true;
  double best_final = std::numeric_limits<double>::infinity();
  double best_any = std::numeric_limits<double>::infinity();
  std::string summary;
  for (const MethodRun& run : runs) {
    all_ok = all_ok && run.completed && run.finite;
    if (run.completed) {
      best_final = std::min(best_final, run.final_nll);
      best_any = std::min(best_any, run.best_nll);
      char buf[96];
      std::snprintf(buf, sizeof(buf), " %s %.3f", run.method.c_str(),
                    run.final_nll);
      summary += buf;
    } else {
      summary += " " + run.method + " FAILED(" + run.error + ")";
    }
  }
  // The winner must not have degraded by more than 10% from the best NLL
  // seen at any epoch by any method.
  const bool stable =
      all_ok && best_final <= best_any + 0.1 * std::abs(best_any);
  Outcome out;
  out.pass = all_ok && stable;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "; best final %.3f vs best anywhere %.3f",
                best_final, best_any);
  out.detail = "final test NLL:" + summary + buf;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* label;
    Outcome (*run)();
    double budget_seconds;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracle", criterion_gradients, 120.0},
      {2, "orthogonality preservation", criterion_orthogonality, 60.0},
      {3, "high-separation recovery", criterion_high_separation, 1200.0},
      {4, "separation ordering", criterion_separation_ordering, 2700.0},
      {5, "determinant identities", criterion_determinants, 30.0},
      {6, "descent sanity", criterion_descent, 60.0},
      {7, "clipping unit suite", criterion_clipping, 10.0},
      {8, "real-scale smoke", criterion_real_scale, 900.0},
  };
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const double started = now_seconds();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = now_seconds() - started;
    const bool in_budget = elapsed < c.budget_seconds;
    const bool pass = out.pass && in_budget;
    std::printf("%s criterion %d (%s): %s [%.1fs / budget %.0fs]\n",
                pass ? "PASS" : "FAIL", c.id, c.label, out.detail.c_str(),
                elapsed, c.budget_seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criterion(s) failed\n", failures);
  }
  return failures;
}
