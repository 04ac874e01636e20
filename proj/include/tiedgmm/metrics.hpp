#pragma once

// Evaluation indices: average negative log-likelihood per point, summed
// Frobenius covariance discrepancies, and summed cosine distances between
// matched mean vectors. Estimated components are matched to the truth by a
// minimum-cost assignment on mean distances.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiedgmm/data.hpp"
#include "tiedgmm/errors.hpp"
#include "tiedgmm/model.hpp"

namespace tiedgmm {

// Kuhn-Munkres on a square cost matrix; returns the column assigned to each
// row of the minimum-cost perfect matching.
inline std::vector<int> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw DimensionError("hungarian: cost matrix must be square");
  }
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j]) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

// perm[k] = index of the estimated component matched to true component k,
// minimizing the total Euclidean distance between means.
inline std::vector<int> match_components(const Matrix& est_means,
                                         const Matrix& true_means) {
  if (est_means.rows() != true_means.rows() ||
      est_means.cols() != true_means.cols()) {
    throw ConfigError("match_components: component counts differ");
  }
  const int K = static_cast<int>(est_means.rows());
  Matrix cost(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      cost(i, j) = (est_means.row(i) - true_means.row(j)).norm();
    }
  }
  const std::vector<int> est_to_true = hungarian(cost);
  std::vector<int> perm(K, -1);
  for (int i = 0; i < K; ++i) perm[est_to_true[i]] = i;
  return perm;
}

// Sum over components of || est_cov_{perm(k)} - true_cov_k ||_F.
inline double cov_err(const std::vector<Matrix>& est_covs,
                      const TrueModel& truth, const std::vector<int>& perm) {
  if (static_cast<int>(est_covs.size()) != truth.K()) {
    throw ConfigError("cov_err: component counts differ");
  }
  double acc = 0.0;
  for (int k = 0; k < truth.K(); ++k) {
    acc += (est_covs[perm[k]] - truth.covariances[k]).norm();
  }
  return acc;
}

// Sum over components of 1 - cos(angle) between matched mean vectors; a
// zero vector on either side contributes 1 for that component.
inline double mean_err(const Matrix& est_means, const TrueModel& truth,
                       const std::vector<int>& perm) {
  if (est_means.rows() != truth.K()) {
    throw ConfigError("mean_err: component counts differ");
  }
  double acc = 0.0;
  for (int k = 0; k < truth.K(); ++k) {
    const Eigen::RowVectorXd a = est_means.row(perm[k]);
    const Eigen::RowVectorXd b = truth.means.row(k);
    const double den = a.norm() * b.norm();
    acc += den > 0.0 ? 1.0 - a.dot(b) / den : 1.0;
  }
  return acc;
}

inline double avg_nll(const Matrix& test, const GmmParams& params) {
  if (test.rows() < 1) throw ConfigError("avg_nll: empty test set");
  return nll(test, params) / static_cast<double>(test.rows());
}

// Average NLL of a dense-covariance reference model, for scoring fits
// against the generating truth.
inline double true_model_avg_nll(const Matrix& x, const TrueModel& model) {
  const int K = model.K();
  const int n = model.n();
  if (x.cols() != n) throw DimensionError("true_model_avg_nll: dimension");
  Vector log_norm(K);
  std::vector<Eigen::LLT<Matrix>> llts;
  llts.reserve(K);
  for (int k = 0; k < K; ++k) {
    llts.emplace_back(model.covariances[k]);
    if (llts.back().info() != Eigen::Success) {
      throw NumericError("true_model_avg_nll: covariance not SPD");
    }
    double half_logdet = 0.0;
    const Matrix l = llts.back().matrixL();
    for (int i = 0; i < n; ++i) half_logdet += std::log(l(i, i));
    log_norm(k) = std::log(model.weights(k)) - half_logdet -
                  0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  double total = 0.0;
  Vector log_rho(K);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int k = 0; k < K; ++k) {
      const Vector v = x.row(i).transpose() - model.means.row(k).transpose();
      const Vector y = llts[k].matrixL().solve(v);
      log_rho(k) = log_norm(k) - 0.5 * y.squaredNorm();
    }
    const double shift = log_rho.maxCoeff();
    total -= shift + std::log((log_rho.array() - shift).exp().sum());
  }
  return total / static_cast<double>(x.rows());
}

// Per-fit record: objective and held-out NLL traces, timing, recovery
// errors when the generating model is known, and the resolved run
// configuration for exact re-runs.
struct FitReport {
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<double> train_objective;
  std::vector<double> test_avg_nll;
  std::vector<double> epoch_seconds;
  bool has_truth_errors = false;
  double final_cov_err = 0.0;
  double final_mean_err = 0.0;
};

}  // namespace tiedgmm
