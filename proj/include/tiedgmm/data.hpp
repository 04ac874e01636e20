#pragma once

// Synthetic data with controlled cluster separation and covariance
// eccentricity, plus the preprocessing pipeline: train/test split, optional
// PCA reduction, whitening. CSV ingestion for user-supplied datasets.

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tiedgmm/errors.hpp"
#include "tiedgmm/manifold.hpp"

namespace tiedgmm {

enum class SynthStructure { Random, Orthogonal };

inline std::string to_string(SynthStructure s) {
  return s == SynthStructure::Random ? "random" : "orthogonal";
}

inline SynthStructure synth_structure_from_string(const std::string& s) {
  if (s == "random") return SynthStructure::Random;
  if (s == "orthogonal") return SynthStructure::Orthogonal;
  throw ConfigError("unknown structure: " + s);
}

struct SyntheticSpec {
  int n = 5;
  int K = 5;
  double separation = 1.0;     // pairwise-mean threshold scale c
  double eccentricity = 10.0;  // largest / smallest covariance eigenvalue
  long size = 0;
  SynthStructure structure = SynthStructure::Random;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || K < 1) throw ConfigError("synth: n and K must be >= 1");
    if (separation <= 0.0) throw ConfigError("synth: separation must be > 0");
    if (eccentricity < 1.0) {
      throw ConfigError("synth: eccentricity must be >= 1");
    }
    if (n == 1 && eccentricity != 1.0) {
      throw ConfigError("synth: eccentricity needs n >= 2");
    }
  }
};

struct TrueModel {
  Vector weights;
  Matrix means;  // K x n, one row per component
  std::vector<Matrix> covariances;
  SynthStructure structure = SynthStructure::Random;

  int K() const { return static_cast<int>(means.rows()); }
  int n() const { return static_cast<int>(means.cols()); }
};

// The printed inequality with the pairwise trace maximum:
// ||mu_i - mu_j|| >= c max{tr(cov_i), tr(cov_j)} for every pair.
inline bool check_separation(const TrueModel& model, double c) {
  const int K = model.K();
  if (K < 2) return true;
  Vector traces(K);
  for (int k = 0; k < K; ++k) traces(k) = model.covariances[k].trace();
  for (int i = 0; i < K; ++i) {
    for (int j = i + 1; j < K; ++j) {
      const double dist = (model.means.row(i) - model.means.row(j)).norm();
      if (dist < c * std::max(traces(i), traces(j))) return false;
    }
  }
  return true;
}

namespace detail {

// Log-uniform eigenvalues on [1, e] with the extremes pinned so that the
// ratio is exactly the requested eccentricity.
inline Vector eccentric_eigenvalues(int n, double ecc, std::mt19937_64& rng) {
  if (ecc == 1.0) return Vector::Ones(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector vals(n);
  for (int i = 0; i < n; ++i) vals(i) = std::exp(unif(rng) * std::log(ecc));
  Eigen::Index lo, hi;
  vals.minCoeff(&lo);
  vals.maxCoeff(&hi);
  if (lo == hi) hi = (lo + 1) % n;
  vals(lo) = 1.0;
  vals(hi) = ecc;
  return vals;
}

}  // namespace detail

// Covariances are Q diag(vals) Q^T with a shared Q for the orthogonal
// structure and independent ones otherwise. Means start uniform in
// [-1, 1]^n and are rescaled about their centroid by exactly the factor
// that puts the tightest pair on the separation boundary.
inline TrueModel synth_model(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  TrueModel model;
  model.structure = spec.structure;
  model.weights = Vector::Constant(spec.K, 1.0 / spec.K);

  const Matrix shared_q = random_orthogonal(spec.n, rng());
  model.covariances.reserve(spec.K);
  for (int k = 0; k < spec.K; ++k) {
    const Matrix q = spec.structure == SynthStructure::Orthogonal
                         ? shared_q
                         : random_orthogonal(spec.n, rng());
    const Vector vals = detail::eccentric_eigenvalues(spec.n,
                                                      spec.eccentricity, rng);
    Matrix cov = q * vals.asDiagonal() * q.transpose();
    model.covariances.push_back(0.5 * (cov + cov.transpose()));
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    model.means = Matrix::NullaryExpr(spec.K, spec.n,
                                      [&]() { return box(rng); });
    if (spec.K < 2) return model;
    Vector traces(spec.K);
    for (int k = 0; k < spec.K; ++k) {
      traces(k) = model.covariances[k].trace();
    }
    double factor = 0.0;
    bool degenerate = false;
    for (int i = 0; i < spec.K && !degenerate; ++i) {
      for (int j = i + 1; j < spec.K; ++j) {
        const double dist =
            (model.means.row(i) - model.means.row(j)).norm();
        if (dist < 1e-9) {
          degenerate = true;
          break;
        }
        const double threshold =
            spec.separation * std::max(traces(i), traces(j));
        factor = std::max(factor, threshold / dist);
      }
    }
    if (degenerate) continue;
    const Eigen::RowVectorXd centroid = model.means.colwise().mean();
    const double scale = factor * (1.0 + 1e-9);
    model.means = ((model.means.rowwise() - centroid) * scale).rowwise() +
                  centroid;
    return model;
  }
  throw NumericError("synth_model: failed to draw distinct means");
}

// Ancestral sampling: component index from the weights, then a Gaussian
// draw through the Cholesky factor of its covariance.
inline Matrix sample(const TrueModel& model, long size, std::uint64_t seed) {
  if (size < 1) throw ConfigError("sample: size must be >= 1");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(
      model.weights.data(), model.weights.data() + model.weights.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Matrix> chol;
  chol.reserve(model.K());
  for (const Matrix& cov : model.covariances) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("sample: covariance is not positive definite");
    }
    chol.push_back(llt.matrixL());
  }
  Matrix x(size, model.n());
  Vector z(model.n());
  for (long i = 0; i < size; ++i) {
    const int k = pick(rng);
    for (int j = 0; j < model.n(); ++j) z(j) = gauss(rng);
    x.row(i) = model.means.row(k) + (chol[k] * z).transpose();
  }
  return x;
}

// ---------------------------------------------------------------------------
// Whitening.

struct WhitenTransform {
  Vector mean;
  Matrix w;      // X' = (X - mean) w
  Matrix w_inv;  // X = X' w_inv + mean

  Matrix apply(const Matrix& x) const {
    return (x.rowwise() - mean.transpose()) * w;
  }
  Matrix unapply(const Matrix& x) const {
    return (x * w_inv).rowwise() + mean.transpose();
  }
};

// Eigendecomposition whitening with an eigenvalue floor of 1e-10 against
// rank deficiency; the transform is fit on the training split only.
inline WhitenTransform fit_whiten(const Matrix& x) {
  if (x.rows() < 2) throw ConfigError("whiten: need at least two rows");
  WhitenTransform t;
  t.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - t.mean.transpose();
  const Matrix cov =
      centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector vals = es.eigenvalues().cwiseMax(1e-10);
  t.w = es.eigenvectors() * vals.cwiseSqrt().cwiseInverse().asDiagonal();
  t.w_inv = vals.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return t;
}

// ---------------------------------------------------------------------------
// PCA reduction.

struct PcaReduction {
  Vector mean;
  Matrix basis;  // n x d, leading principal directions
  double explained = 1.0;

  Matrix apply(const Matrix& x) const {
    return (x.rowwise() - mean.transpose()) * basis;
  }
  Eigen::Index in_dim() const { return basis.rows(); }
  Eigen::Index out_dim() const { return basis.cols(); }
};

// Keeps the smallest number of leading components whose cumulative explained
// variance reaches the threshold, capped at max_dim; if the cap binds, the
// achieved fraction is recorded. A full-dimension result degenerates to the
// identity projection.
inline PcaReduction fit_pca(const Matrix& x, double var_threshold = 0.94,
                            int max_dim = 101) {
  if (x.rows() < 2) throw ConfigError("pca: need at least two rows");
  const Eigen::Index n = x.cols();
  PcaReduction r;
  r.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - r.mean.transpose();
  const Matrix cov =
      centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);  // ascending eigenvalues
  const double total = es.eigenvalues().cwiseMax(0.0).sum();
  Eigen::Index d = 1;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += std::max(es.eigenvalues()(n - 1 - i), 0.0);
    d = i + 1;
    if (total > 0.0 && cum / total >= var_threshold) break;
    if (d >= std::min<Eigen::Index>(max_dim, n)) break;
  }
  if (d == n) {
    r.basis = Matrix::Identity(n, n);
    r.explained = 1.0;
    return r;
  }
  r.basis.resize(n, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    r.basis.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  r.explained = total > 0.0 ? cum / total : 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// Combined preprocessing: optional PCA on centered data, then whitening of
// the (reduced) coordinates. Fit on the training split, applied to both.

struct Preprocess {
  bool has_pca = false;
  PcaReduction pca;
  WhitenTransform whiten;

  Matrix apply(const Matrix& x) const {
    return whiten.apply(has_pca ? pca.apply(x) : x);
  }
  Eigen::Index model_dim() const { return whiten.w.cols(); }

  // Model-space parameters map back to the original coordinates only when
  // no dimensions were discarded.
  bool invertible() const {
    return !has_pca || pca.out_dim() == pca.in_dim();
  }
  Vector mean_to_original(const Vector& mu) const {
    Vector v = whiten.w_inv.transpose() * mu + whiten.mean;
    if (has_pca) v = (pca.basis * v + pca.mean).eval();
    return v;
  }
  Matrix cov_to_original(const Matrix& cov) const {
    Matrix c = whiten.w_inv.transpose() * cov * whiten.w_inv;
    if (has_pca) c = (pca.basis * c * pca.basis.transpose()).eval();
    return c;
  }
  // log |det| of the full linear map to model space; the per-point NLL
  // offset between original and model coordinates.
  double log_abs_det() const {
    if (!invertible()) {
      throw ConfigError("preprocess: reduced pipeline has no determinant");
    }
    double acc = 0.0;
    Eigen::PartialPivLU<Matrix> lu(whiten.w);
    for (Eigen::Index i = 0; i < whiten.w.rows(); ++i) {
      acc += std::log(std::abs(lu.matrixLU()(i, i)));
    }
    return acc;  // the PCA factor is orthonormal
  }
};

inline Preprocess fit_preprocess(const Matrix& train, bool use_pca,
                                 double var_threshold = 0.94,
                                 int max_dim = 101) {
  Preprocess pre;
  pre.has_pca = use_pca;
  if (use_pca) {
    pre.pca = fit_pca(train, var_threshold, max_dim);
    pre.whiten = fit_whiten(pre.pca.apply(train));
  } else {
    pre.whiten = fit_whiten(train);
  }
  return pre;
}

// ---------------------------------------------------------------------------
// Train/test split: seeded shuffle, first fraction is the training set.

inline std::pair<Matrix, Matrix> split_rows(const Matrix& x,
                                            double train_fraction,
                                            std::uint64_t seed) {
  const Eigen::Index l = x.rows();
  if (l < 5) throw ConfigError("split: need at least five rows");
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ConfigError("split: train_fraction in (0,1)");
  }
  std::vector<Eigen::Index> idx(l);
  for (Eigen::Index i = 0; i < l; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const Eigen::Index train_count =
      static_cast<Eigen::Index>(std::floor(train_fraction * l));
  Matrix train(train_count, x.cols());
  Matrix test(l - train_count, x.cols());
  for (Eigen::Index i = 0; i < train_count; ++i) train.row(i) = x.row(idx[i]);
  for (Eigen::Index i = train_count; i < l; ++i) {
    test.row(i - train_count) = x.row(idx[i]);
  }
  return {train, test};
}

// ---------------------------------------------------------------------------
// CSV input/output. Comma-separated, '.' decimal point regardless of locale,
// optional header detected by a non-numeric first row.

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  if (begin == end) return false;
  const auto result = std::from_chars(begin, end, out);
  return result.ec == std::errc() && result.ptr == end;
}

inline std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

inline Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_cells(line);
    std::vector<double> row(cells.size());
    bool ok = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!detail::parse_double(cells[c], row[c])) {
        ok = false;
        bad_col = c;
        break;
      }
    }
    if (!ok) {
      if (!header_checked && rows.empty()) {
        header_checked = true;  // treat the first non-numeric row as a header
        continue;
      }
      throw ParseError("load_csv: non-numeric cell at row " +
                       std::to_string(line_no) + ", column " +
                       std::to_string(bad_col + 1));
    }
    header_checked = true;
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError("load_csv: ragged row " + std::to_string(line_no) +
                       " (expected " + std::to_string(width) + " columns)");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("load_csv: no data rows in " + path);
  Matrix x(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) x(i, j) = rows[i][j];
  }
  return x;
}

inline void write_csv(const std::string& path, const Matrix& x) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_csv: cannot open " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j > 0) out << ',';
      out << x(i, j);
    }
    out << '\n';
  }
}

}  // namespace tiedgmm
