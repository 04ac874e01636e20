#pragma once

// JSON schemas for parameter packs, checkpoints, generating models,
// preprocessing transforms, run configurations and fit reports. Matrices are
// row-major nested arrays; every document carries a schema tag and the
// dimensions it needs to be read back without context.

#include <fstream>
#include <string>

#include <json.hpp>

#include "tiedgmm/data.hpp"
#include "tiedgmm/fit.hpp"
#include "tiedgmm/metrics.hpp"
#include "tiedgmm/model.hpp"

namespace tiedgmm {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    throw ParseError("matrix: expected a nonempty array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ParseError("matrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      m(i, c) = j.at(i).at(c).get<double>();
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

// ---------------------------------------------------------------------------
// Parameter pack.

inline json params_to_json(const GmmParams& p) {
  json j;
  j["schema"] = "tiedgmm.params.v1";
  j["mode"] = to_string(p.mode);
  j["n"] = p.n;
  j["K"] = p.K;
  j["omega"] = p.omega;
  if (p.mode == CovMode::Plu) {
    j["plu"] = {{"lower", matrix_to_json(p.plu.lower)},
                {"upper", matrix_to_json(p.plu.upper)},
                {"scale", vector_to_json(p.plu.scale)}};
  } else {
    j["u"] = matrix_to_json(p.u);
  }
  j["dtilde"] = matrix_to_json(p.dtilde);
  if (p.mode == CovMode::Orthogonal) {
    j["lambda_tilde"] = vector_to_json(p.lambda_tilde);
  }
  j["mu"] = matrix_to_json(p.mu);
  j["alpha"] = vector_to_json(p.alpha);
  return j;
}

inline GmmParams params_from_json(const json& j) {
  if (j.value("schema", "") != "tiedgmm.params.v1") {
    throw ParseError("params: unexpected schema tag");
  }
  GmmParams p;
  p.mode = cov_mode_from_string(j.at("mode").get<std::string>());
  p.n = j.at("n").get<int>();
  p.K = j.at("K").get<int>();
  p.omega = j.at("omega").get<double>();
  if (p.mode == CovMode::Plu) {
    const json& plu = j.at("plu");
    p.plu.lower = matrix_from_json(plu.at("lower"));
    p.plu.upper = matrix_from_json(plu.at("upper"));
    p.plu.scale = vector_from_json(plu.at("scale"));
  } else {
    p.u = matrix_from_json(j.at("u"));
  }
  p.dtilde = matrix_from_json(j.at("dtilde"));
  if (p.mode == CovMode::Orthogonal) {
    p.lambda_tilde = vector_from_json(j.at("lambda_tilde"));
  }
  p.mu = matrix_from_json(j.at("mu"));
  p.alpha = j.at("alpha").empty() ? Vector(0)
                                  : vector_from_json(j.at("alpha"));
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Generating model.

inline json true_model_to_json(const TrueModel& m) {
  json j;
  j["schema"] = "tiedgmm.true_model.v1";
  j["structure"] = to_string(m.structure);
  j["n"] = m.n();
  j["K"] = m.K();
  j["weights"] = vector_to_json(m.weights);
  j["means"] = matrix_to_json(m.means);
  json covs = json::array();
  for (const Matrix& cov : m.covariances) covs.push_back(matrix_to_json(cov));
  j["covariances"] = std::move(covs);
  return j;
}

inline TrueModel true_model_from_json(const json& j) {
  if (j.value("schema", "") != "tiedgmm.true_model.v1") {
    throw ParseError("true_model: unexpected schema tag");
  }
  TrueModel m;
  m.structure = synth_structure_from_string(j.at("structure"));
  m.weights = vector_from_json(j.at("weights"));
  m.means = matrix_from_json(j.at("means"));
  for (const json& cov : j.at("covariances")) {
    m.covariances.push_back(matrix_from_json(cov));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Preprocessing transform.

inline json preprocess_to_json(const Preprocess& pre) {
  json j;
  if (pre.has_pca) {
    j["pca"] = {{"mean", vector_to_json(pre.pca.mean)},
                {"basis", matrix_to_json(pre.pca.basis)},
                {"explained", pre.pca.explained}};
  } else {
    j["pca"] = nullptr;
  }
  j["whiten"] = {{"mean", vector_to_json(pre.whiten.mean)},
                 {"w", matrix_to_json(pre.whiten.w)},
                 {"w_inv", matrix_to_json(pre.whiten.w_inv)}};
  return j;
}

inline Preprocess preprocess_from_json(const json& j) {
  Preprocess pre;
  if (!j.at("pca").is_null()) {
    pre.has_pca = true;
    pre.pca.mean = vector_from_json(j.at("pca").at("mean"));
    pre.pca.basis = matrix_from_json(j.at("pca").at("basis"));
    pre.pca.explained = j.at("pca").at("explained").get<double>();
  }
  pre.whiten.mean = vector_from_json(j.at("whiten").at("mean"));
  pre.whiten.w = matrix_from_json(j.at("whiten").at("w"));
  pre.whiten.w_inv = matrix_from_json(j.at("whiten").at("w_inv"));
  return pre;
}

// ---------------------------------------------------------------------------
// Run configuration.

inline std::string to_string(Retraction r) {
  switch (r) {
    case Retraction::Qr: return "qr";
    case Retraction::Polar: return "polar";
    case Retraction::Cayley: return "cayley";
  }
  return "unknown";
}

inline Retraction retraction_from_string(const std::string& s) {
  if (s == "qr") return Retraction::Qr;
  if (s == "polar") return Retraction::Polar;
  if (s == "cayley") return Retraction::Cayley;
  throw ConfigError("unknown retraction: " + s);
}

inline std::string to_string(ClipMode m) {
  switch (m) {
    case ClipMode::None: return "none";
    case ClipMode::GClip: return "gclip";
    case ClipMode::CClip: return "cclip";
    case ClipMode::AcClip: return "acclip";
  }
  return "unknown";
}

inline ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "none") return ClipMode::None;
  if (s == "gclip") return ClipMode::GClip;
  if (s == "cclip") return ClipMode::CClip;
  if (s == "acclip") return ClipMode::AcClip;
  throw ConfigError("unknown clip mode: " + s);
}

inline json run_config_to_json(const RunConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  j["optimizer"] = c.optimizer;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["K"] = c.K;
  j["seed"] = c.seed;
  j["lr"] = {{"eta_max", c.eta_max},
             {"warmup_fraction", c.warmup_fraction},
             {"floor_ratio", c.lr_floor_ratio}};
  j["clip"] = {{"mode", to_string(c.clip.mode)}, {"tau0", c.clip.tau0},
               {"beta1", c.clip.beta1},          {"beta2", c.clip.beta2},
               {"alpha", c.clip.alpha},          {"eps", c.clip.eps}};
  j["retraction"] = to_string(c.retraction);
  j["proj_form"] = c.proj_form == ProjForm::SkewGy ? "first" : "second";
  j["adam"] = {{"beta1", c.adam_beta1},
               {"beta2", c.adam_beta2},
               {"eps", c.adam_eps}};
  j["prior"] = {{"omega", c.omega},
                {"zeta", c.zeta},
                {"shrinkage", c.shrinkage},
                {"paper_literal_psi3", c.paper_literal_psi3},
                {"weights",
                 {{"wishart", c.w_wishart},
                  {"gamma", c.w_gamma},
                  {"mean", c.w_mean},
                  {"dirichlet", c.w_dirichlet}}}};
  j["pca"] = {{"mode", c.pca_mode},
              {"var_threshold", c.pca_var_threshold},
              {"max_dim", c.pca_max_dim}};
  j["train_fraction"] = c.train_fraction;
  j["reorth_every"] = c.reorth_every;
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.mode = cov_mode_from_string(j.value("mode", to_string(c.mode)));
  c.optimizer = j.value("optimizer", c.optimizer);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.K = j.value("K", c.K);
  c.seed = j.value("seed", c.seed);
  if (j.contains("lr")) {
    const json& lr = j.at("lr");
    c.eta_max = lr.value("eta_max", c.eta_max);
    c.warmup_fraction = lr.value("warmup_fraction", c.warmup_fraction);
    c.lr_floor_ratio = lr.value("floor_ratio", c.lr_floor_ratio);
  }
  if (j.contains("clip")) {
    const json& clip = j.at("clip");
    c.clip.mode =
        clip_mode_from_string(clip.value("mode", to_string(c.clip.mode)));
    c.clip.tau0 = clip.value("tau0", c.clip.tau0);
    c.clip.beta1 = clip.value("beta1", c.clip.beta1);
    c.clip.beta2 = clip.value("beta2", c.clip.beta2);
    c.clip.alpha = clip.value("alpha", c.clip.alpha);
    c.clip.eps = clip.value("eps", c.clip.eps);
  }
  c.retraction =
      retraction_from_string(j.value("retraction", to_string(c.retraction)));
  const std::string form = j.value("proj_form", "first");
  if (form == "first") {
    c.proj_form = ProjForm::SkewGy;
  } else if (form == "second") {
    c.proj_form = ProjForm::SkewHalfOffset;
  } else {
    throw ConfigError("config: proj_form must be first or second");
  }
  if (j.contains("adam")) {
    const json& adam = j.at("adam");
    c.adam_beta1 = adam.value("beta1", c.adam_beta1);
    c.adam_beta2 = adam.value("beta2", c.adam_beta2);
    c.adam_eps = adam.value("eps", c.adam_eps);
  }
  if (j.contains("prior")) {
    const json& prior = j.at("prior");
    c.omega = prior.value("omega", c.omega);
    c.zeta = prior.value("zeta", c.zeta);
    c.shrinkage = prior.value("shrinkage", c.shrinkage);
    c.paper_literal_psi3 =
        prior.value("paper_literal_psi3", c.paper_literal_psi3);
    if (prior.contains("weights")) {
      const json& w = prior.at("weights");
      c.w_wishart = w.value("wishart", c.w_wishart);
      c.w_gamma = w.value("gamma", c.w_gamma);
      c.w_mean = w.value("mean", c.w_mean);
      c.w_dirichlet = w.value("dirichlet", c.w_dirichlet);
    }
  }
  if (j.contains("pca")) {
    const json& pca = j.at("pca");
    c.pca_mode = pca.value("mode", c.pca_mode);
    c.pca_var_threshold = pca.value("var_threshold", c.pca_var_threshold);
    c.pca_max_dim = pca.value("max_dim", c.pca_max_dim);
  }
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.reorth_every = j.value("reorth_every", c.reorth_every);
  return c;
}

// ---------------------------------------------------------------------------
// Fit report.

inline json fit_report_to_json(const FitReport& r) {
  json j;
  j["schema"] = "tiedgmm.fit_report.v1";
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["train_objective"] = r.train_objective;
  j["test_avg_nll"] = r.test_avg_nll;
  j["epoch_seconds"] = r.epoch_seconds;
  if (r.has_truth_errors) {
    j["final_cov_err"] = r.final_cov_err;
    j["final_mean_err"] = r.final_mean_err;
  } else {
    j["final_cov_err"] = nullptr;
    j["final_mean_err"] = nullptr;
  }
  return j;
}

inline FitReport fit_report_from_json(const json& j) {
  if (j.value("schema", "") != "tiedgmm.fit_report.v1") {
    throw ParseError("fit_report: unexpected schema tag");
  }
  FitReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  r.train_objective = j.at("train_objective").get<std::vector<double>>();
  r.test_avg_nll = j.at("test_avg_nll").get<std::vector<double>>();
  r.epoch_seconds = j.at("epoch_seconds").get<std::vector<double>>();
  if (!j.at("final_cov_err").is_null()) {
    r.has_truth_errors = true;
    r.final_cov_err = j.at("final_cov_err").get<double>();
    r.final_mean_err = j.at("final_mean_err").get<double>();
  }
  return r;
}

// ---------------------------------------------------------------------------
// File helpers.

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace tiedgmm
