#pragma once

// End-to-end runs: split, optional PCA, whitening, fit, checkpointing and
// evaluation. Fitted parameters live in the preprocessed coordinates; the
// checkpoint carries the transform so evaluation can score NLL in model
// space and recovery errors in the original space.

#include <optional>
#include <string>

#include "tiedgmm/data.hpp"
#include "tiedgmm/fit.hpp"
#include "tiedgmm/metrics.hpp"
#include "tiedgmm/serialize.hpp"

namespace tiedgmm {

struct Checkpoint {
  GmmParams params;
  std::optional<Preprocess> preprocess;
};

inline json checkpoint_to_json(const Checkpoint& ck) {
  json j;
  j["schema"] = "tiedgmm.checkpoint.v1";
  j["params"] = params_to_json(ck.params);
  j["preprocess"] =
      ck.preprocess ? preprocess_to_json(*ck.preprocess) : json(nullptr);
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("schema", "") != "tiedgmm.checkpoint.v1") {
    throw ParseError("checkpoint: unexpected schema tag");
  }
  Checkpoint ck;
  ck.params = params_from_json(j.at("params"));
  if (!j.at("preprocess").is_null()) {
    ck.preprocess = preprocess_from_json(j.at("preprocess"));
  }
  return ck;
}

struct PipelineResult {
  GmmParams params;
  Preprocess preprocess;
  FitReport report;
  Matrix train_raw;  // original-coordinate splits
  Matrix test_raw;

  Checkpoint checkpoint() const { return Checkpoint{params, preprocess}; }
};

// split -> [pca] -> whiten -> init -> epoch loop. PCA joins the pipeline
// when requested explicitly or, in auto mode, when the input dimension
// exceeds the cap.
inline PipelineResult run_fit_pipeline(const Matrix& raw,
                                       const RunConfig& cfg) {
  cfg.validate();
  PipelineResult out;
  auto [train_raw, test_raw] = split_rows(raw, cfg.train_fraction, cfg.seed);
  out.train_raw = std::move(train_raw);
  out.test_raw = std::move(test_raw);
  const bool use_pca =
      cfg.pca_mode == "on" ||
      (cfg.pca_mode == "auto" && raw.cols() > cfg.pca_max_dim);
  out.preprocess = fit_preprocess(out.train_raw, use_pca,
                                  cfg.pca_var_threshold, cfg.pca_max_dim);
  const Matrix train = out.preprocess.apply(out.train_raw);
  const Matrix test = out.preprocess.apply(out.test_raw);
  FitResult fr = fit(train, test, cfg);
  out.params = std::move(fr.params);
  out.report = std::move(fr.report);
  out.report.config = run_config_to_json(cfg);
  return out;
}

struct EvalResult {
  double avg_nll = 0.0;  // model (preprocessed) space, matches the trace
  bool has_truth = false;
  double truth_avg_nll = 0.0;  // same space as avg_nll
  double cov_err = 0.0;        // original space
  double mean_err = 0.0;       // original space
};

// Scores a checkpoint on raw data rows. With the generating model supplied,
// adds its NLL on the same rows plus matched covariance and mean errors in
// the original coordinates (the preprocessing must not have discarded
// dimensions for those).
inline EvalResult evaluate(const Checkpoint& ck, const Matrix& raw,
                           const TrueModel* truth = nullptr) {
  EvalResult out;
  const Matrix x = ck.preprocess ? ck.preprocess->apply(raw) : raw;
  out.avg_nll = avg_nll(x, ck.params);
  if (truth == nullptr) return out;

  out.has_truth = true;
  if (static_cast<int>(truth->K()) != ck.params.K) {
    throw ConfigError("evaluate: component counts differ from the truth");
  }
  if (ck.preprocess && !ck.preprocess->invertible()) {
    throw ConfigError("evaluate: reduced pipeline cannot map back to the "
                      "original space");
  }
  const double log_det =
      ck.preprocess ? ck.preprocess->log_abs_det() : 0.0;
  out.truth_avg_nll = true_model_avg_nll(raw, *truth) + log_det;

  const std::vector<Matrix> model_covs = covariances(ck.params);
  Matrix est_means(ck.params.K, truth->n());
  std::vector<Matrix> est_covs(ck.params.K);
  for (int k = 0; k < ck.params.K; ++k) {
    const Vector mu_model = ck.params.mu.row(k).transpose();
    est_means.row(k) =
        (ck.preprocess ? ck.preprocess->mean_to_original(mu_model)
                       : mu_model)
            .transpose();
    est_covs[k] = ck.preprocess
                      ? ck.preprocess->cov_to_original(model_covs[k])
                      : model_covs[k];
  }
  const std::vector<int> perm = match_components(est_means, truth->means);
  out.cov_err = cov_err(est_covs, *truth, perm);
  out.mean_err = mean_err(est_means, *truth, perm);
  return out;
}

inline json eval_to_json(const EvalResult& e) {
  json j;
  j["schema"] = "tiedgmm.metrics.v1";
  j["avg_nll"] = e.avg_nll;
  if (e.has_truth) {
    j["truth_avg_nll"] = e.truth_avg_nll;
    j["cov_err"] = e.cov_err;
    j["mean_err"] = e.mean_err;
  } else {
    j["truth_avg_nll"] = nullptr;
    j["cov_err"] = nullptr;
    j["mean_err"] = nullptr;
  }
  return j;
}

// Companion flat trace for plotting: epoch, test avg NLL, seconds.
inline void write_trace_csv(const std::string& path, const FitReport& r) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out.precision(17);
  out << "epoch,nll,seconds\n";
  for (std::size_t e = 0; e < r.test_avg_nll.size(); ++e) {
    out << e << ',' << r.test_avg_nll[e] << ',' << r.epoch_seconds[e]
        << '\n';
  }
}

}  // namespace tiedgmm
