// Command-line front end: synthesize benchmark datasets, fit flexibly-tied
// mixtures, evaluate checkpoints and run table-style sweeps.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tiedgmm/bench.hpp"
#include "tiedgmm/pipeline.hpp"
#include "tiedgmm/serialize.hpp"

namespace fs = std::filesystem;
using namespace tiedgmm;

namespace {

int cmd_synth(const SyntheticSpec& spec, const std::string& out_dir) {
  const TrueModel model = synth_model(spec);
  const Matrix samples = sample(model, spec.size, spec.seed + 1);
  fs::create_directories(out_dir);
  save_json((fs::path(out_dir) / "true_model.json").string(),
            true_model_to_json(model));
  write_csv((fs::path(out_dir) / "samples.csv").string(), samples);
  std::cout << "wrote " << out_dir << "/true_model.json and samples.csv ("
            << samples.rows() << " x " << samples.cols() << ")\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg, const std::string& data_path,
            const std::string& out_dir) {
  const Matrix raw = load_csv(data_path);
  const PipelineResult fitted = run_fit_pipeline(raw, cfg);
  fs::create_directories(out_dir);
  save_json((fs::path(out_dir) / "report.json").string(),
            fit_report_to_json(fitted.report));
  save_json((fs::path(out_dir) / "checkpoint.json").string(),
            checkpoint_to_json(fitted.checkpoint()));
  write_trace_csv((fs::path(out_dir) / "trace.csv").string(), fitted.report);
  write_csv((fs::path(out_dir) / "test.csv").string(), fitted.test_raw);
  std::cout << "final train objective " << fitted.report.train_objective.back()
            << ", final test avg nll " << fitted.report.test_avg_nll.back()
            << "\nwrote report.json, checkpoint.json, trace.csv and test.csv"
            << " under " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& truth_path, const std::string& out_path) {
  const Checkpoint ck = checkpoint_from_json(load_json(checkpoint_path));
  const Matrix raw = load_csv(data_path);
  EvalResult result;
  if (truth_path.empty()) {
    result = evaluate(ck, raw);
  } else {
    const TrueModel truth = true_model_from_json(load_json(truth_path));
    result = evaluate(ck, raw, &truth);
  }
  const json j = eval_to_json(result);
  if (!out_path.empty()) save_json(out_path, j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_path) {
  const BenchConfig bench = bench_config_from_json(load_json(config_path));
  const std::vector<BenchRow> rows = run_bench(bench);
  write_bench_csv(out_path, rows);
  std::cout << "wrote " << rows.size() << " aggregated rows to " << out_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Flexibly-tied Gaussian mixture fitting with first-order stochastic "
      "optimizers, including clipped SGD on SO(n)"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  SyntheticSpec spec;
  spec.size = 25000;
  std::string synth_structure = "random";
  std::string synth_out = "synth_out";
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a ground-truth mixture and samples from it");
  synth->add_option("--n", spec.n, "Data dimension");
  synth->add_option("--K", spec.K, "Number of components");
  synth->add_option("--separation", spec.separation,
                    "Pairwise mean separation scale c");
  synth->add_option("--eccentricity", spec.eccentricity,
                    "Covariance eigenvalue ratio");
  synth->add_option("--size", spec.size, "Sample count");
  synth->add_option("--structure", synth_structure,
                    "Covariance structure: random | orthogonal");
  synth->add_option("--seed", spec.seed, "RNG seed");
  synth->add_option("--out", synth_out, "Output directory");

  // fit --------------------------------------------------------------------
  std::string fit_config_path, fit_data_path;
  std::string fit_out = "fit_out";
  std::string fit_mode, fit_optimizer, fit_retraction;
  int fit_epochs = -1, fit_batch = -1, fit_k = -1;
  std::int64_t fit_seed = -1;
  double fit_lr = -1.0;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Fit a mixture to CSV data (split, whiten, optimize)");
  fit_cmd->add_option("--config", fit_config_path,
                      "Run configuration JSON (defaults apply if omitted)");
  fit_cmd->add_option("--data", fit_data_path, "Input CSV")->required();
  fit_cmd->add_option("--out", fit_out, "Output directory");
  fit_cmd->add_option("--mode", fit_mode, "unconstrained | plu | orthogonal");
  fit_cmd->add_option("--optimizer", fit_optimizer,
                      "e.g. acclip-manifold, adam-euclidean");
  fit_cmd->add_option("--epochs", fit_epochs, "Epoch count");
  fit_cmd->add_option("--batch-size", fit_batch, "Minibatch size");
  fit_cmd->add_option("--seed", fit_seed, "RNG seed");
  fit_cmd->add_option("--retraction", fit_retraction, "qr | polar | cayley");
  fit_cmd->add_option("--lr", fit_lr, "Peak learning rate");
  fit_cmd->add_option("--K", fit_k, "Number of components");

  // eval -------------------------------------------------------------------
  std::string eval_checkpoint, eval_data, eval_truth, eval_out;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score a checkpoint on CSV data, optionally against the truth");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint JSON")
      ->required();
  eval_cmd->add_option("--data", eval_data, "Input CSV")->required();
  eval_cmd->add_option("--truth", eval_truth, "Generating model JSON");
  eval_cmd->add_option("--out", eval_out, "Metrics JSON output path");

  // bench ------------------------------------------------------------------
  std::string bench_config, bench_out = "bench.csv";
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Sweep {separation x size x method} over seeds");
  bench_cmd->add_option("--config", bench_config, "Sweep JSON")->required();
  bench_cmd->add_option("--out", bench_out, "Aggregated CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.structure = synth_structure_from_string(synth_structure);
      spec.validate();
      return cmd_synth(spec, synth_out);
    }
    if (fit_cmd->parsed()) {
      RunConfig cfg;
      if (!fit_config_path.empty()) {
        cfg = run_config_from_json(load_json(fit_config_path));
      }
      if (!fit_mode.empty()) cfg.mode = cov_mode_from_string(fit_mode);
      if (!fit_optimizer.empty()) cfg.optimizer = fit_optimizer;
      if (fit_epochs > 0) cfg.epochs = fit_epochs;
      if (fit_batch > 0) cfg.batch_size = fit_batch;
      if (fit_seed >= 0) cfg.seed = static_cast<std::uint64_t>(fit_seed);
      if (!fit_retraction.empty()) {
        cfg.retraction = retraction_from_string(fit_retraction);
      }
      if (fit_lr > 0.0) cfg.eta_max = fit_lr;
      if (fit_k > 0) cfg.K = fit_k;
      return cmd_fit(cfg, fit_data_path, fit_out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_checkpoint, eval_data, eval_truth, eval_out);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(bench_config, bench_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
