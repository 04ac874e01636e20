#pragma once

// Benchmark sweeps over {separation x size x method}, averaged over seeds.
// Every (cell, seed) run is independent and deterministic: the generating
// model uses seed0 + s, its samples seed0 + s + 1, and the fit seed0 + s.

#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tiedgmm/pipeline.hpp"

namespace tiedgmm {

// Method tokens pair an optimizer with a covariance mode: a "-plu" suffix
// selects the PLU factorization, "-manifold" the orthogonal one.
inline void apply_bench_method(RunConfig& cfg, const std::string& method) {
  std::string optimizer = method;
  if (method.ends_with("-plu")) {
    cfg.mode = CovMode::Plu;
    optimizer = method.substr(0, method.size() - 4);
  } else if (method.ends_with("-manifold")) {
    cfg.mode = CovMode::Orthogonal;
  } else {
    cfg.mode = CovMode::Unconstrained;
  }
  cfg.optimizer = optimizer;
}

struct BenchConfig {
  int n = 5;
  int K = 5;
  double eccentricity = 10.0;
  SynthStructure structure = SynthStructure::Random;
  std::vector<double> separations{5.0, 1.0, 0.1};
  std::vector<long> sizes{250, 2500, 25000};
  std::vector<std::string> methods{"adam-euclidean", "acclip-euclidean",
                                   "adam-manifold", "acclip-manifold"};
  int num_seeds = 10;
  std::uint64_t seed0 = 0;
  int jobs = 1;
  RunConfig base;  // epochs, batch size, learning rate, priors
};

struct BenchRow {
  double separation = 0.0;
  std::string method;
  long size = 0;
  int seeds = 0;
  double avg_nll = 0.0;        // mean over seeds of final test Avg. NLL
  double truth_avg_nll = 0.0;  // mean over seeds at the generating model
  double cov_err = 0.0;
  double mean_err = 0.0;
};

struct BenchSeedResult {
  double avg_nll = 0.0;
  double truth_avg_nll = 0.0;
  double cov_err = 0.0;
  double mean_err = 0.0;
};

// One (cell, seed) run: synthesize, fit, evaluate on the held-out split.
inline BenchSeedResult run_bench_seed(const BenchConfig& bench,
                                      double separation, long size,
                                      const std::string& method, int s) {
  SyntheticSpec spec;
  spec.n = bench.n;
  spec.K = bench.K;
  spec.separation = separation;
  spec.eccentricity = bench.eccentricity;
  spec.size = size;
  spec.structure = bench.structure;
  spec.seed = bench.seed0 + static_cast<std::uint64_t>(s);
  const TrueModel truth = synth_model(spec);
  const Matrix raw = sample(truth, size, spec.seed + 1);

  RunConfig cfg = bench.base;
  cfg.K = bench.K;
  cfg.seed = spec.seed;
  apply_bench_method(cfg, method);

  const PipelineResult fitted = run_fit_pipeline(raw, cfg);
  const EvalResult eval =
      evaluate(fitted.checkpoint(), fitted.test_raw, &truth);
  BenchSeedResult out;
  out.avg_nll = eval.avg_nll;
  out.truth_avg_nll = eval.truth_avg_nll;
  out.cov_err = eval.cov_err;
  out.mean_err = eval.mean_err;
  return out;
}

inline std::vector<BenchRow> run_bench(const BenchConfig& bench) {
  struct Job {
    double separation;
    long size;
    std::string method;
    int seed_index;
    std::size_t row;
  };
  std::vector<Job> jobs;
  std::vector<BenchRow> rows;
  for (double sep : bench.separations) {
    for (const std::string& method : bench.methods) {
      for (long size : bench.sizes) {
        BenchRow row;
        row.separation = sep;
        row.method = method;
        row.size = size;
        row.seeds = bench.num_seeds;
        const std::size_t row_idx = rows.size();
        rows.push_back(row);
        for (int s = 0; s < bench.num_seeds; ++s) {
          jobs.push_back(Job{sep, size, method, s, row_idx});
        }
      }
    }
  }

  std::vector<BenchSeedResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure = nullptr;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Job& job = jobs[i];
        results[i] = run_bench_seed(bench, job.separation, job.size,
                                    job.method, job.seed_index);
      } catch (...) {
        std::scoped_lock lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int thread_count = std::max(1, bench.jobs);
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    BenchRow& row = rows[jobs[i].row];
    row.avg_nll += results[i].avg_nll / bench.num_seeds;
    row.truth_avg_nll += results[i].truth_avg_nll / bench.num_seeds;
    row.cov_err += results[i].cov_err / bench.num_seeds;
    row.mean_err += results[i].mean_err / bench.num_seeds;
  }
  return rows;
}

inline void write_bench_csv(const std::string& path,
                            const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out.precision(17);
  out << "separation,method,size,seeds,avg_nll,truth_avg_nll,cov_err,"
         "mean_err\n";
  for (const BenchRow& r : rows) {
    out << r.separation << ',' << r.method << ',' << r.size << ','
        << r.seeds << ',' << r.avg_nll << ',' << r.truth_avg_nll << ','
        << r.cov_err << ',' << r.mean_err << '\n';
  }
}

inline BenchConfig bench_config_from_json(const json& j) {
  BenchConfig bench;
  bench.n = j.value("n", bench.n);
  bench.K = j.value("K", bench.K);
  bench.eccentricity = j.value("eccentricity", bench.eccentricity);
  bench.structure = synth_structure_from_string(
      j.value("structure", to_string(bench.structure)));
  if (j.contains("separations")) {
    bench.separations = j.at("separations").get<std::vector<double>>();
  }
  if (j.contains("sizes")) {
    bench.sizes = j.at("sizes").get<std::vector<long>>();
  }
  if (j.contains("methods")) {
    bench.methods = j.at("methods").get<std::vector<std::string>>();
  }
  bench.num_seeds = j.value("seeds", bench.num_seeds);
  bench.seed0 = j.value("seed0", bench.seed0);
  bench.jobs = j.value("jobs", bench.jobs);
  if (j.contains("run")) {
    bench.base = run_config_from_json(j.at("run"));
  }
  return bench;
}

}  // namespace tiedgmm
