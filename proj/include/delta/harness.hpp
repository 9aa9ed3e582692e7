#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delta/adapt.hpp"
#include "delta/streams.hpp"

namespace delta::harness {

struct RunConfig {
  adapt::MethodSpec method;
  std::size_t batch_size = 64;
  std::size_t update_window = 0;  // L; 0 means L = batch_size (update every batch)
  norm::EmaInit stats_init = norm::EmaInit::FromFirstBatch;
  optim::Config optimizer{optim::Rule::Adam, 1e-3};
  double alpha = 0.95;  // running-statistics retention applied to every layer
  bool stats_trace = false;
};

struct Metrics {
  double mean_class_acc = 0.0;  // mean per-class recall over classes present
  double overall_acc = 0.0;
  std::vector<std::uint64_t> pred_counts;  // argmax predictions per class
  double pred_std = 0.0;                   // population std of counts over all classes
  double pred_range = 0.0;                 // max count - min count
};

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                        std::size_t classes);

struct EpisodeResult {
  Metrics metrics;
  std::vector<int> predictions;   // argmax per stream position
  Matrix probs;                   // per-position predicted distributions
  std::size_t updates = 0;        // optimizer steps taken
  double duration_ms = 0.0;
  std::vector<double> stats_err;  // per-prediction-batch, when traced
  double mean_stats_err = 0.0;
};

// Replays the stream against a copy of the source model: every arriving
// batch is predicted with the current model state, and parameters update
// every L/B batches from the most recent L samples (every batch when L = B,
// the default). Labels are consumed only after the episode, for metrics.
// Deterministic: same model, stream, and config give bit-identical results.
EpisodeResult run_episode(const net::ModelState& source, const streams::Stream& stream,
                          const RunConfig& cfg);

// One comparison cell and its outcome row.
struct ReportRow {
  std::string method;
  std::string scenario;
  std::optional<double> rho;
  std::optional<double> pi;
  std::size_t batch_size = 0;
  double alpha = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double acc_mean_class = 0.0;
  double acc_overall = 0.0;
  double pred_std = 0.0;
  double pred_range = 0.0;
  double duration_ms = 0.0;
};

struct CompareSpec {
  std::vector<std::string> methods;
  std::vector<streams::Scenario> scenarios;
  std::vector<std::uint64_t> seeds;
  RunConfig base;       // method field is overridden per cell
  std::size_t threads = 0;  // 0: honor DELTA_THREADS, default 1
};

struct CompareOutcome {
  std::vector<ReportRow> rows;
  std::vector<std::string> failures;  // one message per failed cell
};

// Full methods x scenarios x seeds matrix. Streams are derived from
// (scenario, seed) only, so every method sees identical streams; failed cells
// are recorded, not fatal. Rows come back in deterministic order regardless
// of thread count.
CompareOutcome compare(const net::ModelState& source, const Dataset& test,
                       const CompareSpec& spec);

}  // namespace delta::harness
