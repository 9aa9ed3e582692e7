#include "delta/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace delta::harness {

namespace {

// Population statistics reference: one whole-stream forward under
// current-batch normalization, per layer. The per-step trace measures how far
// the statistics each method actually normalized with sit from these.
std::vector<norm::Stats> population_stats(const net::ModelState& source,
                                          const streams::Stream& stream) {
  net::ModelState model = source;
  Matrix all = streams::gather_batch(stream, 0, stream.size());
  net::ForwardTrace trace;
  net::ForwardOptions fopts;
  fopts.mode = norm::Mode::Batch;
  net::forward(model, all, fopts, &trace);
  std::vector<norm::Stats> stats;
  for (const auto& cache : trace.norm_caches) stats.push_back(cache.used);
  return stats;
}

double stats_distance(const std::vector<norm::Stats>& used,
                      const std::vector<norm::Stats>& reference) {
  double total = 0.0;
  for (std::size_t i = 0; i < used.size(); ++i) {
    double mu = 0.0, sigma = 0.0;
    for (std::size_t c = 0; c < used[i].mu.size(); ++c) {
      const double dm = used[i].mu[c] - reference[i].mu[c];
      const double ds = used[i].sigma[c] - reference[i].sigma[c];
      mu += dm * dm;
      sigma += ds * ds;
    }
    total += std::sqrt(mu) + std::sqrt(sigma);
  }
  return total;
}

// Statistics a prediction batch was normalized with, per layer, without
// advancing any state: a probe forward on a scratch copy of the model.
std::vector<norm::Stats> probe_used_stats(const adapt::EpisodeState& ep, const Matrix& batch,
                                          const adapt::MethodSpec& method) {
  adapt::EpisodeState scratch = ep;
  net::ForwardTrace trace;
  net::ForwardOptions fopts;
  fopts.mode = method.mode;
  fopts.advance_ema = false;
  net::forward(scratch.model, batch, fopts, &trace);
  std::vector<norm::Stats> used;
  for (const auto& cache : trace.norm_caches) used.push_back(cache.used);
  return used;
}

}  // namespace

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                        std::size_t classes) {
  check_input(predictions.size() == labels.size(), "prediction/label count mismatch");
  check_input(classes >= 1, "need at least one class");
  check_input(!labels.empty(), "empty evaluation");

  Metrics m;
  m.pred_counts.assign(classes, 0);
  std::vector<std::uint64_t> truth(classes, 0), hits(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    check_input(y < classes && p < classes, "class index out of range");
    ++m.pred_counts[p];
    ++truth[y];
    if (p == y) {
      ++hits[y];
      ++correct;
    }
  }
  m.overall_acc = static_cast<double>(correct) / static_cast<double>(labels.size());

  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (truth[k] == 0) continue;
    ++present;
    recall_sum += static_cast<double>(hits[k]) / static_cast<double>(truth[k]);
  }
  m.mean_class_acc = recall_sum / static_cast<double>(present);

  double mean = 0.0;
  for (auto c : m.pred_counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(classes);
  double var = 0.0;
  std::uint64_t lo = m.pred_counts[0], hi = m.pred_counts[0];
  for (auto c : m.pred_counts) {
    const double d = static_cast<double>(c) - mean;
    var += d * d;
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  m.pred_std = std::sqrt(var / static_cast<double>(classes));
  m.pred_range = static_cast<double>(hi - lo);
  return m;
}

EpisodeResult run_episode(const net::ModelState& source, const streams::Stream& stream,
                          const RunConfig& cfg) {
  check_input(stream.size() >= 1, "empty stream");
  check_config(cfg.batch_size >= 1, "batch size must be at least 1");
  const std::size_t B = cfg.batch_size;
  const std::size_t L = cfg.update_window == 0 ? B : cfg.update_window;
  check_config(L >= B, "update window must be at least the batch size");
  check_config(L % B == 0, "update window must be a multiple of the batch size");
  const std::size_t cadence = L / B;

  net::ModelState seed_model = source;
  for (auto& layer : seed_model.norms) layer.alpha = cfg.alpha;
  adapt::EpisodeState ep =
      adapt::make_episode_state(seed_model, cfg.method, cfg.optimizer, cfg.stats_init);

  std::vector<norm::Stats> reference;
  if (cfg.stats_trace) reference = population_stats(seed_model, stream);

  EpisodeResult res;
  res.predictions.reserve(stream.size());
  res.probs = Matrix(stream.size(), source.spec.classes);

  // Rolling window of the most recent L samples (delayed-update schedules).
  Matrix window(L, stream.data.x.cols);
  std::size_t window_fill = 0;

  const auto started = std::chrono::steady_clock::now();
  std::size_t step = 0;
  for (std::size_t start = 0; start < stream.size(); start += B, ++step) {
    const std::size_t count = std::min(B, stream.size() - start);
    Matrix batch = streams::gather_batch(stream, start, count);
    try {
      if (cfg.stats_trace)
        res.stats_err.push_back(
            stats_distance(probe_used_stats(ep, batch, cfg.method), reference));

      adapt::StepResult sr;
      if (cadence == 1) {
        // Standard schedule: each full batch is predicted and drives the
        // update; a trailing partial batch is predicted only.
        if (count == B) {
          sr = adapt::adapt_step(ep, batch, cfg.method);
          if (sr.updated) ++res.updates;
        } else {
          sr = adapt::predict_only(ep, batch, cfg.method);
        }
      } else {
        // Fast inference now; the update fires every `cadence` full batches
        // over the most recent L samples.
        sr = adapt::predict_only(ep, batch, cfg.method);
        if (count == B) {
          if (window_fill == L)
            std::copy(window.data.begin() + B * window.cols, window.data.end(),
                      window.data.begin());
          else
            window_fill += B;
          std::copy(batch.data.begin(), batch.data.end(),
                    window.data.begin() + (window_fill - B) * window.cols);
          if (window_fill == L && (step + 1) % cadence == 0) {
            auto ur = adapt::adapt_step(ep, window, cfg.method);
            if (ur.updated) ++res.updates;
          }
        }
      }

      for (std::size_t i = 0; i < count; ++i) {
        res.predictions.push_back(sr.pseudo_labels[i]);
        std::copy_n(sr.predictions.row(i), sr.predictions.cols, res.probs.row(start + i));
      }
    } catch (const NumericError& e) {
      throw NumericError("episode aborted at step " + std::to_string(step) + ": " + e.what());
    }
  }
  const auto finished = std::chrono::steady_clock::now();
  res.duration_ms = std::chrono::duration<double, std::milli>(finished - started).count();

  std::vector<int> labels(stream.size());
  for (std::size_t pos = 0; pos < stream.size(); ++pos) labels[pos] = stream.label_at(pos);
  res.metrics = compute_metrics(res.predictions, labels, source.spec.classes);

  if (cfg.stats_trace && !res.stats_err.empty()) {
    double total = 0.0;
    for (double v : res.stats_err) total += v;
    res.mean_stats_err = total / static_cast<double>(res.stats_err.size());
  }
  return res;
}

CompareOutcome compare(const net::ModelState& source, const Dataset& test,
                       const CompareSpec& spec) {
  check_config(!spec.methods.empty(), "no methods to compare");
  check_config(!spec.scenarios.empty(), "no scenarios to compare");
  check_config(!spec.seeds.empty(), "no seeds to compare");

  struct Cell {
    std::size_t method_idx, scenario_idx, seed_idx;
  };
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < spec.methods.size(); ++m)
    for (std::size_t s = 0; s < spec.scenarios.size(); ++s)
      for (std::size_t d = 0; d < spec.seeds.size(); ++d) cells.push_back({m, s, d});

  std::size_t threads = spec.threads;
  if (threads == 0) {
    threads = 1;
    if (const char* env = std::getenv("DELTA_THREADS")) {
      const long parsed = std::strtol(env, nullptr, 10);
      check_config(parsed >= 1, "DELTA_THREADS must be a positive integer");
      threads = static_cast<std::size_t>(parsed);
    }
  }
  threads = std::min(threads, cells.size());

  std::vector<std::optional<ReportRow>> rows(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      const Cell& cell = cells[idx];
      const auto& scenario = spec.scenarios[cell.scenario_idx];
      const auto seed = spec.seeds[cell.seed_idx];
      try {
        RunConfig cfg = spec.base;
        cfg.method = adapt::method_from_name(spec.methods[cell.method_idx]);
        // Identical stream for every method within a (scenario, seed) cell.
        const auto stream =
            streams::make_scenario(test, scenario, streams::stream_seed(scenario, seed));
        const auto episode = run_episode(source, stream, cfg);

        ReportRow row;
        row.method = cfg.method.name;
        row.scenario = scenario.name();
        if (scenario.dependent) row.rho = scenario.rho;
        if (scenario.imbalanced) row.pi = scenario.pi;
        row.batch_size = cfg.batch_size;
        row.alpha = cfg.alpha;
        row.lambda = cfg.method.lambda;
        row.seed = seed;
        row.acc_mean_class = episode.metrics.mean_class_acc;
        row.acc_overall = episode.metrics.overall_acc;
        row.pred_std = episode.metrics.pred_std;
        row.pred_range = episode.metrics.pred_range;
        row.duration_ms = episode.duration_ms;
        rows[idx] = row;
      } catch (const std::exception& e) {
        failures[idx] = "cell method=" + spec.methods[cell.method_idx] +
                        " scenario=" + scenario.name() + " seed=" + std::to_string(seed) + ": " +
                        e.what();
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CompareOutcome outcome;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i])
      outcome.rows.push_back(*rows[i]);
    else
      outcome.failures.push_back(failures[i]);
  }
  return outcome;
}

}  // namespace delta::harness
