// Acceptance suite: ten numbered end-to-end checks of the library's core
// guarantees, from algebraic identities of the normalization rectification up
// to directional behavior of full adaptation episodes on synthetic streams.
// Each check prints one [PASS]/[FAIL] line; the process exits nonzero if any
// check fails. All tolerances are pinned here as named constants.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "delta/adapt.hpp"
#include "delta/harness.hpp"
#include "delta/losses.hpp"
#include "delta/matrix.hpp"
#include "delta/network.hpp"
#include "delta/normalize.hpp"
#include "delta/rng.hpp"
#include "delta/streams.hpp"
#include "delta/task.hpp"

namespace {

using delta::Matrix;
using delta::Rng;
namespace net = delta::net;
namespace norm = delta::norm;
namespace loss = delta::loss;
namespace adapt = delta::adapt;
namespace streams = delta::streams;
namespace harness = delta::harness;
namespace task = delta::task;
namespace optim = delta::optim;

// --- pinned tolerances and sizes -------------------------------------------
constexpr double kIdentityTol = 1e-12;       // value/gradient identity, elementwise
constexpr int kIdentityCases = 1000;
constexpr double kGradTol = 1e-4;            // finite-difference relative error
constexpr double kGradStep = 1e-5;
constexpr int kGradCases = 50;
constexpr double kWeightMeanTol = 1e-12;     // normalized weight mean
constexpr int kWeightBatches = 10000;
constexpr double kSimplexTol = 1e-9;         // frequency-vector simplex drift
constexpr int kSimplexSteps = 10000;
constexpr double kExampleTol = 1e-9;         // frozen worked examples
constexpr int kStreamDatasets = 100;
constexpr double kAccuracyGapPts = 0.03;     // required mean-class accuracy gaps
constexpr double kGrowthFactor = 2.0;        // scale-parameter norm blow-up bound
constexpr int kGrowthSteps = 100;
constexpr int kSeeds = 10;

// --- shared synthetic benchmark ---------------------------------------------
// Noise-shifted classification tasks with source models trained on them,
// reused by the episode-level checks.
//
//   data / wide / source — well-separated task (2000- and 6400-sample test
//       draws of the same distribution) with a strongly trained 2-layer
//       source, for the accuracy and statistics comparisons.
//   control_task / control_source — harder task (lower class separation)
//       with a moderately trained 3-layer source, for the gradient-stability
//       check: a source trained to saturation predicts so confidently that
//       entropy gradients vanish and no gradient-driven dynamics, stable or
//       not, can express themselves within the step budget.
struct Bench {
  task::Task data;       // 2000-sample test set
  task::Task wide;       // 6400-sample test set (long streams)
  net::ModelState source;
  task::Task control_task;  // 6400-sample test set, separation 2.0
  net::ModelState control_source;
};

const Bench& bench() {
  static const Bench b = [] {
    Bench out;
    task::TaskSpec tspec;
    tspec.classes = 10;
    tspec.dim = 16;
    tspec.n_train = 5000;
    tspec.n_test = 2000;
    tspec.separation = 3.0;
    tspec.shift = "noise:2.0";
    tspec.seed = 7;
    out.data = task::make_synthetic_task(tspec);

    task::TaskSpec wide = tspec;
    wide.n_test = 6400;
    out.wide = task::make_synthetic_task(wide);

    net::ModelSpec mspec;
    mspec.input_dim = 16;
    mspec.hidden = {64, 64};
    mspec.classes = 10;
    net::TrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = 64;
    tc.bn_momentum = 0.1;
    tc.optimizer = {optim::Rule::Adam, 1e-3};
    tc.seed = 7;
    out.source = net::train_source(mspec, out.data.train, tc);

    task::TaskSpec cspec = wide;
    cspec.separation = 2.0;
    out.control_task = task::make_synthetic_task(cspec);
    net::ModelSpec cmodel = mspec;
    cmodel.hidden = {64, 64, 64};
    net::TrainConfig ctc = tc;
    ctc.epochs = 10;
    out.control_source = net::train_source(cmodel, out.control_task.train, ctc);
    return out;
  }();
  return b;
}

// --- small helpers -----------------------------------------------------------
double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Matrix random_batch(Rng& rng, std::size_t rows, std::size_t cols, double spread = 1.0) {
  Matrix m(rows, cols);
  for (auto& x : m.data) x = spread * rng.normal();
  return m;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

streams::Stream scenario_stream(const delta::Dataset& test, const streams::Scenario& sc,
                                std::uint64_t seed) {
  return streams::make_scenario(test, sc, streams::stream_seed(sc, seed));
}

harness::RunConfig episode_config(const std::string& method, std::size_t batch) {
  harness::RunConfig cfg;
  cfg.method = adapt::method_from_name(method);
  cfg.batch_size = batch;
  cfg.optimizer = {optim::Rule::Adam, 1e-3};
  return cfg;
}

std::vector<double> per_seed_accuracy(const delta::Dataset& test, const std::string& method,
                                      const streams::Scenario& sc, std::size_t batch) {
  std::vector<double> acc;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto stream = scenario_stream(test, sc, seed);
    const auto res = harness::run_episode(bench().source, stream, episode_config(method, batch));
    acc.push_back(res.metrics.mean_class_acc);
  }
  return acc;
}

// --- criterion 1: rectified normalization identities -------------------------
// Value: rectified current-batch normalization equals running-statistics
// normalization. Gradient: its input gradient equals the rectification scale
// times the plain batch-normalization input gradient.
bool criterion1(std::string& detail) {
  Rng rng(101);
  double worst_value = 0.0, worst_grad = 0.0;
  for (int rep = 0; rep < kIdentityCases; ++rep) {
    const std::size_t C = 1 + rng.below(16);
    const std::size_t B = 2 + rng.below(31);

    norm::LayerState layer = norm::make_layer(C, 0.95, 1e-5);
    for (auto& g : layer.gamma) g = 0.5 + rng.uniform();
    for (auto& b : layer.beta) b = rng.normal();
    layer.ema.mu.resize(C);
    layer.ema.sigma.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
      layer.ema.mu[c] = rng.normal();
      layer.ema.sigma[c] = 0.5 + rng.uniform();
    }
    layer.ema_ready = true;

    const Matrix v = random_batch(rng, B, C, 1.0 + rng.uniform());
    const Matrix g_out = random_batch(rng, B, C);

    norm::LayerState rectified = layer, running = layer, batchwise = layer;

    norm::ForwardOptions ro;
    ro.mode = norm::Mode::Renorm;
    ro.advance_ema = false;
    norm::Cache rcache;
    const Matrix out_rect = norm::forward(rectified, v, ro, &rcache);

    norm::ForwardOptions eo;
    eo.mode = norm::Mode::Ema;
    eo.advance_ema = false;
    const Matrix out_run = norm::forward(running, v, eo, nullptr);

    for (std::size_t i = 0; i < out_rect.data.size(); ++i)
      worst_value = std::max(worst_value, std::abs(out_rect.data[i] - out_run.data[i]));

    norm::ForwardOptions bo;
    bo.mode = norm::Mode::Batch;
    norm::Cache bcache;
    norm::forward(batchwise, v, bo, &bcache);

    norm::AffineGrads unused;
    const Matrix gin_rect = norm::backward(rectified, rcache, g_out, &unused);
    const Matrix gin_batch = norm::backward(batchwise, bcache, g_out, &unused);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        worst_grad = std::max(
            worst_grad, std::abs(gin_rect(b, c) - rcache.r[c] * gin_batch(b, c)));
  }
  detail = "max value diff " + fmt(worst_value) + ", max gradient diff " + fmt(worst_grad) +
           " over " + std::to_string(kIdentityCases) + " cases (tol " + fmt(kIdentityTol) + ")";
  return worst_value <= kIdentityTol && worst_grad <= kIdentityTol;
}

// --- criterion 2: analytic gradients vs central differences ------------------
bool gradient_margins_ok(const net::ModelState& model, const Matrix& x, norm::Mode mode,
                         loss::Kind kind, const loss::Config& cfg, double margin) {
  net::ModelState work = model;
  net::ForwardOptions opts;
  opts.mode = mode;
  net::ForwardTrace trace;
  const Matrix logits = net::forward(work, x, opts, &trace);
  for (const auto& pre : trace.pre_relu)
    for (double v : pre.data)
      if (std::abs(v) < margin) return false;
  const Matrix probs = loss::softmax(logits);
  const auto ev = loss::evaluate(kind, logits, probs, cfg);
  bool any_used = false;
  for (char u : ev.used) any_used |= (u != 0);
  if (!any_used) return false;  // constant objective, vacuous check
  if (kind == loss::Kind::PseudoLabel) {
    for (std::size_t b = 0; b < probs.rows; ++b)
      if (std::abs(probs(b, loss::argmax_row(probs, b)) - cfg.pl_confidence) < margin)
        return false;
  }
  if (kind == loss::Kind::GatedEntropy) {
    const double tau = cfg.gate_fraction * std::log(static_cast<double>(probs.cols));
    for (double h : loss::entropy(probs))
      if (std::abs(h - tau) < margin) return false;
  }
  return true;
}

bool criterion2(std::string& detail) {
  const norm::Mode modes[] = {norm::Mode::Batch, norm::Mode::Renorm, norm::Mode::Source,
                              norm::Mode::Ema};
  const loss::Kind kinds[] = {loss::Kind::Entropy, loss::Kind::PseudoLabel,
                              loss::Kind::GatedEntropy};
  const loss::Config cfg;
  double worst = 0.0;
  for (int i = 0; i < kGradCases; ++i) {
    const auto mode = modes[static_cast<std::size_t>(i) % 4];
    const auto kind = kinds[static_cast<std::size_t>(i) % 3];
    net::ModelSpec spec;
    spec.input_dim = 3 + static_cast<std::size_t>(i % 5);
    spec.hidden.assign(1 + static_cast<std::size_t>(i % 2), 4 + static_cast<std::size_t>(i % 4));
    spec.classes = 3 + static_cast<std::size_t>(i % 4);
    const std::size_t batch = 5 + static_cast<std::size_t>(i % 6);

    bool found = false;
    for (std::uint64_t attempt = 0; attempt < 80 && !found; ++attempt) {
      const std::uint64_t seed = delta::derive_seed(3000 + static_cast<std::uint64_t>(i), attempt);
      net::ModelState model = net::init_model(spec, seed);
      Rng rng(seed + 1);
      for (auto& layer : model.norms) {  // running statistics for Ema/Renorm
        layer.ema.mu.resize(layer.channels());
        layer.ema.sigma.resize(layer.channels());
        for (std::size_t c = 0; c < layer.channels(); ++c) {
          layer.ema.mu[c] = 0.3 * rng.normal();
          layer.ema.sigma[c] = 0.7 + rng.uniform();
        }
        layer.ema_ready = true;
      }
      // Confident rows are rare under fresh random weights; sharpen the
      // output layer so confidence gates are not vacuously closed.
      if (kind != loss::Kind::Entropy)
        for (auto& w : model.dense.back().w.data) w *= 4.0;
      const Matrix x = random_batch(rng, batch, spec.input_dim, 1.5);
      if (!gradient_margins_ok(model, x, mode, kind, cfg, 1e-3)) continue;
      found = true;
      worst = std::max(worst, net::finite_diff_check(model, x, mode, kind, cfg, kGradStep));
    }
    if (!found) {
      detail = "no smooth configuration found for case " + std::to_string(i);
      return false;
    }
  }
  detail = "max relative error " + fmt(worst) + " over " + std::to_string(kGradCases) +
           " configurations (tol " + fmt(kGradTol) + ")";
  return worst <= kGradTol;
}

// --- criterion 3: reweighting invariants -------------------------------------
bool criterion3(std::string& detail) {
  Rng rng(303);
  double worst_mean = 0.0;
  for (int rep = 0; rep < kWeightBatches; ++rep) {
    const std::size_t B = 1 + rng.below(16), K = 2 + rng.below(9);
    Matrix logits(B, K);
    for (auto& x : logits.data) x = 3.0 * rng.normal();
    const Matrix probs = loss::softmax(logits);
    std::vector<double> z(K);
    double total = 0.0;
    for (auto& v : z) {
      v = 0.02 + rng.uniform();
      total += v;
    }
    for (auto& v : z) v /= total;
    const auto weighting = (rep % 2 == 0) ? adapt::Weighting::Hard : adapt::Weighting::Soft;
    const auto w = adapt::normalize_weights(adapt::sample_weights(probs, z, weighting, 1e-6));
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(B);
    worst_mean = std::max(worst_mean, std::abs(mean - 1.0));
  }
  if (worst_mean > kWeightMeanTol) {
    detail = "weight mean drift " + fmt(worst_mean) + " exceeds " + fmt(kWeightMeanTol);
    return false;
  }

  // Frequency estimate stays on the simplex over long prediction streams.
  std::vector<double> z = adapt::FreqTracker::uniform(10).z;
  double worst_drift = 0.0;
  for (int step = 0; step < kSimplexSteps; ++step) {
    Matrix logits(8, 10);
    for (auto& x : logits.data) x = 2.5 * rng.normal();
    z = adapt::update_frequencies(z, loss::softmax(logits), 0.9);
    double total = 0.0;
    for (double v : z) {
      if (v < 0.0) {
        detail = "negative frequency component at step " + std::to_string(step);
        return false;
      }
      total += v;
    }
    worst_drift = std::max(worst_drift, std::abs(total - 1.0));
  }
  if (worst_drift > kSimplexTol) {
    detail = "simplex drift " + fmt(worst_drift) + " exceeds " + fmt(kSimplexTol);
    return false;
  }

  // Hard and soft weighting agree exactly on one-hot predictions.
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t B = 1 + rng.below(12), K = 2 + rng.below(9);
    Matrix probs(B, K, 0.0);
    for (std::size_t b = 0; b < B; ++b) probs(b, rng.below(K)) = 1.0;
    std::vector<double> zz(K);
    double total = 0.0;
    for (auto& v : zz) {
      v = 0.05 + rng.uniform();
      total += v;
    }
    for (auto& v : zz) v /= total;
    const auto hard = adapt::sample_weights(probs, zz, adapt::Weighting::Hard, 1e-6);
    const auto soft = adapt::sample_weights(probs, zz, adapt::Weighting::Soft, 1e-6);
    if (!bitwise_equal(hard, soft)) {
      detail = "hard/soft weights differ on one-hot predictions";
      return false;
    }
  }

  detail = "weight mean drift " + fmt(worst_mean) + ", simplex drift " + fmt(worst_drift) +
           ", one-hot agreement exact";
  return true;
}

// --- criterion 4: frozen worked examples -------------------------------------
bool criterion4(std::string& detail) {
  std::vector<std::string> problems;

  // (a) Inverse-frequency weights: frequencies (0.75, 0.25), predictions
  // (frequent, rare, rare, rare): raw (4/3, 4, 4, 4) -> normalized
  // (0.4, 1.2, 1.2, 1.2).
  {
    Matrix probs(4, 2);
    probs(0, 0) = 0.9;
    probs(0, 1) = 0.1;
    for (std::size_t b = 1; b < 4; ++b) {
      probs(b, 0) = 0.2;
      probs(b, 1) = 0.8;
    }
    const auto w = adapt::normalize_weights(
        adapt::sample_weights(probs, {0.75, 0.25}, adapt::Weighting::Hard, 1e-15));
    const double expect[4] = {0.4, 1.2, 1.2, 1.2};
    for (std::size_t b = 0; b < 4; ++b)
      if (std::abs(w[b] - expect[b]) > kExampleTol)
        problems.push_back("weight " + std::to_string(b) + " = " + fmt(w[b]));
  }

  // (b) Frequency update: z = (0.5, 0.5), two samples fully confident in
  // class 0, retention 0.9 -> z' = (0.55, 0.45).
  {
    Matrix probs(2, 2, 0.0);
    probs(0, 0) = 1.0;
    probs(1, 0) = 1.0;
    const auto z = adapt::update_frequencies({0.5, 0.5}, probs, 0.9);
    if (std::abs(z[0] - 0.55) > kExampleTol || std::abs(z[1] - 0.45) > kExampleTol)
      problems.push_back("frequency update (" + fmt(z[0]) + ", " + fmt(z[1]) + ")");
  }

  // (c) Imbalanced resampling: 3 classes, 100 each, factor 0.01 ->
  // counts (100, 10, 1).
  {
    delta::Dataset data;
    data.classes = 3;
    data.x = Matrix(300, 1);
    for (std::size_t i = 0; i < 300; ++i) {
      data.x(i, 0) = static_cast<double>(i);
      data.y.push_back(static_cast<int>(i / 100));
    }
    Rng rng(4);
    const auto out = streams::resample_imbalanced(data, 0.01, rng);
    std::size_t counts[3] = {0, 0, 0};
    for (int y : out.y) ++counts[static_cast<std::size_t>(y)];
    if (counts[0] != 100 || counts[1] != 10 || counts[2] != 1)
      problems.push_back("imbalanced counts (" + std::to_string(counts[0]) + ", " +
                         std::to_string(counts[1]) + ", " + std::to_string(counts[2]) + ")");
  }

  // (d) Frequency-corrected predictions: equal logits, frequencies
  // (0.8, 0.2), temperature 1 -> probabilities (0.2, 0.8).
  {
    Matrix logits(1, 2, 0.0);
    const Matrix p = adapt::logit_adjusted_probs(logits, {0.8, 0.2}, 1.0);
    if (std::abs(p(0, 0) - 0.2) > kExampleTol || std::abs(p(0, 1) - 0.8) > kExampleTol)
      problems.push_back("adjusted probabilities (" + fmt(p(0, 0)) + ", " + fmt(p(0, 1)) + ")");
  }

  // (e) Prediction-count spread: 100 predictions of class 0 over 4 classes:
  // counts (100,0,0,0), mean 25, population std 25*sqrt(3) = 43.30127...
  {
    std::vector<int> preds(100, 0), labels(100);
    for (int i = 0; i < 100; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
    const auto m = harness::compute_metrics(preds, labels, 4);
    const double expect = 25.0 * std::sqrt(3.0);
    if (std::abs(m.pred_std - expect) > kExampleTol)
      problems.push_back("prediction-count std " + fmt(m.pred_std));
    if (std::abs(m.pred_std - 43.30127018922193) > kExampleTol)
      problems.push_back("prediction-count std vs literal " + fmt(m.pred_std));
  }

  if (!problems.empty()) {
    detail = problems.front() + (problems.size() > 1 ? " (+" + std::to_string(problems.size() - 1) + " more)" : "");
    return false;
  }
  detail = "all five worked examples within " + fmt(kExampleTol);
  return true;
}

// --- criterion 5: stream-generator properties ---------------------------------
bool criterion5(std::string& detail) {
  Rng rng(505);

  // Permutation / conservation / count checks on random datasets.
  for (int rep = 0; rep < kStreamDatasets; ++rep) {
    const std::size_t K = 2 + rng.below(7);
    const std::size_t per_class = 5 + rng.below(36);
    delta::Dataset data;
    data.classes = K;
    data.x = Matrix(K * per_class, 1);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < per_class; ++i) {
        const std::size_t row = k * per_class + i;
        data.x(row, 0) = static_cast<double>(row);  // unique id per example
        data.y.push_back(static_cast<int>(k));
      }

    // Independent order: a permutation.
    {
      auto order = streams::order_independent(data.y.size(), rng);
      std::sort(order.indices.begin(), order.indices.end());
      for (std::size_t i = 0; i < order.indices.size(); ++i)
        if (order.indices[i] != i) {
          detail = "independent order is not a permutation";
          return false;
        }
    }

    // Dependent order: a permutation for every concentration.
    {
      const double rhos[] = {1.0, 0.5, 0.1};
      auto order = streams::order_dependent(data.y, K, 10, rhos[rep % 3], rng);
      std::sort(order.indices.begin(), order.indices.end());
      for (std::size_t i = 0; i < order.indices.size(); ++i)
        if (order.indices[i] != i) {
          detail = "dependent order is not a permutation";
          return false;
        }
    }

    // Imbalanced resampling: exact counts, uniqueness, least/most ratio.
    {
      const double pi = 0.05 + 0.95 * rng.uniform();
      const auto out = streams::resample_imbalanced(data, pi, rng);
      std::vector<std::size_t> counts(K, 0);
      std::vector<double> ids;
      for (std::size_t i = 0; i < out.y.size(); ++i) {
        ++counts[static_cast<std::size_t>(out.y[i])];
        ids.push_back(out.x(i, 0));
      }
      for (std::size_t k = 0; k < K; ++k) {
        const auto expect = static_cast<std::size_t>(std::llround(
            static_cast<double>(per_class) *
            std::pow(pi, static_cast<double>(k) / static_cast<double>(K - 1))));
        if (counts[k] != expect) {
          detail = "resampled class count mismatch";
          return false;
        }
      }
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        detail = "resampling drew an example twice";
        return false;
      }
      const double ratio =
          static_cast<double>(counts[K - 1]) / static_cast<double>(counts[0]);
      if (std::abs(ratio - pi) > 0.5 / static_cast<double>(per_class) + 1e-12) {
        detail = "least/most ratio " + fmt(ratio) + " vs factor " + fmt(pi);
        return false;
      }
    }
  }

  // Lower concentration -> longer same-class runs (medians over 10 seeds).
  delta::Dataset runs_data;
  runs_data.classes = 8;
  runs_data.x = Matrix(8 * 50, 1);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t i = 0; i < 50; ++i) {
      runs_data.x(k * 50 + i, 0) = 0.0;
      runs_data.y.push_back(static_cast<int>(k));
    }
  auto median_run = [&](double rho) {
    std::vector<double> lengths;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      streams::Scenario sc;
      sc.dependent = true;
      sc.rho = rho;
      const auto s = scenario_stream(runs_data, sc, seed);
      std::size_t transitions = 1;
      for (std::size_t i = 1; i < s.size(); ++i)
        if (s.label_at(i) != s.label_at(i - 1)) ++transitions;
      lengths.push_back(static_cast<double>(s.size()) / static_cast<double>(transitions));
    }
    return median(lengths);
  };
  const double r10 = median_run(1.0), r05 = median_run(0.5), r01 = median_run(0.1);
  if (!(r01 > r05 && r05 > r10)) {
    detail = "run-length medians not monotone: " + fmt(r10) + ", " + fmt(r05) + ", " + fmt(r01);
    return false;
  }

  detail = std::to_string(kStreamDatasets) + " datasets conserved; run-length medians " +
           fmt(r10) + " < " + fmt(r05) + " < " + fmt(r01);
  return true;
}

// --- criterion 6: batch-statistics degradation on correlated streams ----------
// On highly correlated class-balanced streams, entropy adaptation over
// current-batch statistics must trail the rectified variant by a clear
// margin, and entropy adaptation over running statistics used directly (the
// negative control) must blow up its scale parameters while the rectified
// method, driven identically, keeps every layer's scale bounded.
bool growth_exceeds_2x(const net::ModelState& source, const streams::Stream& stream,
                       const adapt::MethodSpec& method, double lr) {
  auto ep = adapt::make_episode_state(source, method, {optim::Rule::Sgd, lr},
                                      norm::EmaInit::FromFirstBatch);
  auto layer_norms = [&ep] {
    std::vector<double> out;
    for (const auto& layer : ep.model.norms) {
      double total = 0.0;
      for (double g : layer.gamma) total += g * g;
      out.push_back(std::sqrt(total));
    }
    return out;
  };
  const auto initial = layer_norms();
  for (int step = 0; step < kGrowthSteps; ++step) {
    const std::size_t start = static_cast<std::size_t>(step) * 64;
    if (start + 64 > stream.size()) break;
    try {
      adapt::adapt_step(ep, streams::gather_batch(stream, start, 64), method);
    } catch (const delta::NumericError&) {
      return true;  // overflow is the extreme form of unbounded growth
    }
    const auto now = layer_norms();
    for (std::size_t l = 0; l < now.size(); ++l)
      if (!std::isfinite(now[l]) || now[l] > kGrowthFactor * initial[l]) return true;
  }
  return false;
}

bool criterion6(std::string& detail) {
  streams::Scenario sc = streams::scenario_from_name("ds+cb");
  sc.rho = 0.1;

  std::vector<double> batch_acc, rect_acc;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto stream = scenario_stream(bench().control_task.test, sc, seed);
    batch_acc.push_back(
        harness::run_episode(bench().control_source, stream, episode_config("tent", 64))
            .metrics.mean_class_acc);
    rect_acc.push_back(
        harness::run_episode(bench().control_source, stream, episode_config("tent+tbr", 64))
            .metrics.mean_class_acc);
  }
  const double gap = median(rect_acc) - median(batch_acc);

  // Negative control: gradient updates with running statistics used directly.
  // Driven by plain SGD hot enough for the feedback between the growing
  // scales and the chasing statistics to express itself within the step
  // budget; the rectified method at the same rate must stay bounded, which
  // pins the blow-up on the statistics pathway rather than the step size.
  constexpr double kControlRate = 2.5;
  adapt::MethodSpec control;
  control.name = "tent+ema-stats";
  control.mode = norm::Mode::Ema;
  control.loss = loss::Kind::Entropy;
  control.allow_ema_gradients = true;
  const adapt::MethodSpec rectified = adapt::method_from_name("tent+tbr");

  int control_diverged = 0, rectified_diverged = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto stream = scenario_stream(bench().control_task.test, sc, seed);
    if (growth_exceeds_2x(bench().control_source, stream, control, kControlRate))
      ++control_diverged;
    if (growth_exceeds_2x(bench().control_source, stream, rectified, kControlRate))
      ++rectified_diverged;
  }

  detail = "median accuracy " + fmt(median(batch_acc)) + " (batch stats) vs " +
           fmt(median(rect_acc)) + " (rectified), gap " + fmt(gap) +
           "; layer scale norm grew >" + fmt(kGrowthFactor) + "x in " +
           std::to_string(control_diverged) + "/" + std::to_string(kSeeds) +
           " control seeds vs " + std::to_string(rectified_diverged) + "/" +
           std::to_string(kSeeds) + " rectified seeds";
  return gap >= kAccuracyGapPts && control_diverged >= 8 && rectified_diverged <= 2;
}

// --- criterion 7: reweighted rectification never hurts ------------------------
bool criterion7(std::string& detail) {
  struct Case {
    const char* name;
    streams::Scenario sc;
  };
  std::vector<Case> cases;
  {
    Case a{"is+cb", streams::scenario_from_name("is+cb")};
    cases.push_back(a);
    Case b{"ds+cb", streams::scenario_from_name("ds+cb")};
    b.sc.rho = 0.5;
    cases.push_back(b);
    Case c{"is+ci", streams::scenario_from_name("is+ci")};
    c.sc.pi = 0.1;
    cases.push_back(c);
    Case d{"ds+ci", streams::scenario_from_name("ds+ci")};
    d.sc.rho = 0.5;
    d.sc.pi = 0.05;
    cases.push_back(d);
  }

  // Long streams (100 batches) give the running statistics and the class
  // frequency estimate room to converge, so the comparison reflects the
  // steady state of each method rather than its warm-up transient.
  const auto& test = bench().wide.test;
  std::string log;
  bool ok = true;
  for (const auto& c : cases) {
    const double tent = median(per_seed_accuracy(test, "tent", c.sc, 64));
    const double tent_full = median(per_seed_accuracy(test, "tent+delta", c.sc, 64));
    const double gated = median(per_seed_accuracy(test, "ent-w", c.sc, 64));
    const double gated_full = median(per_seed_accuracy(test, "ent-w+delta", c.sc, 64));
    if (tent_full < tent || gated_full < gated) ok = false;
    log += std::string(c.name) + " " + fmt(tent) + "->" + fmt(tent_full) + ", " + fmt(gated) +
           "->" + fmt(gated_full) + "; ";
  }
  detail = log;
  return ok;
}

// --- criterion 8: reweighting narrows the prediction distribution -------------
bool criterion8(std::string& detail) {
  streams::Scenario sc = streams::scenario_from_name("ds+cb");
  sc.rho = 0.5;
  std::vector<double> plain_std, reweighted_std;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto stream = scenario_stream(bench().data.test, sc, seed);
    plain_std.push_back(
        harness::run_episode(bench().source, stream, episode_config("tent+tbr", 64))
            .metrics.pred_std);
    reweighted_std.push_back(
        harness::run_episode(bench().source, stream, episode_config("tent+delta", 64))
            .metrics.pred_std);
  }
  const double plain = median(plain_std), reweighted = median(reweighted_std);
  detail = "median prediction-count std " + fmt(plain) + " (unweighted) vs " + fmt(reweighted) +
           " (reweighted)";
  return reweighted < plain;
}

// --- criterion 9: rectified statistics track the stream better ----------------
bool criterion9(std::string& detail) {
  streams::Scenario sc = streams::scenario_from_name("ds+cb");
  sc.rho = 0.5;

  adapt::MethodSpec rectified_stats;  // statistics estimator only, no updates
  rectified_stats.name = "rectified-stats";
  rectified_stats.mode = norm::Mode::Renorm;

  int wins = 0;
  std::vector<double> batch_errs, rect_errs;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto stream = scenario_stream(bench().data.test, sc, seed);

    harness::RunConfig batch_cfg = episode_config("bn-adapt", 64);
    batch_cfg.stats_trace = true;
    const auto batch_run = harness::run_episode(bench().source, stream, batch_cfg);

    harness::RunConfig rect_cfg = episode_config("bn-adapt", 64);
    rect_cfg.method = rectified_stats;
    rect_cfg.stats_trace = true;
    const auto rect_run = harness::run_episode(bench().source, stream, rect_cfg);

    batch_errs.push_back(batch_run.mean_stats_err);
    rect_errs.push_back(rect_run.mean_stats_err);
    if (rect_run.mean_stats_err < batch_run.mean_stats_err) ++wins;
  }
  detail = "rectified statistics closer to population in " + std::to_string(wins) + "/" +
           std::to_string(kSeeds) + " seeds (median error " + fmt(median(rect_errs)) + " vs " +
           fmt(median(batch_errs)) + ")";
  return wins >= 9;
}

// --- criterion 10: delayed-update schedule ------------------------------------
bool criterion10(std::string& detail) {
  // (a) A window equal to the batch is bitwise the standard schedule.
  streams::Scenario ds = streams::scenario_from_name("ds+cb");
  ds.rho = 0.5;
  const auto stream = scenario_stream(bench().data.test, ds, 0);
  auto standard = episode_config("tent+delta", 32);
  auto windowed = standard;
  windowed.update_window = 32;
  const auto a = harness::run_episode(bench().source, stream, standard);
  const auto b = harness::run_episode(bench().source, stream, windowed);
  if (a.predictions != b.predictions || !bitwise_equal(a.probs.data, b.probs.data) ||
      a.updates != b.updates) {
    detail = "window == batch is not bitwise-identical to the standard schedule";
    return false;
  }

  // (b) Single-sample arrivals with a 64-sample update window: rectified
  // reweighted adaptation must beat plain entropy adaptation clearly.
  const auto is_cb = streams::scenario_from_name("is+cb");
  std::vector<double> plain_acc, delayed_acc;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto s = scenario_stream(bench().data.test, is_cb, seed);

    auto plain = episode_config("tent", 1);
    plain.update_window = 64;
    plain_acc.push_back(harness::run_episode(bench().source, s, plain).metrics.mean_class_acc);

    auto delayed = episode_config("tent+delta", 1);
    delayed.update_window = 64;
    delayed.stats_init = norm::EmaInit::FromSource;  // single samples cannot seed statistics
    delayed_acc.push_back(
        harness::run_episode(bench().source, s, delayed).metrics.mean_class_acc);
  }
  const double gap = median(delayed_acc) - median(plain_acc);
  detail = "bitwise schedule identity holds; single-sample median accuracy " +
           fmt(median(plain_acc)) + " (batch stats) vs " + fmt(median(delayed_acc)) +
           " (rectified reweighted), gap " + fmt(gap);
  return gap >= kAccuracyGapPts;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* what;
    bool (*fn)(std::string&);
  };
  const Entry entries[] = {
      {1, "rectified normalization matches running-statistics values and scaled batch gradients",
       criterion1},
      {2, "analytic affine gradients agree with central finite differences", criterion2},
      {3, "sample reweighting invariants (mean one, simplex, hard/soft agreement)", criterion3},
      {4, "frozen worked examples reproduce hand-computed values", criterion4},
      {5, "stream generators conserve data and order it as configured", criterion5},
      {6, "batch statistics degrade on correlated streams; running-statistics gradients diverge",
       criterion6},
      {7, "rectified reweighted adaptation never trails its plain counterpart", criterion7},
      {8, "reweighting narrows the prediction-count distribution", criterion8},
      {9, "rectified statistics track population statistics better than batch statistics",
       criterion9},
      {10, "delayed-update schedule: exact window identity and single-sample gains", criterion10},
  };

  bool all_ok = true;
  for (const auto& entry : entries) {
    bool ok = false;
    std::string detail;
    try {
      ok = entry.fn(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    all_ok &= ok;
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", entry.id, entry.what,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
