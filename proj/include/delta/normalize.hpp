#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delta/matrix.hpp"

namespace delta::norm {

// Which per-channel statistics standardize the layer input.
//
//   Source — frozen statistics accumulated during source training.
//   Batch  — statistics of the current test batch.
//   Ema    — running statistics of the test stream, used directly.
//   Renorm — current-batch statistics rectified toward the running stream
//            statistics: vhat * r + d with r = sigma_batch / sigma_ema and
//            d = (mu_batch - mu_ema) / sigma_ema, where r and d are treated
//            as constants by the backward pass. Output value matches Ema
//            normalization up to round-off, but gradients flow through the
//            batch statistics.
enum class Mode { Source, Batch, Ema, Renorm };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// Per-channel first/second-moment summary: sigma is a standard deviation
// (sqrt of biased variance, with any epsilon already folded inside the sqrt).
struct Stats {
  std::vector<double> mu;
  std::vector<double> sigma;
};

// How the running test-stream statistics are seeded at episode start.
//   FromFirstBatch — lazily, from the statistics of the first batch seen.
//   FromSource     — eagerly, by copying the frozen source statistics.
enum class EmaInit { FromFirstBatch, FromSource };

struct LayerState {
  std::vector<double> gamma;
  std::vector<double> beta;
  Stats source;               // frozen after source training
  Stats ema;                  // test-stream running statistics
  bool ema_ready = false;
  EmaInit init = EmaInit::FromFirstBatch;
  double alpha = 0.95;        // EMA retention factor
  double eps = 1e-5;          // variance guard, inside the sqrt

  std::size_t channels() const { return gamma.size(); }
};

LayerState make_layer(std::size_t channels, double alpha, double eps);

// mu[c] = mean of column c; sigma[c] = sqrt(biased variance + eps).
// B = 1 is legal: variance 0, sigma = sqrt(eps).
Stats batch_stats(const Matrix& v, double eps);

// Seed the running statistics. FromFirstBatch requires `batch`; seeding an
// already-initialized state throws StateError.
void init_stats(LayerState& state, EmaInit strategy, const Stats* batch = nullptr);

// Everything backward() needs from the forward pass.
struct Cache {
  Mode mode = Mode::Source;
  Matrix vhat;                // standardized values before r/d rectification
  Matrix vstar;               // after r/d, before the affine transform
  std::vector<double> r;      // rectification scale (Renorm only)
  Stats batch;                // current-batch statistics (Batch/Renorm/Ema)
  Stats used;                 // statistics the normalization was worth in value
};

// Oracle hook: freeze the rectification at given (r, d) instead of deriving
// them from the current batch, mirroring their constant treatment in
// backward(). Used by finite-difference checks only.
struct PinnedRectifier {
  std::vector<double> r;
  std::vector<double> d;
};

struct ForwardOptions {
  Mode mode = Mode::Source;
  const PinnedRectifier* pin = nullptr;
  // When >= 0 (source training): fold this batch's statistics into the frozen
  // source statistics with this momentum (new = (1-m)*old + m*batch).
  double source_momentum = -1.0;
  // When false, Ema/Renorm forwards leave the running statistics where they
  // are (one-time first-batch seeding still happens). Prediction-only passes
  // in delayed-update schedules use this.
  bool advance_ema = true;
};

// Standardize + affine-transform a batch. Ema/Renorm modes advance the
// running statistics after computing the output (the output never depends on
// the post-update values). Throws StateError if running statistics are
// needed but not initialized and the layer's strategy cannot seed them here.
Matrix forward(LayerState& state, const Matrix& v, const ForwardOptions& opts, Cache* cache);

struct AffineGrads {
  std::vector<double> gamma;
  std::vector<double> beta;
};

// Propagate loss gradient through the layer. g_out is the gradient at the
// layer output; returns the gradient at the layer input. Batch/Renorm modes
// apply the full Jacobian of the current-batch standardization; Source/Ema
// treat their statistics as constants. Must be called before `state` is
// mutated again (the cache binds to the forward pass that produced it).
Matrix backward(const LayerState& state, const Cache& cache, const Matrix& g_out,
                AffineGrads* grads);

}  // namespace delta::norm
