#pragma once

#include <cstdint>
#include <vector>

#include "delta/dataset.hpp"
#include "delta/losses.hpp"
#include "delta/matrix.hpp"
#include "delta/normalize.hpp"
#include "delta/optim.hpp"

namespace delta::net {

struct ModelSpec {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t classes = 10;
  double alpha = 0.95;  // test-stream EMA retention of every normalization layer
  double eps = 1e-5;    // variance guard of every normalization layer

  bool operator==(const ModelSpec&) const = default;
};

struct DenseLayer {
  Matrix w;                // in x out, row-major
  std::vector<double> b;
};

// Feedforward classifier: [dense -> normalize -> relu] per hidden width,
// then a dense head producing logits.
struct ModelState {
  ModelSpec spec;
  std::vector<DenseLayer> dense;        // hidden.size() + 1 entries, last is the head
  std::vector<norm::LayerState> norms;  // one per hidden layer
};

// Parameters drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)], layer by
// layer (weights then bias), deterministically from the seed.
ModelState init_model(const ModelSpec& spec, std::uint64_t seed);

void validate_model(const ModelState& state);

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> dense_in;          // input of each dense layer
  std::vector<norm::Cache> norm_caches;  // one per hidden layer
  std::vector<Matrix> pre_relu;          // normalize-layer outputs, before relu
  Matrix logits;
};

struct ForwardOptions {
  norm::Mode mode = norm::Mode::Source;
  double source_momentum = -1.0;  // >= 0 during source training
  bool advance_ema = true;        // see norm::ForwardOptions
  // Oracle hook: per-normalization-layer pinned rectifiers (see normalize.hpp).
  const std::vector<norm::PinnedRectifier>* pins = nullptr;
};

// Returns logits. Mutates `state` only through normalization running
// statistics (Ema/Renorm modes and source-training accumulation); parameters
// are never touched. Throws NumericError naming the first layer whose output
// is non-finite.
Matrix forward(ModelState& state, const Matrix& x, const ForwardOptions& opts,
               ForwardTrace* trace);

struct AffineGradSet {
  std::vector<norm::AffineGrads> layers;  // one per normalization layer
};

// Gradient of (1/B) * sum_b weights[b] * L_b with respect to every gamma/beta,
// where logit_grads rows hold the per-sample dL_b/dlogits. Dense parameters
// receive no gradient and are never modified by adaptation.
AffineGradSet backward_affine(const ModelState& state, const ForwardTrace& trace,
                              const Matrix& logit_grads, const std::vector<double>& weights);

struct FullGrads {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;
  AffineGradSet affine;
};

// Same objective, gradients for every parameter (source training).
FullGrads backward_full(const ModelState& state, const ForwardTrace& trace,
                        const Matrix& logit_grads, const std::vector<double>& weights);

// Flat parameter views. Affine order: per normalization layer, gamma then
// beta. Full order: per dense layer, weights then bias, followed by the
// affine block. Flatten/scatter and gradient flattening all share it.
std::size_t affine_dim(const ModelState& state);
std::vector<double> flatten_affine(const ModelState& state);
void scatter_affine(ModelState& state, const std::vector<double>& flat);
std::vector<double> flatten_affine_grads(const AffineGradSet& grads);

std::size_t full_dim(const ModelState& state);
std::vector<double> flatten_full(const ModelState& state);
void scatter_full(ModelState& state, const std::vector<double>& flat);
std::vector<double> flatten_full_grads(const FullGrads& grads);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double bn_momentum = 0.1;  // source statistics accumulation momentum
  optim::Config optimizer{optim::Rule::Adam, 1e-3};
  std::uint64_t seed = 0;
};

// Supervised source training: cross-entropy, batch-statistics normalization,
// source statistics accumulated along the way. Deterministic per seed.
ModelState train_source(const ModelSpec& spec, const Dataset& train, const TrainConfig& cfg);

// Batched prediction accuracy under the given normalization mode. Works on a
// copy, so running statistics of `state` are unaffected.
double evaluate_accuracy(const ModelState& state, const Dataset& data, norm::Mode mode,
                         std::size_t batch_size);

// Central-difference oracle for backward_affine: perturbs every gamma/beta
// entry by ±h, re-runs the forward pass from the pre-step state, and returns
// the maximum relative error against the analytic gradient. Renorm layers
// keep their rectifiers pinned at base values during perturbed evaluations,
// matching their constant treatment in the backward pass.
double finite_diff_check(const ModelState& state, const Matrix& x, norm::Mode mode,
                         loss::Kind kind, const loss::Config& cfg, double h);

}  // namespace delta::net
