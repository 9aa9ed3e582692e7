#pragma once

#include <vector>

#include "delta/matrix.hpp"

namespace delta::loss {

// Row-wise stabilized softmax (max-subtraction); rows sum to 1 up to
// round-off and survive logits of magnitude ~1e4 without overflow.
Matrix softmax(const Matrix& logits);

// Shannon entropy per row, in nats; 0 * log 0 counts as 0.
std::vector<double> entropy(const Matrix& probs);

// Index of the row maximum; ties resolve to the lowest index.
std::size_t argmax_row(const Matrix& m, std::size_t row);

// Self-supervised objectives driving test-time updates. All gradients are
// seeded analytically at the logits.
//
//   None         — no objective (prediction-only methods).
//   Entropy      — mean prediction entropy.
//   PseudoLabel  — cross-entropy against the row argmax, gated on the
//                  argmax probability reaching a confidence threshold.
//   GatedEntropy — entropy gated on being below a threshold, weighted by
//                  exp(threshold - entropy); the weight is a constant in the
//                  backward pass.
enum class Kind { None, Entropy, PseudoLabel, GatedEntropy };

struct Config {
  double pl_confidence = 0.4;   // PseudoLabel: minimum argmax probability
  double gate_fraction = 0.4;   // GatedEntropy: threshold = fraction * ln(K)
};

struct Eval {
  std::vector<double> value;  // per-sample loss (0 when gated out)
  std::vector<char> used;     // gate outcome per sample
  // Multiplier each sample's core loss carries, treated as a constant by the
  // backward pass: 1 for Entropy, the 0/1 gate for PseudoLabel, and
  // gate * exp(threshold - entropy) for GatedEntropy.
  std::vector<double> weight;
  Matrix logit_grad;          // per-sample dL_b/dlogits, zero rows when gated out
};

Eval evaluate(Kind kind, const Matrix& logits, const Matrix& probs, const Config& cfg);

// Supervised cross-entropy for source training. Returns the batch mean; the
// gradient rows are per-sample (p - onehot), unscaled.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels, Matrix* logit_grad);

}  // namespace delta::loss
