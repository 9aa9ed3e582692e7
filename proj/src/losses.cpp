#include "delta/losses.hpp"

#include <algorithm>
#include <cmath>

namespace delta::loss {

Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* in = logits.row(r);
    double* out = p.row(r);
    double hi = in[0];
    for (std::size_t c = 1; c < logits.cols; ++c) hi = std::max(hi, in[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      out[c] = std::exp(in[c] - hi);
      total += out[c];
    }
    const double inv = 1.0 / total;
    for (std::size_t c = 0; c < logits.cols; ++c) out[c] *= inv;
  }
  return p;
}

std::vector<double> entropy(const Matrix& probs) {
  std::vector<double> h(probs.rows);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    const double* p = probs.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < probs.cols; ++c)
      if (p[c] > 0.0) acc -= p[c] * std::log(p[c]);
    h[r] = acc;
  }
  return h;
}

std::size_t argmax_row(const Matrix& m, std::size_t row) {
  const double* p = m.row(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cols; ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

namespace {

// dH/dlogit_j = -p_j * (log p_j + H); the p log p limit at 0 is 0.
void entropy_logit_grad(const double* p, std::size_t k, double h, double* out) {
  for (std::size_t c = 0; c < k; ++c) out[c] = p[c] > 0.0 ? -p[c] * (std::log(p[c]) + h) : 0.0;
}

}  // namespace

Eval evaluate(Kind kind, const Matrix& logits, const Matrix& probs, const Config& cfg) {
  check_input(logits.same_shape(probs), "logits/probs shape mismatch");
  const std::size_t B = probs.rows, K = probs.cols;
  Eval ev;
  ev.value.assign(B, 0.0);
  ev.used.assign(B, 0);
  ev.weight.assign(B, 0.0);
  ev.logit_grad = Matrix(B, K);

  switch (kind) {
    case Kind::None:
      return ev;

    case Kind::Entropy: {
      const auto h = entropy(probs);
      for (std::size_t b = 0; b < B; ++b) {
        ev.value[b] = h[b];
        ev.used[b] = 1;
        ev.weight[b] = 1.0;
        entropy_logit_grad(probs.row(b), K, h[b], ev.logit_grad.row(b));
      }
      return ev;
    }

    case Kind::PseudoLabel: {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t star = argmax_row(probs, b);
        const double top = probs(b, star);
        if (top < cfg.pl_confidence) continue;  // gated out: zero loss and grad
        ev.used[b] = 1;
        ev.weight[b] = 1.0;
        ev.value[b] = -std::log(top);
        double* g = ev.logit_grad.row(b);
        const double* p = probs.row(b);
        for (std::size_t c = 0; c < K; ++c) g[c] = p[c];
        g[star] -= 1.0;
      }
      return ev;
    }

    case Kind::GatedEntropy: {
      const double threshold = cfg.gate_fraction * std::log(static_cast<double>(K));
      const auto h = entropy(probs);
      for (std::size_t b = 0; b < B; ++b) {
        if (h[b] >= threshold) continue;  // gated out
        ev.used[b] = 1;
        const double mult = std::exp(threshold - h[b]);  // constant in backward
        ev.weight[b] = mult;
        ev.value[b] = mult * h[b];
        entropy_logit_grad(probs.row(b), K, h[b], ev.logit_grad.row(b));
        double* g = ev.logit_grad.row(b);
        for (std::size_t c = 0; c < K; ++c) g[c] *= mult;
      }
      return ev;
    }
  }
  throw ContractError("unhandled loss kind");
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels, Matrix* logit_grad) {
  const std::size_t B = probs.rows, K = probs.cols;
  check_input(labels.size() == B, "label count does not match batch");
  if (logit_grad) *logit_grad = Matrix(B, K);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    check_input(y >= 0 && static_cast<std::size_t>(y) < K, "label out of range");
    const double* p = probs.row(b);
    const double py = std::max(p[static_cast<std::size_t>(y)], 1e-300);
    total -= std::log(py);
    if (logit_grad) {
      double* g = logit_grad->row(b);
      for (std::size_t c = 0; c < K; ++c) g[c] = p[c];
      g[static_cast<std::size_t>(y)] -= 1.0;
    }
  }
  return total / static_cast<double>(B);
}

}  // namespace delta::loss
