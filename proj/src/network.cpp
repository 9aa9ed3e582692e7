#include "delta/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "delta/kernels.hpp"
#include "delta/rng.hpp"

namespace delta::net {

namespace {

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  Matrix out(x.rows, layer.b.size());
  kernels::active().matmul_bias(x.data.data(), x.rows, x.cols, layer.w.data.data(),
                                layer.b.data(), layer.b.size(), out.data.data());
  return out;
}

// g_prev[b,i] = sum_o g[b,o] * w[i,o]
Matrix dense_input_grad(const DenseLayer& layer, const Matrix& g) {
  const std::size_t in = layer.w.rows, out = layer.w.cols;
  Matrix prev(g.rows, in, 0.0);
  for (std::size_t b = 0; b < g.rows; ++b) {
    const double* gr = g.row(b);
    double* pr = prev.row(b);
    for (std::size_t i = 0; i < in; ++i) {
      const double* wrow = layer.w.row(i);
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += gr[o] * wrow[o];
      pr[i] = acc;
    }
  }
  return prev;
}

Matrix relu_forward(const Matrix& v) {
  Matrix out(v.rows, v.cols);
  kernels::active().relu(v.data.data(), v.data.size(), out.data.data());
  return out;
}

Matrix relu_backward(const Matrix& g, const Matrix& pre) {
  Matrix out(g.rows, g.cols);
  kernels::active().relu_grad(g.data.data(), pre.data.data(), g.data.size(), out.data.data());
  return out;
}

// Seed the backward pass: G[b,:] = (weights[b] / B) * logit_grads[b,:].
Matrix seed_grads(const Matrix& logit_grads, const std::vector<double>& weights) {
  check_input(weights.size() == logit_grads.rows, "weight count does not match batch");
  Matrix g = logit_grads;
  const double inv_b = 1.0 / static_cast<double>(g.rows);
  for (std::size_t b = 0; b < g.rows; ++b) {
    const double s = weights[b] * inv_b;
    double* row = g.row(b);
    for (std::size_t c = 0; c < g.cols; ++c) row[c] *= s;
  }
  return g;
}

}  // namespace

ModelState init_model(const ModelSpec& spec, std::uint64_t seed) {
  check_config(spec.input_dim >= 1, "input dimension must be at least 1");
  check_config(spec.classes >= 2, "need at least two classes");
  check_config(!spec.hidden.empty(), "need at least one hidden layer");
  for (std::size_t h : spec.hidden) check_config(h >= 1, "hidden width must be at least 1");

  ModelState st;
  st.spec = spec;
  Rng rng(derive_seed(seed, 0));

  std::size_t prev = spec.input_dim;
  auto make_dense = [&](std::size_t in, std::size_t out) {
    DenseLayer layer;
    layer.w = Matrix(in, out);
    layer.b.resize(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : layer.w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
    for (auto& v : layer.b) v = (2.0 * rng.uniform() - 1.0) * bound;
    return layer;
  };

  for (std::size_t width : spec.hidden) {
    st.dense.push_back(make_dense(prev, width));
    st.norms.push_back(norm::make_layer(width, spec.alpha, spec.eps));
    prev = width;
  }
  st.dense.push_back(make_dense(prev, spec.classes));
  return st;
}

void validate_model(const ModelState& st) {
  check_state(st.dense.size() == st.spec.hidden.size() + 1, "dense layer count mismatch");
  check_state(st.norms.size() == st.spec.hidden.size(), "normalization layer count mismatch");
  std::size_t prev = st.spec.input_dim;
  for (std::size_t i = 0; i < st.norms.size(); ++i) {
    check_state(st.dense[i].w.rows == prev && st.dense[i].w.cols == st.spec.hidden[i],
                "dense layer " + std::to_string(i) + " shape mismatch");
    check_state(st.norms[i].channels() == st.spec.hidden[i],
                "normalization layer " + std::to_string(i) + " width mismatch");
    for (double s : st.norms[i].source.sigma)
      check_state(s > 0.0 && std::isfinite(s), "source sigma must be positive and finite");
    prev = st.spec.hidden[i];
  }
  check_state(st.dense.back().w.rows == prev && st.dense.back().w.cols == st.spec.classes,
              "head shape mismatch");
  for (const auto& d : st.dense) {
    check_state(d.w.all_finite(), "non-finite dense weights");
    for (double v : d.b) check_state(std::isfinite(v), "non-finite dense bias");
  }
}

Matrix forward(ModelState& state, const Matrix& x, const ForwardOptions& opts,
               ForwardTrace* trace) {
  check_input(x.cols == state.spec.input_dim, "input width does not match model");
  check_input(x.rows >= 1, "empty batch");
  check_finite(x, "input batch");
  if (opts.pins)
    check_input(opts.pins->size() == state.norms.size(), "pinned rectifier layer count mismatch");

  const std::size_t n_hidden = state.norms.size();
  if (trace) {
    trace->input = x;
    trace->dense_in.clear();
    trace->norm_caches.assign(n_hidden, {});
    trace->pre_relu.clear();
  }

  Matrix cur = x;
  for (std::size_t i = 0; i < n_hidden; ++i) {
    if (trace) trace->dense_in.push_back(cur);
    Matrix z = dense_forward(state.dense[i], cur);
    if (!z.all_finite())
      throw NumericError("non-finite output of dense layer " + std::to_string(i));

    norm::ForwardOptions nopts;
    nopts.mode = opts.mode;
    nopts.source_momentum = opts.source_momentum;
    nopts.advance_ema = opts.advance_ema;
    if (opts.pins) nopts.pin = &(*opts.pins)[i];
    norm::Cache local;
    norm::Cache& cache = trace ? trace->norm_caches[i] : local;
    Matrix a = norm::forward(state.norms[i], z, nopts, &cache);
    if (!a.all_finite())
      throw NumericError("non-finite output of normalization layer " + std::to_string(i));

    if (trace) trace->pre_relu.push_back(a);
    cur = relu_forward(a);
  }

  if (trace) trace->dense_in.push_back(cur);
  Matrix logits = dense_forward(state.dense.back(), cur);
  if (!logits.all_finite()) throw NumericError("non-finite logits");
  if (trace) trace->logits = logits;
  return logits;
}

AffineGradSet backward_affine(const ModelState& state, const ForwardTrace& trace,
                              const Matrix& logit_grads, const std::vector<double>& weights) {
  const std::size_t n_hidden = state.norms.size();
  AffineGradSet grads;
  grads.layers.resize(n_hidden);

  Matrix g = seed_grads(logit_grads, weights);
  for (std::size_t i = n_hidden; i-- > 0;) {
    g = dense_input_grad(state.dense[i + 1], g);
    g = relu_backward(g, trace.pre_relu[i]);
    g = norm::backward(state.norms[i], trace.norm_caches[i], g, &grads.layers[i]);
  }
  return grads;
}

FullGrads backward_full(const ModelState& state, const ForwardTrace& trace,
                        const Matrix& logit_grads, const std::vector<double>& weights) {
  const std::size_t n_hidden = state.norms.size();
  FullGrads out;
  out.w.resize(state.dense.size());
  out.b.resize(state.dense.size());
  out.affine.layers.resize(n_hidden);

  auto dense_param_grads = [&](std::size_t idx, const Matrix& g) {
    const Matrix& in = trace.dense_in[idx];
    Matrix& gw = out.w[idx];
    gw = Matrix(in.cols, g.cols, 0.0);
    out.b[idx].assign(g.cols, 0.0);
    for (std::size_t b = 0; b < g.rows; ++b) {
      const double* gr = g.row(b);
      const double* xr = in.row(b);
      for (std::size_t i = 0; i < in.cols; ++i) {
        const double xi = xr[i];
        double* dst = gw.row(i);
        for (std::size_t o = 0; o < g.cols; ++o) dst[o] += xi * gr[o];
      }
      for (std::size_t o = 0; o < g.cols; ++o) out.b[idx][o] += gr[o];
    }
  };

  Matrix g = seed_grads(logit_grads, weights);
  dense_param_grads(state.dense.size() - 1, g);
  for (std::size_t i = n_hidden; i-- > 0;) {
    g = dense_input_grad(state.dense[i + 1], g);
    g = relu_backward(g, trace.pre_relu[i]);
    g = norm::backward(state.norms[i], trace.norm_caches[i], g, &out.affine.layers[i]);
    dense_param_grads(i, g);
  }
  return out;
}

std::size_t affine_dim(const ModelState& state) {
  std::size_t n = 0;
  for (const auto& layer : state.norms) n += 2 * layer.channels();
  return n;
}

std::vector<double> flatten_affine(const ModelState& state) {
  std::vector<double> flat;
  flat.reserve(affine_dim(state));
  for (const auto& layer : state.norms) {
    flat.insert(flat.end(), layer.gamma.begin(), layer.gamma.end());
    flat.insert(flat.end(), layer.beta.begin(), layer.beta.end());
  }
  return flat;
}

void scatter_affine(ModelState& state, const std::vector<double>& flat) {
  check_input(flat.size() == affine_dim(state), "affine vector size mismatch");
  std::size_t pos = 0;
  for (auto& layer : state.norms) {
    std::copy_n(flat.begin() + pos, layer.channels(), layer.gamma.begin());
    pos += layer.channels();
    std::copy_n(flat.begin() + pos, layer.channels(), layer.beta.begin());
    pos += layer.channels();
  }
}

std::vector<double> flatten_affine_grads(const AffineGradSet& grads) {
  std::vector<double> flat;
  for (const auto& layer : grads.layers) {
    flat.insert(flat.end(), layer.gamma.begin(), layer.gamma.end());
    flat.insert(flat.end(), layer.beta.begin(), layer.beta.end());
  }
  return flat;
}

std::size_t full_dim(const ModelState& state) {
  std::size_t n = affine_dim(state);
  for (const auto& d : state.dense) n += d.w.data.size() + d.b.size();
  return n;
}

std::vector<double> flatten_full(const ModelState& state) {
  std::vector<double> flat;
  flat.reserve(full_dim(state));
  for (const auto& d : state.dense) {
    flat.insert(flat.end(), d.w.data.begin(), d.w.data.end());
    flat.insert(flat.end(), d.b.begin(), d.b.end());
  }
  const auto affine = flatten_affine(state);
  flat.insert(flat.end(), affine.begin(), affine.end());
  return flat;
}

void scatter_full(ModelState& state, const std::vector<double>& flat) {
  check_input(flat.size() == full_dim(state), "parameter vector size mismatch");
  std::size_t pos = 0;
  for (auto& d : state.dense) {
    std::copy_n(flat.begin() + pos, d.w.data.size(), d.w.data.begin());
    pos += d.w.data.size();
    std::copy_n(flat.begin() + pos, d.b.size(), d.b.begin());
    pos += d.b.size();
  }
  scatter_affine(state, std::vector<double>(flat.begin() + pos, flat.end()));
}

std::vector<double> flatten_full_grads(const FullGrads& grads) {
  std::vector<double> flat;
  for (std::size_t i = 0; i < grads.w.size(); ++i) {
    flat.insert(flat.end(), grads.w[i].data.begin(), grads.w[i].data.end());
    flat.insert(flat.end(), grads.b[i].begin(), grads.b[i].end());
  }
  const auto affine = flatten_affine_grads(grads.affine);
  flat.insert(flat.end(), affine.begin(), affine.end());
  return flat;
}

ModelState train_source(const ModelSpec& spec, const Dataset& train, const TrainConfig& cfg) {
  check_dataset(train, "training set");
  check_input(train.classes == spec.classes, "dataset classes do not match model");
  check_config(cfg.batch_size >= 1, "batch size must be at least 1");
  check_config(cfg.bn_momentum > 0.0 && cfg.bn_momentum <= 1.0, "bn momentum must lie in (0, 1]");

  ModelState model = init_model(spec, cfg.seed);
  if (cfg.epochs == 0) return model;

  optim::Config ocfg = cfg.optimizer;
  ocfg.lr = cfg.lr;
  optim::State opt = optim::make(ocfg, full_dim(model));
  Rng shuffle_rng(derive_seed(cfg.seed, 1));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::vector<double> unit_weights(cfg.batch_size, 1.0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, train.size() - start);
      Matrix xb(count, train.x.cols);
      std::vector<int> yb(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(train.x.row(src), train.x.cols, xb.row(i));
        yb[i] = train.y[src];
      }

      ForwardTrace trace;
      ForwardOptions fopts;
      fopts.mode = norm::Mode::Batch;
      fopts.source_momentum = cfg.bn_momentum;
      Matrix logits = forward(model, xb, fopts, &trace);
      Matrix probs = loss::softmax(logits);
      Matrix logit_grads;
      loss::cross_entropy(probs, yb, &logit_grads);

      std::vector<double> weights(count, 1.0);
      FullGrads grads = backward_full(model, trace, logit_grads, weights);
      auto params = flatten_full(model);
      optim::step(opt, params, flatten_full_grads(grads));
      scatter_full(model, params);
    }
  }
  validate_model(model);
  return model;
}

double evaluate_accuracy(const ModelState& state, const Dataset& data, norm::Mode mode,
                         std::size_t batch_size) {
  check_dataset(data, "evaluation set");
  ModelState copy = state;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - start);
    Matrix xb(count, data.x.cols);
    for (std::size_t i = 0; i < count; ++i)
      std::copy_n(data.x.row(start + i), data.x.cols, xb.row(i));
    ForwardOptions fopts;
    fopts.mode = mode;
    Matrix logits = forward(copy, xb, fopts, nullptr);
    for (std::size_t i = 0; i < count; ++i)
      if (static_cast<int>(loss::argmax_row(logits, i)) == data.y[start + i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double finite_diff_check(const ModelState& state, const Matrix& x, norm::Mode mode,
                         loss::Kind kind, const loss::Config& cfg, double h) {
  check_input(h > 0.0, "finite-difference step must be positive");
  check_input(kind != loss::Kind::None, "finite-difference check needs an objective");
  if (mode == norm::Mode::Ema)
    for (const auto& layer : state.norms)
      check_input(layer.ema_ready,
                  "Ema-mode oracle needs initialized running statistics; first-batch seeding "
                  "would tie the \"constant\" statistics to the perturbed parameters");

  const std::vector<double> weights(x.rows, 1.0);

  // Base pass: analytic gradient and the quantities the backward pass treats
  // as constants (Renorm rectifiers, gate multipliers, pseudo-labels).
  ModelState base = state;
  ForwardTrace trace;
  ForwardOptions fopts;
  fopts.mode = mode;
  Matrix logits = forward(base, x, fopts, &trace);
  Matrix probs = loss::softmax(logits);
  auto ev = loss::evaluate(kind, logits, probs, cfg);
  AffineGradSet analytic = backward_affine(state, trace, ev.logit_grad, weights);

  std::vector<std::size_t> base_labels(x.rows, 0);
  if (kind == loss::Kind::PseudoLabel)
    for (std::size_t b = 0; b < x.rows; ++b) base_labels[b] = loss::argmax_row(probs, b);

  // Scalar objective the analytic gradient actually differentiates:
  // (1/B) * sum_b w_b * core_b(theta), with the Renorm rectifiers, the
  // per-sample multipliers w_b, and the pseudo-labels all held at their base
  // values. Differencing the raw objective instead would disagree wherever a
  // multiplier depends on theta, by design of the backward pass.
  auto objective = [&](const ModelState& m,
                       const std::vector<norm::PinnedRectifier>* pins) -> double {
    ModelState work = m;  // forward advances running statistics; discard them
    ForwardOptions probe_opts;
    probe_opts.mode = mode;
    probe_opts.pins = pins;
    Matrix probe_logits = forward(work, x, probe_opts, nullptr);
    Matrix probe_probs = loss::softmax(probe_logits);
    double total = 0.0;
    if (kind == loss::Kind::PseudoLabel) {
      for (std::size_t b = 0; b < x.rows; ++b)
        total -= ev.weight[b] * std::log(std::max(probe_probs(b, base_labels[b]), 1e-300));
    } else {
      const auto h = loss::entropy(probe_probs);
      for (std::size_t b = 0; b < x.rows; ++b) total += ev.weight[b] * h[b];
    }
    return total / static_cast<double>(x.rows);
  };

  std::vector<norm::PinnedRectifier> pins;
  const std::vector<norm::PinnedRectifier>* pins_ptr = nullptr;
  if (mode == norm::Mode::Renorm) {
    for (const auto& cache : trace.norm_caches) {
      norm::PinnedRectifier pin;
      pin.r = cache.r;
      pin.d.resize(cache.r.size());
      for (std::size_t c = 0; c < pin.r.size(); ++c)
        pin.d[c] = (cache.batch.mu[c] - cache.used.mu[c]) / cache.used.sigma[c];
      pins.push_back(std::move(pin));
    }
    pins_ptr = &pins;
  }

  double worst = 0.0;
  auto probe = [&](std::size_t layer, bool is_gamma, std::size_t c, double analytic_g) {
    ModelState plus = state;
    ModelState minus = state;
    auto& p_vec = is_gamma ? plus.norms[layer].gamma : plus.norms[layer].beta;
    auto& m_vec = is_gamma ? minus.norms[layer].gamma : minus.norms[layer].beta;
    p_vec[c] += h;
    m_vec[c] -= h;
    const double fd = (objective(plus, pins_ptr) - objective(minus, pins_ptr)) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic_g), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic_g) / denom);
  };

  for (std::size_t layer = 0; layer < state.norms.size(); ++layer) {
    for (std::size_t c = 0; c < state.norms[layer].channels(); ++c) {
      probe(layer, true, c, analytic.layers[layer].gamma[c]);
      probe(layer, false, c, analytic.layers[layer].beta[c]);
    }
  }
  return worst;
}

}  // namespace delta::net
