#include "delta/normalize.hpp"

#include <cmath>

#include "delta/kernels.hpp"

namespace delta::norm {

namespace {

void check_channels(const LayerState& st, const Matrix& v) {
  check_input(v.cols == st.channels(), "batch width " + std::to_string(v.cols) +
                                           " does not match layer channels " +
                                           std::to_string(st.channels()));
  check_input(v.rows >= 1, "empty batch");
}

void blend(std::vector<double>& acc, const std::vector<double>& sample, double keep) {
  const double take = 1.0 - keep;
  for (std::size_t c = 0; c < acc.size(); ++c) acc[c] = keep * acc[c] + take * sample[c];
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Source: return "source";
    case Mode::Batch: return "batch";
    case Mode::Ema: return "ema";
    case Mode::Renorm: return "renorm";
  }
  throw ContractError("unhandled normalization mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "source") return Mode::Source;
  if (name == "batch") return Mode::Batch;
  if (name == "ema") return Mode::Ema;
  if (name == "renorm") return Mode::Renorm;
  throw ConfigError("unknown normalization mode '" + name + "'");
}

LayerState make_layer(std::size_t channels, double alpha, double eps) {
  check_config(channels > 0, "normalization layer needs at least one channel");
  check_config(alpha > 0.0 && alpha < 1.0, "EMA retention alpha must lie in (0, 1)");
  check_config(eps > 0.0, "normalization epsilon must be positive");
  LayerState st;
  st.gamma.assign(channels, 1.0);
  st.beta.assign(channels, 0.0);
  st.source.mu.assign(channels, 0.0);
  st.source.sigma.assign(channels, 1.0);
  st.alpha = alpha;
  st.eps = eps;
  return st;
}

Stats batch_stats(const Matrix& v, double eps) {
  check_input(v.rows >= 1, "batch_stats needs at least one row");
  check_input(eps >= 0.0, "batch_stats epsilon must be non-negative");
  const auto& k = kernels::active();
  const double inv_b = 1.0 / static_cast<double>(v.rows);
  Stats s;
  s.mu.resize(v.cols);
  s.sigma.resize(v.cols);
  k.colwise_sum(v.data.data(), v.rows, v.cols, s.mu.data());
  for (auto& m : s.mu) m *= inv_b;
  k.colwise_sqdiff_sum(v.data.data(), v.rows, v.cols, s.mu.data(), s.sigma.data());
  for (auto& sd : s.sigma) sd = std::sqrt(sd * inv_b + eps);
  return s;
}

void init_stats(LayerState& state, EmaInit strategy, const Stats* batch) {
  check_state(!state.ema_ready, "running statistics already initialized");
  switch (strategy) {
    case EmaInit::FromFirstBatch:
      check_input(batch != nullptr, "FromFirstBatch seeding requires batch statistics");
      check_input(batch->mu.size() == state.channels(), "seed statistics width mismatch");
      state.ema = *batch;
      break;
    case EmaInit::FromSource:
      state.ema = state.source;
      break;
  }
  state.ema_ready = true;
}

Matrix forward(LayerState& state, const Matrix& v, const ForwardOptions& opts, Cache* cache) {
  check_channels(state, v);
  const auto& k = kernels::active();
  const std::size_t C = v.cols;
  const Mode mode = opts.mode;

  const bool needs_batch = mode != Mode::Source;
  Stats batch;
  if (needs_batch) batch = batch_stats(v, state.eps);

  if (opts.source_momentum >= 0.0) {
    check_input(mode == Mode::Batch, "source statistics accumulate only under batch-statistics normalization");
    blend(state.source.mu, batch.mu, 1.0 - opts.source_momentum);
    blend(state.source.sigma, batch.sigma, 1.0 - opts.source_momentum);
  }

  const bool needs_ema = mode == Mode::Ema || mode == Mode::Renorm;
  if (needs_ema && !state.ema_ready) {
    if (state.init == EmaInit::FromFirstBatch)
      init_stats(state, EmaInit::FromFirstBatch, &batch);
    else
      throw StateError("running statistics not initialized (source seeding happens at episode start)");
  }

  // Standardization statistics and the statistics the output is worth.
  const Stats* standardize = nullptr;
  Stats used;
  switch (mode) {
    case Mode::Source:
      standardize = &state.source;
      used = state.source;
      break;
    case Mode::Batch:
      standardize = &batch;
      used = batch;
      break;
    case Mode::Ema:
      standardize = &state.ema;  // pre-update values
      used = state.ema;
      break;
    case Mode::Renorm:
      standardize = &batch;
      used = state.ema;  // value-equivalent statistics (pre-update)
      break;
  }

  Cache local;
  Cache& cc = cache ? *cache : local;
  cc.mode = mode;
  cc.batch = needs_batch ? batch : Stats{};
  cc.used = used;

  // vhat = (v - mu) * (1/sigma), columnwise.
  std::vector<double> inv_sigma(C), zero(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) inv_sigma[c] = 1.0 / standardize->sigma[c];
  cc.vhat = Matrix(v.rows, C);
  k.shift_scale_columns(v.data.data(), v.rows, C, standardize->mu.data(), inv_sigma.data(),
                        zero.data(), cc.vhat.data.data());

  if (mode == Mode::Renorm) {
    std::vector<double> r(C), d(C);
    if (opts.pin) {
      check_input(opts.pin->r.size() == C && opts.pin->d.size() == C,
                  "pinned rectifier width mismatch");
      r = opts.pin->r;
      d = opts.pin->d;
    } else {
      for (std::size_t c = 0; c < C; ++c) {
        r[c] = batch.sigma[c] / state.ema.sigma[c];
        d[c] = (batch.mu[c] - state.ema.mu[c]) / state.ema.sigma[c];
      }
    }
    cc.r = r;
    cc.vstar = Matrix(v.rows, C);
    k.scale_shift_columns(cc.vhat.data.data(), v.rows, C, r.data(), d.data(),
                          cc.vstar.data.data());
  } else {
    cc.vstar = cc.vhat;
  }

  Matrix out(v.rows, C);
  k.scale_shift_columns(cc.vstar.data.data(), v.rows, C, state.gamma.data(), state.beta.data(),
                        out.data.data());

  // Running statistics advance only after the output is fixed.
  if (needs_ema && opts.advance_ema) {
    blend(state.ema.mu, batch.mu, state.alpha);
    blend(state.ema.sigma, batch.sigma, state.alpha);
  }
  return out;
}

Matrix backward(const LayerState& state, const Cache& cache, const Matrix& g_out,
                AffineGrads* grads) {
  check_input(g_out.same_shape(cache.vstar), "gradient shape does not match forward cache");
  const auto& k = kernels::active();
  const std::size_t B = g_out.rows, C = g_out.cols;

  if (grads) {
    grads->gamma.resize(C);
    grads->beta.resize(C);
    k.colwise_dot(g_out.data.data(), cache.vstar.data.data(), B, C, grads->gamma.data());
    k.colwise_sum(g_out.data.data(), B, C, grads->beta.data());
  }

  // Through the affine transform.
  Matrix g_star(B, C);
  k.mul_columns(g_out.data.data(), B, C, state.gamma.data(), g_star.data.data());

  std::vector<double> inv_sigma(C);
  Matrix g_in(B, C);
  switch (cache.mode) {
    case Mode::Source:
    case Mode::Ema: {
      // Statistics are constants: g_in = g_star / sigma.
      for (std::size_t c = 0; c < C; ++c) inv_sigma[c] = 1.0 / cache.used.sigma[c];
      k.mul_columns(g_star.data.data(), B, C, inv_sigma.data(), g_in.data.data());
      break;
    }
    case Mode::Batch:
    case Mode::Renorm: {
      // Rectification constants scale the incoming gradient, then the full
      // Jacobian of the current-batch standardization applies.
      Matrix g_core = g_star;
      if (cache.mode == Mode::Renorm) {
        g_core = Matrix(B, C);
        k.mul_columns(g_star.data.data(), B, C, cache.r.data(), g_core.data.data());
      }
      const double inv_b = 1.0 / static_cast<double>(B);
      std::vector<double> mean_g(C), mean_gv(C);
      k.colwise_sum(g_core.data.data(), B, C, mean_g.data());
      k.colwise_dot(g_core.data.data(), cache.vhat.data.data(), B, C, mean_gv.data());
      for (std::size_t c = 0; c < C; ++c) {
        mean_g[c] *= inv_b;
        mean_gv[c] *= inv_b;
        inv_sigma[c] = 1.0 / cache.batch.sigma[c];
      }
      k.standardize_input_grad(g_core.data.data(), cache.vhat.data.data(), B, C, inv_sigma.data(),
                               mean_g.data(), mean_gv.data(), g_in.data.data());
      break;
    }
  }
  return g_in;
}

}  // namespace delta::norm
