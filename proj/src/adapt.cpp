#include "delta/adapt.hpp"

#include <algorithm>
#include <cmath>

#include "delta/kernels.hpp"

namespace delta::adapt {

namespace {

const std::vector<std::pair<std::string, MethodSpec>>& preset_table() {
  static const auto table = [] {
    auto make = [](const char* name, norm::Mode mode, loss::Kind loss, bool reweight) {
      MethodSpec m;
      m.name = name;
      m.mode = mode;
      m.loss = loss;
      m.reweight = reweight;
      return m;
    };
    using M = norm::Mode;
    using L = loss::Kind;
    return std::vector<std::pair<std::string, MethodSpec>>{
        {"source", make("source", M::Source, L::None, false)},
        {"bn-adapt", make("bn-adapt", M::Batch, L::None, false)},
        {"tema", make("tema", M::Ema, L::None, false)},
        {"pl", make("pl", M::Batch, L::PseudoLabel, false)},
        {"tent", make("tent", M::Batch, L::Entropy, false)},
        {"tent+tbr", make("tent+tbr", M::Renorm, L::Entropy, false)},
        {"tent+dot", make("tent+dot", M::Batch, L::Entropy, true)},
        {"tent+delta", make("tent+delta", M::Renorm, L::Entropy, true)},
        {"ent-w", make("ent-w", M::Batch, L::GatedEntropy, false)},
        {"ent-w+delta", make("ent-w+delta", M::Renorm, L::GatedEntropy, true)},
        {"ent-w+tbr", make("ent-w+tbr", M::Renorm, L::GatedEntropy, false)},
    };
  }();
  return table;
}

bool strip_suffix(std::string& s, const std::string& suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    s.erase(s.size() - suffix.size());
    return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, spec] : preset_table()) names.push_back(name);
  return names;
}

MethodSpec method_from_name(const std::string& full) {
  std::string rest = full;
  const bool soft = strip_suffix(rest, ":soft");
  Strategy strategy = Strategy::None;
  if (strip_suffix(rest, "+la"))
    strategy = Strategy::LogitAdjust;
  else if (strip_suffix(rest, "+sample-drop"))
    strategy = Strategy::SampleDrop;

  for (const auto& [name, spec] : preset_table()) {
    if (name == rest) {
      MethodSpec m = spec;
      m.name = full;
      m.strategy = strategy;
      if (soft) {
        check_config(m.reweight, "':soft' applies only to frequency-reweighted methods");
        m.weighting = Weighting::Soft;
      }
      return m;
    }
  }
  std::string known;
  for (const auto& [name, spec] : preset_table()) known += name + " ";
  throw ConfigError("unknown method '" + full + "' (base presets: " + known +
                    "; modifiers: +la, +sample-drop, :soft)");
}

FreqTracker FreqTracker::uniform(std::size_t classes) {
  check_config(classes >= 1, "frequency tracker needs at least one class");
  FreqTracker t;
  t.z.assign(classes, 1.0 / static_cast<double>(classes));
  return t;
}

std::vector<double> update_frequencies(const std::vector<double>& z, const Matrix& probs,
                                       double lambda) {
  check_input(probs.cols == z.size(), "probability width does not match tracker");
  check_input(probs.rows >= 1, "empty batch");
  check_config(lambda >= 0.0 && lambda < 1.0, "lambda must lie in [0, 1)");
  std::vector<double> mean(z.size());
  kernels::active().colwise_sum(probs.data.data(), probs.rows, probs.cols, mean.data());
  const double scale = (1.0 - lambda) / static_cast<double>(probs.rows);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = lambda * z[k] + scale * mean[k];
  return out;
}

std::vector<double> sample_weights(const Matrix& probs, const std::vector<double>& z,
                                   Weighting weighting, double weight_eps) {
  check_input(probs.cols == z.size(), "probability width does not match tracker");
  check_config(weight_eps > 0.0, "weight-denominator guard must be positive");
  std::vector<double> w(probs.rows);
  if (weighting == Weighting::Hard) {
    for (std::size_t b = 0; b < probs.rows; ++b)
      w[b] = 1.0 / (z[loss::argmax_row(probs, b)] + weight_eps);
  } else {
    for (std::size_t b = 0; b < probs.rows; ++b) {
      const double* p = probs.row(b);
      double acc = 0.0;
      for (std::size_t k = 0; k < probs.cols; ++k) acc += p[k] / (z[k] + weight_eps);
      w[b] = acc;
    }
  }
  return w;
}

std::vector<double> normalize_weights(const std::vector<double>& w) {
  check_input(!w.empty(), "cannot normalize an empty weight vector");
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  check_input(*lo > 0.0, "raw sample weights must be positive");
  // A constant vector normalizes to exactly 1 by algebra; taking that path
  // directly keeps uniform-frequency weighting bit-identical to no weighting.
  if (*lo == *hi) return std::vector<double>(w.size(), 1.0);
  double total = 0.0;
  for (double v : w) total += v;
  const double scale = static_cast<double>(w.size()) / total;
  std::vector<double> out(w.size());
  for (std::size_t b = 0; b < w.size(); ++b) out[b] = w[b] * scale;
  return out;
}

Matrix logit_adjusted_probs(const Matrix& logits, const std::vector<double>& z, double tau) {
  check_input(logits.cols == z.size(), "logit width does not match tracker");
  for (double v : z)
    if (!(v > 0.0)) throw NumericError("logit adjustment needs strictly positive frequencies");
  Matrix shifted = logits;
  std::vector<double> corr(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) corr[k] = tau * std::log(z[k]);
  for (std::size_t b = 0; b < shifted.rows; ++b) {
    double* row = shifted.row(b);
    for (std::size_t k = 0; k < z.size(); ++k) row[k] -= corr[k];
  }
  return loss::softmax(shifted);
}

std::vector<char> sample_drop_mask(const DropState& drop, const std::vector<int>& pseudo) {
  const std::size_t k = drop.counts.size();
  check_input(k >= 1, "drop state has no classes");
  double mean = 0.0;
  for (auto c : drop.counts) mean += static_cast<double>(c);
  mean /= static_cast<double>(k);
  std::vector<char> keep(pseudo.size());
  for (std::size_t b = 0; b < pseudo.size(); ++b) {
    check_input(pseudo[b] >= 0 && static_cast<std::size_t>(pseudo[b]) < k,
                "pseudo-label out of range");
    keep[b] = static_cast<double>(drop.counts[static_cast<std::size_t>(pseudo[b])]) <= mean;
  }
  return keep;
}

EpisodeState make_episode_state(const net::ModelState& source, const MethodSpec& method,
                                const optim::Config& opt_cfg, norm::EmaInit stats_init) {
  if (method.has_objective() && method.mode == norm::Mode::Ema && !method.allow_ema_gradients)
    throw ConfigError(
        "gradient updates through Ema-mode normalization are refused: nothing renormalizes "
        "parameter growth (set allow_ema_gradients only in the dedicated negative test)");

  EpisodeState ep;
  ep.model = source;
  for (auto& layer : ep.model.norms) {
    layer.ema_ready = false;
    layer.ema = norm::Stats{};
    layer.init = stats_init;
    if (stats_init == norm::EmaInit::FromSource) norm::init_stats(layer, norm::EmaInit::FromSource);
  }
  ep.freq = FreqTracker::uniform(source.spec.classes);
  ep.drop.counts.assign(source.spec.classes, 0);
  ep.opt = optim::make(opt_cfg, net::affine_dim(source));
  return ep;
}

namespace {

StepResult predict_common(EpisodeState& ep, const Matrix& batch, const MethodSpec& method,
                          net::ForwardTrace* trace, Matrix* raw_probs, norm::Mode mode,
                          bool advance_ema) {
  net::ForwardOptions fopts;
  fopts.mode = mode;
  fopts.advance_ema = advance_ema;
  Matrix logits = net::forward(ep.model, batch, fopts, trace);
  Matrix probs = loss::softmax(logits);

  StepResult res;
  res.predictions = method.strategy == Strategy::LogitAdjust
                        ? logit_adjusted_probs(logits, ep.freq.z, method.la_tau)
                        : probs;
  res.pseudo_labels.resize(batch.rows);
  for (std::size_t b = 0; b < batch.rows; ++b)
    res.pseudo_labels[b] = static_cast<int>(loss::argmax_row(res.predictions, b));
  if (raw_probs) *raw_probs = std::move(probs);
  return res;
}

}  // namespace

StepResult adapt_step(EpisodeState& ep, const Matrix& batch, const MethodSpec& method) {
  if (method.has_objective() && method.mode == norm::Mode::Ema && !method.allow_ema_gradients)
    throw ConfigError("gradient updates through Ema-mode normalization are refused");

  net::ForwardTrace trace;
  Matrix probs;
  StepResult res = predict_common(ep, batch, method, &trace, &probs, method.mode, true);

  if (method.has_objective()) {
    const std::size_t B = batch.rows;
    auto ev = loss::evaluate(method.loss, trace.logits, probs, method.loss_cfg);

    std::vector<double> weights =
        method.reweight
            ? normalize_weights(sample_weights(probs, ep.freq.z, method.weighting, method.weight_eps))
            : std::vector<double>(B, 1.0);

    std::vector<char> keep(B, 1);
    if (method.strategy == Strategy::SampleDrop) keep = sample_drop_mask(ep.drop, res.pseudo_labels);

    bool any = false;
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      if (!keep[b]) weights[b] = 0.0;
      if (keep[b] && ev.used[b]) any = true;
      total += weights[b] * ev.value[b];
    }
    res.loss = total / static_cast<double>(B);
    if (!std::isfinite(res.loss)) throw NumericError("non-finite adaptation objective");

    if (any) {
      auto grads = net::backward_affine(ep.model, trace, ev.logit_grad, weights);
      auto params = net::flatten_affine(ep.model);
      optim::step(ep.opt, params, net::flatten_affine_grads(grads));
      net::scatter_affine(ep.model, params);
      res.updated = true;
    }

    if (method.strategy == Strategy::SampleDrop)
      for (std::size_t b = 0; b < B; ++b)
        if (keep[b] && ev.used[b]) ++ep.drop.counts[static_cast<std::size_t>(res.pseudo_labels[b])];
  }

  // The frequency estimate always advances from raw distributions, including
  // samples that were gated out of or dropped from the update.
  if (method.tracks_frequencies())
    ep.freq.z = update_frequencies(ep.freq.z, probs, method.lambda);
  return res;
}

StepResult predict_only(EpisodeState& ep, const Matrix& batch, const MethodSpec& method) {
  // Value semantics per mode, no statistics advance: Renorm predictions are
  // worth the running statistics, so they are computed directly in Ema mode.
  norm::Mode mode = method.mode == norm::Mode::Renorm ? norm::Mode::Ema : method.mode;
  return predict_common(ep, batch, method, nullptr, nullptr, mode, false);
}

}  // namespace delta::adapt
