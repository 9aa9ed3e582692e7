#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delta/losses.hpp"
#include "delta/network.hpp"

namespace delta::adapt {

// How per-sample update weights are derived from the running class-frequency
// estimate: Hard uses the argmax pseudo-label's frequency, Soft averages the
// inverse frequencies under the full predicted distribution.
enum class Weighting { Hard, Soft };

// Optional add-on acting on one side of the step: LogitAdjust corrects the
// logged predictions by the running class-frequency estimate; SampleDrop
// removes samples of over-used pseudo-categories from the update.
enum class Strategy { None, LogitAdjust, SampleDrop };

struct MethodSpec {
  std::string name = "source";  // preset string, echoed into reports
  norm::Mode mode = norm::Mode::Source;
  loss::Kind loss = loss::Kind::None;
  loss::Config loss_cfg;
  bool reweight = false;  // inverse-frequency sample weighting
  Weighting weighting = Weighting::Hard;
  Strategy strategy = Strategy::None;
  double lambda = 0.9;      // class-frequency retention factor
  double weight_eps = 1e-6; // weight-denominator guard
  double la_tau = 1.0;      // logit-adjustment temperature
  // Gradient updates through Ema-mode normalization destroy the model (the
  // running statistics never renormalize parameter growth); they are refused
  // unless this is set, which only the dedicated negative test does.
  bool allow_ema_gradients = false;

  bool tracks_frequencies() const { return reweight || strategy != Strategy::None; }
  bool has_objective() const { return loss != loss::Kind::None; }
};

// Preset grammar: a base name, optionally "+la" or "+sample-drop", optionally
// ":soft". Base names: source, bn-adapt, tema, pl, tent, tent+tbr, tent+dot,
// tent+delta, ent-w, ent-w+delta.
MethodSpec method_from_name(const std::string& name);
std::vector<std::string> preset_names();

// Running estimate of the class frequencies of the test stream, updated from
// raw predicted distributions: z' = lambda * z + (1 - lambda) * mean(probs).
struct FreqTracker {
  std::vector<double> z;
  static FreqTracker uniform(std::size_t classes);
};

std::vector<double> update_frequencies(const std::vector<double>& z, const Matrix& probs,
                                       double lambda);

// Raw per-sample weights from inverse estimated frequencies.
std::vector<double> sample_weights(const Matrix& probs, const std::vector<double>& z,
                                   Weighting weighting, double weight_eps);

// Rescale weights to mean exactly 1 over the batch. A constant input maps to
// exactly 1.0 everywhere, so uniform frequencies reproduce the unweighted
// update bit-for-bit.
std::vector<double> normalize_weights(const std::vector<double>& w);

// Prediction correction: softmax(logits - tau * ln z). Requires z > 0.
Matrix logit_adjusted_probs(const Matrix& logits, const std::vector<double>& z, double tau);

// Per-class counts of samples the update has consumed so far.
struct DropState {
  std::vector<std::uint64_t> counts;
};

// Keep a sample iff its pseudo-category's count is not above the mean count.
std::vector<char> sample_drop_mask(const DropState& drop, const std::vector<int>& pseudo);

// Everything one adaptation step mutates, bundled to keep a single writer.
struct EpisodeState {
  net::ModelState model;
  FreqTracker freq;
  DropState drop;
  optim::State opt;
};

EpisodeState make_episode_state(const net::ModelState& source, const MethodSpec& method,
                                const optim::Config& opt_cfg, norm::EmaInit stats_init);

struct StepResult {
  Matrix predictions;             // per-sample probabilities (logit-adjusted when active)
  std::vector<int> pseudo_labels; // argmax of predictions
  double loss = 0.0;              // scalar weighted objective (0 when none)
  bool updated = false;           // whether an optimizer step happened
};

// One fully test-time step: predict the batch with the current model, then
// update normalization statistics, affine parameters, and the frequency
// estimate as the method prescribes. Never reads labels; never touches dense
// parameters.
StepResult adapt_step(EpisodeState& ep, const Matrix& batch, const MethodSpec& method);

// Prediction-only forward for delayed-update schedules: values follow the
// method's normalization in effect (Ema-valued for Renorm), but no state
// advances except one-time first-batch statistics seeding.
StepResult predict_only(EpisodeState& ep, const Matrix& batch, const MethodSpec& method);

}  // namespace delta::adapt
