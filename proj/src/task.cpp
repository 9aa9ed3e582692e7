#include "delta/task.hpp"

#include <cmath>

#include "delta/rng.hpp"

namespace delta::task {

namespace {

struct Shift {
  enum class Kind { None, Noise, Scale, Affine } kind = Kind::None;
  double amount = 0.0;
};

Shift parse_shift(const std::string& text) {
  if (text == "none" || text.empty()) return {};
  const auto colon = text.find(':');
  check_config(colon != std::string::npos && colon + 1 < text.size(),
               "shift must be none|noise:s|scale:s|affine:s, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  double amount = 0.0;
  try {
    amount = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("cannot parse shift amount in '" + text + "'");
  }
  if (kind == "noise") {
    check_config(amount >= 0.0, "noise shift amount must be non-negative");
    return {Shift::Kind::Noise, amount};
  }
  if (kind == "scale") return {Shift::Kind::Scale, amount};
  if (kind == "affine") {
    check_config(amount >= 0.0 && amount <= 1.0, "affine blend must lie in [0, 1]");
    return {Shift::Kind::Affine, amount};
  }
  throw ConfigError("unknown shift kind '" + kind + "'");
}

// Random orthogonal map: modified Gram-Schmidt on a Gaussian matrix.
Matrix random_orthogonal(std::size_t d, Rng& rng) {
  Matrix q(d, d);
  for (auto& v : q.data) v = rng.normal();
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t r = 0; r < d; ++r) dot += q(r, c) * q(r, prev);
      for (std::size_t r = 0; r < d; ++r) q(r, c) -= dot * q(r, prev);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < d; ++r) norm += q(r, c) * q(r, c);
    norm = std::sqrt(norm);
    check_contract(norm > 1e-12, "degenerate Gram-Schmidt column");
    for (std::size_t r = 0; r < d; ++r) q(r, c) /= norm;
  }
  return q;
}

// Balanced labels: floor(n/K) per class plus one extra for the first n % K.
std::vector<int> balanced_labels(std::size_t n, std::size_t classes) {
  std::vector<int> y;
  y.reserve(n);
  const std::size_t base = n / classes, extra = n % classes;
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t count = base + (k < extra ? 1 : 0);
    y.insert(y.end(), count, static_cast<int>(k));
  }
  return y;
}

Dataset sample_mixture(const Matrix& means, std::size_t n, std::size_t classes, Rng& rng) {
  Dataset d;
  d.classes = classes;
  d.y = balanced_labels(n, classes);
  d.x = Matrix(d.y.size(), means.cols);
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const double* mu = means.row(static_cast<std::size_t>(d.y[i]));
    double* row = d.x.row(i);
    for (std::size_t c = 0; c < means.cols; ++c) row[c] = mu[c] + rng.normal();
  }
  return d;
}

}  // namespace

Task make_synthetic_task(const TaskSpec& spec) {
  check_config(spec.classes >= 2, "need at least two classes");
  check_config(spec.dim >= 1, "need at least one feature");
  check_config(spec.n_train >= spec.classes && spec.n_test >= spec.classes,
               "need at least one example per class");
  check_config(spec.separation > 0.0, "class separation must be positive");
  const Shift shift = parse_shift(spec.shift);

  Rng rng(derive_seed(spec.seed, 0x7a5c));

  // Class means on a sphere of radius `separation`.
  Matrix means(spec.classes, spec.dim);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    double norm = 0.0;
    double* row = means.row(k);
    for (std::size_t c = 0; c < spec.dim; ++c) {
      row[c] = rng.normal();
      norm += row[c] * row[c];
    }
    norm = std::sqrt(norm);
    check_contract(norm > 1e-12, "degenerate class mean draw");
    for (std::size_t c = 0; c < spec.dim; ++c) row[c] *= spec.separation / norm;
  }

  Task task;
  task.train = sample_mixture(means, spec.n_train, spec.classes, rng);
  task.test = sample_mixture(means, spec.n_test, spec.classes, rng);

  switch (shift.kind) {
    case Shift::Kind::None:
      break;
    case Shift::Kind::Noise:
      for (auto& v : task.test.x.data) v += shift.amount * rng.normal();
      break;
    case Shift::Kind::Scale:
      for (auto& v : task.test.x.data) v *= shift.amount;
      break;
    case Shift::Kind::Affine: {
      const Matrix q = random_orthogonal(spec.dim, rng);
      // M = (1-s) I + s Q; rows transform as x <- x M^T.
      Matrix m(spec.dim, spec.dim);
      for (std::size_t r = 0; r < spec.dim; ++r)
        for (std::size_t c = 0; c < spec.dim; ++c)
          m(r, c) = shift.amount * q(r, c) + (r == c ? 1.0 - shift.amount : 0.0);
      Matrix shifted(task.test.x.rows, spec.dim);
      for (std::size_t i = 0; i < task.test.x.rows; ++i) {
        const double* src = task.test.x.row(i);
        double* dst = shifted.row(i);
        for (std::size_t r = 0; r < spec.dim; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < spec.dim; ++c) acc += m(r, c) * src[c];
          dst[r] = acc;
        }
      }
      task.test.x = std::move(shifted);
      break;
    }
  }
  return task;
}

}  // namespace delta::task
