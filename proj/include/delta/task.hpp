#pragma once

#include <cstdint>
#include <string>

#include "delta/dataset.hpp"

namespace delta::task {

// Gaussian-mixture classification task with a distribution-shifted test set.
// Class means sit on a random sphere of the given radius; samples add
// unit-variance isotropic noise. Shift grammar:
//   "none"       — test set drawn from the training distribution
//   "noise:s"    — adds N(0, s^2 I) to every test sample
//   "scale:s"    — multiplies every test feature by s
//   "affine:s"   — applies (1-s) * I + s * Q, Q a random orthogonal map
struct TaskSpec {
  std::size_t classes = 10;
  std::size_t dim = 16;
  std::size_t n_train = 5000;
  std::size_t n_test = 2000;
  double separation = 3.0;
  std::string shift = "noise:2.0";
  std::uint64_t seed = 7;
};

struct Task {
  Dataset train;
  Dataset test;
};

Task make_synthetic_task(const TaskSpec& spec);

}  // namespace delta::task
