#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delta/common.hpp"

namespace delta::optim {

enum class Rule { Sgd, Adam };

Rule rule_from_name(const std::string& name);
std::string rule_name(Rule r);

struct Config {
  Rule rule = Rule::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment state over one flat parameter vector.
struct State {
  Config cfg;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

State make(const Config& cfg, std::size_t dim);

// One in-place update of `params` from `grads`. Adam uses bias-corrected
// moment estimates; step counting advances only when this is called, so
// skipped updates leave the state untouched.
void step(State& st, std::vector<double>& params, const std::vector<double>& grads);

}  // namespace delta::optim
