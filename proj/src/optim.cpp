#include "delta/optim.hpp"

#include <cmath>

namespace delta::optim {

Rule rule_from_name(const std::string& name) {
  if (name == "sgd") return Rule::Sgd;
  if (name == "adam") return Rule::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd|adam)");
}

std::string rule_name(Rule r) { return r == Rule::Sgd ? "sgd" : "adam"; }

State make(const Config& cfg, std::size_t dim) {
  check_config(cfg.lr > 0.0, "learning rate must be positive");
  check_config(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0, "beta1 must lie in [0, 1)");
  check_config(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0, "beta2 must lie in [0, 1)");
  check_config(cfg.eps > 0.0, "optimizer epsilon must be positive");
  State st;
  st.cfg = cfg;
  if (cfg.rule == Rule::Adam) {
    st.m.assign(dim, 0.0);
    st.v.assign(dim, 0.0);
  }
  return st;
}

void step(State& st, std::vector<double>& params, const std::vector<double>& grads) {
  check_input(params.size() == grads.size(), "parameter/gradient size mismatch");
  if (st.cfg.rule == Rule::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= st.cfg.lr * grads[i];
    ++st.t;
    return;
  }
  check_state(st.m.size() == params.size(), "optimizer state dimension mismatch");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.cfg.beta1 * st.m[i] + (1.0 - st.cfg.beta1) * g;
    st.v[i] = st.cfg.beta2 * st.v[i] + (1.0 - st.cfg.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
  }
}

}  // namespace delta::optim
