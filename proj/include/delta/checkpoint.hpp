#pragma once

#include <string>

#include "delta/network.hpp"

namespace delta::ckpt {

// Versioned, self-describing JSON snapshot of a model: architecture,
// parameters, and both statistic sets. Doubles are written in
// shortest-round-trip form, so save -> load -> save is byte-stable and every
// value survives bit-exactly.
void save(const net::ModelState& state, const std::string& path);
net::ModelState load(const std::string& path);

std::string to_json(const net::ModelState& state);
net::ModelState from_json(const std::string& text);

}  // namespace delta::ckpt
