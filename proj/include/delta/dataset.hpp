#pragma once

#include <vector>

#include "delta/matrix.hpp"

namespace delta {

// Labeled feature set. Labels are class indices in [0, classes).
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::size_t classes = 0;

  std::size_t size() const { return x.rows; }
};

inline void check_dataset(const Dataset& d, const std::string& what) {
  check_input(d.x.rows == d.y.size(), what + ": feature/label count mismatch");
  check_input(d.classes >= 1, what + ": needs at least one class");
  for (int label : d.y)
    check_input(label >= 0 && static_cast<std::size_t>(label) < d.classes,
                what + ": label out of range");
}

}  // namespace delta
