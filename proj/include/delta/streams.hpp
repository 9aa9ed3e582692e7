#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delta/dataset.hpp"
#include "delta/rng.hpp"

namespace delta::streams {

// Test-stream scenario: arrival order x class frequency.
//   order  "is" — independent shuffle;  "ds" — dependent, classes arrive in
//          piecewise concentrations drawn from a Dirichlet distribution.
//   freq   "cb" — class-balanced;       "ci" — class-imbalanced, class k
//          resampled to round(n_max * pi^(k / (K-1))) examples.
struct Scenario {
  bool dependent = false;
  bool imbalanced = false;
  double rho = 0.5;          // Dirichlet concentration (lower = more correlated)
  double pi = 0.1;           // imbalance factor in (0, 1]
  std::size_t pieces = 10;   // Dirichlet allocation slots

  std::string name() const;
};

// Parses "is+cb", "ds+cb", "is+ci", "ds+ci".
Scenario scenario_from_name(const std::string& name);

struct Order {
  std::vector<std::size_t> indices;        // positions into the dataset
  std::vector<std::size_t> piece_offsets;  // start of each piece (ds orders)
};

// Uniform shuffle of [0, n).
Order order_independent(std::size_t n, Rng& rng);

// For each class, a Dirichlet(rho) draw splits its examples across `pieces`
// slots (largest-remainder rounding); slots are concatenated in fixed order
// and shuffled within themselves, so low rho concentrates each class into a
// few contiguous stretches.
Order order_dependent(const std::vector<int>& labels, std::size_t classes, std::size_t pieces,
                      double rho, Rng& rng);

// Exponentially decaying class sizes, sampled without replacement; class 0
// stays the most frequent. Throws InputError if a class lacks examples.
Dataset resample_imbalanced(const Dataset& data, double pi, Rng& rng);

struct Stream {
  Dataset data;              // post-resampling dataset the order indexes into
  Order order;
  std::string scenario;

  std::size_t size() const { return order.indices.size(); }
  int label_at(std::size_t pos) const { return data.y[order.indices[pos]]; }
};

// Builds the full scenario pipeline: resample (ci), then order (is/ds).
Stream make_scenario(const Dataset& test, const Scenario& sc, std::uint64_t seed);

// Canonical stream seed for a (scenario, run seed) pair: every entry point
// uses it, so methods compared under the same run seed see identical streams.
std::uint64_t stream_seed(const Scenario& sc, std::uint64_t run_seed);

// One CSV record per stream position: position,sample_index,label.
void write_manifest(const Stream& stream, const std::string& path);

// Feature rows for stream positions [start, start + count).
Matrix gather_batch(const Stream& stream, std::size_t start, std::size_t count);

}  // namespace delta::streams
