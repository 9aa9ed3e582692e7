#include "delta/streams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace delta::streams {

std::string Scenario::name() const {
  return std::string(dependent ? "ds" : "is") + "+" + (imbalanced ? "ci" : "cb");
}

Scenario scenario_from_name(const std::string& name) {
  Scenario sc;
  if (name == "is+cb") {
    sc.dependent = false;
    sc.imbalanced = false;
  } else if (name == "ds+cb") {
    sc.dependent = true;
    sc.imbalanced = false;
  } else if (name == "is+ci") {
    sc.dependent = false;
    sc.imbalanced = true;
  } else if (name == "ds+ci") {
    sc.dependent = true;
    sc.imbalanced = true;
  } else {
    throw ConfigError("unknown scenario '" + name + "' (expected is+cb|ds+cb|is+ci|ds+ci)");
  }
  return sc;
}

Order order_independent(std::size_t n, Rng& rng) {
  Order order;
  order.indices.resize(n);
  std::iota(order.indices.begin(), order.indices.end(), std::size_t{0});
  rng.shuffle(order.indices);
  order.piece_offsets = {0};
  return order;
}

Order order_dependent(const std::vector<int>& labels, std::size_t classes, std::size_t pieces,
                      double rho, Rng& rng) {
  check_config(pieces >= 1, "need at least one piece");
  check_config(rho > 0.0, "Dirichlet concentration must be positive");
  check_config(classes >= 1, "need at least one class");

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_input(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes,
                "label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  std::vector<std::vector<std::size_t>> piece(pieces);
  for (std::size_t k = 0; k < classes; ++k) {
    auto& members = by_class[k];
    if (members.empty()) continue;
    rng.shuffle(members);
    const auto q = rng.dirichlet(pieces, rho);

    // Largest-remainder rounding of q * n_k into integer slot counts.
    const double n_k = static_cast<double>(members.size());
    std::vector<std::size_t> count(pieces);
    std::vector<std::pair<double, std::size_t>> frac(pieces);
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < pieces; ++j) {
      const double target = q[j] * n_k;
      count[j] = static_cast<std::size_t>(std::floor(target));
      assigned += count[j];
      frac[j] = {target - std::floor(target), j};
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t r = 0; r < members.size() - assigned; ++r) ++count[frac[r].second];

    std::size_t next = 0;
    for (std::size_t j = 0; j < pieces; ++j)
      for (std::size_t c = 0; c < count[j]; ++c) piece[j].push_back(members[next++]);
  }

  Order order;
  order.indices.reserve(labels.size());
  for (std::size_t j = 0; j < pieces; ++j) {
    order.piece_offsets.push_back(order.indices.size());
    rng.shuffle(piece[j]);
    order.indices.insert(order.indices.end(), piece[j].begin(), piece[j].end());
  }
  return order;
}

Dataset resample_imbalanced(const Dataset& data, double pi, Rng& rng) {
  check_dataset(data, "resampling input");
  check_config(pi > 0.0 && pi <= 1.0, "imbalance factor must lie in (0, 1]");
  check_input(data.classes >= 2, "imbalanced resampling needs at least two classes");
  const std::size_t K = data.classes;

  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < data.y.size(); ++i)
    by_class[static_cast<std::size_t>(data.y[i])].push_back(i);

  std::size_t n_max = 0;
  for (const auto& members : by_class) n_max = std::max(n_max, members.size());

  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < K; ++k) {
    const double share = std::pow(pi, static_cast<double>(k) / static_cast<double>(K - 1));
    const auto want = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_max) * share));
    if (want > by_class[k].size())
      throw InputError("class " + std::to_string(k) + " has " +
                       std::to_string(by_class[k].size()) + " examples, needs " +
                       std::to_string(want) + " for the requested imbalance");
    rng.shuffle(by_class[k]);
    chosen.insert(chosen.end(), by_class[k].begin(), by_class[k].begin() + want);
  }

  Dataset out;
  out.classes = K;
  out.x = Matrix(chosen.size(), data.x.cols);
  out.y.resize(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    std::copy_n(data.x.row(chosen[i]), data.x.cols, out.x.row(i));
    out.y[i] = data.y[chosen[i]];
  }
  return out;
}

std::uint64_t stream_seed(const Scenario& sc, std::uint64_t run_seed) {
  const std::uint64_t idx = (sc.dependent ? 1u : 0u) + (sc.imbalanced ? 2u : 0u);
  return derive_seed(run_seed, 0x100 + idx);
}

Stream make_scenario(const Dataset& test, const Scenario& sc, std::uint64_t seed) {
  check_dataset(test, "test set");
  Stream stream;
  stream.scenario = sc.name();
  Rng rng(derive_seed(seed, 0x5c));
  stream.data = sc.imbalanced ? resample_imbalanced(test, sc.pi, rng) : test;
  stream.order = sc.dependent
                     ? order_dependent(stream.data.y, stream.data.classes, sc.pieces, sc.rho, rng)
                     : order_independent(stream.data.size(), rng);
  return stream;
}

void write_manifest(const Stream& stream, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "position,sample_index,label\n";
  for (std::size_t pos = 0; pos < stream.size(); ++pos)
    out << pos << ',' << stream.order.indices[pos] << ',' << stream.label_at(pos) << '\n';
  if (!out) throw IoError("failed writing stream manifest to '" + path + "'");
}

Matrix gather_batch(const Stream& stream, std::size_t start, std::size_t count) {
  check_input(start + count <= stream.size(), "batch range exceeds stream");
  Matrix batch(count, stream.data.x.cols);
  for (std::size_t i = 0; i < count; ++i)
    std::copy_n(stream.data.x.row(stream.order.indices[start + i]), stream.data.x.cols,
                batch.row(i));
  return batch;
}

}  // namespace delta::streams
