#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "delta/common.hpp"
#include "delta/harness.hpp"
#include "delta/network.hpp"
#include "delta/rng.hpp"
#include "delta/task.hpp"

using delta::Matrix;
namespace harness = delta::harness;
namespace net = delta::net;
namespace norm = delta::norm;
namespace adapt = delta::adapt;
namespace streams = delta::streams;

namespace {

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Fixture {
  delta::task::Task task;
  net::ModelState model;

  Fixture() {
    delta::task::TaskSpec tspec;
    tspec.classes = 4;
    tspec.dim = 6;
    tspec.n_train = 600;
    tspec.n_test = 400;
    tspec.separation = 3.0;
    tspec.shift = "noise:1.0";
    tspec.seed = 51;
    task = delta::task::make_synthetic_task(tspec);

    net::ModelSpec spec;
    spec.input_dim = 6;
    spec.hidden = {12, 12};
    spec.classes = 4;
    net::TrainConfig tc;
    tc.epochs = 8;
    tc.batch_size = 32;
    tc.seed = 9;
    model = net::train_source(spec, task.train, tc);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

streams::Stream make_stream(const Fixture& f, const std::string& scenario_name,
                            std::uint64_t seed) {
  const auto sc = streams::scenario_from_name(scenario_name);
  return streams::make_scenario(f.task.test, sc, streams::stream_seed(sc, seed));
}

harness::RunConfig method_config(const std::string& method, std::size_t batch) {
  harness::RunConfig cfg;
  cfg.method = adapt::method_from_name(method);
  cfg.batch_size = batch;
  return cfg;
}

}  // namespace

TEST_CASE("metrics reproduce the frozen all-one-class example") {
  // 100 predictions, all class 0, labels balanced over 4 classes.
  std::vector<int> preds(100, 0);
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[static_cast<std::size_t>(i)] = i % 4;

  const auto m = harness::compute_metrics(preds, labels, 4);
  CHECK(m.pred_counts == std::vector<std::uint64_t>{100, 0, 0, 0});
  // Counts (100,0,0,0): mean 25, population variance (75^2 + 3*25^2)/4 = 1875,
  // std = 25 * sqrt(3).
  CHECK(m.pred_std == doctest::Approx(25.0 * std::sqrt(3.0)).epsilon(1e-9));
  CHECK(m.pred_std == doctest::Approx(43.30127018922193).epsilon(1e-9));
  CHECK(m.pred_range == 100.0);
  // Class 0 recall 1, others 0 -> mean class accuracy 0.25.
  CHECK(m.mean_class_acc == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.overall_acc == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("mean-class accuracy averages only over classes present") {
  // Labels cover classes 0 and 1 of 3; class 2 absent.
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> preds = {0, 1, 1, 1};  // class 0 recall 1/2, class 1 recall 1
  const auto m = harness::compute_metrics(preds, labels, 3);
  CHECK(m.mean_class_acc == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.overall_acc == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.pred_counts == std::vector<std::uint64_t>{1, 3, 0});

  CHECK_THROWS_AS(harness::compute_metrics({0, 5}, {0, 1}, 3), delta::InputError);
  CHECK_THROWS_AS(harness::compute_metrics({0}, {0, 1}, 3), delta::InputError);
}

TEST_CASE("episodes replay bit-identically and leave the source model untouched") {
  const auto& f = fixture();
  const auto source_before = net::flatten_full(f.model);
  const auto stream = make_stream(f, "ds+cb", 3);
  const auto cfg = method_config("tent+delta", 32);

  const auto a = harness::run_episode(f.model, stream, cfg);
  const auto b = harness::run_episode(f.model, stream, cfg);

  CHECK(a.predictions == b.predictions);
  CHECK(bitwise_equal(a.probs.data, b.probs.data));
  CHECK(a.metrics.mean_class_acc == b.metrics.mean_class_acc);
  CHECK(a.updates == b.updates);
  CHECK(bitwise_equal(source_before, net::flatten_full(f.model)));
}

TEST_CASE("every arriving sample is predicted exactly once") {
  const auto& f = fixture();
  // 400-sample balanced test set; batch 64 leaves a partial tail of 16.
  const auto stream = make_stream(f, "is+cb", 5);
  REQUIRE(stream.size() == 400);
  const auto res = harness::run_episode(f.model, stream, method_config("tent", 64));
  CHECK(res.predictions.size() == 400);
  CHECK(res.probs.rows == 400);
  // Full batches update; the tail is predicted only: floor(400/64) = 6.
  CHECK(res.updates == 6);
}

TEST_CASE("an update window equal to the batch size is the standard schedule") {
  const auto& f = fixture();
  const auto stream = make_stream(f, "ds+cb", 7);

  auto standard = method_config("tent+delta", 32);
  auto windowed = standard;
  windowed.update_window = 32;

  const auto a = harness::run_episode(f.model, stream, standard);
  const auto b = harness::run_episode(f.model, stream, windowed);
  CHECK(a.predictions == b.predictions);
  CHECK(bitwise_equal(a.probs.data, b.probs.data));
  CHECK(a.updates == b.updates);
}

TEST_CASE("delayed updates fire once per filled window") {
  const auto& f = fixture();
  const auto stream = make_stream(f, "is+cb", 9);
  REQUIRE(stream.size() == 400);

  // B = 1, L = 64: an update after every 64th sample -> floor(400/64) = 6.
  auto cfg = method_config("tent+delta", 1);
  cfg.update_window = 64;
  cfg.stats_init = norm::EmaInit::FromSource;  // single-sample batches need seeded stats
  const auto res = harness::run_episode(f.model, stream, cfg);
  CHECK(res.predictions.size() == 400);
  CHECK(res.updates == 6);

  // B = 32, L = 64: update every second batch -> floor(400/64) = 6 again.
  auto cfg2 = method_config("tent+delta", 32);
  cfg2.update_window = 64;
  const auto res2 = harness::run_episode(f.model, stream, cfg2);
  CHECK(res2.updates == 6);

  // Window not a multiple of the batch: rejected.
  auto bad = method_config("tent+delta", 32);
  bad.update_window = 48;
  CHECK_THROWS_AS(harness::run_episode(f.model, stream, bad), delta::ConfigError);
  bad.update_window = 16;  // smaller than the batch
  CHECK_THROWS_AS(harness::run_episode(f.model, stream, bad), delta::ConfigError);
}

TEST_CASE("episode isolation: runs do not contaminate one another") {
  const auto& f = fixture();
  const auto stream = make_stream(f, "ds+cb", 11);
  const auto cfg = method_config("tent+delta", 32);

  const auto fresh = harness::run_episode(f.model, stream, cfg);
  // Interleave an unrelated episode, then repeat.
  harness::run_episode(f.model, make_stream(f, "is+ci", 4), method_config("tent", 16));
  const auto repeat = harness::run_episode(f.model, stream, cfg);
  CHECK(fresh.predictions == repeat.predictions);
  CHECK(bitwise_equal(fresh.probs.data, repeat.probs.data));
}

TEST_CASE("statistics trace: rectified estimates track the stream better than raw batches") {
  // The running estimate needs a stream long enough to wash out its seed
  // (retention 0.95), so this test draws a larger test set from the same
  // task. The training half of the draw is unchanged, so the fixture model
  // is the right source model for it.
  const auto& f = fixture();
  delta::task::TaskSpec tspec;
  tspec.classes = 4;
  tspec.dim = 6;
  tspec.n_train = 600;
  tspec.n_test = 1600;
  tspec.separation = 3.0;
  tspec.shift = "noise:1.0";
  tspec.seed = 51;
  const auto longer = delta::task::make_synthetic_task(tspec);

  auto sc = streams::scenario_from_name("ds+cb");
  sc.rho = 0.1;  // strongly correlated: per-batch statistics are badly skewed
  const auto stream = streams::make_scenario(longer.test, sc, streams::stream_seed(sc, 13));

  auto batch_cfg = method_config("bn-adapt", 32);
  batch_cfg.stats_trace = true;
  const auto batch_run = harness::run_episode(f.model, stream, batch_cfg);

  auto renorm_cfg = method_config("tent+tbr", 32);
  renorm_cfg.stats_trace = true;
  const auto renorm_run = harness::run_episode(f.model, stream, renorm_cfg);

  REQUIRE(batch_run.stats_err.size() == (stream.size() + 31) / 32);
  REQUIRE(renorm_run.stats_err.size() == batch_run.stats_err.size());
  for (double e : batch_run.stats_err) REQUIRE(std::isfinite(e));
  CHECK(renorm_run.mean_stats_err < batch_run.mean_stats_err);
}

TEST_CASE("comparison grid is deterministic, ordered, and shares streams per cell") {
  const auto& f = fixture();
  harness::CompareSpec spec;
  spec.methods = {"source", "tent", "tent+delta"};
  spec.scenarios = {streams::scenario_from_name("is+cb"),
                    streams::scenario_from_name("ds+cb")};
  spec.seeds = {0, 1};
  spec.base = method_config("source", 32);
  spec.threads = 1;

  const auto once = harness::compare(f.model, f.task.test, spec);
  REQUIRE(once.failures.empty());
  REQUIRE(once.rows.size() == 12);

  // Deterministic methods-major order.
  std::size_t idx = 0;
  for (const auto& method : spec.methods)
    for (const auto& sc : spec.scenarios)
      for (const auto seed : spec.seeds) {
        CHECK(once.rows[idx].method == method);
        CHECK(once.rows[idx].scenario == sc.name());
        CHECK(once.rows[idx].seed == seed);
        ++idx;
      }

  // Same outcome when run threaded (durations aside).
  auto threaded = spec;
  threaded.threads = 3;
  const auto twice = harness::compare(f.model, f.task.test, threaded);
  REQUIRE(twice.rows.size() == once.rows.size());
  for (std::size_t i = 0; i < once.rows.size(); ++i) {
    CHECK(once.rows[i].method == twice.rows[i].method);
    CHECK(once.rows[i].acc_mean_class == twice.rows[i].acc_mean_class);
    CHECK(once.rows[i].acc_overall == twice.rows[i].acc_overall);
    CHECK(once.rows[i].pred_std == twice.rows[i].pred_std);
  }

  // rho/pi answer only for the scenario axes that use them. With seeds
  // innermost, rows 0-1 are is+cb and rows 2-3 are ds+cb.
  CHECK_FALSE(once.rows[0].rho.has_value());
  CHECK(once.rows[2].rho.has_value());
  CHECK_FALSE(once.rows[2].pi.has_value());
}

TEST_CASE("comparison records failing cells without aborting the rest") {
  const auto& f = fixture();
  harness::CompareSpec spec;
  spec.methods = {"tent", "no-such-method"};
  spec.scenarios = {streams::scenario_from_name("is+cb")};
  spec.seeds = {0};
  spec.base = method_config("source", 32);
  spec.threads = 1;

  const auto outcome = harness::compare(f.model, f.task.test, spec);
  REQUIRE(outcome.rows.size() == 1);
  CHECK(outcome.rows[0].method == "tent");
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].find("no-such-method") != std::string::npos);
}

TEST_CASE("degenerate single-sample batches with batch statistics stay finite") {
  // B = 1 under current-batch normalization standardizes every feature to
  // zero (sigma = sqrt(eps)), which collapses predictions but must not crash.
  const auto& f = fixture();
  const auto stream = make_stream(f, "is+cb", 2);
  auto cfg = method_config("bn-adapt", 1);
  const auto res = harness::run_episode(f.model, stream, cfg);
  CHECK(res.predictions.size() == stream.size());
  for (double p : res.probs.data) CHECK(std::isfinite(p));
}
