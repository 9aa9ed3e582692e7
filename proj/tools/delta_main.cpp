// delta — fully test-time adaptation harness on a synthetic benchmark.
//
//   delta train-source  train a source model and write a checkpoint
//   delta run           adapt over one test stream and report metrics
//   delta sweep         methods x scenarios x seeds comparison matrix
//   delta export-stream write a stream manifest for external tooling
//
// Errors leave a machine-readable {"error": ...} record on stderr.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "delta/checkpoint.hpp"
#include "delta/harness.hpp"
#include "delta/kernels.hpp"
#include "delta/report.hpp"
#include "delta/task.hpp"

namespace {

using namespace delta;

struct TaskFlags {
  task::TaskSpec spec;

  void attach(CLI::App* cmd) {
    cmd->add_option("--classes", spec.classes, "number of classes");
    cmd->add_option("--dim", spec.dim, "feature dimension");
    cmd->add_option("--n-train", spec.n_train, "training examples");
    cmd->add_option("--n-test", spec.n_test, "test examples");
    cmd->add_option("--separation", spec.separation, "class-mean sphere radius");
    cmd->add_option("--shift", spec.shift, "test shift: none|noise:s|scale:s|affine:s");
    cmd->add_option("--task-seed", spec.seed, "task generation seed");
  }
};

struct ScenarioFlags {
  std::string name = "is+cb";
  double rho = 0.5;
  double pi = 0.1;
  std::size_t pieces = 10;

  void attach(CLI::App* cmd) {
    cmd->add_option("--scenario", name, "test stream scenario: is+cb|ds+cb|is+ci|ds+ci");
    cmd->add_option("--rho", rho, "Dirichlet concentration for ds orders");
    cmd->add_option("--pi", pi, "imbalance factor for ci resampling");
    cmd->add_option("--pieces", pieces, "Dirichlet allocation slots for ds orders");
  }

  streams::Scenario build() const {
    auto sc = streams::scenario_from_name(name);
    sc.rho = rho;
    sc.pi = pi;
    sc.pieces = pieces;
    return sc;
  }
};

struct EpisodeFlags {
  std::string method = "tent+delta";
  std::size_t batch_size = 64;
  double alpha = 0.95;
  double lambda = 0.9;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string tbr_init = "first";
  std::string schedule;

  void attach(CLI::App* cmd, bool with_method = true) {
    if (with_method) cmd->add_option("--method", method, "adaptation method preset");
    cmd->add_option("--batch-size", batch_size, "stream mini-batch size");
    cmd->add_option("--alpha", alpha, "running-statistics retention factor");
    cmd->add_option("--lambda", lambda, "class-frequency retention factor");
    cmd->add_option("--lr", lr, "adaptation learning rate");
    cmd->add_option("--optimizer", optimizer, "adaptation optimizer: adam|sgd");
    cmd->add_option("--tbr-init", tbr_init, "running-statistics seeding: first|inherit");
    cmd->add_option("--schedule", schedule,
                    "delayed updates: L=<window>, window a multiple of the batch size");
  }

  harness::RunConfig build() const {
    harness::RunConfig cfg;
    cfg.method = adapt::method_from_name(method);
    cfg.method.lambda = lambda;
    cfg.batch_size = batch_size;
    cfg.alpha = alpha;
    cfg.optimizer.rule = optim::rule_from_name(optimizer);
    cfg.optimizer.lr = lr;
    if (tbr_init == "first")
      cfg.stats_init = norm::EmaInit::FromFirstBatch;
    else if (tbr_init == "inherit")
      cfg.stats_init = norm::EmaInit::FromSource;
    else
      throw ConfigError("--tbr-init must be first|inherit");
    if (!schedule.empty()) {
      std::string body = schedule;
      if (body.rfind("L=", 0) == 0) body = body.substr(2);
      try {
        cfg.update_window = std::stoul(body);
      } catch (const std::exception&) {
        throw ConfigError("--schedule must look like L=64");
      }
    }
    return cfg;
  }
};

net::ModelState obtain_model(const std::string& model_path, const task::Task& task,
                             const task::TaskSpec& tspec, const std::vector<std::size_t>& hidden,
                             std::size_t epochs, double train_lr, std::uint64_t train_seed) {
  if (!model_path.empty()) {
    auto model = ckpt::load(model_path);
    check_config(model.spec.input_dim == tspec.dim && model.spec.classes == tspec.classes,
                 "checkpoint shape does not match the task");
    return model;
  }
  net::ModelSpec mspec;
  mspec.input_dim = tspec.dim;
  mspec.classes = tspec.classes;
  if (!hidden.empty()) mspec.hidden = hidden;
  net::TrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.lr = train_lr;
  tcfg.seed = train_seed;
  return net::train_source(mspec, task.train, tcfg);
}

harness::ReportRow make_row(const harness::RunConfig& cfg, const streams::Scenario& sc,
                            std::uint64_t seed, const harness::EpisodeResult& ep) {
  harness::ReportRow row;
  row.method = cfg.method.name;
  row.scenario = sc.name();
  if (sc.dependent) row.rho = sc.rho;
  if (sc.imbalanced) row.pi = sc.pi;
  row.batch_size = cfg.batch_size;
  row.alpha = cfg.alpha;
  row.lambda = cfg.method.lambda;
  row.seed = seed;
  row.acc_mean_class = ep.metrics.mean_class_acc;
  row.acc_overall = ep.metrics.overall_acc;
  row.pred_std = ep.metrics.pred_std;
  row.pred_range = ep.metrics.pred_range;
  row.duration_ms = ep.duration_ms;
  return row;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  check_config(!items.empty(), "empty list '" + text + "'");
  return items;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split_list(text)) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      seeds.push_back(std::stoull(part));
    } else {
      const auto lo = std::stoull(part.substr(0, colon));
      const auto hi = std::stoull(part.substr(colon + 1));
      check_config(hi >= lo, "seed range must be ascending");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  return seeds;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"fully test-time adaptation on a synthetic benchmark"};
  app.require_subcommand(1);
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "kernel variant: scalar|avx2|neon|auto");

  // ---- train-source ----
  auto* train = app.add_subcommand("train-source", "train a source model, write a checkpoint");
  TaskFlags train_task;
  train_task.attach(train);
  std::size_t train_epochs = 40;
  double train_lr = 1e-3;
  std::uint64_t train_seed = 0;
  std::vector<std::size_t> train_hidden;
  std::string train_out = "model.json";
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--train-lr", train_lr, "training learning rate");
  train->add_option("--hidden", train_hidden, "hidden layer width (repeat per layer)");
  train->add_option("--seed", train_seed, "initialization/shuffling seed");
  train->add_option("--out", train_out, "checkpoint path")->required();

  // ---- run ----
  auto* run = app.add_subcommand("run", "adapt over one test stream");
  TaskFlags run_task;
  run_task.attach(run);
  ScenarioFlags run_scenario;
  run_scenario.attach(run);
  EpisodeFlags run_episode;
  run_episode.attach(run);
  std::string run_model, run_out;
  std::uint64_t run_seed = 2020;
  std::size_t run_epochs = 40;
  double run_train_lr = 1e-3;
  std::vector<std::size_t> run_hidden;
  run->add_option("--model", run_model, "source checkpoint (else trains on the fly)");
  run->add_option("--seed", run_seed, "stream seed");
  run->add_option("--epochs", run_epochs, "training epochs when no checkpoint given");
  run->add_option("--train-lr", run_train_lr, "training learning rate");
  run->add_option("--hidden", run_hidden, "hidden layer width (repeat per layer)");
  run->add_option("--out", run_out, "report path (.jsonl or .csv)");

  // ---- sweep ----
  auto* sweep = app.add_subcommand("sweep", "methods x scenarios x seeds comparison");
  TaskFlags sweep_task;
  sweep_task.attach(sweep);
  ScenarioFlags sweep_scenario;  // rho/pi/pieces shared across scenarios
  sweep_scenario.attach(sweep);
  sweep->get_option("--scenario")->description("comma-separated scenario list");
  EpisodeFlags sweep_episode;
  sweep_episode.attach(sweep, false);
  std::string sweep_methods = "source,tent,tent+delta";
  std::string sweep_seeds = "2020:2024";
  std::string sweep_model, sweep_out;
  std::size_t sweep_epochs = 40, sweep_threads = 0;
  double sweep_train_lr = 1e-3;
  std::vector<std::size_t> sweep_hidden;
  sweep->add_option("--methods", sweep_methods, "comma-separated method presets");
  sweep->add_option("--seeds", sweep_seeds, "comma list and/or lo:hi ranges");
  sweep->add_option("--model", sweep_model, "source checkpoint (else trains on the fly)");
  sweep->add_option("--epochs", sweep_epochs, "training epochs when no checkpoint given");
  sweep->add_option("--train-lr", sweep_train_lr, "training learning rate");
  sweep->add_option("--hidden", sweep_hidden, "hidden layer width (repeat per layer)");
  sweep->add_option("--threads", sweep_threads, "worker threads (default: DELTA_THREADS or 1)");
  sweep->add_option("--out", sweep_out, "report path (.jsonl or .csv)");

  // ---- export-stream ----
  auto* exp = app.add_subcommand("export-stream", "write a stream manifest CSV");
  TaskFlags exp_task;
  exp_task.attach(exp);
  ScenarioFlags exp_scenario;
  exp_scenario.attach(exp);
  std::uint64_t exp_seed = 2020;
  std::string exp_out = "stream.csv";
  exp->add_option("--seed", exp_seed, "stream seed");
  exp->add_option("--out", exp_out, "manifest path")->required();

  CLI11_PARSE(app, argc, argv);
  kernels::force(kernels);

  if (*train) {
    const auto task = task::make_synthetic_task(train_task.spec);
    net::ModelSpec mspec;
    mspec.input_dim = train_task.spec.dim;
    mspec.classes = train_task.spec.classes;
    if (!train_hidden.empty()) mspec.hidden = train_hidden;
    net::TrainConfig tcfg;
    tcfg.epochs = train_epochs;
    tcfg.lr = train_lr;
    tcfg.seed = train_seed;
    const auto model = net::train_source(mspec, task.train, tcfg);
    ckpt::save(model, train_out);
    std::printf("train acc %.4f | shifted test acc %.4f | wrote %s\n",
                net::evaluate_accuracy(model, task.train, norm::Mode::Source, 256),
                net::evaluate_accuracy(model, task.test, norm::Mode::Source, 256),
                train_out.c_str());
    return 0;
  }

  if (*run) {
    if (!run_out.empty()) report::validate_path(run_out);
    const auto task = task::make_synthetic_task(run_task.spec);
    const auto model =
        obtain_model(run_model, task, run_task.spec, run_hidden, run_epochs, run_train_lr, 0);
    const auto sc = run_scenario.build();
    const auto stream =
        streams::make_scenario(task.test, sc, streams::stream_seed(sc, run_seed));
    const auto cfg = run_episode.build();
    const auto episode = harness::run_episode(model, stream, cfg);
    const auto row = make_row(cfg, sc, run_seed, episode);
    if (!run_out.empty()) report::write_file(run_out, {row});
    std::printf(
        "%s on %s seed %llu | mean-class acc %.4f | overall acc %.4f | pred std %.2f | "
        "range %.0f | updates %zu | %.1f ms\n",
        row.method.c_str(), row.scenario.c_str(), static_cast<unsigned long long>(run_seed),
        row.acc_mean_class, row.acc_overall, row.pred_std, row.pred_range, episode.updates,
        row.duration_ms);
    return 0;
  }

  if (*sweep) {
    if (!sweep_out.empty()) report::validate_path(sweep_out);
    const auto task = task::make_synthetic_task(sweep_task.spec);
    const auto model = obtain_model(sweep_model, task, sweep_task.spec, sweep_hidden,
                                    sweep_epochs, sweep_train_lr, 0);
    harness::CompareSpec spec;
    spec.methods = split_list(sweep_methods);
    for (const auto& name : split_list(sweep_scenario.name)) {
      ScenarioFlags f = sweep_scenario;
      f.name = name;
      spec.scenarios.push_back(f.build());
    }
    spec.seeds = parse_seeds(sweep_seeds);
    spec.base = sweep_episode.build();
    spec.threads = sweep_threads;
    const auto outcome = harness::compare(model, task.test, spec);
    if (!sweep_out.empty()) report::write_file(sweep_out, outcome.rows);
    for (const auto& f : outcome.failures) std::fprintf(stderr, "FAILED %s\n", f.c_str());

    // mean ± std of mean-class accuracy over seeds, per method x scenario
    std::map<std::string, std::map<std::string, std::vector<double>>> table;
    for (const auto& row : outcome.rows) table[row.method][row.scenario].push_back(row.acc_mean_class);
    std::printf("%-24s", "method");
    for (const auto& sc : spec.scenarios) std::printf(" %16s", sc.name().c_str());
    std::printf("\n");
    for (const auto& name : spec.methods) {
      std::printf("%-24s", name.c_str());
      for (const auto& sc : spec.scenarios) {
        const auto& cells = table[name][sc.name()];
        if (cells.empty()) {
          std::printf(" %16s", "failed");
          continue;
        }
        double mean = 0.0;
        for (double v : cells) mean += v;
        mean /= static_cast<double>(cells.size());
        double var = 0.0;
        for (double v : cells) var += (v - mean) * (v - mean);
        var /= static_cast<double>(cells.size());
        std::printf("   %6.4f±%6.4f", mean, std::sqrt(var));
      }
      std::printf("\n");
    }
    return outcome.failures.empty() ? 0 : 1;
  }

  if (*exp) {
    const auto task = task::make_synthetic_task(exp_task.spec);
    const auto sc = exp_scenario.build();
    const auto stream = streams::make_scenario(task.test, sc, streams::stream_seed(sc, exp_seed));
    streams::write_manifest(stream, exp_out);
    std::printf("wrote %zu positions to %s\n", stream.size(), exp_out.c_str());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
}
