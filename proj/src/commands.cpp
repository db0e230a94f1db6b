#include "cdo/commands.hpp"

#include "cdo/error.hpp"
#include "cdo/sim.hpp"

#include <CLI11.hpp>
#include <boost/algorithm/string.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <iostream>
#include <set>
#include <thread>
#include <tuple>

namespace cdo::cli {

namespace fs = std::filesystem;

io::ExperimentConfig apply_overrides(io::ExperimentConfig config, const Overrides& o) {
  if (o.seed) {
    config.learning.seed = *o.seed;
    config.scenario.seed = *o.seed;
  }
  if (o.out_dir) config.io.out_dir = *o.out_dir;
  if (o.modes) {
    std::vector<std::string> names;
    boost::split(names, *o.modes, boost::is_any_of(","));
    config.scenario.modes.clear();
    for (auto& name : names) {
      boost::trim(name);
      config.scenario.modes.push_back(parse_compensation(name));
    }
  }
  if (o.noisy) config.learning.noisy = true;
  config.validate();
  return config;
}

unsigned thread_count() {
  const char* env = std::getenv("COUPLED_DO_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  try {
    const long v = std::stol(env);
    if (v < 0) throw std::invalid_argument(env);
    return static_cast<unsigned>(v);
  } catch (const std::exception&) {
    throw ConfigError("COUPLED_DO_THREADS", "expected a non-negative integer");
  }
}

namespace {

fs::path out_path(const io::ExperimentConfig& c, const std::string& name) {
  return fs::path(c.io.out_dir) / name;
}

double training_noise(const io::ExperimentConfig& c) {
  if (c.learning.noise_variance > 0.0) return c.learning.noise_variance;
  return c.learning.noisy ? c.scenario.noise_variance : 0.0;
}

}  // namespace

LearnOutcome learn(const io::ExperimentConfig& c) {
  const BasisConfig basis = c.basis_config();
  const ControlAffineDynamics dynamics = newton_velocity_loop(c.scenario.mass);
  LearnOutcome outcome{FitResult{SeparatedModel(basis, Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(basis.s1()))), {}}, {}, 0};

  TrajectoryDataset train;
  std::optional<TrajectoryDataset> test;
  if (!c.learning.dataset.empty()) {
    if (!fs::exists(c.learning.dataset)) {
      throw DataError("learning.dataset: file not found: " + c.learning.dataset);
    }
    TrajectoryDataset data = io::read_dataset(c.learning.dataset);
    if (!data.delta) {
      data = targets_from_trajectory(data, dynamics, c.learning.window, c.learning.fit_order);
    }
    train = std::move(data);
    outcome.source = c.learning.dataset;
  } else if (c.learning.function == "newton") {
    ExcitationConfig ex;
    ex.disturbance = "newton";
    ex.mass = c.scenario.mass;
    ex.velocity_box = c.basis.state_box;
    ex.time_box = c.basis.time_box;
    ex.samples = c.learning.samples;
    ex.noise_variance = training_noise(c);
    ex.seed = c.learning.seed;
    train = targets_from_trajectory(simulate_excitation_run(ex), dynamics, c.learning.window,
                                    c.learning.fit_order);
    outcome.source = "excitation:newton";
  } else {
    SyntheticSpec spec;
    spec.function = c.learning.function;
    spec.state_box = c.basis.state_box;
    spec.time_box = c.basis.time_box;
    spec.samples = c.learning.samples;
    spec.train_fraction = c.learning.train_fraction;
    spec.noise_variance = training_noise(c);
    spec.seed = c.learning.seed;
    DataSplit split = make_synthetic_split(spec);
    train = std::move(split.train);
    if (split.test.size() > 0) test = std::move(split.test);
    outcome.source = "synthetic:" + c.learning.function;
  }
  if (train.state_dim() != basis.state_dim) {
    throw DataError("learning.dataset: state dimension " + std::to_string(train.state_dim()) +
                    " does not match the basis");
  }

  outcome.samples = train.size();
  outcome.fit = fit_rls(train, basis, c.learning.delta);
  if (test) {
    const ErrorStats stats = evaluate(outcome.fit.model, *test);
    outcome.fit.report.test_mae = stats.mae;
    outcome.fit.report.residual_sup = stats.sup;
  }

  const Eigen::MatrixXd& theta = outcome.fit.model.theta();
  if (!c.learning.ground_truth.empty()) {
    const Eigen::Map<const Eigen::RowVectorXd> truth(c.learning.ground_truth.data(),
                                                     static_cast<Eigen::Index>(c.learning.ground_truth.size()));
    outcome.fit.report.theta_error = (theta.row(0) - truth).squaredNorm();
  } else if (c.learning.dataset.empty() && c.learning.function == "newton" && !c.basis.normalize &&
             c.basis.state_box == Interval{-10.0, 10.0} && c.basis.time_box == Interval{0.0, 100.0}) {
    outcome.fit.report.theta_error =
        (theta.row(0) - verify::newton_projection_oracle(c.basis.order)).squaredNorm();
  }
  return outcome;
}

int cmd_learn(const io::ExperimentConfig& c, std::ostream& out) {
  const LearnOutcome outcome = learn(c);
  io::Provenance prov{c.learning.seed, c.learning.delta, "", io::utc_timestamp()};
  prov.dataset_digest = c.learning.dataset.empty()
                            ? fmt::format("{}:seed={}:samples={}", outcome.source, c.learning.seed,
                                          c.learning.samples)
                            : io::dataset_digest(io::read_dataset(c.learning.dataset));
  io::save_model(out_path(c, c.io.model), outcome.fit.model, prov);
  io::append_csv(out_path(c, c.io.results), io::fit_report_columns(),
                 {io::fit_report_row(outcome.source, c.basis.order, c.learning.delta,
                                     c.learning.seed, outcome.samples, outcome.fit.report)});

  const FitReport& r = outcome.fit.report;
  fmt::print(out, "source          {}\n", outcome.source);
  fmt::print(out, "samples         {}\n", outcome.samples);
  fmt::print(out, "train MAE       {:.6e}\n", r.train_mae);
  if (r.test_mae) fmt::print(out, "test MAE        {:.6e}\n", *r.test_mae);
  fmt::print(out, "Gram condition  {:.6e}\n", r.gram_condition);
  if (r.theta_error) fmt::print(out, "Theta error     {:.6e}\n", *r.theta_error);
  fmt::print(out, "model           {}\n", out_path(c, c.io.model).string());
  return kOk;
}

int cmd_sweep(const io::ExperimentConfig& c, std::ostream& out) {
  const SweepConfig sweep = c.sweep_config();
  const fs::path path = out_path(c, c.io.sweep);

  std::set<std::tuple<std::string, std::string, std::string>> done;
  if (fs::exists(path) && fs::file_size(path) > 0) {
    const io::CsvTable table = io::read_csv(path);
    if (table.header != io::sweep_columns()) {
      throw DataError(path.string() + ": header does not match the sweep schema");
    }
    for (const auto& row : table.rows) {
      if (row[8] == "ok" && row[3] == std::to_string(sweep.repeats) &&
          row[4] == std::to_string(sweep.data.seed)) {
        done.emplace(row[0], row[1], row[2]);
      }
    }
  }
  std::vector<SweepCellKey> pending;
  for (const auto& key : sweep_grid(sweep)) {
    if (!done.count({key.function, std::to_string(key.order), io::format_double(key.noise_variance)})) {
      pending.push_back(key);
    }
  }
  if (pending.empty()) {
    fmt::print(out, "sweep complete, nothing to do ({})\n", path.string());
    return kOk;
  }

  const std::vector<SweepCell> cells = run_sweep(sweep, pending, thread_count());
  std::vector<std::vector<std::string>> rows;
  bool failed = false;
  for (const auto& cell : cells) {
    rows.push_back(io::sweep_row(cell, sweep.repeats, sweep.data.seed));
    if (cell.report) {
      fmt::print(out, "{:<16} p={} var={:<5g} test MAE {:.6e}\n", cell.key.function,
                 cell.key.order, cell.key.noise_variance, cell.report->test_mae.value_or(NAN));
    } else {
      failed = true;
      fmt::print(out, "{:<16} p={} var={:<5g} FAILED: {}\n", cell.key.function, cell.key.order,
                 cell.key.noise_variance, cell.error);
    }
  }
  io::append_csv(path, io::sweep_columns(), rows);
  fmt::print(out, "{} cells written to {}\n", cells.size(), path.string());
  return failed ? kNumericalError : kOk;
}

int cmd_simulate(const io::ExperimentConfig& c, std::ostream& out) {
  std::optional<SeparatedModel> model;
  for (auto mode : c.scenario.modes) {
    if (mode != Compensation::Hodo || model) continue;
    const fs::path path = out_path(c, c.io.model);
    if (!fs::exists(path)) {
      throw DataError("io.model: " + path.string() + " not found; run `learn` first");
    }
    model = io::load_model(path).model;
  }

  std::vector<ScenarioResult> results;
  bool failed = false;
  for (auto mode : c.scenario.modes) {
    ScenarioResult r = run_scenario(c.scenario_config(mode), model ? &*model : nullptr);
    const std::string name(to_string(mode));
    io::write_file_atomic(out_path(c, "scenario_" + name + ".csv"), io::scenario_to_csv(r));
    if (!r.sigma_hat.empty()) {
      std::vector<std::string> header{"t"};
      for (Eigen::Index i = 0; i < r.sigma_hat.front().size(); ++i) {
        header.push_back("sigma_hat_" + std::to_string(i + 1));
      }
      std::string text = io::csv_line(header);
      for (std::size_t k = 0; k < r.sigma_hat.size(); ++k) {
        std::vector<std::string> row{io::format_double(r.t[k])};
        for (double v : r.sigma_hat[k]) row.push_back(io::format_double(v));
        text += io::csv_line(row);
      }
      io::write_file_atomic(out_path(c, "scenario_" + name + "_sigma.csv"), text);
    }
    fmt::print(out, "{:<5} tracking MAE {:.6e}  estimation MAE {:.6e}  steady {:.6e}  decay {:.4f}\n",
               name, r.metrics.tracking_mae, r.metrics.estimation_mae,
               r.metrics.steady_estimation_mae, r.metrics.decay_rate);
    if (r.gain_fallbacks) fmt::print(out, "      gain fallbacks: {}\n", r.gain_fallbacks);
    if (!r.failure.empty()) {
      failed = true;
      fmt::print(out, "      aborted at t={}: {}\n", r.t.empty() ? 0.0 : r.t.back(), r.failure);
    }
    results.push_back(std::move(r));
  }
  io::append_csv(out_path(c, c.io.metrics), io::metrics_columns(),
                 {io::metrics_row(c.scenario.seed, c.scenario.noise_variance, results)});
  return failed ? kNumericalError : kOk;
}

int cmd_verify(verify::Level level, std::ostream& out) {
  const auto checks = verify::run_checks(level, &out);
  std::size_t failed = 0;
  for (const auto& r : checks) failed += r.passed ? 0 : 1;
  fmt::print(out, "{} checks, {} failed\n", checks.size(), failed);
  return failed ? kVerifyFailed : kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Learning-based coupled disturbance estimation: fit, sweep, simulate, verify"};
  app.require_subcommand(1);

  std::string config_path;
  std::string level = "fast";
  std::uint64_t seed = 0;
  std::string out_dir, modes;
  bool noisy = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (INI)");
    sub->add_option("--seed", seed, "override the top-level seed");
    sub->add_option("--out", out_dir, "override io.out_dir");
  };
  auto* learn_cmd = app.add_subcommand("learn", "fit Theta and write the model file");
  add_common(learn_cmd);
  learn_cmd->add_flag("--noisy", noisy, "train on noisy state measurements");
  auto* sweep_cmd = app.add_subcommand("sweep", "order x noise grid of synthetic fits");
  add_common(sweep_cmd);
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop scenario for each mode");
  add_common(sim_cmd);
  sim_cmd->add_option("--modes", modes, "comma-separated subset of none,ndo,hodo");
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle suites");
  verify_cmd->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (verify_cmd->parsed()) return cmd_verify(verify::parse_level(level), std::cout);

    io::ExperimentConfig config = config_path.empty() ? io::ExperimentConfig{}
                                                      : io::load_config(config_path);
    Overrides overrides;
    if (app.get_subcommands().front()->count("--seed")) overrides.seed = seed;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (!modes.empty()) overrides.modes = modes;
    overrides.noisy = noisy;
    config = apply_overrides(std::move(config), overrides);

    if (learn_cmd->parsed()) return cmd_learn(config, std::cout);
    if (sweep_cmd->parsed()) return cmd_sweep(config, std::cout);
    return cmd_simulate(config, std::cout);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kDataError;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return kNumericalError;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kDataError;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  }
}

}  // namespace cdo::cli
