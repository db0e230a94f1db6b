#pragma once

// File formats: INI-style experiment configs, versioned model files and
// RFC-4180 CSV datasets/results. Numbers are written with 17 significant
// digits so every double round-trips exactly.

#include "cdo/learner.hpp"
#include "cdo/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdo::io {

std::string format_double(double v);

// -- experiment config -----------------------------------------------------

struct BasisSection {
  int order = 2;
  bool normalize = false;
  Interval state_box{-10.0, 10.0};
  Interval time_box{0.0, 100.0};
  bool operator==(const BasisSection&) const = default;
};

struct LearningSection {
  std::string function = "newton";  // synthetic source when dataset is empty
  std::string dataset;              // CSV path; overrides synthesis
  double delta = 0.01;
  std::size_t samples = 10000;
  double train_fraction = 1.0;
  int window = 9;
  int fit_order = 3;
  std::uint64_t seed = 1;
  double noise_variance = 0.0;
  bool noisy = false;  // use scenario.noise_variance for training x when noise_variance is 0
  std::vector<double> ground_truth;  // optional Theta, row-major
  bool operator==(const LearningSection&) const = default;
};

struct SweepSection {
  std::vector<std::string> functions{"sine_product", "cubic_quadratic", "sine_cubic"};
  std::vector<int> orders{1, 2, 3, 4, 5, 6};
  std::vector<double> noise_variances{0.0, 0.01, 0.05, 0.1};
  int repeats = 5;
  bool noisy_test = false;
  std::size_t samples = 10000;
  double train_fraction = 0.5;
  double delta = 0.01;
  Interval state_box{-2.0, 2.0};
  Interval time_box{0.0, 4.0};
  bool operator==(const SweepSection&) const = default;
};

struct ObserverSection {
  Poles poles{-0.4, -0.4, -0.4};
  double cond_limit = 1e8;
  double ndo_gain = 0.4;
  bool operator==(const ObserverSection&) const = default;
};

struct ScenarioSection {
  std::string plant = "newton";
  std::string disturbance = "newton";
  double mass = 1.0;
  double k_eta = 10.0;
  double k_v = 25.0;
  double reference_amplitude = 1.0;
  double reference_frequency = 0.5;
  double noise_variance = 0.1;
  double dt = 0.001;
  double duration = 20.0;
  double eta0 = 0.0;
  double v0 = 0.0;
  std::vector<Compensation> modes{Compensation::None, Compensation::Ndo, Compensation::Hodo};
  std::uint64_t seed = 1;
  bool verbose = false;
  bool operator==(const ScenarioSection&) const = default;
};

struct IoSection {
  std::string out_dir = "out";
  std::string model = "model.txt";
  std::string results = "fit_report.csv";
  std::string sweep = "sweep.csv";
  std::string metrics = "metrics.csv";
  bool operator==(const IoSection&) const = default;
};

struct ExperimentConfig {
  BasisSection basis;
  LearningSection learning;
  SweepSection sweep;
  ObserverSection observer;
  ScenarioSection scenario;
  IoSection io;
  bool operator==(const ExperimentConfig&) const = default;

  /// Checks every downstream invariant; throws ConfigError with a field path.
  void validate() const;

  ScenarioConfig scenario_config(Compensation mode) const;
  BasisConfig basis_config() const;
  SweepConfig sweep_config() const;
};

/// Parses and validates. Unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_string(const ExperimentConfig& config);

// -- model file ------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

struct Provenance {
  std::uint64_t seed = 0;
  double delta = 0.0;
  std::string dataset_digest;
  std::string created;  // ISO-8601 UTC
  bool operator==(const Provenance&) const = default;
};

struct ModelFile {
  SeparatedModel model;
  Provenance provenance;
};

std::string model_to_string(const SeparatedModel& model, const Provenance& provenance);
ModelFile model_from_string(const std::string& text);
void save_model(const std::filesystem::path& path, const SeparatedModel& model,
                const Provenance& provenance);
/// Throws DataError when missing or malformed.
ModelFile load_model(const std::filesystem::path& path);

std::string utc_timestamp();

// -- CSV -------------------------------------------------------------------

inline constexpr int kCsvSchemaVersion = 1;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_line(const std::vector<std::string>& fields);

/// Columns t, x_1..x_n, u_1..u_o[, delta_1..delta_n].
TrajectoryDataset read_dataset(const std::filesystem::path& path);
TrajectoryDataset parse_dataset(const CsvTable& table);
std::string dataset_to_csv(const TrajectoryDataset& data);
std::string dataset_digest(const TrajectoryDataset& data);

const std::vector<std::string>& scenario_columns();
std::string scenario_to_csv(const ScenarioResult& result);

const std::vector<std::string>& fit_report_columns();
std::vector<std::string> fit_report_row(const std::string& source, int order, double delta,
                                        std::uint64_t seed, std::size_t samples,
                                        const FitReport& report);

const std::vector<std::string>& sweep_columns();
std::vector<std::string> sweep_row(const SweepCell& cell, int repeats, std::uint64_t seed);

const std::vector<std::string>& metrics_columns();
std::vector<std::string> metrics_row(std::uint64_t seed, double noise_variance,
                                     const std::vector<ScenarioResult>& results);

/// Appends rows, writing the header first when the file is new or empty.
/// Fails with DataError if an existing header differs.
void append_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace cdo::io
