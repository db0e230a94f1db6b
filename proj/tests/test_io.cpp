#include "cdo/error.hpp"
#include "cdo/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace cdo;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(fs::path(CDO_GOLDEN_DIR) / name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n') + 1); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cdo_io_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

std::string config_field_error(const std::string& text) {
  try {
    io::parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("csv schemas match the golden headers") {
  CHECK(io::csv_line(io::scenario_columns()) == first_line(golden("scenario_v1.csv")));
  CHECK(io::csv_line(io::fit_report_columns()) == first_line(golden("fit_report_v1.csv")));
  CHECK(io::csv_line(io::sweep_columns()) == first_line(golden("sweep_v1.csv")));
  CHECK(io::csv_line(io::metrics_columns()) == first_line(golden("metrics_v1.csv")));
  CHECK(io::kCsvSchemaVersion == 1);
}

TEST_CASE("dataset csv parse and write") {
  const TrajectoryDataset d = io::parse_dataset(io::parse_csv(golden("dataset_v1.csv")));
  CHECK(d.size() == 2);
  CHECK(d.state_dim() == 1);
  CHECK(d.input_dim() == 1);
  CHECK(d.x(1, 0) == 1.75);
  CHECK((*d.delta)(1, 0) == -2.5);
  const TrajectoryDataset again = io::parse_dataset(io::parse_csv(io::dataset_to_csv(d)));
  CHECK(again.x == d.x);
  CHECK(again.t == d.t);
  CHECK(io::dataset_digest(d) == io::dataset_digest(again));

  CHECK_THROWS_AS(io::parse_dataset(io::parse_csv("t,y_1\r\n0,1\r\n")), DataError);
  CHECK_THROWS_AS(io::parse_dataset(io::parse_csv("t,x_1\r\n0,abc\r\n")), DataError);
  CHECK_THROWS_AS(io::parse_dataset(io::parse_csv("t,x_1\r\n0,inf\r\n")), DataError);
  CHECK_THROWS_AS(io::parse_csv("a,b\r\n1\r\n"), DataError);
  CHECK_THROWS_AS(io::read_dataset("/nonexistent/data.csv"), DataError);
}

TEST_CASE("csv quoting round trip") {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const io::CsvTable t = io::parse_csv(io::csv_line({"a", "b", "c", "d", "e"}) + io::csv_line(fields));
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0] == fields);
}

TEST_CASE("doubles round-trip through text") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 40 - 20);
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("model file round trip is bit-exact") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1e3);
  BasisConfig cfg = time_feature_basis(3, true, {-2.5, 2.0}, {0.0, 4.0});
  Eigen::MatrixXd theta(1, 16);
  for (auto& v : theta.reshaped()) v = g(rng) / 7.0;
  const SeparatedModel model(cfg, theta);
  const io::Provenance prov{42, 0.01, "fnv1a64:0123456789abcdef", "2026-01-01T00:00:00Z"};
  const fs::path path = scratch("model.txt");
  io::save_model(path, model, prov);
  const io::ModelFile back = io::load_model(path);
  CHECK(back.model.theta() == theta);
  CHECK(back.model.config() == cfg);
  CHECK(back.provenance == prov);

  std::string text = io::model_to_string(model, prov);
  const auto pos = text.find("format_version = 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "format_version = 9");
  CHECK_THROWS_AS(io::model_from_string(text), DataError);
  CHECK_THROWS_AS(io::load_model(scratch("missing.txt")), DataError);
}

TEST_CASE("config defaults validate and round-trip") {
  const io::ExperimentConfig defaults;
  CHECK_NOTHROW(defaults.validate());
  CHECK(io::parse_config(io::to_string(defaults)) == defaults);
  CHECK(io::parse_config("") == defaults);

  io::ExperimentConfig c;
  c.basis.order = 3;
  c.basis.normalize = true;
  c.observer.poles = {-1.0, {-0.5, 0.25}, {-0.5, -0.25}, -2.0};
  c.scenario.modes = {Compensation::Hodo, Compensation::None};
  c.sweep.orders = {2, 3};
  c.sweep.noise_variances = {0.1, 0.012345678901234567};
  c.learning.ground_truth = std::vector<double>(16, 0.1);
  c.scenario.noise_variance = 1.0 / 3.0;
  c.io.out_dir = "results/run 1";
  const io::ExperimentConfig back = io::parse_config(io::to_string(c));
  CHECK(back == c);
}

TEST_CASE("config errors carry field paths") {
  CHECK(config_field_error("[learning]\ndelta = 0\n") == "learning.delta");
  CHECK(config_field_error("[learning]\ndelta = abc\n") == "learning.delta");
  CHECK(config_field_error("[learning]\nunknown_key = 1\n") == "learning.unknown_key");
  CHECK(config_field_error("[mystery]\na = 1\n") == "mystery");
  CHECK(config_field_error("[basis]\norder = 3\n") == "observer.poles");
  CHECK(config_field_error("[observer]\npoles = -0.4, 0.4, -0.4\n") == "observer.poles");
  CHECK(config_field_error("[observer]\npoles = -0.4:1, -0.4, -0.4\n") == "observer.poles");
  CHECK(config_field_error("[scenario]\nmodes = none, pid\n") == "scenario.modes");
  CHECK(config_field_error("[scenario]\ndt = -1\n") == "scenario.dt");
  CHECK(config_field_error("[sweep]\nfunctions = sine_product, nope\n") == "sweep.functions");
  CHECK(config_field_error("[basis]\nstate_box = 1\n") == "basis.state_box");
  CHECK(config_field_error("[learning]\nseed = -3\n") == "learning.seed");
  CHECK(config_field_error("[learning]\nnoisy = maybe\n") == "learning.noisy");
  CHECK_THROWS_AS(io::load_config("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("append_csv writes the header once and refuses a different schema") {
  const fs::path p = scratch("append.csv");
  io::append_csv(p, {"a", "b"}, {{"1", "2"}});
  io::append_csv(p, {"a", "b"}, {{"3", "4"}});
  const io::CsvTable t = io::read_csv(p);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows.size() == 2);
  CHECK_THROWS_AS(io::append_csv(p, {"a", "c"}, {{"5", "6"}}), DataError);
}

TEST_CASE("scenario and metrics rows") {
  ScenarioResult r;
  r.mode = Compensation::Ndo;
  r.t = {0.0, 0.001};
  r.eta = {0.0, 0.0};
  r.eta_d = {0.0, 0.0005};
  r.v = {0.0, 0.1};
  r.u = {1.0, 2.0};
  r.delta_true = {50.0, 49.99};
  r.delta_hat = {0.0, 0.02};
  r.metrics.tracking_mae = 0.25;
  const io::CsvTable t = io::parse_csv(io::scenario_to_csv(r));
  CHECK(t.rows.size() == 2);
  CHECK(t.rows[1][7] == "ndo");
  CHECK(std::stod(t.rows[1][5]) == 49.99);
  const auto row = io::metrics_row(7, 0.1, {r});
  CHECK(row.size() == io::metrics_columns().size());
  CHECK(row[2].empty());
  CHECK(std::stod(row[6]) == 0.25);
}
