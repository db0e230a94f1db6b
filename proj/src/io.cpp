#include "cdo/io.hpp"

#include "cdo/error.hpp"
#include "cdo/random.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace cdo::io {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

namespace {

std::string trim(std::string s) {
  boost::trim(s);
  return s;
}

double parse_double(const std::string& text, const std::string& field) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "expected a number, got '" + s + "'");
  }
}

long long parse_integer(const std::string& text, const std::string& field) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "expected an integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& text, const std::string& field) {
  const std::string s = boost::to_lower_copy(trim(text));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(field, "expected true/false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  const std::string s = trim(text);
  if (s.empty()) return parts;
  boost::split(parts, s, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  return parts;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& field) {
  std::vector<double> out;
  for (const auto& p : split_list(text)) out.push_back(parse_double(p, field));
  return out;
}

Interval parse_interval(const std::string& text, const std::string& field) {
  const auto v = parse_doubles(text, field);
  if (v.size() != 2) throw ConfigError(field, "expected 'lo, hi'");
  return {v[0], v[1]};
}

std::complex<double> parse_pole(const std::string& text, const std::string& field) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(":"));
  if (parts.size() == 1) return {parse_double(parts[0], field), 0.0};
  if (parts.size() == 2) return {parse_double(parts[0], field), parse_double(parts[1], field)};
  throw ConfigError(field, "poles are 're' or 're:im'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double d : v) parts.push_back(format_double(d));
  return boost::join(parts, ", ");
}

std::string format_interval(const Interval& b) {
  return format_double(b.lo) + ", " + format_double(b.hi);
}

std::string format_pole(const std::complex<double>& p) {
  if (p.imag() == 0.0) return format_double(p.real());
  return format_double(p.real()) + ":" + format_double(p.imag());
}

// Reads keys of one INI section and rejects anything it did not consume.
class SectionReader {
 public:
  SectionReader(const pt::ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) node_ = &*child;
  }

  std::optional<std::string> raw(const std::string& key) {
    seen_.insert(key);
    if (!node_) return std::nullopt;
    if (auto v = node_->get_optional<std::string>(key)) return trim(*v);
    return std::nullopt;
  }

  std::string field(const std::string& key) const { return name_ + "." + key; }

  void read(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_double(*v, field(key));
  }
  void read(const std::string& key, int& out) {
    if (auto v = raw(key)) out = static_cast<int>(parse_integer(*v, field(key)));
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) {
      try {
        std::size_t used = 0;
        out = std::stoull(*v, &used);
        if (used != v->size() || v->starts_with("-")) throw std::invalid_argument(*v);
      } catch (const std::exception&) {
        throw ConfigError(field(key), "expected a non-negative integer");
      }
    }
  }
  void read(const std::string& key, bool& out) {
    if (auto v = raw(key)) out = parse_bool(*v, field(key));
  }
  void read(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }
  void read(const std::string& key, Interval& out) {
    if (auto v = raw(key)) out = parse_interval(*v, field(key));
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) out = parse_doubles(*v, field(key));
  }
  void read(const std::string& key, std::vector<int>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& p : split_list(*v)) out.push_back(static_cast<int>(parse_integer(p, field(key))));
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (auto v = raw(key)) out = split_list(*v);
  }
  void read(const std::string& key, Poles& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& p : split_list(*v)) out.push_back(parse_pole(p, field(key)));
    }
  }
  void read(const std::string& key, std::vector<Compensation>& out) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& p : split_list(*v)) out.push_back(parse_compensation(p));
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : *node_) {
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  std::string name_;
  const pt::ptree* node_ = nullptr;
  std::set<std::string> seen_;
};

pt::ptree parse_ini(const std::string& text, const char* what) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string(what) + ": " + e.message() + " at line " +
                              std::to_string(e.line()));
  }
  return tree;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// -- experiment config -----------------------------------------------------

BasisConfig ExperimentConfig::basis_config() const {
  return time_feature_basis(basis.order, basis.normalize, basis.state_box, basis.time_box);
}

ScenarioConfig ExperimentConfig::scenario_config(Compensation mode) const {
  ScenarioConfig c;
  c.plant = scenario.plant;
  c.disturbance = scenario.disturbance;
  c.mass = scenario.mass;
  c.k_eta = scenario.k_eta;
  c.k_v = scenario.k_v;
  c.reference = {scenario.reference_amplitude, scenario.reference_frequency};
  c.noise_variance = scenario.noise_variance;
  c.dt = scenario.dt;
  c.duration = scenario.duration;
  c.eta0 = scenario.eta0;
  c.v0 = scenario.v0;
  c.mode = mode;
  c.poles = observer.poles;
  c.cond_limit = observer.cond_limit;
  c.ndo_gain = observer.ndo_gain;
  c.seed = scenario.seed;
  c.verbose = scenario.verbose;
  c.steady_window = {std::min(10.0, 0.5 * scenario.duration), scenario.duration};
  c.decay_window = {std::min(2.0, 0.1 * scenario.duration), c.steady_window.lo};
  return c;
}

SweepConfig ExperimentConfig::sweep_config() const {
  SweepConfig c;
  c.functions = sweep.functions;
  c.orders = sweep.orders;
  c.noise_variances = sweep.noise_variances;
  c.delta = sweep.delta;
  c.normalize = basis.normalize;
  c.repeats = sweep.repeats;
  c.data.state_box = sweep.state_box;
  c.data.time_box = sweep.time_box;
  c.data.samples = sweep.samples;
  c.data.train_fraction = sweep.train_fraction;
  c.data.noisy_test = sweep.noisy_test;
  c.data.seed = learning.seed;
  return c;
}

void ExperimentConfig::validate() const {
  basis_config().validate();
  if (!(learning.delta > 0.0) || !std::isfinite(learning.delta)) {
    throw ConfigError("learning.delta", "must be positive");
  }
  if (learning.samples == 0) throw ConfigError("learning.samples", "must be at least 1");
  if (!(learning.train_fraction > 0.0) || learning.train_fraction > 1.0) {
    throw ConfigError("learning.train_fraction", "must be in (0, 1]");
  }
  if (learning.fit_order < 1) throw ConfigError("learning.fit_order", "must be at least 1");
  if (learning.window % 2 == 0 || learning.window <= learning.fit_order) {
    throw ConfigError("learning.window", "must be odd and larger than fit_order");
  }
  if (!(learning.noise_variance >= 0.0)) {
    throw ConfigError("learning.noise_variance", "must be non-negative");
  }
  if (learning.dataset.empty()) find_disturbance(learning.function);
  if (!learning.ground_truth.empty() &&
      learning.ground_truth.size() != basis_config().s1()) {
    throw ConfigError("learning.ground_truth", "needs s1 = " +
                                                   std::to_string(basis_config().s1()) + " values");
  }

  if (sweep.functions.empty()) throw ConfigError("sweep.functions", "must not be empty");
  for (const auto& f : sweep.functions) {
    try {
      find_disturbance(f);
    } catch (const ConfigError& e) {
      throw ConfigError("sweep.functions", e.what());
    }
  }
  if (sweep.orders.empty()) throw ConfigError("sweep.orders", "must not be empty");
  for (int p : sweep.orders) {
    if (p < 0 || p > 20) throw ConfigError("sweep.orders", "orders must be in [0, 20]");
  }
  if (sweep.noise_variances.empty()) throw ConfigError("sweep.noise_variances", "must not be empty");
  for (double v : sweep.noise_variances) {
    if (!(v >= 0.0)) throw ConfigError("sweep.noise_variances", "must be non-negative");
  }
  if (sweep.repeats < 1) throw ConfigError("sweep.repeats", "must be at least 1");
  if (sweep.samples < 2) throw ConfigError("sweep.samples", "must be at least 2");
  if (!(sweep.train_fraction > 0.0) || !(sweep.train_fraction < 1.0)) {
    throw ConfigError("sweep.train_fraction", "must be in (0, 1)");
  }
  if (!(sweep.delta > 0.0)) throw ConfigError("sweep.delta", "must be positive");
  if (!(sweep.state_box.lo < sweep.state_box.hi)) throw ConfigError("sweep.state_box", "lo < hi");
  if (!(sweep.time_box.lo < sweep.time_box.hi)) throw ConfigError("sweep.time_box", "lo < hi");

  if (!(observer.cond_limit > 1.0)) throw ConfigError("observer.cond_limit", "must exceed 1");
  if (static_cast<std::size_t>(observer.poles.size()) != basis_config().s2()) {
    throw ConfigError("observer.poles", "need p+1 = " + std::to_string(basis_config().s2()) +
                                            " poles");
  }
  try {
    monic_polynomial(observer.poles);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("observer.poles", e.what());
  }
  if (scenario.modes.empty()) throw ConfigError("scenario.modes", "must not be empty");
  for (auto mode : scenario.modes) scenario_config(mode).validate();
}

ExperimentConfig parse_config(const std::string& text) {
  const pt::ptree tree = parse_ini(text, "config");
  static const std::set<std::string> sections{"basis", "learning", "sweep", "observer", "scenario",
                                              "io"};
  for (const auto& [name, node] : tree) {
    if (!sections.count(name)) {
      if (node.empty()) throw ConfigError(name, "keys must live inside a [section]");
      throw ConfigError(name, "unknown section");
    }
  }

  ExperimentConfig c;
  {
    SectionReader r(tree, "basis");
    r.read("order", c.basis.order);
    r.read("normalize", c.basis.normalize);
    r.read("state_box", c.basis.state_box);
    r.read("time_box", c.basis.time_box);
    r.finish();
  }
  {
    SectionReader r(tree, "learning");
    r.read("function", c.learning.function);
    r.read("dataset", c.learning.dataset);
    r.read("delta", c.learning.delta);
    r.read("samples", c.learning.samples);
    r.read("train_fraction", c.learning.train_fraction);
    r.read("window", c.learning.window);
    r.read("fit_order", c.learning.fit_order);
    r.read("seed", c.learning.seed);
    r.read("noise_variance", c.learning.noise_variance);
    r.read("noisy", c.learning.noisy);
    r.read("ground_truth", c.learning.ground_truth);
    r.finish();
  }
  {
    SectionReader r(tree, "sweep");
    r.read("functions", c.sweep.functions);
    r.read("orders", c.sweep.orders);
    r.read("noise_variances", c.sweep.noise_variances);
    r.read("repeats", c.sweep.repeats);
    r.read("noisy_test", c.sweep.noisy_test);
    r.read("samples", c.sweep.samples);
    r.read("train_fraction", c.sweep.train_fraction);
    r.read("delta", c.sweep.delta);
    r.read("state_box", c.sweep.state_box);
    r.read("time_box", c.sweep.time_box);
    r.finish();
  }
  {
    SectionReader r(tree, "observer");
    r.read("poles", c.observer.poles);
    r.read("cond_limit", c.observer.cond_limit);
    r.read("ndo_gain", c.observer.ndo_gain);
    r.finish();
  }
  {
    SectionReader r(tree, "scenario");
    r.read("plant", c.scenario.plant);
    r.read("disturbance", c.scenario.disturbance);
    r.read("mass", c.scenario.mass);
    r.read("k_eta", c.scenario.k_eta);
    r.read("k_v", c.scenario.k_v);
    r.read("reference_amplitude", c.scenario.reference_amplitude);
    r.read("reference_frequency", c.scenario.reference_frequency);
    r.read("noise_variance", c.scenario.noise_variance);
    r.read("dt", c.scenario.dt);
    r.read("duration", c.scenario.duration);
    r.read("eta0", c.scenario.eta0);
    r.read("v0", c.scenario.v0);
    r.read("modes", c.scenario.modes);
    r.read("seed", c.scenario.seed);
    r.read("verbose", c.scenario.verbose);
    r.finish();
  }
  {
    SectionReader r(tree, "io");
    r.read("out_dir", c.io.out_dir);
    r.read("model", c.io.model);
    r.read("results", c.io.results);
    r.read("sweep", c.io.sweep);
    r.read("metrics", c.io.metrics);
    r.finish();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_string(const ExperimentConfig& c) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream o;
  o << "[basis]\n"
    << "order = " << c.basis.order << "\n"
    << "normalize = " << b(c.basis.normalize) << "\n"
    << "state_box = " << format_interval(c.basis.state_box) << "\n"
    << "time_box = " << format_interval(c.basis.time_box) << "\n\n";
  o << "[learning]\n"
    << "function = " << c.learning.function << "\n"
    << "dataset = " << c.learning.dataset << "\n"
    << "delta = " << format_double(c.learning.delta) << "\n"
    << "samples = " << c.learning.samples << "\n"
    << "train_fraction = " << format_double(c.learning.train_fraction) << "\n"
    << "window = " << c.learning.window << "\n"
    << "fit_order = " << c.learning.fit_order << "\n"
    << "seed = " << c.learning.seed << "\n"
    << "noise_variance = " << format_double(c.learning.noise_variance) << "\n"
    << "noisy = " << b(c.learning.noisy) << "\n"
    << "ground_truth = " << join_doubles(c.learning.ground_truth) << "\n\n";
  std::vector<std::string> orders;
  for (int p : c.sweep.orders) orders.push_back(std::to_string(p));
  o << "[sweep]\n"
    << "functions = " << boost::join(c.sweep.functions, ", ") << "\n"
    << "orders = " << boost::join(orders, ", ") << "\n"
    << "noise_variances = " << join_doubles(c.sweep.noise_variances) << "\n"
    << "repeats = " << c.sweep.repeats << "\n"
    << "noisy_test = " << b(c.sweep.noisy_test) << "\n"
    << "samples = " << c.sweep.samples << "\n"
    << "train_fraction = " << format_double(c.sweep.train_fraction) << "\n"
    << "delta = " << format_double(c.sweep.delta) << "\n"
    << "state_box = " << format_interval(c.sweep.state_box) << "\n"
    << "time_box = " << format_interval(c.sweep.time_box) << "\n\n";
  std::vector<std::string> poles;
  for (const auto& p : c.observer.poles) poles.push_back(format_pole(p));
  o << "[observer]\n"
    << "poles = " << boost::join(poles, ", ") << "\n"
    << "cond_limit = " << format_double(c.observer.cond_limit) << "\n"
    << "ndo_gain = " << format_double(c.observer.ndo_gain) << "\n\n";
  std::vector<std::string> modes;
  for (auto m : c.scenario.modes) modes.emplace_back(to_string(m));
  o << "[scenario]\n"
    << "plant = " << c.scenario.plant << "\n"
    << "disturbance = " << c.scenario.disturbance << "\n"
    << "mass = " << format_double(c.scenario.mass) << "\n"
    << "k_eta = " << format_double(c.scenario.k_eta) << "\n"
    << "k_v = " << format_double(c.scenario.k_v) << "\n"
    << "reference_amplitude = " << format_double(c.scenario.reference_amplitude) << "\n"
    << "reference_frequency = " << format_double(c.scenario.reference_frequency) << "\n"
    << "noise_variance = " << format_double(c.scenario.noise_variance) << "\n"
    << "dt = " << format_double(c.scenario.dt) << "\n"
    << "duration = " << format_double(c.scenario.duration) << "\n"
    << "eta0 = " << format_double(c.scenario.eta0) << "\n"
    << "v0 = " << format_double(c.scenario.v0) << "\n"
    << "modes = " << boost::join(modes, ", ") << "\n"
    << "seed = " << c.scenario.seed << "\n"
    << "verbose = " << b(c.scenario.verbose) << "\n\n";
  o << "[io]\n"
    << "out_dir = " << c.io.out_dir << "\n"
    << "model = " << c.io.model << "\n"
    << "results = " << c.io.results << "\n"
    << "sweep = " << c.io.sweep << "\n"
    << "metrics = " << c.io.metrics << "\n";
  return o.str();
}

// -- model file ------------------------------------------------------------

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string model_to_string(const SeparatedModel& model, const Provenance& provenance) {
  const BasisConfig& cfg = model.config();
  auto boxes = [](const std::vector<Interval>& v) {
    std::vector<double> flat;
    for (const auto& b : v) {
      flat.push_back(b.lo);
      flat.push_back(b.hi);
    }
    return join_doubles(flat);
  };
  std::ostringstream o;
  o << "# separated disturbance model: Delta(x, t) = Theta B(x) xi(t)\n"
    << "# Theta columns use flat index h = h_x + h_t * (p+1)^n, digits least significant first\n"
    << "[model]\n"
    << "format_version = " << kModelFormatVersion << "\n\n"
    << "[basis]\n"
    << "order = " << cfg.order << "\n"
    << "state_dim = " << cfg.state_dim << "\n"
    << "feature_dim = " << cfg.feature_dim << "\n"
    << "normalize = " << (cfg.normalize ? "true" : "false") << "\n"
    << "state_box = " << boxes(cfg.state_box) << "\n"
    << "feature_box = " << boxes(cfg.feature_box) << "\n\n"
    << "[provenance]\n"
    << "seed = " << provenance.seed << "\n"
    << "delta = " << format_double(provenance.delta) << "\n"
    << "dataset_digest = " << provenance.dataset_digest << "\n"
    << "created = " << provenance.created << "\n\n"
    << "[theta]\n"
    << "rows = " << model.theta().rows() << "\n"
    << "cols = " << model.theta().cols() << "\n";
  for (Eigen::Index r = 0; r < model.theta().rows(); ++r) {
    std::vector<double> row(model.theta().cols());
    for (Eigen::Index c = 0; c < model.theta().cols(); ++c) row[static_cast<std::size_t>(c)] = model.theta()(r, c);
    o << "row_" << (r + 1) << " = " << join_doubles(row) << "\n";
  }
  return o.str();
}

ModelFile model_from_string(const std::string& text) {
  pt::ptree tree;
  try {
    tree = parse_ini(text, "model file");
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  try {
    SectionReader meta(tree, "model");
    int version = 0;
    meta.read("format_version", version);
    meta.finish();
    if (version != kModelFormatVersion) {
      throw ConfigError("model.format_version", "unsupported version " + std::to_string(version));
    }

    BasisConfig cfg;
    std::vector<double> state_box, feature_box;
    SectionReader basis(tree, "basis");
    basis.read("order", cfg.order);
    basis.read("state_dim", cfg.state_dim);
    basis.read("feature_dim", cfg.feature_dim);
    basis.read("normalize", cfg.normalize);
    basis.read("state_box", state_box);
    basis.read("feature_box", feature_box);
    basis.finish();
    auto unflatten = [](const std::vector<double>& flat, const char* field) {
      if (flat.size() % 2 != 0) throw ConfigError(field, "needs lo, hi pairs");
      std::vector<Interval> out;
      for (std::size_t i = 0; i < flat.size(); i += 2) out.push_back({flat[i], flat[i + 1]});
      return out;
    };
    cfg.state_box = unflatten(state_box, "basis.state_box");
    cfg.feature_box = unflatten(feature_box, "basis.feature_box");

    Provenance prov;
    SectionReader p(tree, "provenance");
    p.read("seed", prov.seed);
    p.read("delta", prov.delta);
    p.read("dataset_digest", prov.dataset_digest);
    p.read("created", prov.created);
    p.finish();

    SectionReader th(tree, "theta");
    int rows = 0, cols = 0;
    th.read("rows", rows);
    th.read("cols", cols);
    if (rows < 1 || cols < 1) throw ConfigError("theta.rows", "missing theta shape");
    Eigen::MatrixXd theta(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const std::string key = "row_" + std::to_string(r + 1);
      std::vector<double> values;
      th.read(key, values);
      if (static_cast<int>(values.size()) != cols) {
        throw ConfigError(th.field(key), "expected " + std::to_string(cols) + " values");
      }
      for (int c = 0; c < cols; ++c) theta(r, c) = values[static_cast<std::size_t>(c)];
    }
    th.finish();
    if (!theta.allFinite()) throw ConfigError("theta", "non-finite coefficient");
    return {SeparatedModel(std::move(cfg), std::move(theta)), prov};
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const SeparatedModel& model,
                const Provenance& provenance) {
  write_file_atomic(path, model_to_string(model, provenance));
}

ModelFile load_model(const std::filesystem::path& path) { return model_from_string(read_text(path)); }

// -- CSV -------------------------------------------------------------------

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (field_started || !record.empty()) {
      end_field();
      records.push_back(std::move(record));
    }
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"': quoted = true; field_started = true; break;
      case ',': end_field(); field_started = true; break;
      case '\r': break;
      case '\n': end_record(); break;
      default: field += ch; field_started = true;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  end_record();
  CsvTable table;
  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      throw DataError("csv: record " + std::to_string(i) + " has " +
                      std::to_string(records[i].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") != std::string::npos) {
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += f;
    }
  }
  out += "\r\n";
  return out;
}

TrajectoryDataset parse_dataset(const CsvTable& table) {
  const auto& h = table.header;
  if (h.empty() || h[0] != "t") throw DataError("dataset: first column must be 't'");
  auto count_prefix = [&](std::size_t start, const std::string& prefix) {
    std::size_t k = 0;
    while (start + k < h.size() && h[start + k] == prefix + std::to_string(k + 1)) ++k;
    return k;
  };
  const std::size_t n = count_prefix(1, "x_");
  if (n == 0) throw DataError("dataset: need columns x_1..x_n after t");
  const std::size_t o = count_prefix(1 + n, "u_");
  const std::size_t nd = count_prefix(1 + n + o, "delta_");
  if (nd != 0 && nd != n) throw DataError("dataset: need delta_1..delta_n for all n states");
  if (1 + n + o + nd != h.size()) {
    throw DataError("dataset: unexpected column '" + h[1 + n + o + nd] + "'");
  }

  TrajectoryDataset data;
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  data.t.resize(table.rows.size());
  data.x.resize(rows, static_cast<Eigen::Index>(n));
  data.u.resize(rows, static_cast<Eigen::Index>(o));
  if (nd) data.delta = Eigen::MatrixXd(rows, static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& rec = table.rows[static_cast<std::size_t>(r)];
    auto num = [&](std::size_t c) {
      try {
        return parse_double(rec[c], h[c]);
      } catch (const ConfigError&) {
        throw DataError("dataset: row " + std::to_string(r + 1) + ", column " + h[c] +
                        ": not a number");
      }
    };
    data.t[static_cast<std::size_t>(r)] = num(0);
    for (std::size_t i = 0; i < n; ++i) data.x(r, static_cast<Eigen::Index>(i)) = num(1 + i);
    for (std::size_t i = 0; i < o; ++i) data.u(r, static_cast<Eigen::Index>(i)) = num(1 + n + i);
    for (std::size_t i = 0; i < nd; ++i) {
      (*data.delta)(r, static_cast<Eigen::Index>(i)) = num(1 + n + o + i);
    }
  }
  data.validate(false, false);
  return data;
}

TrajectoryDataset read_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_csv(path));
}

std::string dataset_to_csv(const TrajectoryDataset& data) {
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= data.state_dim(); ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= data.input_dim(); ++i) header.push_back("u_" + std::to_string(i));
  if (data.delta) {
    for (int i = 1; i <= data.state_dim(); ++i) header.push_back("delta_" + std::to_string(i));
  }
  std::string out = csv_line(header);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    std::vector<std::string> f{format_double(data.t[r])};
    for (Eigen::Index i = 0; i < data.x.cols(); ++i) f.push_back(format_double(data.x(row, i)));
    for (Eigen::Index i = 0; i < data.u.cols(); ++i) f.push_back(format_double(data.u(row, i)));
    if (data.delta) {
      for (Eigen::Index i = 0; i < data.delta->cols(); ++i) {
        f.push_back(format_double((*data.delta)(row, i)));
      }
    }
    out += csv_line(f);
  }
  return out;
}

std::string dataset_digest(const TrajectoryDataset& data) {
  return fmt::format("fnv1a64:{:016x}", fnv1a(dataset_to_csv(data)));
}

const std::vector<std::string>& scenario_columns() {
  static const std::vector<std::string> cols{"t", "eta", "eta_d", "v", "u",
                                             "delta_true", "delta_hat", "mode"};
  return cols;
}

std::string scenario_to_csv(const ScenarioResult& r) {
  std::string out = csv_line(scenario_columns());
  const std::string mode(to_string(r.mode));
  for (std::size_t i = 0; i < r.size(); ++i) {
    out += csv_line({format_double(r.t[i]), format_double(r.eta[i]), format_double(r.eta_d[i]),
                     format_double(r.v[i]), format_double(r.u[i]), format_double(r.delta_true[i]),
                     format_double(r.delta_hat[i]), mode});
  }
  return out;
}

const std::vector<std::string>& fit_report_columns() {
  static const std::vector<std::string> cols{
      "source", "order", "delta", "seed", "samples", "train_mae", "test_mae",
      "gram_condition", "residual_sup", "theta_error"};
  return cols;
}

std::vector<std::string> fit_report_row(const std::string& source, int order, double delta,
                                        std::uint64_t seed, std::size_t samples,
                                        const FitReport& report) {
  return {source,
          std::to_string(order),
          format_double(delta),
          std::to_string(seed),
          std::to_string(samples),
          format_double(report.train_mae),
          report.test_mae ? format_double(*report.test_mae) : "",
          format_double(report.gram_condition),
          format_double(report.residual_sup),
          report.theta_error ? format_double(*report.theta_error) : ""};
}

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{"function", "order", "noise_variance", "repeats",
                                             "seed", "train_mae", "test_mae", "gram_condition",
                                             "status"};
  return cols;
}

std::vector<std::string> sweep_row(const SweepCell& cell, int repeats, std::uint64_t seed) {
  std::vector<std::string> row{cell.key.function, std::to_string(cell.key.order),
                               format_double(cell.key.noise_variance), std::to_string(repeats),
                               std::to_string(seed)};
  if (cell.report) {
    row.push_back(format_double(cell.report->train_mae));
    row.push_back(format_double(cell.report->test_mae.value_or(NAN)));
    row.push_back(format_double(cell.report->gram_condition));
    row.push_back("ok");
  } else {
    row.insert(row.end(), {"", "", "", "error: " + cell.error});
  }
  return row;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"seed", "noise_variance"};
    for (const char* mode : {"none", "ndo", "hodo"}) {
      for (const char* metric :
           {"tracking_mae", "estimation_mae", "steady_estimation_mae", "decay_rate"}) {
        c.push_back(std::string(metric) + "_" + mode);
      }
    }
    return c;
  }();
  return cols;
}

std::vector<std::string> metrics_row(std::uint64_t seed, double noise_variance,
                                     const std::vector<ScenarioResult>& results) {
  std::vector<std::string> row{std::to_string(seed), format_double(noise_variance)};
  for (auto mode : {Compensation::None, Compensation::Ndo, Compensation::Hodo}) {
    const ScenarioResult* match = nullptr;
    for (const auto& r : results) {
      if (r.mode == mode) match = &r;
    }
    if (match) {
      const auto& m = match->metrics;
      row.insert(row.end(), {format_double(m.tracking_mae), format_double(m.estimation_mae),
                             format_double(m.steady_estimation_mae), format_double(m.decay_rate)});
    } else {
      row.insert(row.end(), {"", "", "", ""});
    }
  }
  return row;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void append_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::string existing;
  if (std::filesystem::exists(path)) existing = read_text(path);
  if (!existing.empty()) {
    const CsvTable table = parse_csv(existing);
    if (table.header != header) {
      throw DataError(path.string() + ": header does not match schema v" +
                      std::to_string(kCsvSchemaVersion));
    }
  } else {
    existing = csv_line(header);
  }
  for (const auto& row : rows) existing += csv_line(row);
  write_file_atomic(path, existing);
}

}  // namespace cdo::io
