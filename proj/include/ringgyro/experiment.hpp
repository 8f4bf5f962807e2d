#pragma once

// Batch experiments: YAML configuration, validation diagnostics, sweep
// execution on a worker pool, and CSV / gnuplot output.
//
// Only this header depends on yaml-cpp.

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ringgyro/ringgyro.hpp"

namespace ringgyro {

enum class CommandKind { kRunScheme, kLossSweep, kFidelitySweep, kSensitivity, kFluctuationStudy };

inline const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::kRunScheme: return "run-scheme";
    case CommandKind::kLossSweep: return "loss-sweep";
    case CommandKind::kFidelitySweep: return "fidelity-sweep";
    case CommandKind::kSensitivity: return "sensitivity";
    case CommandKind::kFluctuationStudy: return "fluctuation-study";
  }
  return "unknown";
}

inline bool is_sweep(CommandKind k) {
  return k == CommandKind::kLossSweep || k == CommandKind::kFidelitySweep || k == CommandKind::kFluctuationStudy;
}

struct ExperimentConfig {
  CommandKind command = CommandKind::kRunScheme;
  SchemeConfig scheme;

  // sweep grids
  std::vector<int> schemes;        // loss-sweep; empty means scheme.scheme
  std::vector<double> eta;         // loss-sweep
  std::vector<int> atoms;          // loss-sweep and fidelity-sweep; empty means scheme.atoms
  std::vector<double> integration_times;  // sensitivity [s]
  std::vector<double> mean_atoms;  // fluctuation-study
  std::optional<double> sigma;
  int samples = 200;
  double phi = 0.3;
  SectorConvention convention = SectorConvention::kBlockAdditive;
  double threshold = 0.99;
  Imperfections imperfections{};
  double offset_time = constants::kOffsetPulseTime;

  std::string out_dir = ".";
  std::string name;  // file stem; defaults to the command name
  std::uint64_t seed = 20100315;

  std::string stem() const { return name.empty() ? to_string(command) : name; }
};

// Parse failure: malformed YAML, unknown key or wrong value type. Exit 2.
class ConfigParseError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string where(const YAML::Node& n, const std::string& path) {
  const auto m = n.Mark();
  std::string s = path;
  if (m.line >= 0) s = "line " + std::to_string(m.line + 1) + ": " + path;
  return s;
}

template <class T>
T read_scalar(const YAML::Node& n, const std::string& path, const char* type) {
  if (!n.IsScalar()) throw ConfigParseError(where(n, path) + ": expected " + type);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigParseError(where(n, path) + ": expected " + type + ", got '" + n.Scalar() + "'");
  }
}

inline double read_double(const YAML::Node& n, const std::string& path) { return read_scalar<double>(n, path, "a number"); }
inline int read_int(const YAML::Node& n, const std::string& path) { return read_scalar<int>(n, path, "an integer"); }
inline bool read_bool(const YAML::Node& n, const std::string& path) { return read_scalar<bool>(n, path, "true or false"); }
inline std::string read_string(const YAML::Node& n, const std::string& path) {
  return read_scalar<std::string>(n, path, "a string");
}

inline void require_map(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed) {
  if (!n.IsMap()) throw ConfigParseError(where(n, path) + ": expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigParseError(where(kv.first, path.empty() ? key : path + "." + key) + ": unknown field");
    }
  }
}

// A list [a, b, ...] or a range {start, stop, step} with inclusive stop.
template <class T>
std::vector<T> read_grid(const YAML::Node& n, const std::string& path) {
  std::vector<T> out;
  auto read = [&](const YAML::Node& x, const std::string& p) {
    if constexpr (std::is_same_v<T, int>) {
      return read_int(x, p);
    } else {
      return read_double(x, p);
    }
  };
  if (n.IsSequence()) {
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(read(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  if (n.IsScalar()) return {read(n, path)};
  require_map(n, path, {"start", "stop", "step"});
  for (const char* k : {"start", "stop", "step"}) {
    if (!n[k]) throw ConfigParseError(where(n, path) + ": range needs start, stop and step");
  }
  const double start = read_double(n["start"], path + ".start");
  const double stop = read_double(n["stop"], path + ".stop");
  const double step = read_double(n["step"], path + ".step");
  if (!(step > 0.0) || stop < start) throw ConfigParseError(where(n, path) + ": range needs step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 100000) throw ConfigParseError(where(n, path) + ": range has too many points");
  for (long i = 0; i < count; ++i) {
    const double v = start + static_cast<double>(i) * step;
    if constexpr (std::is_same_v<T, int>) {
      out.push_back(static_cast<int>(std::lround(v)));
    } else {
      // Snap to the step's decimal grid so 0.5 + 9 * 0.05 prints as 0.95.
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  }
  return out;
}

inline CommandKind parse_command(const YAML::Node& n) {
  const auto s = read_string(n, "command");
  for (auto k : {CommandKind::kRunScheme, CommandKind::kLossSweep, CommandKind::kFidelitySweep, CommandKind::kSensitivity,
                 CommandKind::kFluctuationStudy}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigParseError(where(n, "command") + ": unknown command '" + s + "'");
}

inline void parse_scheme(const YAML::Node& n, SchemeConfig& c) {
  require_map(n, "scheme",
              {"id", "atoms", "coupling_hz", "theta_rad", "omega_rad_s", "t_omega_s", "circumference_m", "atom_mass_kg",
               "qbs", "qbs_interaction_hz", "qbs_ratio", "detection_hold", "detection_interaction_hz"});
  if (n["id"]) c.scheme = read_int(n["id"], "scheme.id");
  if (n["atoms"]) c.atoms = read_int(n["atoms"], "scheme.atoms");
  if (n["coupling_hz"]) c.coupling = read_double(n["coupling_hz"], "scheme.coupling_hz");
  if (n["t_omega_s"]) c.t_omega = read_double(n["t_omega_s"], "scheme.t_omega_s");
  if (n["circumference_m"]) c.circumference = read_double(n["circumference_m"], "scheme.circumference_m");
  if (n["atom_mass_kg"]) c.atom_mass = read_double(n["atom_mass_kg"], "scheme.atom_mass_kg");
  if (n["theta_rad"] && n["omega_rad_s"]) {
    throw ConfigParseError(where(n["omega_rad_s"], "scheme.omega_rad_s") + ": give theta_rad or omega_rad_s, not both");
  }
  if (n["theta_rad"]) c.theta = read_double(n["theta_rad"], "scheme.theta_rad");
  if (n["omega_rad_s"]) {
    const double omega = read_double(n["omega_rad_s"], "scheme.omega_rad_s");
    if (c.circumference > 0.0 && c.atom_mass > 0.0) c.theta = theta_from_omega(omega, c.circumference, c.atom_mass);
  }
  if (n["qbs"]) {
    const auto q = read_string(n["qbs"], "scheme.qbs");
    if (q == "ideal") {
      c.qbs = QbsVariant::kIdeal;
    } else if (q == "physical") {
      c.qbs = QbsVariant::kPhysical;
    } else {
      throw ConfigParseError(where(n["qbs"], "scheme.qbs") + ": expected 'ideal' or 'physical'");
    }
  }
  if (n["qbs_interaction_hz"]) c.qbs_interaction = read_double(n["qbs_interaction_hz"], "scheme.qbs_interaction_hz");
  if (n["qbs_ratio"]) c.qbs_ratio = read_int(n["qbs_ratio"], "scheme.qbs_ratio");
  if (n["detection_hold"]) c.detection_hold = read_bool(n["detection_hold"], "scheme.detection_hold");
  if (n["detection_interaction_hz"]) {
    c.detection_interaction = read_double(n["detection_interaction_hz"], "scheme.detection_interaction_hz");
  }
}

inline void parse_sweep(const YAML::Node& n, ExperimentConfig& c) {
  require_map(n, "sweep",
              {"schemes", "eta", "atoms", "integration_time_s", "mean_atoms", "sigma", "samples", "phi_rad", "convention",
               "threshold", "imperfections", "offset_time_s"});
  if (n["schemes"]) c.schemes = read_grid<int>(n["schemes"], "sweep.schemes");
  if (n["eta"]) c.eta = read_grid<double>(n["eta"], "sweep.eta");
  if (n["atoms"]) c.atoms = read_grid<int>(n["atoms"], "sweep.atoms");
  if (n["integration_time_s"]) c.integration_times = read_grid<double>(n["integration_time_s"], "sweep.integration_time_s");
  if (n["mean_atoms"]) c.mean_atoms = read_grid<double>(n["mean_atoms"], "sweep.mean_atoms");
  if (n["sigma"]) c.sigma = read_double(n["sigma"], "sweep.sigma");
  if (n["samples"]) c.samples = read_int(n["samples"], "sweep.samples");
  if (n["phi_rad"]) c.phi = read_double(n["phi_rad"], "sweep.phi_rad");
  if (n["convention"]) {
    const auto s = read_string(n["convention"], "sweep.convention");
    if (s == "block-additive") {
      c.convention = SectorConvention::kBlockAdditive;
    } else if (s == "mix-within-loss") {
      c.convention = SectorConvention::kMixWithinLoss;
    } else {
      throw ConfigParseError(where(n["convention"], "sweep.convention") +
                             ": expected 'block-additive' or 'mix-within-loss'");
    }
  }
  if (n["threshold"]) c.threshold = read_double(n["threshold"], "sweep.threshold");
  if (n["offset_time_s"]) c.offset_time = read_double(n["offset_time_s"], "sweep.offset_time_s");
  if (const auto im = n["imperfections"]) {
    require_map(im, "sweep.imperfections", {"v_high_hz", "v_low_hz", "j_low_hz"});
    if (im["v_high_hz"]) c.imperfections.v_high = read_double(im["v_high_hz"], "sweep.imperfections.v_high_hz");
    if (im["v_low_hz"]) c.imperfections.v_low = read_double(im["v_low_hz"], "sweep.imperfections.v_low_hz");
    if (im["j_low_hz"]) c.imperfections.j_low = read_double(im["j_low_hz"], "sweep.imperfections.j_low_hz");
  }
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigParseError("line 1: top level must be a mapping");
  detail::require_map(root, "", {"command", "seed", "output", "scheme", "sweep"});
  if (!root["command"]) throw ConfigParseError("command: missing required field");
  ExperimentConfig c;
  c.command = detail::parse_command(root["command"]);
  if (root["seed"]) c.seed = detail::read_scalar<std::uint64_t>(root["seed"], "seed", "an unsigned integer");
  if (const auto out = root["output"]) {
    detail::require_map(out, "output", {"dir", "name"});
    if (out["dir"]) c.out_dir = detail::read_string(out["dir"], "output.dir");
    if (out["name"]) c.name = detail::read_string(out["name"], "output.name");
  }
  if (root["scheme"]) detail::parse_scheme(root["scheme"], c.scheme);
  if (root["sweep"]) detail::parse_sweep(root["sweep"], c);
  return c;
}

inline ExperimentConfig parse_experiment_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigParseError("line " + std::to_string(e.mark.line + 1) + ", column " + std::to_string(e.mark.column + 1) +
                           ": " + e.msg);
  }
  return parse_experiment(root);
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path + ": cannot read file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_string(ss.str());
}

// ---------------------------------------------------------------------------
// Validation

/// Every violated invariant as "field.path: message". Never runs simulations.
inline std::vector<std::string> validate_experiment(const ExperimentConfig& c) {
  std::vector<std::string> out;
  auto add = [&](const std::string& path, const std::string& msg) { out.push_back(path + ": " + msg); };

  const auto& s = c.scheme;
  const std::vector<int> schemes = c.schemes.empty() ? std::vector<int>{s.scheme} : c.schemes;
  const std::vector<int> atoms = c.atoms.empty() ? std::vector<int>{s.atoms} : c.atoms;

  if (c.command == CommandKind::kRunScheme) {
    for (const auto& d : s.diagnostics()) {
      std::string path = "scheme";
      if (d.find("N ") == 0) path = "scheme.atoms";
      else if (d.find("scheme") == 0) path = "scheme.id";
      else if (d.find("J ") == 0) path = "scheme.coupling_hz";
      else if (d.find("theta") == 0) path = "scheme.theta_rad";
      else if (d.find("t_omega") == 0) path = "scheme.t_omega_s";
      else if (d.find("ring") == 0) path = "scheme.circumference_m";
      else if (d.find("atom mass") == 0) path = "scheme.atom_mass_kg";
      else if (d.find("physical QBS") == 0) path = "scheme.qbs_interaction_hz";
      else if (d.find("QBS") == 0) path = "scheme.qbs_ratio";
      else if (d.find("detection") == 0) path = "scheme.detection_interaction_hz";
      add(path, d);
    }
  } else {
    if (!(s.coupling > 0.0) || !std::isfinite(s.coupling)) add("scheme.coupling_hz", "J must be positive and finite");
    if (!(s.t_omega > 0.0) || !std::isfinite(s.t_omega)) add("scheme.t_omega_s", "t_omega must be positive");
    if (!std::isfinite(s.theta)) add("scheme.theta_rad", "theta must be finite");
    if (!(s.circumference > 0.0)) add("scheme.circumference_m", "ring circumference must be positive");
    if (!(s.atom_mass > 0.0)) add("scheme.atom_mass_kg", "atom mass must be positive");
  }

  switch (c.command) {
    case CommandKind::kRunScheme:
      break;
    case CommandKind::kLossSweep:
      if (c.eta.empty()) add("sweep.eta", "grid must be non-empty");
      for (std::size_t i = 0; i < c.eta.size(); ++i) {
        if (!(c.eta[i] >= 0.0 && c.eta[i] <= 1.0)) add("sweep.eta[" + std::to_string(i) + "]", "eta out of [0,1]");
      }
      for (std::size_t i = 0; i < schemes.size(); ++i) {
        if (schemes[i] < 1 || schemes[i] > 3) add("sweep.schemes[" + std::to_string(i) + "]", "scheme must be 1, 2 or 3");
      }
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string path = c.atoms.empty() ? "scheme.atoms" : "sweep.atoms[" + std::to_string(i) + "]";
        if (atoms[i] < 1) add(path, "N must be at least 1");
        if (atoms[i] % 2 != 0 && std::count(schemes.begin(), schemes.end(), 2)) add(path, "N must be even for scheme 2");
      }
      if (!std::isfinite(c.phi)) add("sweep.phi_rad", "phi must be finite");
      break;
    case CommandKind::kFidelitySweep:
      if (c.atoms.empty()) add("sweep.atoms", "grid must be non-empty");
      for (std::size_t i = 0; i < c.atoms.size(); ++i) {
        const std::string path = "sweep.atoms[" + std::to_string(i) + "]";
        if (c.atoms[i] < 2) add(path, "N must be at least 2");
        if (c.atoms[i] % 2 != 0) add(path, "N must be even for scheme 2");
        if (c.atoms[i] > 80) add(path, "N above 80 exceeds the supported basis size");
      }
      if (!(c.threshold > 0.0 && c.threshold < 1.0)) add("sweep.threshold", "threshold must lie in (0,1)");
      if (!(c.offset_time > 0.0)) add("sweep.offset_time_s", "offset time must be positive");
      if (c.imperfections.v_high < 0.0) add("sweep.imperfections.v_high_hz", "must be non-negative");
      if (c.imperfections.v_low < 0.0) add("sweep.imperfections.v_low_hz", "must be non-negative");
      if (c.imperfections.j_low < 0.0) add("sweep.imperfections.j_low_hz", "must be non-negative");
      break;
    case CommandKind::kSensitivity:
      if (s.atoms < 1) add("scheme.atoms", "N must be at least 1");
      if (c.integration_times.empty()) add("sweep.integration_time_s", "grid must be non-empty");
      for (std::size_t i = 0; i < c.integration_times.size(); ++i) {
        const double tau = c.integration_times[i];
        const double runs = tau / s.t_omega;
        if (!(tau > 0.0) || std::abs(runs - std::round(runs)) > 1e-9 * std::max(1.0, runs) || std::round(runs) < 1.0) {
          add("sweep.integration_time_s[" + std::to_string(i) + "]", "must be a positive whole multiple of t_omega");
        }
      }
      break;
    case CommandKind::kFluctuationStudy:
      if (s.scheme < 1 || s.scheme > 3) add("scheme.id", "scheme must be 1, 2 or 3");
      if (c.mean_atoms.empty()) add("sweep.mean_atoms", "grid must be non-empty");
      for (std::size_t i = 0; i < c.mean_atoms.size(); ++i) {
        if (!(c.mean_atoms[i] >= 2.0) || c.mean_atoms[i] > 60.0) {
          add("sweep.mean_atoms[" + std::to_string(i) + "]", "mean N must lie in [2, 60]");
        }
      }
      if (c.sigma && !(*c.sigma >= 0.0)) add("sweep.sigma", "sigma must be non-negative");
      if (c.samples < 1) add("sweep.samples", "sample count must be positive");
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Results

inline constexpr int kCsvFormatVersion = 1;
inline constexpr const char* kCsvHeader =
    "command,scheme,N,eta,theta_rad,J_hz,t_omega_s,qfi,delta_phi,delta_theta,delta_omega,fidelity,extra";

struct ResultRecord {
  std::string command;
  int scheme = 0;
  int atoms = 0;
  double eta = 1.0;
  double theta = 0.0;
  double coupling = 0.0;
  double t_omega = 0.0;
  double qfi = 0.0;
  double delta_phi = 0.0;
  double delta_theta = 0.0;
  double delta_omega = 0.0;
  std::optional<double> fidelity;
  std::vector<std::pair<std::string, std::string>> extra;

  bool finite() const {
    for (double v : {eta, theta, coupling, t_omega, qfi, delta_phi, delta_theta, delta_omega}) {
      if (!std::isfinite(v)) return false;
    }
    return !fidelity || std::isfinite(*fidelity);
  }
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string to_csv_row(const ResultRecord& r) {
  std::string extra;
  for (const auto& [k, v] : r.extra) {
    if (!extra.empty()) extra += ';';
    extra += k + "=" + v;
  }
  std::string row = r.command + "," + std::to_string(r.scheme) + "," + std::to_string(r.atoms);
  for (double v : {r.eta, r.theta, r.coupling, r.t_omega, r.qfi, r.delta_phi, r.delta_theta, r.delta_omega}) {
    row += "," + format_number(v);
  }
  row += "," + (r.fidelity ? format_number(*r.fidelity) : std::string());
  row += "," + extra;
  return row;
}

inline std::string to_csv(const std::vector<ResultRecord>& rows) {
  std::string out = "# format_version=" + std::to_string(kCsvFormatVersion) + "\n";
  out += kCsvHeader;
  out += '\n';
  for (const auto& r : rows) out += to_csv_row(r) + '\n';
  return out;
}

// Non-finite value in a result row. Exit 4.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Execution

/// Runs f(0..n-1) on up to `threads` workers; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& f) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

namespace detail {

inline ResultRecord base_record(const ExperimentConfig& c, int scheme, int atoms, double eta) {
  ResultRecord r;
  r.command = to_string(c.command);
  r.scheme = scheme;
  r.atoms = atoms;
  r.eta = eta;
  r.theta = c.scheme.theta;
  r.coupling = c.scheme.coupling;
  r.t_omega = c.scheme.t_omega;
  return r;
}

inline void fill_precision(ResultRecord& r, const PrecisionReport& p) {
  r.qfi = p.fisher;
  r.delta_phi = p.delta_phi;
  r.delta_theta = p.delta_theta;
  r.delta_omega = p.delta_omega;
}

inline PrecisionReport report_for(const ExperimentConfig& c, double fisher, int scheme, int atoms, double eta) {
  const auto& s = c.scheme;
  return make_precision_report(fisher, scheme, atoms, eta, s.coupling, s.t_omega, s.theta, s.circumference, s.atom_mass);
}

inline std::vector<ResultRecord> run_scheme_rows(const ExperimentConfig& c) {
  const auto result = run_scheme(c.scheme);
  const int n = c.scheme.atoms;
  auto r = base_record(c, c.scheme.scheme, n, 1.0);
  fill_precision(r, report_for(c, scheme_qfi(result), c.scheme.scheme, n, 1.0));
  r.extra.emplace_back("phi", format_number(result.phi));
  r.extra.emplace_back("phi_extracted", format_number(result.phi_extracted));
  r.extra.emplace_back("P0", format_number(result.distribution.probability(initial_occupation(c.scheme))));
  for (int site = 0; site < 3; ++site) {
    r.extra.emplace_back("mean_n" + std::to_string(site), format_number(result.distribution.mean(site)));
  }
  if (result.qbs) r.extra.emplace_back("noon_fidelity", format_number(result.qbs->noon_fidelity));
  return {r};
}

inline std::vector<ResultRecord> loss_sweep_rows(const ExperimentConfig& c, unsigned threads) {
  const std::vector<int> schemes = c.schemes.empty() ? std::vector<int>{c.scheme.scheme} : c.schemes;
  const std::vector<int> atoms = c.atoms.empty() ? std::vector<int>{c.scheme.atoms} : c.atoms;
  struct Point {
    int scheme;
    int atoms;
    double eta;
  };
  std::vector<Point> grid;
  for (int s : schemes) {
    for (int n : atoms) {
      for (double e : c.eta) grid.push_back({s, n, e});
    }
  }
  return parallel_map<ResultRecord>(grid.size(), threads, [&](std::size_t i) {
    const auto& p = grid[i];
    const auto coeffs = scheme_coefficients(input_state_for_scheme(p.scheme), p.atoms, c.phi);
    const double f = qfi_with_loss_value(coeffs, p.eta, c.convention);
    auto r = base_record(c, p.scheme, p.atoms, p.eta);
    if (f > 0.0) {
      fill_precision(r, report_for(c, f, p.scheme, p.atoms, p.eta));
    } else {
      r.qfi = 0.0;
      r.delta_phi = r.delta_theta = r.delta_omega = std::numeric_limits<double>::infinity();
    }
    r.extra.emplace_back("phi", format_number(c.phi));
    r.extra.emplace_back("convention",
                         c.convention == SectorConvention::kBlockAdditive ? "block-additive" : "mix-within-loss");
    return r;
  });
}

inline FidelitySweepConfig fidelity_config(const ExperimentConfig& c) {
  FidelitySweepConfig f;
  f.atoms = c.atoms;
  f.theta = c.scheme.theta;
  f.t_omega = c.scheme.t_omega;
  f.j_high = c.scheme.coupling;
  f.imperfections = c.imperfections;
  f.offset_time = c.offset_time;
  f.threshold = c.threshold;
  return f;
}

inline std::vector<ResultRecord> fidelity_sweep_rows(const ExperimentConfig& c, unsigned threads) {
  const auto fc = fidelity_config(c);
  // Largest bases first so the pool stays busy; output order is restored by index.
  std::vector<std::size_t> order(c.atoms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.atoms[a] > c.atoms[b]; });
  const auto values = parallel_map<double>(order.size(), threads,
                                           [&](std::size_t k) { return interaction_fidelity(c.atoms[order[k]], fc); });
  std::vector<std::pair<int, double>> points(c.atoms.size());
  for (std::size_t k = 0; k < order.size(); ++k) points[order[k]] = {c.atoms[order[k]], values[k]};
  const auto curve = summarize_fidelity(points, c.threshold);

  std::vector<ResultRecord> rows;
  for (const auto& [n, fid] : curve.points) {
    auto r = base_record(c, 2, n, 1.0);
    const double f = qfi_with_loss_value(scheme_coefficients(InputState::kBat, n), 1.0);
    fill_precision(r, report_for(c, f, 2, n, 1.0));
    r.fidelity = fid;
    r.extra.emplace_back("threshold", format_number(c.threshold));
    if (curve.threshold_atoms && *curve.threshold_atoms == n) r.extra.emplace_back("first_below_threshold", "1");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRecord> sensitivity_rows(const ExperimentConfig& c) {
  const auto& s = c.scheme;
  std::vector<ResultRecord> rows;
  for (double tau : c.integration_times) {
    const auto rep = sensitivity(s.coupling, s.atoms, s.t_omega, s.circumference, s.atom_mass, tau);
    auto r = base_record(c, 2, s.atoms, 1.0);
    // S is the large-N bat bound: delta phi = sqrt2 / N, i.e. F = N^2 / 2.
    r.qfi = 0.5 * s.atoms * s.atoms;
    r.delta_phi = 1.0 / std::sqrt(r.qfi);
    r.delta_omega = rep.delta_omega;
    r.delta_theta = theta_from_omega(rep.delta_omega, s.circumference, s.atom_mass);
    r.extra.emplace_back("S_rad_s_per_sqrt_hz", format_number(rep.sensitivity));
    r.extra.emplace_back("tau_s", format_number(tau));
    r.extra.emplace_back("runs", std::to_string(rep.runs));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRecord> fluctuation_rows(const ExperimentConfig& c, unsigned threads) {
  FluctuationConfig base;
  base.scheme = c.scheme.scheme;
  base.sigma = c.sigma;
  base.samples = c.samples;
  base.coupling = c.scheme.coupling;
  base.t_omega = c.scheme.t_omega;
  base.theta = c.scheme.theta;
  // Point k uses seed + k, which matches a single study over the whole grid.
  const auto points = parallel_map<FluctuationPoint>(c.mean_atoms.size(), threads, [&](std::size_t k) {
    FluctuationConfig one = base;
    one.mean_atoms = {c.mean_atoms[k]};
    one.seed = c.seed + k;
    return number_fluctuation_study(one).points.front();
  });
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : points) {
    xs.push_back(p.mean_atoms);
    ys.push_back(p.delta_phi);
  }
  const double exponent = xs.size() >= 2 ? fit_log_slope(xs, ys) : 0.0;
  std::vector<ResultRecord> rows;
  for (const auto& p : points) {
    const int n = static_cast<int>(std::lround(p.mean_atoms));
    auto r = base_record(c, c.scheme.scheme, n, 1.0);
    fill_precision(r, report_for(c, p.mean_fisher, c.scheme.scheme, n, 1.0));
    r.extra.emplace_back("mean_atoms", format_number(p.mean_atoms));
    r.extra.emplace_back("sigma", format_number(p.sigma));
    r.extra.emplace_back("mean_drawn_atoms", format_number(p.mean_drawn_atoms));
    r.extra.emplace_back("samples", std::to_string(c.samples));
    r.extra.emplace_back("exponent", format_number(exponent));
    r.extra.emplace_back("seed", std::to_string(c.seed));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace detail

/// Runs a validated experiment. Throws NumericFailure if any row is not finite.
inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& c, unsigned threads = 1) {
  std::vector<ResultRecord> rows;
  switch (c.command) {
    case CommandKind::kRunScheme: rows = detail::run_scheme_rows(c); break;
    case CommandKind::kLossSweep: rows = detail::loss_sweep_rows(c, threads); break;
    case CommandKind::kFidelitySweep: rows = detail::fidelity_sweep_rows(c, threads); break;
    case CommandKind::kSensitivity: rows = detail::sensitivity_rows(c); break;
    case CommandKind::kFluctuationStudy: rows = detail::fluctuation_rows(c, threads); break;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].finite()) {
      throw NumericFailure("row " + std::to_string(i + 1) + " (" + rows[i].command + ", scheme " +
                           std::to_string(rows[i].scheme) + ", N=" + std::to_string(rows[i].atoms) +
                           ", eta=" + format_number(rows[i].eta) + ") has a non-finite value");
    }
  }
  return rows;
}

// gnuplot script for the CSV; the x/y column names appear in the axis labels.
inline std::string plot_script(const ExperimentConfig& c, const std::string& csv_name) {
  std::string x;
  std::string y;
  bool by_scheme = false;
  bool log = false;
  switch (c.command) {
    case CommandKind::kLossSweep: x = "eta"; y = "delta_phi"; by_scheme = true; break;
    case CommandKind::kFidelitySweep: x = "N"; y = "fidelity"; break;
    case CommandKind::kFluctuationStudy: x = "N"; y = "delta_phi"; log = true; break;
    default: return {};
  }
  std::string s;
  s += "# columns: x=" + x + " y=" + y + "\n";
  s += "set datafile separator ','\n";
  s += "set datafile commentschars '#'\n";
  s += "set key autotitle columnhead\n";
  s += "set xlabel '" + x + "'\nset ylabel '" + y + "'\n";
  if (log) s += "set logscale xy\n";
  if (c.command == CommandKind::kFidelitySweep) {
    s += "set yrange [*:1.001]\n";
    s += "threshold = " + format_number(c.threshold) + "\n";
  }
  s += "set terminal pngcairo size 800,600\n";
  s += "set output '" + c.stem() + ".png'\n";
  const std::string xcol = "(column('" + x + "'))";
  const std::string ycol = "(column('" + y + "'))";
  if (by_scheme) {
    const std::vector<int> schemes = c.schemes.empty() ? std::vector<int>{c.scheme.scheme} : c.schemes;
    s += "plot ";
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      const auto id = std::to_string(schemes[i]);
      if (i) s += ", \\\n     ";
      s += "'" + csv_name + "' using " + xcol + ":(column('scheme') == " + id + " ? " + ycol +
           " : NaN) with linespoints title 'scheme " + id + "'";
    }
    s += "\n";
  } else if (c.command == CommandKind::kFidelitySweep) {
    s += "plot '" + csv_name + "' using " + xcol + ":" + ycol + " with linespoints title 'fidelity', threshold notitle\n";
  } else {
    s += "plot '" + csv_name + "' using " + xcol + ":" + ycol + " with linespoints title '" + y + "'\n";
  }
  return s;
}

struct Artifacts {
  std::filesystem::path csv;
  std::optional<std::filesystem::path> plot;
};

inline Artifacts write_artifacts(const ExperimentConfig& c, const std::vector<ResultRecord>& rows) {
  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  Artifacts a;
  a.csv = dir / (c.stem() + ".csv");
  {
    std::ofstream out(a.csv, std::ios::binary);
    if (!out) throw Error("cannot write " + a.csv.string());
    out << to_csv(rows);
  }
  if (is_sweep(c.command)) {
    a.plot = dir / (c.stem() + ".gp");
    std::ofstream out(*a.plot, std::ios::binary);
    if (!out) throw Error("cannot write " + a.plot->string());
    out << plot_script(c, a.csv.filename().string());
  }
  return a;
}

}  // namespace ringgyro
