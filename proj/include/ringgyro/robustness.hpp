#pragma once

// Practical limits of the bat-state gyroscope: lattice parameter estimates,
// interaction-induced fidelity loss, metastability, atom-number fluctuations
// and short-time sensitivity.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ringgyro/metrology.hpp"

namespace ringgyro {

struct PhysicalParams {
  double scattering_length = 0.0;  // a_s [m]
  double barrier_height = 0.0;     // V_0 [J]
  double recoil_energy = 0.0;      // E_R [J]
  double wavelength = 0.0;         // lattice light lambda [m]
  double transverse_width = 0.0;   // D [m]
  double atom_mass = constants::kRubidium87Mass;  // kg
};

// E_R = h^2 / (2 m lambda^2)
inline double recoil_energy(double wavelength, double mass) {
  return constants::kPlanck * constants::kPlanck / (2.0 * mass * wavelength * wavelength);
}

// V ~ 2 a_s V_0^{3/4} E_R^{1/4} / (hbar sqrt(lambda D))
inline double estimate_interaction(const PhysicalParams& p) {
  return 2.0 * p.scattering_length * std::pow(p.barrier_height, 0.75) * std::pow(p.recoil_energy, 0.25) /
         (constants::kHbar * std::sqrt(p.wavelength * p.transverse_width));
}

// J ~ E_R/(2 hbar) exp(-(pi^2/4) sqrt(s)) (sqrt(s) + s^{3/2}), s = V_0/E_R
inline double estimate_coupling(double barrier_height, double recoil) {
  const double root = std::sqrt(barrier_height / recoil);
  return recoil / (2.0 * constants::kHbar) * std::exp(-constants::kPi * constants::kPi / 4.0 * root) *
         (root + root * root * root);
}

// V_min ~ 8 eps / N for a persistent current against site disorder eps.
inline double metastability_bound(double disorder, int atoms) {
  if (atoms <= 0) throw ValidationError("N must be positive");
  return 8.0 * disorder / atoms;
}

inline double max_tolerable_disorder(double interaction, int atoms) {
  if (atoms <= 0) throw ValidationError("N must be positive");
  return atoms * interaction / 8.0;
}

struct SensitivityReport {
  double sensitivity = 0.0;  // S [rad s^-1 / sqrt(Hz)]
  long runs = 0;
  double integration_time = 0.0;  // tau [s]
  double delta_omega = 0.0;       // [rad/s]
};

/// S = (h / L^2 m) sqrt3 / (sqrt(2 t_omega) J N) and delta omega = S / sqrt(tau)
/// for tau = n t_omega repeated runs.
inline SensitivityReport sensitivity(double coupling, int atoms, double t_omega, double circumference, double mass,
                                     double integration_time) {
  if (!(coupling > 0.0) || atoms <= 0 || !(t_omega > 0.0) || !(circumference > 0.0) || !(mass > 0.0) ||
      !(integration_time > 0.0)) {
    throw ValidationError("sensitivity inputs must be positive");
  }
  const double runs = integration_time / t_omega;
  const double rounded = std::round(runs);
  if (rounded < 1.0 || std::abs(runs - rounded) > 1e-9 * std::max(1.0, runs)) {
    throw ValidationError("integration time must be a whole number of t_omega runs");
  }
  SensitivityReport r;
  r.sensitivity = constants::kPlanck / (circumference * circumference * mass) * std::sqrt(3.0) /
                  (std::sqrt(2.0 * t_omega) * coupling * atoms);
  r.runs = static_cast<long>(rounded);
  r.integration_time = integration_time;
  r.delta_omega = r.sensitivity / std::sqrt(integration_time);
  return r;
}

// ---------------------------------------------------------------------------
// Interaction-induced fidelity loss of scheme 2

/// Residual interactions and couplings of the non-ideal device.
///
/// "high" refers to the strong-tunnelling configuration (lowered barriers),
/// "low" to raised barriers. A site touching an open link uses v_high,
/// an isolated site uses v_low; closed links carry j_low.
struct Imperfections {
  double v_high = 1e-3;  // Hz
  double v_low = 1e-2;   // Hz
  double j_low = 1e-2;   // Hz

  static Imperfections none() { return {0.0, 0.0, 0.0}; }
};

struct FidelitySweepConfig {
  std::vector<int> atoms;
  double theta = constants::kPi / 100.0;
  double t_omega = 1.0;
  double j_high = 10.0;
  Imperfections imperfections{};
  double offset_time = constants::kOffsetPulseTime;
  double threshold = 0.99;
};

struct FidelityCurve {
  std::vector<std::pair<int, double>> points;
  std::optional<int> threshold_atoms;  // first N with fidelity below threshold
};

namespace detail {

// Site-basis Hamiltonians of every segment of the non-ideal scheme-2 run.
struct PerturbedSegments {
  RingParams splitter;
  RingParams tritter;
  RingParams phase_up;
  RingParams phase_down;
  RingParams rotation;
};

inline PerturbedSegments perturbed_segments(const FidelitySweepConfig& c) {
  const auto& x = c.imperfections;
  PerturbedSegments s;
  s.splitter.coupling = {c.j_high, x.j_low, x.j_low};
  s.splitter.interaction = {x.v_high, x.v_high, x.v_low};
  s.tritter = RingParams::uniform(c.j_high, x.v_high);
  // Offset pulse of fixed duration: eps t = 4pi/3 gives +2pi/3 on site two.
  const double eps = 4.0 * constants::kPi / (3.0 * c.offset_time);
  s.phase_up = RingParams::uniform(x.j_low, x.v_low);
  s.phase_up.offset[2] = eps;
  s.phase_down = s.phase_up;
  s.phase_down.offset[2] = -eps;
  s.rotation = RingParams::uniform(c.j_high, x.v_high);
  s.rotation.flux = c.theta;
  return s;
}

}  // namespace detail

/// Scheme-2 state at the end of step 7 simulated entirely in the site basis
/// with residual interactions and couplings in every segment.
inline StateVector perturbed_scheme2_output(int atoms, const FidelitySweepConfig& c) {
  if (atoms < 2 || atoms % 2 != 0) throw ValidationError("scheme 2 needs even N >= 2");
  const auto basis = FockBasis::enumerate(atoms, 3);
  const auto seg = detail::perturbed_segments(c);
  const Propagator splitter(build_bose_hubbard(basis, seg.splitter));
  const Propagator tritter(build_bose_hubbard(basis, seg.tritter));
  const double pi = constants::kPi;
  StateVector s = fock_state(basis, std::vector<int>{atoms / 2, atoms / 2, 0});
  s = splitter.apply(s, pi / (4.0 * c.j_high));
  s = tritter.apply(s, 2.0 * pi / (9.0 * c.j_high));
  s = evolve(s, build_bose_hubbard(basis, seg.phase_up), c.offset_time);
  s = evolve(s, build_bose_hubbard(basis, seg.rotation), c.t_omega);
  s = evolve(s, build_bose_hubbard(basis, seg.phase_down), c.offset_time);
  s = tritter.apply(s, 4.0 * pi / (9.0 * c.j_high));
  return splitter.apply(s, 3.0 * pi / (4.0 * c.j_high));
}

inline SchemeConfig ideal_scheme2_config(int atoms, const FidelitySweepConfig& c) {
  SchemeConfig cfg;
  cfg.scheme = 2;
  cfg.atoms = atoms;
  cfg.coupling = c.j_high;
  cfg.theta = c.theta;
  cfg.t_omega = c.t_omega;
  return cfg;
}

// |<ideal|perturbed>|^2 at the end of step 7.
inline double interaction_fidelity(int atoms, const FidelitySweepConfig& c) {
  const auto ideal = run_scheme2(ideal_scheme2_config(atoms, c));
  const auto real = perturbed_scheme2_output(atoms, c);
  return std::min(1.0, fidelity(ideal.final_state, real));
}

inline FidelityCurve summarize_fidelity(std::vector<std::pair<int, double>> points, double threshold) {
  FidelityCurve curve;
  curve.points = std::move(points);
  for (const auto& [n, f] : curve.points) {
    if (f < threshold) {
      curve.threshold_atoms = n;
      break;
    }
  }
  return curve;
}

inline FidelityCurve interaction_fidelity_sweep(const FidelitySweepConfig& c) {
  std::vector<std::pair<int, double>> points;
  for (int n : c.atoms) {
    if (n < 2 || n % 2 != 0) continue;
    points.emplace_back(n, interaction_fidelity(n, c));
  }
  return summarize_fidelity(std::move(points), c.threshold);
}

// ---------------------------------------------------------------------------
// Atom-number fluctuations between runs

struct FluctuationConfig {
  int scheme = 2;
  std::vector<double> mean_atoms;
  std::optional<double> sigma;  // absent: sqrt(mean)
  int samples = 200;
  std::uint64_t seed = 20100315;
  double coupling = 10.0;
  double t_omega = 1.0;
  double theta = constants::kPi / 100.0;
};

struct FluctuationPoint {
  double mean_atoms = 0.0;
  double sigma = 0.0;
  double mean_fisher = 0.0;
  double delta_phi = 0.0;  // 1/sqrt(mean F_Q): per-run bound with information averaged over runs
  double mean_drawn_atoms = 0.0;
};

struct FluctuationStudy {
  std::vector<FluctuationPoint> points;
  double exponent = 0.0;  // slope of log(delta_phi) against log(mean N)
  std::uint64_t seed = 0;
};

/// Caches the pure-state QFI of a scheme pipeline per atom number.
class SchemeFisherTable {
 public:
  SchemeFisherTable(int scheme, double coupling, double t_omega, double theta)
      : scheme_(scheme), coupling_(coupling), t_omega_(t_omega), theta_(theta) {}

  double operator()(int atoms) {
    auto it = cache_.find(atoms);
    if (it != cache_.end()) return it->second;
    SchemeConfig cfg;
    cfg.scheme = scheme_;
    cfg.atoms = atoms;
    cfg.coupling = coupling_;
    cfg.t_omega = t_omega_;
    cfg.theta = theta_;
    const double f = scheme_qfi(run_scheme(cfg));
    cache_.emplace(atoms, f);
    return f;
  }

 private:
  int scheme_;
  double coupling_;
  double t_omega_;
  double theta_;
  std::map<int, double> cache_;
};

// Least-squares slope of log(y) against log(x).
inline double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Draws N per run from a Gaussian around each mean, rounded to the nearest
/// valid atom number (even for scheme 2) and redrawn below N = 2.
inline FluctuationStudy number_fluctuation_study(const FluctuationConfig& c) {
  if (c.samples < 1 || c.mean_atoms.empty()) throw ValidationError("fluctuation study needs samples and mean atom numbers");
  if (c.sigma && *c.sigma < 0.0) throw ValidationError("sigma must be non-negative");
  SchemeFisherTable fisher(c.scheme, c.coupling, c.t_omega, c.theta);
  FluctuationStudy study;
  study.seed = c.seed;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < c.mean_atoms.size(); ++k) {
    const double mean = c.mean_atoms[k];
    const double sigma = c.sigma ? *c.sigma : std::sqrt(mean);
    std::mt19937_64 rng(c.seed + k);
    std::normal_distribution<double> normal(mean, sigma);
    auto valid = [&](double x) {
      if (c.scheme == 2) return 2 * static_cast<int>(std::lround(x / 2.0));
      return static_cast<int>(std::lround(x));
    };
    double sum_f = 0.0;
    double sum_n = 0.0;
    for (int s = 0; s < c.samples; ++s) {
      int n = valid(sigma > 0.0 ? normal(rng) : mean);
      while (n < 2) n = valid(normal(rng));
      sum_f += fisher(n);
      sum_n += n;
    }
    FluctuationPoint p;
    p.mean_atoms = mean;
    p.sigma = sigma;
    p.mean_fisher = sum_f / c.samples;
    p.delta_phi = crlb(p.mean_fisher);
    p.mean_drawn_atoms = sum_n / c.samples;
    study.points.push_back(p);
    xs.push_back(mean);
    ys.push_back(p.delta_phi);
  }
  study.exponent = xs.size() >= 2 ? fit_log_slope(xs, ys) : 0.0;
  return study;
}

}  // namespace ringgyro
