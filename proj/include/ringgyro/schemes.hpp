#pragma once

// The three rotation-sensing pipelines on the three-site ring.
//
//   scheme 1: |N,0,0>     -> BS  -> split -> rotate -> recombine -> BS^-1
//   scheme 2: |N/2,N/2,0> -> BS  -> split -> rotate -> recombine -> BS^-1
//   scheme 3: |N,0,0>     -> QBS -> split -> rotate -> recombine -> QBS^-1
//
// "split" is tritter followed by a +2pi/3 phase on site two, which leaves the
// atoms in the alpha_{-1} / alpha_{+1} flow modes; "recombine" undoes it.
// The rotation acts in the flow basis, so the pipeline converts with the
// lifted discrete Fourier transform on either side of it.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ringgyro/constants.hpp"
#include "ringgyro/gates.hpp"
#include "ringgyro/mode_transform.hpp"

namespace ringgyro {

// phi = 2 sqrt(3) J t_omega sin(theta/3)
inline double rotation_phase(double coupling, double t_omega, double theta) {
  if (t_omega < 0.0) throw ValidationError("t_omega must be non-negative");
  return 2.0 * std::sqrt(3.0) * coupling * t_omega * std::sin(theta / 3.0);
}

// d phi / d theta, used to convert phase uncertainty into rotation uncertainty.
inline double rotation_phase_slope(double coupling, double t_omega, double theta) {
  return 2.0 / std::sqrt(3.0) * coupling * t_omega * std::cos(theta / 3.0);
}

// omega = h theta / (L^2 m)
inline double omega_from_theta(double theta, double circumference, double mass) {
  if (!(circumference > 0.0) || !(mass > 0.0)) throw ValidationError("ring circumference and atom mass must be positive");
  return constants::kPlanck * theta / (circumference * circumference * mass);
}

inline double theta_from_omega(double omega, double circumference, double mass) {
  if (!(circumference > 0.0) || !(mass > 0.0)) throw ValidationError("ring circumference and atom mass must be positive");
  return omega * circumference * circumference * mass / constants::kPlanck;
}

enum class QbsVariant { kIdeal, kPhysical };

struct SchemeConfig {
  int scheme = 1;
  int atoms = 1;
  double coupling = 10.0;     // J [Hz]
  double theta = 0.0;         // rad
  double t_omega = 1.0;       // s
  double circumference = constants::kDefaultRingCircumference;  // L [m]
  double atom_mass = constants::kRubidium87Mass;                // kg
  QbsVariant qbs = QbsVariant::kIdeal;
  double qbs_interaction = 0.0;  // V on site one during the QBS hold [Hz]
  int qbs_ratio = 2;             // V_0 = qbs_ratio * V_1
  bool detection_hold = false;   // scheme 2: evolve pi/16V with barriers high after step 7
  double detection_interaction = 100.0;  // [Hz]
  bool keep_snapshots = false;

  static SchemeConfig from_omega(int scheme, int atoms, double coupling, double omega, double t_omega,
                                 double circumference, double mass) {
    SchemeConfig c;
    c.scheme = scheme;
    c.atoms = atoms;
    c.coupling = coupling;
    c.theta = theta_from_omega(omega, circumference, mass);
    c.t_omega = t_omega;
    c.circumference = circumference;
    c.atom_mass = mass;
    return c;
  }

  double omega() const { return omega_from_theta(theta, circumference, atom_mass); }

  std::vector<std::string> diagnostics() const {
    std::vector<std::string> out;
    if (scheme < 1 || scheme > 3) out.push_back("scheme must be 1, 2 or 3");
    if (atoms < 1) out.push_back("N must be at least 1");
    if (scheme == 2 && atoms % 2 != 0) out.push_back("N must be even for scheme 2");
    if (!(coupling > 0.0) || !std::isfinite(coupling)) out.push_back("J must be positive and finite");
    if (!std::isfinite(theta)) out.push_back("theta must be finite");
    if (!(t_omega >= 0.0) || !std::isfinite(t_omega)) out.push_back("t_omega must be non-negative");
    if (!(circumference > 0.0)) out.push_back("ring circumference must be positive");
    if (!(atom_mass > 0.0)) out.push_back("atom mass must be positive");
    if (scheme == 3 && qbs == QbsVariant::kPhysical) {
      if (!(qbs_interaction > 0.0)) out.push_back("physical QBS needs V > 0");
      if (qbs_ratio < 1) out.push_back("QBS interaction ratio must be a positive integer");
    }
    if (detection_hold && !(detection_interaction > 0.0)) out.push_back("detection hold needs V > 0");
    return out;
  }

  void validate() const {
    const auto d = diagnostics();
    if (d.empty()) return;
    std::string msg = "invalid scheme configuration:";
    for (const auto& s : d) msg += " " + s + ";";
    if (scheme == 3 && qbs == QbsVariant::kPhysical && !(qbs_interaction > 0.0) && d.size() == 1) {
      throw ConfigurationError(msg);
    }
    throw ValidationError(msg);
  }
};

/// Born-rule probabilities over site occupations.
class DetectionDistribution {
 public:
  explicit DetectionDistribution(const StateVector& state)
      : basis_(state.basis_ptr()), probs_(state.amplitudes().cwiseAbs2()) {}

  const FockBasis& basis() const { return *basis_; }
  const Eigen::VectorXd& probabilities() const { return probs_; }
  double total() const { return probs_.sum(); }

  double probability(std::span<const int> occ) const {
    const auto idx = basis_->find(occ);
    return idx ? probs_[static_cast<Eigen::Index>(*idx)] : 0.0;
  }
  double probability(std::initializer_list<int> occ) const {
    return probability(std::span<const int>(occ.begin(), occ.size()));
  }

  double mean(int site) const {
    double m = 0.0;
    for (std::size_t i = 0; i < basis_->size(); ++i) m += probs_[static_cast<Eigen::Index>(i)] * basis_->count(i, site);
    return m;
  }

  // Entries with probability above `floor`, in basis order.
  std::vector<std::pair<OccupationVector, double>> entries(double floor = 0.0) const {
    std::vector<std::pair<OccupationVector, double>> out;
    for (std::size_t i = 0; i < basis_->size(); ++i) {
      const double p = probs_[static_cast<Eigen::Index>(i)];
      if (p > floor) out.emplace_back(basis_->occupation(i), p);
    }
    return out;
  }

 private:
  BasisPtr basis_;
  Eigen::VectorXd probs_;
};

inline DetectionDistribution detection_distribution(const StateVector& state) { return DetectionDistribution(state); }

struct QbsResult {
  StateVector output;
  double xi = 0.0;              // relative phase of the |0,N> component
  double noon_fidelity = 0.0;   // max over xi of |<NOON_xi|output>|^2
};

struct QbsParams {
  double coupling = 10.0;
  double interaction = 0.0;
  int ratio = 2;
};

namespace detail {

inline QbsResult summarize_qbs(StateVector out) {
  const int n = out.basis().atoms();
  const Complex a = out.amplitude(std::vector<int>{n, 0, 0});
  const Complex b = out.amplitude(std::vector<int>{0, n, 0});
  QbsResult r{std::move(out), 0.0, 0.0};
  if (n == 0) {
    r.noon_fidelity = std::norm(a);
    return r;
  }
  r.xi = (std::abs(a) > 0.0 && std::abs(b) > 0.0) ? std::arg(b / a) : 0.0;
  r.noon_fidelity = std::min(1.0, 0.5 * std::pow(std::abs(a) + std::abs(b), 2));
  return r;
}

// Hadamard on span{|N,0,0>, |0,N,0>}; self-inverse.
inline StateVector ideal_qbs_unitary(const StateVector& state) {
  const int n = state.basis().atoms();
  if (n == 0) return state;
  const auto i0 = static_cast<Eigen::Index>(state.basis().index_of(std::vector<int>{n, 0, 0}));
  const auto i1 = static_cast<Eigen::Index>(state.basis().index_of(std::vector<int>{0, n, 0}));
  Eigen::VectorXcd amps = state.amplitudes();
  const Complex a = amps[i0];
  const Complex b = amps[i1];
  amps[i0] = (a + b) / std::sqrt(2.0);
  amps[i1] = (a - b) / std::sqrt(2.0);
  return StateVector(state.basis_ptr(), std::move(amps), state.corrected_drift());
}

inline Propagator qbs_interaction_hold(const BasisPtr& basis, const QbsParams& p) {
  if (!(p.interaction > 0.0)) throw ConfigurationError("physical QBS needs a positive interaction strength");
  if (p.ratio < 1) throw ConfigurationError("QBS interaction ratio must be a positive integer");
  RingParams hold;
  hold.interaction = {p.ratio * p.interaction, p.interaction, 0.0};
  return Propagator(build_bose_hubbard(basis, hold));
}

}  // namespace detail

/// Two-port quantum beam splitter on sites zero and one.
///
/// kIdeal maps |N,0,0> to (|N,0,0> + |0,N,0>)/sqrt 2 exactly (xi = 0).
/// kPhysical runs BS, a pi/2 phase on site one, an interaction hold of
/// pi/2V with V_0 = ratio * V_1, and a second BS, then reports the overlap
/// with the NOON manifold and the relative phase it produced.
inline QbsResult quantum_beam_splitter(const StateVector& state, QbsVariant variant, const QbsParams& params = {}) {
  require_ring(state.basis());
  if (variant == QbsVariant::kIdeal) return detail::summarize_qbs(detail::ideal_qbs_unitary(state));
  const GateSet gates(state.basis_ptr(), params.coupling);
  const auto hold = detail::qbs_interaction_hold(state.basis_ptr(), params);
  StateVector s = gates.beam_splitter(state);
  s = apply_mode_phase(s, 1, constants::kPi / 2.0);
  s = hold.apply(s, constants::kPi / (2.0 * params.interaction));
  s = gates.beam_splitter(s);
  return detail::summarize_qbs(std::move(s));
}

// Undoes quantum_beam_splitter step by step.
inline StateVector inverse_quantum_beam_splitter(const StateVector& state, QbsVariant variant,
                                                 const QbsParams& params = {}) {
  require_ring(state.basis());
  if (variant == QbsVariant::kIdeal) return detail::ideal_qbs_unitary(state);
  const GateSet gates(state.basis_ptr(), params.coupling);
  const auto hold = detail::qbs_interaction_hold(state.basis_ptr(), params);
  StateVector s = gates.inverse_beam_splitter(state);
  // The hold phase exp(-i pi/2 (ratio n0(n0-1) + n1(n1-1))) is +-1 per state, so it is its own inverse.
  s = hold.apply(s, constants::kPi / (2.0 * params.interaction));
  s = apply_mode_phase(s, 1, -constants::kPi / 2.0);
  return gates.inverse_beam_splitter(s);
}

// Evolves a flow-basis state under the rotation Hamiltonian for t_omega.
inline StateVector apply_rotation(const StateVector& flow_state, double coupling, double theta, double t_omega) {
  return evolve(flow_state, build_flow_hamiltonian(flow_state.basis_ptr(), coupling, theta), t_omega);
}

/// Relative phase per atom between alpha_{+1} and alpha_{-1} accumulated
/// from `before` to `after` (flow basis), fitted over all populated
/// components against the most populated one. Only meaningful when the
/// per-atom phase times the spread of alpha_{+1} counts is below pi.
inline double relative_flow_phase(const StateVector& before, const StateVector& after) {
  before.require_same_basis(after);
  const auto& basis = before.basis();
  const auto& b = before.amplitudes();
  const auto& a = after.amplitudes();
  Eigen::Index ref = 0;
  b.cwiseAbs2().maxCoeff(&ref);
  const Complex z_ref = a[ref] * std::conj(b[ref]);
  const int m_ref = basis.count(static_cast<std::size_t>(ref), kFlowPlus);
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index e = 0; e < b.size(); ++e) {
    const double w = std::norm(b[e]);
    const int dm = basis.count(static_cast<std::size_t>(e), kFlowPlus) - m_ref;
    if (w < 1e-14 || dm == 0) continue;
    const Complex z = a[e] * std::conj(b[e]) * std::conj(z_ref);
    num += w * std::arg(z) / dm;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

// Follows the relative flow phase through the rotation hold in slices short
// enough that no component wraps, so phases beyond pi are recovered.
inline double track_rotation_phase(const StateVector& flow_state, double coupling, double theta, double t_omega) {
  const Propagator rotation(build_flow_hamiltonian(flow_state.basis_ptr(), coupling, theta));
  const double spread = 3.0 * std::abs(coupling);  // max - min flow energy bound
  const double reach = std::max(1, flow_state.basis().atoms()) * spread * t_omega;
  const auto slices = static_cast<long>(std::max(1.0, std::ceil(reach / (constants::kPi / 4.0))));
  const double dt = t_omega / static_cast<double>(slices);
  double phi = 0.0;
  StateVector current = flow_state;
  for (long s = 0; s < slices; ++s) {
    StateVector next = rotation.apply(current, dt);
    phi += relative_flow_phase(current, next);
    current = std::move(next);
  }
  return phi;
}

/// Gates and basis changes shared by all three schemes for one (N, J).
class GyroPipeline {
 public:
  GyroPipeline(BasisPtr basis, double coupling)
      : basis_(std::move(basis)),
        gates_(basis_, coupling),
        to_flow_(basis_, flow_matrix()),
        to_site_(basis_, flow_matrix().adjoint()) {}

  const GateSet& gates() const { return gates_; }
  const BasisPtr& basis_ptr() const { return basis_; }

  // Steps 2-3: tritter, +2pi/3 on site two; returns the state in flow occupations.
  StateVector split(const StateVector& site_state) const {
    StateVector s = gates_.tritter(site_state);
    s = apply_gate(s, GateSpec::phase_step(1.0));
    return to_flow_.apply(s);
  }

  // Steps 5-6: back to site occupations, -2pi/3 on site two, inverse tritter.
  StateVector recombine(const StateVector& flow_state) const {
    StateVector s = to_site_.apply(flow_state);
    s = apply_gate(s, GateSpec::phase_step(-1.0));
    return gates_.inverse_tritter(s);
  }

  StateVector to_flow(const StateVector& site_state) const { return to_flow_.apply(site_state); }
  StateVector to_site(const StateVector& flow_state) const { return to_site_.apply(flow_state); }

 private:
  BasisPtr basis_;
  GateSet gates_;
  LiftedUnitary to_flow_;
  LiftedUnitary to_site_;
};

struct Snapshot {
  std::string step;
  StateVector state;
  bool flow_basis = false;
};

struct SchemeResult {
  SchemeConfig config;
  StateVector initial_state;
  StateVector flow_before_rotation;
  StateVector flow_after_rotation;
  StateVector final_state;  // site basis, end of step 7 (or after the detection hold)
  double phi = 0.0;            // closed form
  double phi_extracted = 0.0;  // fitted from the flow components
  DetectionDistribution distribution;
  std::optional<QbsResult> qbs;
  std::vector<Snapshot> snapshots;
};

inline OccupationVector initial_occupation(const SchemeConfig& config) {
  if (config.scheme == 2) return {config.atoms / 2, config.atoms / 2, 0};
  return {config.atoms, 0, 0};
}

inline SchemeResult run_scheme(const SchemeConfig& config) {
  config.validate();
  const auto basis = FockBasis::enumerate(config.atoms, 3);
  const GyroPipeline pipeline(basis, config.coupling);
  const QbsParams qbs_params{config.coupling, config.qbs_interaction, config.qbs_ratio};
  std::vector<Snapshot> snaps;
  auto keep = [&](const char* step, const StateVector& s, bool flow = false) {
    if (config.keep_snapshots) snaps.push_back({step, s, flow});
  };

  const StateVector initial = fock_state(basis, initial_occupation(config));
  keep("initial", initial);
  std::optional<QbsResult> qbs;
  StateVector s = initial;
  if (config.scheme == 3) {
    qbs = quantum_beam_splitter(initial, config.qbs, qbs_params);
    s = qbs->output;
  } else {
    s = pipeline.gates().beam_splitter(initial);
  }
  keep("split-two-port", s);
  const StateVector before = pipeline.split(s);
  keep("flow-superposition", before, true);
  const StateVector after = apply_rotation(before, config.coupling, config.theta, config.t_omega);
  keep("rotated", after, true);
  s = pipeline.recombine(after);
  keep("recombined", s);
  if (config.scheme == 3) {
    s = inverse_quantum_beam_splitter(s, config.qbs, qbs_params);
  } else {
    s = pipeline.gates().inverse_beam_splitter(s);
  }
  keep("output", s);
  if (config.scheme == 2 && config.detection_hold) {
    RingParams hold;
    hold.interaction.fill(config.detection_interaction);
    s = evolve(s, build_bose_hubbard(basis, hold), constants::kPi / (16.0 * config.detection_interaction));
    keep("detection-hold", s);
  }

  SchemeResult result{config,
                      initial,
                      before,
                      after,
                      s,
                      rotation_phase(config.coupling, config.t_omega, config.theta),
                      track_rotation_phase(before, config.coupling, config.theta, config.t_omega),
                      DetectionDistribution(s),
                      std::move(qbs),
                      std::move(snaps)};
  return result;
}

inline SchemeResult run_scheme1(SchemeConfig config) {
  if (config.scheme != 1) throw ValidationError("run_scheme1 requires scheme = 1");
  return run_scheme(config);
}

inline SchemeResult run_scheme2(SchemeConfig config) {
  if (config.scheme != 2) throw ValidationError("run_scheme2 requires scheme = 2");
  return run_scheme(config);
}

inline SchemeResult run_scheme3(SchemeConfig config) {
  if (config.scheme != 3) throw ValidationError("run_scheme3 requires scheme = 3");
  return run_scheme(config);
}

}  // namespace ringgyro
