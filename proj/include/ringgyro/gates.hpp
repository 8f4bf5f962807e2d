#pragma once

// Timed-evolution gates of the three-site ring: two-port beam splitters,
// tritters and site-two phase steps.

#include <array>
#include <cmath>
#include <string>

#include "ringgyro/constants.hpp"
#include "ringgyro/propagator.hpp"

namespace ringgyro {

enum class GateKind { kBeamSplitter, kInverseBeamSplitter, kTritter, kInverseTritter, kPhaseStep };

inline const char* to_string(GateKind kind) {
  switch (kind) {
    case GateKind::kBeamSplitter: return "beam-splitter";
    case GateKind::kInverseBeamSplitter: return "inverse-beam-splitter";
    case GateKind::kTritter: return "tritter";
    case GateKind::kInverseTritter: return "inverse-tritter";
    case GateKind::kPhaseStep: return "phase-step";
  }
  return "unknown";
}

/// One gate with its physical hold time.
///
/// Hold times: beam splitter pi/4J, inverse 3pi/4J, tritter 2pi/9J, inverse
/// tritter 4pi/9J, phase step 4pi/(3|eps|). The sign of the offset selects
/// the phase step direction (+2pi/3 for eps > 0).
struct GateSpec {
  GateKind kind = GateKind::kBeamSplitter;
  std::array<int, 2> modes{0, 1};  // beam-splitter pair, or {site, site} for a phase step
  double hold_time = 0.0;          // s
  double coupling = 0.0;           // J [Hz]
  double offset = 0.0;             // eps [Hz], phase steps only

  static GateSpec beam_splitter(double j, std::array<int, 2> pair = {0, 1}) {
    return {GateKind::kBeamSplitter, pair, constants::kPi / (4.0 * j), j, 0.0};
  }
  static GateSpec inverse_beam_splitter(double j, std::array<int, 2> pair = {0, 1}) {
    return {GateKind::kInverseBeamSplitter, pair, 3.0 * constants::kPi / (4.0 * j), j, 0.0};
  }
  static GateSpec tritter(double j) { return {GateKind::kTritter, {0, 1}, 2.0 * constants::kPi / (9.0 * j), j, 0.0}; }
  static GateSpec inverse_tritter(double j) {
    return {GateKind::kInverseTritter, {0, 1}, 4.0 * constants::kPi / (9.0 * j), j, 0.0};
  }
  static GateSpec phase_step(double eps, int site = 2) {
    return {GateKind::kPhaseStep, {site, site}, 4.0 * constants::kPi / (3.0 * std::abs(eps)), 0.0, eps};
  }

  double expected_hold_time() const {
    switch (kind) {
      case GateKind::kBeamSplitter: return constants::kPi / (4.0 * coupling);
      case GateKind::kInverseBeamSplitter: return 3.0 * constants::kPi / (4.0 * coupling);
      case GateKind::kTritter: return 2.0 * constants::kPi / (9.0 * coupling);
      case GateKind::kInverseTritter: return 4.0 * constants::kPi / (9.0 * coupling);
      case GateKind::kPhaseStep: return 4.0 * constants::kPi / (3.0 * std::abs(offset));
    }
    return 0.0;
  }

  void validate() const {
    const bool phase = kind == GateKind::kPhaseStep;
    if (phase ? !(std::abs(offset) > 0.0) : !(coupling > 0.0)) {
      throw GateSpecError(std::string(to_string(kind)) + (phase ? " needs a nonzero offset" : " needs J > 0"));
    }
    const double expected = expected_hold_time();
    if (!(std::abs(hold_time - expected) <= 1e-12 * expected)) {
      throw GateSpecError(std::string(to_string(kind)) + " hold time " + std::to_string(hold_time) +
                          " s does not match " + std::to_string(expected) + " s");
    }
    if (modes[0] < 0 || modes[0] > 2 || modes[1] < 0 || modes[1] > 2 || (!phase && modes[0] == modes[1])) {
      throw GateSpecError("gate acts on invalid sites");
    }
  }

  // Couplings with every link zeroed except those that the gate opens.
  RingParams ring_params() const {
    RingParams p;
    if (kind == GateKind::kTritter || kind == GateKind::kInverseTritter) {
      p.coupling.fill(coupling);
    } else if (kind != GateKind::kPhaseStep) {
      // In a 3-ring every pair is adjacent; link j joins j and j+1 mod 3.
      const int a = modes[0];
      const int b = modes[1];
      const int link = ((a + 1) % 3 == b) ? a : b;
      p.coupling[static_cast<std::size_t>(link)] = coupling;
    } else {
      p.offset[static_cast<std::size_t>(modes[0])] = offset;
    }
    return p;
  }
};

// Phase imprinted by holding an offset eps for t: exp(-i eps t n). For the
// standard hold 4pi/(3 eps) this is exp(-i 4pi/3 n) = exp(+i 2pi/3 n).
inline double phase_step_angle(const GateSpec& gate) {
  const double raw = -gate.offset * gate.hold_time;
  return std::remainder(raw, 2.0 * constants::kPi);
}

inline StateVector apply_gate(const StateVector& state, const GateSpec& gate) {
  gate.validate();
  if (gate.kind == GateKind::kPhaseStep) return apply_mode_phase(state, gate.modes[0], phase_step_angle(gate));
  require_ring(state.basis());
  return evolve(state, build_bose_hubbard(state.basis_ptr(), gate.ring_params()), gate.hold_time);
}

/// Precomputed propagators for the gates used by the interferometer
/// pipelines on one basis and coupling. Immutable and shareable.
class GateSet {
 public:
  GateSet(BasisPtr basis, double coupling)
      : basis_(std::move(basis)),
        coupling_(coupling),
        splitter_(make(GateSpec::beam_splitter(coupling))),
        tritter_(make(GateSpec::tritter(coupling))) {}

  double coupling() const { return coupling_; }
  const BasisPtr& basis_ptr() const { return basis_; }

  // The forward and inverse gates share one Hamiltonian; only the hold differs.
  StateVector beam_splitter(const StateVector& s) const { return splitter_.apply(s, GateSpec::beam_splitter(coupling_).hold_time); }
  StateVector inverse_beam_splitter(const StateVector& s) const {
    return splitter_.apply(s, GateSpec::inverse_beam_splitter(coupling_).hold_time);
  }
  StateVector tritter(const StateVector& s) const { return tritter_.apply(s, GateSpec::tritter(coupling_).hold_time); }
  StateVector inverse_tritter(const StateVector& s) const {
    return tritter_.apply(s, GateSpec::inverse_tritter(coupling_).hold_time);
  }

 private:
  Propagator make(const GateSpec& gate) const {
    gate.validate();
    return Propagator(build_bose_hubbard(basis_, gate.ring_params()));
  }

  BasisPtr basis_;
  double coupling_;
  Propagator splitter_;
  Propagator tritter_;
};

}  // namespace ringgyro
