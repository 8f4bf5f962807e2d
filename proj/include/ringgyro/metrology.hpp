#pragma once

// Phase-estimation precision: quantum Fisher information for pure and mixed
// states, the Cramer-Rao bound, and particle loss on the two counter-rotating
// flow modes.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ringgyro/schemes.hpp"

namespace ringgyro {

// ---------------------------------------------------------------------------
// Pure states

// F_Q = 4 [<d|d> - |<d|psi>|^2] for a normalized |psi> and its derivative |d>.
inline double pure_qfi(const Eigen::VectorXcd& psi, const Eigen::VectorXcd& derivative) {
  if (psi.size() != derivative.size()) throw ValidationError("state and derivative sizes differ");
  const double norm = psi.norm();
  if (std::abs(norm - 1.0) > 1e-10) {
    throw ValidationError("pure_qfi needs a normalized state (norm " + std::to_string(norm) + ")");
  }
  const double f = 4.0 * (derivative.squaredNorm() - std::norm(derivative.dot(psi)));
  return std::max(0.0, f);
}

inline double pure_qfi(const StateVector& psi, const StateVector& derivative) {
  psi.require_same_basis(derivative);
  return pure_qfi(psi.amplitudes(), derivative.amplitudes());
}

// d psi / d phi when phi enters as exp(i m phi) on m atoms in alpha_{+1}.
inline StateVector flow_phase_derivative(const StateVector& flow_state) {
  Eigen::VectorXcd d = flow_state.amplitudes();
  for (std::size_t i = 0; i < flow_state.size(); ++i) {
    d[static_cast<Eigen::Index>(i)] *= kI * static_cast<double>(flow_state.basis().count(i, kFlowPlus));
  }
  return StateVector(flow_state.basis_ptr(), std::move(d));
}

// QFI of a scheme with respect to phi, from the post-rotation flow state.
inline double scheme_qfi(const SchemeResult& result) {
  return pure_qfi(result.flow_after_rotation, flow_phase_derivative(result.flow_after_rotation));
}

/// Same quantity by central differences in theta through the rotation hold,
/// divided by (d phi / d theta)^2. Independent of the analytic generator.
inline double scheme_qfi_finite_difference(const SchemeResult& result, double step = 1e-5) {
  const auto& c = result.config;
  const double slope = rotation_phase_slope(c.coupling, c.t_omega, c.theta);
  if (slope == 0.0) throw NoInformationError("rotation hold carries no phase (J t_omega = 0)");
  const auto plus = apply_rotation(result.flow_before_rotation, c.coupling, c.theta + step, c.t_omega);
  const auto minus = apply_rotation(result.flow_before_rotation, c.coupling, c.theta - step, c.t_omega);
  const Eigen::VectorXcd d = (plus.amplitudes() - minus.amplitudes()) / (2.0 * step * slope);
  return pure_qfi(result.flow_after_rotation.amplitudes(), d);
}

// ---------------------------------------------------------------------------
// Cramer-Rao

inline double crlb(double fisher) {
  if (!(fisher > 0.0)) throw NoInformationError("Fisher information " + std::to_string(fisher) + " gives no bound");
  return 1.0 / std::sqrt(fisher);
}

struct PrecisionReport {
  double fisher = 0.0;
  double delta_phi = 0.0;
  double delta_theta = 0.0;  // rad
  double delta_omega = 0.0;  // rad/s
  int scheme = 0;
  int atoms = 0;
  double eta = 1.0;
  double coupling = 0.0;
  double t_omega = 0.0;
  double theta = 0.0;
  double circumference = 0.0;
  double atom_mass = 0.0;
};

/// Chains F_Q -> delta phi -> delta theta -> delta omega through
/// phi = 2 sqrt3 J t sin(theta/3) and omega = h theta / (L^2 m).
inline PrecisionReport make_precision_report(double fisher, int scheme, int atoms, double eta, double coupling,
                                             double t_omega, double theta, double circumference, double mass) {
  PrecisionReport r;
  r.fisher = fisher;
  r.delta_phi = crlb(fisher);
  const double slope = rotation_phase_slope(coupling, t_omega, theta);
  r.delta_theta = slope != 0.0 ? r.delta_phi / std::abs(slope) : std::numeric_limits<double>::infinity();
  r.delta_omega = omega_from_theta(r.delta_theta, circumference, mass);
  r.scheme = scheme;
  r.atoms = atoms;
  r.eta = eta;
  r.coupling = coupling;
  r.t_omega = t_omega;
  r.theta = theta;
  r.circumference = circumference;
  r.atom_mass = mass;
  return r;
}

// ---------------------------------------------------------------------------
// Flow-mode coefficients

enum class InputState { kUncorrelated, kBat, kNoon };

inline InputState input_state_for_scheme(int scheme) {
  switch (scheme) {
    case 1: return InputState::kUncorrelated;
    case 2: return InputState::kBat;
    case 3: return InputState::kNoon;
    default: throw ValidationError("scheme must be 1, 2 or 3");
  }
}

/// beta[m] is the amplitude of |m atoms in alpha_{+1}, N-m in alpha_{-1}>;
/// the rotation contributes exp(i m phi) on top.
struct FlowCoefficients {
  int atoms = 0;
  Eigen::VectorXcd beta;
  double phi = 0.3;

  void validate() const {
    if (beta.size() != atoms + 1) throw ValidationError("coefficient vector must have N+1 entries");
    const double norm2 = beta.squaredNorm();
    if (std::abs(norm2 - 1.0) > 1e-12) {
      throw ValidationError("flow coefficients not normalized (sum |beta|^2 = " + std::to_string(norm2) + ")");
    }
  }

  Complex amplitude(int m) const { return beta[m] * std::polar(1.0, m * phi); }
};

namespace detail {

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::round(std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k)));
}

}  // namespace detail

inline FlowCoefficients scheme_coefficients(InputState input, int atoms, double phi = 0.3) {
  if (atoms < 0) throw ValidationError("N must be non-negative");
  FlowCoefficients c;
  c.atoms = atoms;
  c.phi = phi;
  c.beta = Eigen::VectorXcd::Zero(atoms + 1);
  switch (input) {
    case InputState::kUncorrelated:
      // (alpha_{-1}^dag + i alpha_{+1}^dag)^N / sqrt(2^N N!)
      for (int m = 0; m <= atoms; ++m) {
        const double mag = std::exp(0.5 * (detail::log_factorial(atoms) - detail::log_factorial(m) -
                                           detail::log_factorial(atoms - m)) -
                                    0.5 * atoms * std::log(2.0));
        c.beta[m] = std::pow(kI, m) * mag;
      }
      break;
    case InputState::kBat: {
      if (atoms % 2 != 0) throw ValidationError("bat state needs even N");
      const Complex global = std::pow(kI, atoms / 2);
      for (int m = 0; m <= atoms; m += 2) {
        const double log_mag = 0.5 * detail::log_factorial(m) + 0.5 * detail::log_factorial(atoms - m) -
                               0.5 * atoms * std::log(2.0) - detail::log_factorial(m / 2) -
                               detail::log_factorial((atoms - m) / 2);
        c.beta[m] = global * std::exp(log_mag);
      }
      break;
    }
    case InputState::kNoon:
      if (atoms == 0) {
        c.beta[0] = 1.0;
      } else {
        c.beta[0] = 1.0 / std::sqrt(2.0);
        c.beta[atoms] = 1.0 / std::sqrt(2.0);
      }
      break;
  }
  c.validate();
  return c;
}

// beta read off a flow-basis state (alpha_0 must be empty), with phi = 0.
inline FlowCoefficients coefficients_from_flow_state(const StateVector& flow_state) {
  const int n = flow_state.basis().atoms();
  FlowCoefficients c;
  c.atoms = n;
  c.phi = 0.0;
  c.beta = Eigen::VectorXcd::Zero(n + 1);
  for (int m = 0; m <= n; ++m) c.beta[m] = flow_state.amplitude(std::vector<int>{n - m, 0, m});
  const double leak = std::abs(c.beta.squaredNorm() - 1.0);
  if (leak > 1e-10) throw ValidationError("flow state has weight outside the alpha_{+-1} modes (" + std::to_string(leak) + ")");
  return c;
}

// ---------------------------------------------------------------------------
// Loss

/// One loss outcome: `lost` atoms in total, `lost_plus` of them from alpha_{+1}.
/// `state` is indexed by the number r of atoms remaining in alpha_{+1}
/// (r = m - lost_plus), i.e. |r, N - lost - r>.
struct LossSector {
  int lost = 0;
  int lost_plus = 0;
  double probability = 0.0;
  Eigen::VectorXcd state;  // normalized
};

inline void require_transmissivity(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta out of [0,1]");
}

// B^m = C(m, l+) C(N-m, l-) eta^{N-l} (1-eta)^l
inline double loss_weight(int atoms, int m, int lost_plus, int lost_minus, double eta) {
  const int lost = lost_plus + lost_minus;
  return detail::binomial(m, lost_plus) * detail::binomial(atoms - m, lost_minus) * std::pow(eta, atoms - lost) *
         std::pow(1.0 - eta, lost);
}

inline std::vector<LossSector> loss_sectors(const FlowCoefficients& coeffs, double eta) {
  coeffs.validate();
  require_transmissivity(eta);
  const int n = coeffs.atoms;
  std::vector<LossSector> sectors;
  for (int lost = 0; lost <= n; ++lost) {
    for (int lost_plus = 0; lost_plus <= lost; ++lost_plus) {
      const int lost_minus = lost - lost_plus;
      Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n - lost + 1);
      for (int m = lost_plus; m <= n - lost_minus; ++m) {
        const double b = loss_weight(n, m, lost_plus, lost_minus, eta);
        if (b > 0.0) v[m - lost_plus] += coeffs.amplitude(m) * std::sqrt(b);
      }
      const double p = v.squaredNorm();
      if (!(p > 0.0)) continue;
      sectors.push_back({lost, lost_plus, p, v / std::sqrt(p)});
    }
  }
  return sectors;
}

// ---------------------------------------------------------------------------
// Mixed states

inline constexpr double kEigenvalueFloor = 1e-12;

/// F_Q = sum_ij 2/(l_i + l_j) |<i| d rho |j>|^2 in the eigenbasis of rho.
/// Pairs with l_i + l_j below 1e-12 * max(l) are skipped; rho may be
/// sub-normalized, in which case the result scales with its trace.
inline double mixed_qfi(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& drho) {
  if (rho.rows() != rho.cols() || drho.rows() != rho.rows() || drho.cols() != rho.cols()) {
    throw ValidationError("rho and d rho must be square matrices of equal size");
  }
  if (rho.size() == 0) return 0.0;
  const double scale = std::max(1e-300, rho.cwiseAbs().maxCoeff());
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw ValidationError("rho is not Hermitian");
  if ((drho - drho.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, drho.cwiseAbs().maxCoeff())) {
    throw ValidationError("d rho is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho);
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const double lmax = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -1e-12 * std::max(1.0, lmax)) {
    throw ValidationError("rho is not positive semidefinite (eigenvalue " + std::to_string(lambda.minCoeff()) + ")");
  }
  const Eigen::MatrixXcd d = solver.eigenvectors().adjoint() * drho * solver.eigenvectors();
  const double floor = kEigenvalueFloor * lmax;
  double f = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      const double s = lambda[i] + lambda[j];
      if (s < floor || s <= 0.0) continue;
      f += 2.0 / s * std::norm(d(i, j));
    }
  }
  return f;
}

inline double mixed_qfi(const DensityOperator& rho, const Eigen::MatrixXcd& drho) { return mixed_qfi(rho.matrix(), drho); }

/// How loss outcomes combine.
///   kBlockAdditive: every (l, l+) outcome is its own orthogonal block.
///   kMixWithinLoss: outcomes with equal total loss l are mixed before the QFI.
enum class SectorConvention { kBlockAdditive, kMixWithinLoss };

/// Block-diagonal lossy state: one sub-normalized density matrix per block,
/// each on the |r, N-l-r> basis (r = atoms left in alpha_{+1}).
struct LossyState {
  std::vector<int> lost;  // total loss per block
  std::vector<Eigen::MatrixXcd> blocks;
};

inline LossyState lossy_state(const FlowCoefficients& coeffs, double eta,
                              SectorConvention convention = SectorConvention::kBlockAdditive) {
  LossyState out;
  const auto sectors = loss_sectors(coeffs, eta);
  for (const auto& s : sectors) {
    Eigen::MatrixXcd rho = s.probability * s.state * s.state.adjoint();
    if (convention == SectorConvention::kMixWithinLoss && !out.lost.empty() && out.lost.back() == s.lost) {
      out.blocks.back() += rho;
    } else {
      out.lost.push_back(s.lost);
      out.blocks.push_back(std::move(rho));
    }
  }
  return out;
}

// d rho / d phi = i [R, rho] with R = diag(r); the lost atoms only add a global phase per branch.
inline Eigen::MatrixXcd lossy_block_derivative(const Eigen::MatrixXcd& rho) {
  const Eigen::Index n = rho.rows();
  Eigen::MatrixXcd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = kI * static_cast<double>(i - j) * rho(i, j);
  }
  return d;
}

inline double qfi_with_loss_value(const FlowCoefficients& coeffs, double eta,
                                  SectorConvention convention = SectorConvention::kBlockAdditive) {
  const auto state = lossy_state(coeffs, eta, convention);
  double f = 0.0;
  for (const auto& block : state.blocks) f += mixed_qfi(block, lossy_block_derivative(block));
  return f;
}

/// Lossy QFI with its Cramer-Rao chain. Phase-to-rotation conversion uses the
/// supplied (J, t_omega, theta, L, m); delta_phi is infinite when F_Q = 0.
inline PrecisionReport qfi_with_loss(const FlowCoefficients& coeffs, double eta, int scheme = 0,
                                     SectorConvention convention = SectorConvention::kBlockAdditive,
                                     double coupling = 10.0, double t_omega = 1.0, double theta = 0.0,
                                     double circumference = constants::kDefaultRingCircumference,
                                     double mass = constants::kRubidium87Mass) {
  const double f = qfi_with_loss_value(coeffs, eta, convention);
  if (f <= 1e-300) {
    PrecisionReport r;
    r.fisher = 0.0;
    r.delta_phi = r.delta_theta = r.delta_omega = std::numeric_limits<double>::infinity();
    r.scheme = scheme;
    r.atoms = coeffs.atoms;
    r.eta = eta;
    r.coupling = coupling;
    r.t_omega = t_omega;
    r.theta = theta;
    r.circumference = circumference;
    r.atom_mass = mass;
    return r;
  }
  return make_precision_report(f, scheme, coeffs.atoms, eta, coupling, t_omega, theta, circumference, mass);
}

// ---------------------------------------------------------------------------
// Fidelity oracle

namespace detail {

// Tr sqrt(sqrt(rho) sigma sqrt(rho)), evaluated on the support of rho.
inline double root_fidelity(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma) {
  if (rho.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho);
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  const double cut = 1e-14 * std::max(1e-300, lambda.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > cut) keep.push_back(i);
  }
  Eigen::MatrixXcd s(rho.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    s.col(static_cast<Eigen::Index>(k)) = solver.eigenvectors().col(keep[k]) * std::sqrt(lambda[keep[k]]);
  }
  const Eigen::MatrixXcd m = s.adjoint() * sigma * s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> inner(m, Eigen::EigenvaluesOnly);
  double total = 0.0;
  for (Eigen::Index i = 0; i < inner.eigenvalues().size(); ++i) total += std::sqrt(std::max(0.0, inner.eigenvalues()[i]));
  return total;
}

}  // namespace detail

/// Uhlmann fidelity between two block-diagonal states with matching blocks.
inline double uhlmann_fidelity(const std::vector<Eigen::MatrixXcd>& rho, const std::vector<Eigen::MatrixXcd>& sigma) {
  if (rho.size() != sigma.size()) throw ValidationError("block structures differ");
  double root = 0.0;
  for (std::size_t b = 0; b < rho.size(); ++b) root += detail::root_fidelity(rho[b], sigma[b]);
  return root * root;
}

/// F_Q ~ 8 (1 - sqrt F(rho_phi, rho_{phi+delta})) / delta^2 via the Bures
/// distance; independent of any eigenbasis derivative formula.
inline double fidelity_qfi_oracle(const std::vector<Eigen::MatrixXcd>& rho, const std::vector<Eigen::MatrixXcd>& shifted,
                                  double delta) {
  if (delta == 0.0) throw ValidationError("oracle step delta must be nonzero");
  double trace = 0.0;
  for (const auto& b : rho) trace += b.trace().real();
  if (std::abs(trace - 1.0) > 1e-10) throw ValidationError("oracle needs a trace-one state");
  const double root = std::sqrt(uhlmann_fidelity(rho, shifted));
  return 8.0 * (1.0 - root) / (delta * delta);
}

inline double fidelity_qfi_oracle(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& shifted, double delta) {
  return fidelity_qfi_oracle(std::vector<Eigen::MatrixXcd>{rho}, std::vector<Eigen::MatrixXcd>{shifted}, delta);
}

// Oracle QFI of the lossy state, comparing phi - delta/2 with phi + delta/2.
inline double oracle_qfi_with_loss(const FlowCoefficients& coeffs, double eta,
                                   SectorConvention convention = SectorConvention::kBlockAdditive,
                                   double delta = 1e-4) {
  FlowCoefficients lo = coeffs;
  FlowCoefficients hi = coeffs;
  lo.phi -= delta / 2.0;
  hi.phi += delta / 2.0;
  const auto a = lossy_state(lo, eta, convention);
  const auto b = lossy_state(hi, eta, convention);
  if (a.blocks.size() != b.blocks.size()) throw ValidationError("loss sectors changed with phi");
  return fidelity_qfi_oracle(a.blocks, b.blocks, delta);
}

}  // namespace ringgyro
