#pragma once

// Fixed-N bosonic Fock spaces: basis enumeration, state vectors and density
// operators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ringgyro/errors.hpp"

namespace ringgyro {

using Complex = std::complex<double>;
inline constexpr Complex kI{0.0, 1.0};

// Atom counts per mode, |n_0, n_1, ..., n_{M-1}>.
using OccupationVector = std::vector<int>;

namespace detail {

// Exact C(n, k) in 64 bits; returns nullopt on overflow.
inline std::optional<std::uint64_t> checked_binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) return std::nullopt;
    // result * factor is divisible by i at every step.
    result = result * factor / i;
  }
  return result;
}

inline std::string format_occupation(std::span<const int> occ) {
  std::ostringstream os;
  os << '|';
  for (std::size_t j = 0; j < occ.size(); ++j) os << (j ? "," : "") << occ[j];
  os << '>';
  return os.str();
}

}  // namespace detail

// Number of N-boson states in M modes, C(N+M-1, M-1); nullopt on overflow.
inline std::optional<std::uint64_t> fock_dimension(int atoms, int modes) {
  if (atoms < 0 || modes < 1) return 0;
  return detail::checked_binomial(static_cast<std::uint64_t>(atoms + modes - 1),
                                  static_cast<std::uint64_t>(modes - 1));
}

/// Ordered basis of all occupation vectors with a fixed total atom number.
///
/// Elements are listed in lexicographically descending order, so for
/// N=2, M=3 the order is |2,0,0>, |1,1,0>, |1,0,1>, |0,2,0>, |0,1,1>, |0,0,2>.
/// The index of an occupation is computed in closed form by ranking, which
/// makes index_of a bijection onto [0, size) without a lookup table.
/// Instances are immutable and shared between states through shared_ptr.
class FockBasis {
 public:
  static constexpr std::size_t kDefaultMaxDimension = 4'000'000;

  static std::shared_ptr<const FockBasis> enumerate(
      int atoms, int modes, std::size_t max_dimension = kDefaultMaxDimension) {
    if (atoms < 0) throw ValidationError("atom number must be non-negative");
    if (modes < 1) throw ValidationError("mode count must be at least 1");
    const auto dim = fock_dimension(atoms, modes);
    if (!dim || *dim > max_dimension) {
      std::ostringstream os;
      os << "Fock dimension C(" << atoms + modes - 1 << "," << modes - 1 << ")";
      if (dim) os << " = " << *dim;
      os << " exceeds the budget of " << max_dimension << " states";
      throw CapacityError(os.str());
    }
    return std::shared_ptr<const FockBasis>(new FockBasis(atoms, modes, *dim));
  }

  int atoms() const { return atoms_; }
  int modes() const { return modes_; }
  std::size_t size() const { return size_; }

  std::span<const int> operator[](std::size_t index) const {
    return {flat_.data() + index * static_cast<std::size_t>(modes_),
            static_cast<std::size_t>(modes_)};
  }

  int count(std::size_t index, int mode) const {
    return flat_[index * static_cast<std::size_t>(modes_) + static_cast<std::size_t>(mode)];
  }

  OccupationVector occupation(std::size_t index) const {
    const auto row = (*this)[index];
    return {row.begin(), row.end()};
  }

  // Index of `occ`, or nullopt when it is not an element of this basis.
  std::optional<std::size_t> find(std::span<const int> occ) const {
    if (occ.size() != static_cast<std::size_t>(modes_)) return std::nullopt;
    long total = 0;
    for (int n : occ) {
      if (n < 0) return std::nullopt;
      total += n;
    }
    if (total != atoms_) return std::nullopt;
    std::size_t index = 0;
    int remaining = atoms_;
    for (int j = 0; j + 1 < modes_; ++j) {
      // States with a larger count in mode j precede this one; the hockey-stick
      // identity sums their completions in closed form.
      const int tail = modes_ - j - 2;
      index += *detail::checked_binomial(static_cast<std::uint64_t>(remaining - occ[j] + tail),
                                         static_cast<std::uint64_t>(tail + 1));
      remaining -= occ[j];
    }
    return index;
  }

  std::size_t index_of(std::span<const int> occ) const {
    if (auto index = find(occ)) return *index;
    throw InvalidOccupation("occupation " + detail::format_occupation(occ) +
                            " is not in the N=" + std::to_string(atoms_) + ", M=" +
                            std::to_string(modes_) + " basis");
  }

 private:
  FockBasis(int atoms, int modes, std::size_t size) : atoms_(atoms), modes_(modes), size_(size) {
    flat_.reserve(size_ * static_cast<std::size_t>(modes_));
    OccupationVector current(static_cast<std::size_t>(modes_), 0);
    fill(0, atoms_, current);
  }

  void fill(int mode, int remaining, OccupationVector& current) {
    if (mode == modes_ - 1) {
      current[static_cast<std::size_t>(mode)] = remaining;
      flat_.insert(flat_.end(), current.begin(), current.end());
      return;
    }
    for (int n = remaining; n >= 0; --n) {
      current[static_cast<std::size_t>(mode)] = n;
      fill(mode + 1, remaining - n, current);
    }
  }

  int atoms_;
  int modes_;
  std::size_t size_;
  std::vector<int> flat_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

/// Complex amplitudes over a FockBasis.
///
/// Operations that act on states return new StateVector values. The norm
/// drift that was corrected along the way (see renormalize_if_drifted) is
/// carried forward so that it can be inspected after a long pipeline.
class StateVector {
 public:
  static constexpr double kNormTolerance = 1e-12;

  StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes, double corrected_drift = 0.0)
      : basis_(std::move(basis)), amps_(std::move(amplitudes)), drift_(corrected_drift) {
    if (!basis_) throw ValidationError("state requires a basis");
    if (static_cast<std::size_t>(amps_.size()) != basis_->size()) {
      throw ValidationError("amplitude count " + std::to_string(amps_.size()) +
                            " does not match basis size " + std::to_string(basis_->size()));
    }
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  std::size_t size() const { return basis_->size(); }

  Complex amplitude(std::span<const int> occ) const {
    return amps_[static_cast<Eigen::Index>(basis_->index_of(occ))];
  }

  double norm() const { return amps_.norm(); }

  // <this|other>
  Complex inner(const StateVector& other) const {
    require_same_basis(other);
    return amps_.dot(other.amps_);
  }

  // Largest norm deviation that was corrected while producing this state.
  double corrected_drift() const { return drift_; }

  double expectation_number(int mode) const {
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      total += std::norm(amps_[static_cast<Eigen::Index>(i)]) * basis_->count(i, mode);
    }
    return total;
  }

  void require_same_basis(const StateVector& other) const {
    if (basis_ != other.basis_ && (basis_->atoms() != other.basis_->atoms() ||
                                   basis_->modes() != other.basis_->modes())) {
      throw ValidationError("states live in different Fock spaces");
    }
  }

 private:
  BasisPtr basis_;
  Eigen::VectorXcd amps_;
  double drift_;
};

// |<a|b>|^2
inline double fidelity(const StateVector& a, const StateVector& b) { return std::norm(a.inner(b)); }

inline StateVector renormalize_if_drifted(StateVector state, double tolerance = StateVector::kNormTolerance) {
  const double norm = state.norm();
  const double drift = std::abs(norm - 1.0);
  if (drift <= tolerance || norm == 0.0) return state;
  return StateVector(state.basis_ptr(), state.amplitudes() / norm, std::max(drift, state.corrected_drift()));
}

inline StateVector fock_state(const BasisPtr& basis, std::span<const int> occ) {
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()));
  amps[static_cast<Eigen::Index>(basis->index_of(occ))] = 1.0;
  return StateVector(basis, std::move(amps));
}

inline StateVector fock_state(const BasisPtr& basis, std::initializer_list<int> occ) {
  return fock_state(basis, std::span<const int>(occ.begin(), occ.size()));
}

// Multiplies every amplitude by exp(i chi n_mode).
inline StateVector apply_mode_phase(const StateVector& state, int mode, double chi) {
  const auto& basis = state.basis();
  if (mode < 0 || mode >= basis.modes()) {
    throw ValidationError("mode index " + std::to_string(mode) + " out of range");
  }
  Eigen::VectorXcd amps = state.amplitudes();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    amps[static_cast<Eigen::Index>(i)] *= std::polar(1.0, chi * basis.count(i, mode));
  }
  return StateVector(state.basis_ptr(), std::move(amps), state.corrected_drift());
}

/// Density operator on a Fock basis, optionally sub-normalized.
///
/// A sub-normalized operator represents one branch of a mixture with weight
/// equal to its trace, as produced by conditioning on a loss event.
class DensityOperator {
 public:
  static constexpr double kTolerance = 1e-12;

  DensityOperator(BasisPtr basis, Eigen::MatrixXcd matrix, bool subnormalized = false)
      : basis_(std::move(basis)), rho_(std::move(matrix)), subnormalized_(subnormalized) {
    const auto n = static_cast<Eigen::Index>(basis_->size());
    if (rho_.rows() != n || rho_.cols() != n) throw ValidationError("density matrix shape mismatch");
    const double scale = std::max(1.0, rho_.cwiseAbs().maxCoeff());
    const double asym = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kTolerance * scale) {
      throw ValidationError("density matrix not Hermitian (deviation " + std::to_string(asym) + ")");
    }
    if (!subnormalized_ && std::abs(trace() - 1.0) > 1e-10) {
      throw ValidationError("density matrix trace " + std::to_string(trace()) + " differs from 1");
    }
  }

  static DensityOperator from_pure(const StateVector& state, double weight = 1.0) {
    Eigen::MatrixXcd rho = weight * state.amplitudes() * state.amplitudes().adjoint();
    return DensityOperator(state.basis_ptr(), std::move(rho), weight != 1.0);
  }

  const FockBasis& basis() const { return *basis_; }
  const Eigen::MatrixXcd& matrix() const { return rho_; }
  bool subnormalized() const { return subnormalized_; }
  double trace() const { return rho_.trace().real(); }

 private:
  BasisPtr basis_;
  Eigen::MatrixXcd rho_;
  bool subnormalized_;
};

}  // namespace ringgyro
