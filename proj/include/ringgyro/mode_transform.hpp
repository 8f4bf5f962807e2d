#pragma once

// Lifting single-particle mode unitaries to the many-body Fock space.
//
// Convention: the lifted operator Gamma(U) acts on one atom exactly as U acts
// on a column of mode amplitudes, i.e. a_k^dag -> sum_j U(j,k) a_j^dag. With
// this convention Gamma(U V) = Gamma(U) Gamma(V).
//
// U is reduced to upper-triangular (hence diagonal) form by nearest-neighbour
// Givens rotations, U = R_1^dag ... R_K^dag D. Each rotation is the
// exponential of a two-mode hopping generator and is applied with a
// Propagator; D becomes a product of mode phases.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "ringgyro/constants.hpp"
#include "ringgyro/propagator.hpp"

namespace ringgyro {

inline constexpr double kUnitaryTolerance = 1e-10;

inline double unitarity_deviation(const Eigen::MatrixXcd& u) {
  const auto n = u.rows();
  return (u.adjoint() * u - Eigen::MatrixXcd::Identity(n, n)).norm();
}

inline void require_unitary(const Eigen::MatrixXcd& u) {
  if (u.rows() != u.cols()) throw ValidationError("mode transform must be square");
  const double dev = unitarity_deviation(u);
  if (dev > kUnitaryTolerance) {
    throw ValidationError("mode transform is not unitary (||U^dag U - 1|| = " + std::to_string(dev) + ")");
  }
}

// alpha_k = (1/sqrt 3) sum_j exp(i 2 pi j k / 3) a_j, rows ordered k = -1, 0, +1.
// Gamma(flow_matrix()) re-expresses a site-basis state in flow-mode occupations.
inline Eigen::Matrix3cd flow_matrix() {
  Eigen::Matrix3cd f;
  for (int row = 0; row < 3; ++row) {
    const int k = row - 1;
    for (int j = 0; j < 3; ++j) f(row, j) = std::polar(1.0 / std::sqrt(3.0), 2.0 * constants::kPi * j * k / 3.0);
  }
  return f;
}

/// Many-body image of a mode unitary on a fixed basis; reusable across states.
class LiftedUnitary {
 public:
  LiftedUnitary(BasisPtr basis, const Eigen::MatrixXcd& unitary) : basis_(std::move(basis)) {
    require_unitary(unitary);
    const int modes = basis_->modes();
    if (unitary.rows() != modes) {
      throw ValidationError("mode transform size " + std::to_string(unitary.rows()) + " does not match " +
                            std::to_string(modes) + " modes");
    }

    // Left-multiply by rotations on rows (r-1, r) until the matrix is triangular.
    Eigen::MatrixXcd a = unitary;
    std::vector<std::pair<int, Eigen::Matrix2cd>> generators;  // (upper mode, h) with R = exp(-i h)
    for (int col = 0; col + 1 < modes; ++col) {
      for (int row = modes - 1; row > col; --row) {
        const Complex x = a(row - 1, col);
        const Complex y = a(row, col);
        if (std::abs(y) < 1e-15) continue;
        const double r = std::hypot(std::abs(x), std::abs(y));
        const double c = std::abs(x) / r;
        const double s = std::abs(y) / r;
        const double alpha = std::arg(x) - std::arg(y);
        // R = [[c, e^{i alpha} s], [-e^{-i alpha} s, c]] = cos(t) + sin(t) K, K^2 = -1.
        Eigen::Matrix2cd rot;
        rot << c, std::polar(s, alpha), -std::polar(s, -alpha), c;
        a.middleRows(row - 1, 2) = (rot * a.middleRows(row - 1, 2)).eval();
        const double angle = std::atan2(s, c);
        Eigen::Matrix2cd h;
        h << 0.0, kI * std::polar(angle, alpha), -kI * std::polar(angle, -alpha), 0.0;
        generators.emplace_back(row - 1, h);
      }
    }
    phases_.resize(modes);
    for (int j = 0; j < modes; ++j) phases_[j] = std::arg(a(j, j));

    // Applied to a state: D first, then R_K^dag, ..., R_1^dag, with R^dag = exp(+i h).
    for (auto it = generators.rbegin(); it != generators.rend(); ++it) {
      SecondQuantizedTerms terms(modes);
      terms.hopping.block(it->first, it->first, 2, 2) = -it->second;
      rotations_.emplace_back(assemble(basis_, terms), EvolutionMethod::kEigen);
    }
  }

  StateVector apply(const StateVector& state) const {
    StateVector out = state;
    for (int j = 0; j < static_cast<int>(phases_.size()); ++j) {
      if (phases_[j] != 0.0) out = apply_mode_phase(out, j, phases_[j]);
    }
    for (const auto& rotation : rotations_) out = rotation.apply(out, 1.0);
    return out;
  }

  const FockBasis& basis() const { return *basis_; }

 private:
  BasisPtr basis_;
  Eigen::VectorXd phases_;
  std::vector<Propagator> rotations_;
};

inline StateVector mode_transform(const StateVector& state, const Eigen::MatrixXcd& unitary) {
  return LiftedUnitary(state.basis_ptr(), unitary).apply(state);
}

}  // namespace ringgyro
