#pragma once

// Number-conserving Hamiltonians on Fock spaces, in units of angular
// frequency (H / hbar). All rates quoted in Hz elsewhere in the library are
// used directly as these angular rates, so a 50:50 splitter takes t = pi/4J.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ringgyro/constants.hpp"
#include "ringgyro/fock.hpp"

namespace ringgyro {

class HamiltonianMatrix {
 public:
  using Sparse = Eigen::SparseMatrix<Complex>;
  static constexpr double kHermitianTolerance = 1e-12;

  HamiltonianMatrix(BasisPtr basis, Sparse matrix) : basis_(std::move(basis)), h_(std::move(matrix)) {
    const auto n = static_cast<Eigen::Index>(basis_->size());
    if (h_.rows() != n || h_.cols() != n) throw ValidationError("Hamiltonian shape mismatch");
    h_.makeCompressed();
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Sparse& matrix() const { return h_; }
  Eigen::Index dimension() const { return h_.rows(); }

  double max_abs_entry() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < h_.outerSize(); ++k) {
      for (Sparse::InnerIterator it(h_, k); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
  }

  double hermiticity_deviation() const {
    const Sparse diff = h_ - Sparse(h_.adjoint());
    double m = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
      for (Sparse::InnerIterator it(diff, k); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
  }

  void require_hermitian() const {
    const double dev = hermiticity_deviation();
    if (dev > kHermitianTolerance * std::max(1.0, max_abs_entry())) {
      throw ValidationError("Hamiltonian is not Hermitian (deviation " + std::to_string(dev) + ")");
    }
  }

  double expectation(const StateVector& state) const {
    return state.amplitudes().dot(h_ * state.amplitudes()).real();
  }

 private:
  BasisPtr basis_;
  Sparse h_;
};

/// Generic one- and two-body terms
///   H = sum_ab hopping(a,b) c_a^dag c_b + sum_a onsite(a) c_a^dag^2 c_a^2
/// assembled into a sparse matrix on a Fock basis.
struct SecondQuantizedTerms {
  Eigen::MatrixXcd hopping;
  Eigen::VectorXd onsite;

  explicit SecondQuantizedTerms(int modes)
      : hopping(Eigen::MatrixXcd::Zero(modes, modes)), onsite(Eigen::VectorXd::Zero(modes)) {}
};

inline HamiltonianMatrix assemble(const BasisPtr& basis, const SecondQuantizedTerms& terms) {
  const int modes = basis->modes();
  if (terms.hopping.rows() != modes || terms.hopping.cols() != modes || terms.onsite.size() != modes) {
    throw ValidationError("term dimensions do not match the basis mode count");
  }
  const double asym = (terms.hopping - terms.hopping.adjoint()).cwiseAbs().maxCoeff();
  if (asym > HamiltonianMatrix::kHermitianTolerance * std::max(1.0, terms.hopping.cwiseAbs().maxCoeff())) {
    throw ValidationError("one-body matrix is not Hermitian (deviation " + std::to_string(asym) + ")");
  }

  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(basis->size() * static_cast<std::size_t>(1 + modes * (modes - 1)));
  OccupationVector target(static_cast<std::size_t>(modes));
  for (std::size_t i = 0; i < basis->size(); ++i) {
    const auto occ = (*basis)[i];
    Complex diag = 0.0;
    for (int a = 0; a < modes; ++a) {
      const double n = occ[static_cast<std::size_t>(a)];
      diag += terms.hopping(a, a) * n + terms.onsite[a] * n * (n - 1.0);
    }
    if (diag != 0.0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);

    for (int b = 0; b < modes; ++b) {
      const int nb = occ[static_cast<std::size_t>(b)];
      if (nb == 0) continue;
      for (int a = 0; a < modes; ++a) {
        if (a == b || terms.hopping(a, b) == 0.0) continue;
        std::copy(occ.begin(), occ.end(), target.begin());
        --target[static_cast<std::size_t>(b)];
        ++target[static_cast<std::size_t>(a)];
        const double amp = std::sqrt(static_cast<double>(nb) * (target[static_cast<std::size_t>(a)]));
        const auto j = basis->index_of(target);
        triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), terms.hopping(a, b) * amp);
      }
    }
  }
  HamiltonianMatrix::Sparse h(static_cast<Eigen::Index>(basis->size()), static_cast<Eigen::Index>(basis->size()));
  h.setFromTriplets(triplets.begin(), triplets.end());
  return HamiltonianMatrix(basis, std::move(h));
}

/// Three-site ring parameters. Link j couples sites j and (j+1) mod 3.
///
/// `flux` is the rotation phase theta threaded through the ring; each hop
/// j -> j+1 carries exp(i flux / 3). With uniform couplings this reproduces
/// the flow-basis energies -2J cos(theta/3 - 2 pi k/3).
struct RingParams {
  std::array<double, 3> coupling{};     // J_j [Hz]
  std::array<double, 3> interaction{};  // V_j [Hz]
  std::array<double, 3> offset{};       // epsilon_j [Hz]
  double flux = 0.0;                    // theta [rad]

  static RingParams uniform(double coupling, double interaction = 0.0) {
    RingParams p;
    p.coupling.fill(coupling);
    p.interaction.fill(interaction);
    return p;
  }

  void validate() const {
    auto finite = [](const std::array<double, 3>& a) {
      return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(coupling) || !finite(interaction) || !finite(offset) || !std::isfinite(flux)) {
      throw ValidationError("ring parameters must be finite");
    }
  }
};

inline void require_ring(const FockBasis& basis) {
  if (basis.modes() != 3) {
    throw UnsupportedGeometry("ring Hamiltonians need exactly 3 modes, basis has " +
                              std::to_string(basis.modes()));
  }
}

// H/hbar = sum eps_j n_j - sum J_j (e^{i theta/3} a_j^dag a_{j+1} + h.c.) + sum V_j a_j^dag^2 a_j^2
inline HamiltonianMatrix build_bose_hubbard(const BasisPtr& basis, const RingParams& params) {
  require_ring(*basis);
  params.validate();
  SecondQuantizedTerms terms(3);
  const Complex peierls = std::polar(1.0, params.flux / 3.0);
  for (int j = 0; j < 3; ++j) {
    const int k = (j + 1) % 3;
    terms.hopping(j, j) += params.offset[static_cast<std::size_t>(j)];
    terms.hopping(j, k) += -params.coupling[static_cast<std::size_t>(j)] * peierls;
    terms.hopping(k, j) += -params.coupling[static_cast<std::size_t>(j)] * std::conj(peierls);
    terms.onsite[j] = params.interaction[static_cast<std::size_t>(j)];
  }
  return assemble(basis, terms);
}

// Flow-mode ordering used throughout: index 0, 1, 2 <-> alpha_{-1}, alpha_0, alpha_{+1}.
inline constexpr int kFlowMinus = 0;
inline constexpr int kFlowZero = 1;
inline constexpr int kFlowPlus = 2;

inline double flow_energy(double coupling, double theta, int k) {
  return -2.0 * coupling * std::cos(theta / 3.0 - 2.0 * constants::kPi * k / 3.0);
}

// H_k/hbar = -2J sum_k cos(theta/3 - 2 pi k/3) n_{alpha_k}; diagonal in the flow Fock basis.
inline HamiltonianMatrix build_flow_hamiltonian(const BasisPtr& basis, double coupling, double theta) {
  require_ring(*basis);
  SecondQuantizedTerms terms(3);
  for (int idx = 0; idx < 3; ++idx) terms.hopping(idx, idx) = flow_energy(coupling, theta, idx - 1);
  return assemble(basis, terms);
}

}  // namespace ringgyro
