#pragma once

// Exact time evolution psi(t) = exp(-i H t) psi.
//
// The Hamiltonian is split into the connected components of its sparsity
// graph (number-conserving gates leave many decoupled sectors) and each
// component is diagonalized once; applying the propagator for any t is then a
// pair of dense products per block. Components larger than the dense limit
// are propagated with a scaled Taylor series on the sparse matrix instead.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ringgyro/hamiltonian.hpp"

namespace ringgyro {

enum class EvolutionMethod {
  kAuto,    // eigendecomposition unless a block exceeds the dense limit
  kEigen,   // always eigendecompose
  kTaylor,  // always use the sparse Taylor series
};

namespace detail {

inline std::vector<std::vector<Eigen::Index>> connected_blocks(const HamiltonianMatrix::Sparse& h) {
  const Eigen::Index n = h.rows();
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  auto find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (Eigen::Index k = 0; k < h.outerSize(); ++k) {
    for (HamiltonianMatrix::Sparse::InnerIterator it(h, k); it; ++it) {
      if (it.value() == 0.0) continue;
      const auto a = find(it.row());
      const auto b = find(it.col());
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  std::vector<Eigen::Index> label(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Eigen::Index>> blocks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto root = find(i);
    auto& l = label[static_cast<std::size_t>(root)];
    if (l < 0) {
      l = static_cast<Eigen::Index>(blocks.size());
      blocks.emplace_back();
    }
    blocks[static_cast<std::size_t>(l)].push_back(i);
  }
  return blocks;
}

}  // namespace detail

/// Reusable propagator for one Hamiltonian. Immutable after construction.
class Propagator {
 public:
  static constexpr Eigen::Index kDefaultDenseLimit = 1200;

  explicit Propagator(const HamiltonianMatrix& hamiltonian, EvolutionMethod method = EvolutionMethod::kAuto,
                      Eigen::Index dense_limit = kDefaultDenseLimit)
      : basis_(hamiltonian.basis_ptr()) {
    hamiltonian.require_hermitian();
    auto blocks = detail::connected_blocks(hamiltonian.matrix());
    Eigen::Index largest = 0;
    for (const auto& b : blocks) largest = std::max<Eigen::Index>(largest, static_cast<Eigen::Index>(b.size()));

    use_taylor_ = method == EvolutionMethod::kTaylor ||
                  (method == EvolutionMethod::kAuto && largest > dense_limit);
    if (use_taylor_) {
      prepare_taylor(hamiltonian.matrix());
      return;
    }

    const auto& h = hamiltonian.matrix();
    std::vector<Eigen::Index> local(static_cast<std::size_t>(h.rows()), 0);
    blocks_.reserve(blocks.size());
    for (auto& indices : blocks) {
      Block block;
      block.indices = std::move(indices);
      const auto m = static_cast<Eigen::Index>(block.indices.size());
      for (Eigen::Index r = 0; r < m; ++r) local[static_cast<std::size_t>(block.indices[static_cast<std::size_t>(r)])] = r;
      Eigen::MatrixXcd sub = Eigen::MatrixXcd::Zero(m, m);
      for (Eigen::Index c = 0; c < m; ++c) {
        for (HamiltonianMatrix::Sparse::InnerIterator it(h, block.indices[static_cast<std::size_t>(c)]); it; ++it) {
          sub(local[static_cast<std::size_t>(it.row())], c) = it.value();
        }
      }
      if (m == 1) {
        block.energies = Eigen::VectorXd::Constant(1, sub(0, 0).real());
        block.vectors = Eigen::MatrixXcd::Identity(1, 1);
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(sub);
        block.energies = solver.eigenvalues();
        block.vectors = solver.eigenvectors();
      }
      blocks_.push_back(std::move(block));
    }
  }

  const FockBasis& basis() const { return *basis_; }
  bool uses_taylor() const { return use_taylor_; }
  std::size_t block_count() const { return use_taylor_ ? 1 : blocks_.size(); }

  StateVector apply(const StateVector& state, double time) const {
    if (time < 0.0) throw ValidationError("evolution time must be non-negative");
    if (state.basis().atoms() != basis_->atoms() || state.basis().modes() != basis_->modes()) {
      throw ValidationError("state and Hamiltonian live in different Fock spaces");
    }
    Eigen::VectorXcd out = use_taylor_ ? taylor(state.amplitudes(), time) : spectral(state.amplitudes(), time);
    return renormalize_if_drifted(StateVector(state.basis_ptr(), std::move(out), state.corrected_drift()));
  }

 private:
  struct Block {
    std::vector<Eigen::Index> indices;
    Eigen::VectorXd energies;
    Eigen::MatrixXcd vectors;
  };

  Eigen::VectorXcd spectral(const Eigen::VectorXcd& in, double time) const {
    Eigen::VectorXcd out(in.size());
    for (const auto& block : blocks_) {
      const auto m = static_cast<Eigen::Index>(block.indices.size());
      Eigen::VectorXcd local(m);
      for (Eigen::Index r = 0; r < m; ++r) local[r] = in[block.indices[static_cast<std::size_t>(r)]];
      Eigen::VectorXcd coeffs = block.vectors.adjoint() * local;
      for (Eigen::Index r = 0; r < m; ++r) coeffs[r] *= std::polar(1.0, -block.energies[r] * time);
      local = block.vectors * coeffs;
      for (Eigen::Index r = 0; r < m; ++r) out[block.indices[static_cast<std::size_t>(r)]] = local[r];
    }
    return out;
  }

  void prepare_taylor(const HamiltonianMatrix::Sparse& h) {
    // Shifting by the mean diagonal shrinks the norm; the shift returns as a global phase.
    const Eigen::Index n = h.rows();
    shift_ = n > 0 ? h.diagonal().real().mean() : 0.0;
    HamiltonianMatrix::Sparse identity(n, n);
    identity.setIdentity();
    shifted_ = h - Complex(shift_) * identity;
    shifted_.makeCompressed();
    Eigen::VectorXd column_sums = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < shifted_.outerSize(); ++k) {
      for (HamiltonianMatrix::Sparse::InnerIterator it(shifted_, k); it; ++it) column_sums[k] += std::abs(it.value());
    }
    one_norm_ = n > 0 ? column_sums.maxCoeff() : 0.0;
  }

  Eigen::VectorXcd taylor(const Eigen::VectorXcd& in, double time) const {
    const double reach = one_norm_ * time;
    const auto steps = static_cast<long>(std::max(1.0, std::ceil(reach)));
    const double dt = time / static_cast<double>(steps);
    Eigen::VectorXcd v = in;
    Eigen::VectorXcd term(in.size());
    for (long s = 0; s < steps; ++s) {
      term = v;
      Eigen::VectorXcd sum = v;
      for (int k = 1; k <= 80; ++k) {
        term = (Complex(0.0, -dt / k) * (shifted_ * term)).eval();
        sum += term;
        if (term.norm() <= 1e-17 * sum.norm()) break;
      }
      v = std::move(sum);
    }
    return v * std::polar(1.0, -shift_ * time);
  }

  BasisPtr basis_;
  bool use_taylor_ = false;
  std::vector<Block> blocks_;
  HamiltonianMatrix::Sparse shifted_;
  double shift_ = 0.0;
  double one_norm_ = 0.0;
};

inline StateVector evolve(const StateVector& state, const HamiltonianMatrix& hamiltonian, double time,
                          EvolutionMethod method = EvolutionMethod::kAuto) {
  if (time < 0.0) throw ValidationError("evolution time must be non-negative");
  return Propagator(hamiltonian, method).apply(state, time);
}

}  // namespace ringgyro
