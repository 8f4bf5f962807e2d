#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "ringgyro/metrology.hpp"

using namespace ringgyro;

namespace {

constexpr double kPi = std::numbers::pi;

SchemeResult run(int scheme, int atoms, double theta = 0.1) {
  SchemeConfig c;
  c.scheme = scheme;
  c.atoms = atoms;
  c.theta = theta;
  c.coupling = 1.0;
  return run_scheme(c);
}

}  // namespace

TEST(PureQfi, ClosedFormsFromPipeline) {
  for (int n : {2, 4, 8}) {
    EXPECT_NEAR(scheme_qfi(run(1, n)), n, 1e-8 * n);
    EXPECT_NEAR(scheme_qfi(run(2, n)), n * (n / 2.0 + 1.0), 1e-8 * n * n);
    EXPECT_NEAR(scheme_qfi(run(3, n)), n * n, 1e-8 * n * n);
  }
}

TEST(PureQfi, FiniteDifferenceAgrees) {
  for (int scheme : {1, 2, 3}) {
    const auto r = run(scheme, 6);
    EXPECT_NEAR(scheme_qfi_finite_difference(r), scheme_qfi(r), 1e-5 * scheme_qfi(r));
  }
}

TEST(PureQfi, GlobalPhaseInvariant) {
  const auto r = run(2, 4);
  const auto& s = r.flow_after_rotation;
  const StateVector rotated(s.basis_ptr(), s.amplitudes() * std::polar(1.0, 1.234));
  EXPECT_NEAR(pure_qfi(rotated, flow_phase_derivative(rotated)), scheme_qfi(r), 1e-10);
}

TEST(PureQfi, IndependentOfPhi) {
  for (double theta : {0.0, 0.05, 0.7}) EXPECT_NEAR(scheme_qfi(run(3, 5, theta)), 25.0, 1e-8);
}

TEST(PureQfi, RequiresNormalizedState) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(2);
  EXPECT_THROW(pure_qfi(v, v), ValidationError);
}

TEST(CramerRao, BoundAndChain) {
  EXPECT_DOUBLE_EQ(crlb(100.0), 0.1);
  EXPECT_THROW(crlb(0.0), NoInformationError);
  const auto r = make_precision_report(100.0, 3, 10, 1.0, 10.0, 1.0, 0.0, 1e-4, 1e-25);
  EXPECT_NEAR(r.delta_theta, 0.1 / (2.0 * std::sqrt(3.0) * 10.0 / 3.0), 1e-12);
  EXPECT_NEAR(r.delta_omega, omega_from_theta(r.delta_theta, 1e-4, 1e-25), 1e-20);
}

TEST(Coefficients, MatchPipelineFlowStatesUpToPhaseOrigin) {
  // The pipeline's flow state may differ from the closed form by
  // exp(i m chi), a shift of the phase origin, and a global phase.
  for (int scheme : {1, 2, 3}) {
    const int n = 6;
    const auto r = run(scheme, n, 0.0);
    const auto got = coefficients_from_flow_state(r.flow_before_rotation).beta;
    const auto closed = scheme_coefficients(input_state_for_scheme(scheme), n, 0.0).beta;
    std::vector<int> support;
    for (int m = 0; m <= n; ++m) {
      EXPECT_NEAR(std::abs(got[m]), std::abs(closed[m]), 1e-10);
      if (std::abs(closed[m]) > 1e-8) support.push_back(m);
    }
    ASSERT_GE(support.size(), 2u);
    const int m0 = support[0];
    const int m1 = support[1];
    const double chi = std::arg((got[m1] / closed[m1]) / (got[m0] / closed[m0])) / (m1 - m0);
    Eigen::VectorXcd shifted = closed;
    for (int m = 0; m <= n; ++m) shifted[m] *= std::polar(1.0, m * chi);
    if (scheme != 3) EXPECT_LT(oracle::phase_distance(got, shifted), 1e-10) << scheme;
    FlowCoefficients c;
    c.atoms = n;
    c.beta = got;
    c.phi = 0.0;
    EXPECT_NEAR(qfi_with_loss_value(c, 0.7), qfi_with_loss_value(scheme_coefficients(input_state_for_scheme(scheme), n), 0.7),
                1e-9);
  }
}

TEST(Coefficients, BatAtLargeN) {
  const auto c = scheme_coefficients(InputState::kBat, 200);
  EXPECT_NO_THROW(c.validate());
  EXPECT_NEAR(qfi_with_loss_value(c, 1.0), 200.0 * 101.0, 1e-6 * 200 * 101);
}

TEST(LossSectors, ProbabilitiesSumToOne) {
  for (auto input : {InputState::kUncorrelated, InputState::kBat, InputState::kNoon}) {
    for (double eta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      double total = 0.0;
      for (const auto& s : loss_sectors(scheme_coefficients(input, 12), eta)) total += s.probability;
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
  }
}

TEST(LossSectors, HandComputedNoonTwoAtoms) {
  // |2,0> + |0,2> at eta = 1/2: both atoms lost from the alpha_{-1} branch
  // has probability 1/2 * (1/2)^2 = 0.125.
  const auto sectors = loss_sectors(scheme_coefficients(InputState::kNoon, 2), 0.5);
  bool found = false;
  for (const auto& s : sectors) {
    if (s.lost == 2 && s.lost_plus == 0) {
      EXPECT_NEAR(s.probability, 0.125, 1e-14);
      found = true;
    }
    if (s.lost == 1 && s.lost_plus == 1) EXPECT_NEAR(s.probability, 0.25, 1e-14);
    if (s.lost == 0) EXPECT_NEAR(s.probability, 0.25, 1e-14);
  }
  EXPECT_TRUE(found);
}

TEST(LossSectors, RejectsEtaOutsideUnitInterval) {
  const auto c = scheme_coefficients(InputState::kNoon, 2);
  try {
    loss_sectors(c, 1.2);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "eta out of [0,1]");
  }
}

TEST(LossyQfi, NoonKeepsOnlyTheLosslessBranch) {
  // Any loss reveals the branch, so F = N^2 eta^N.
  for (double eta : {0.3, 0.7, 0.95}) {
    EXPECT_NEAR(qfi_with_loss_value(scheme_coefficients(InputState::kNoon, 8), eta), 64.0 * std::pow(eta, 8), 1e-9);
  }
}

TEST(LossyQfi, UncorrelatedScalesWithSurvivors) {
  for (auto conv : {SectorConvention::kBlockAdditive, SectorConvention::kMixWithinLoss}) {
    for (double eta : {0.2, 0.6, 0.9}) {
      EXPECT_NEAR(qfi_with_loss_value(scheme_coefficients(InputState::kUncorrelated, 10), eta, conv), 10.0 * eta, 1e-8);
    }
  }
}

TEST(LossyQfi, LosslessLimitMatchesPureQfi) {
  for (int scheme : {1, 2, 3}) {
    const auto r = run(scheme, 8);
    const auto c = coefficients_from_flow_state(r.flow_before_rotation);
    EXPECT_NEAR(qfi_with_loss_value(c, 1.0), scheme_qfi(r), 1e-8);
  }
}

TEST(LossyQfi, MonotoneInEta) {
  for (auto input : {InputState::kUncorrelated, InputState::kBat, InputState::kNoon}) {
    const auto c = scheme_coefficients(input, 10);
    double prev = -1.0;
    for (int k = 0; k <= 20; ++k) {
      const double f = qfi_with_loss_value(c, k / 20.0);
      EXPECT_GE(f, prev - 1e-10);
      prev = f;
    }
  }
}

TEST(LossyQfi, IndependentOfPhi) {
  const auto a = scheme_coefficients(InputState::kBat, 10, 0.3);
  const auto b = scheme_coefficients(InputState::kBat, 10, 2.1);
  EXPECT_NEAR(qfi_with_loss_value(a, 0.7), qfi_with_loss_value(b, 0.7), 1e-9);
}

TEST(LossyQfi, MixingWithinLossNeverHelps) {
  const auto c = scheme_coefficients(InputState::kBat, 10);
  for (double eta : {0.5, 0.8}) {
    EXPECT_LE(qfi_with_loss_value(c, eta, SectorConvention::kMixWithinLoss),
              qfi_with_loss_value(c, eta, SectorConvention::kBlockAdditive) + 1e-9);
  }
}

TEST(LossyQfi, ZeroTransmissionGivesNoInformation) {
  const auto r = qfi_with_loss(scheme_coefficients(InputState::kNoon, 4), 0.0, 3);
  EXPECT_EQ(r.fisher, 0.0);
  EXPECT_TRUE(std::isinf(r.delta_phi));
}

TEST(MixedQfi, AgreesWithFidelityOracle) {
  for (auto input : {InputState::kUncorrelated, InputState::kBat, InputState::kNoon}) {
    for (auto conv : {SectorConvention::kBlockAdditive, SectorConvention::kMixWithinLoss}) {
      const auto c = scheme_coefficients(input, 6);
      const double sld = qfi_with_loss_value(c, 0.8, conv);
      EXPECT_NEAR(oracle_qfi_with_loss(c, 0.8, conv), sld, 0.01 * sld);
    }
  }
}

TEST(MixedQfi, PureStateReducesToPureFormula) {
  std::mt19937_64 rng(4);
  const auto b = FockBasis::enumerate(3, 2);
  const auto psi = oracle::random_state(b, rng);
  Eigen::VectorXcd d = psi.amplitudes();
  for (std::size_t i = 0; i < b->size(); ++i) d[static_cast<Eigen::Index>(i)] *= kI * double(b->count(i, 1));
  const Eigen::MatrixXcd rho = psi.amplitudes() * psi.amplitudes().adjoint();
  const Eigen::MatrixXcd drho = d * psi.amplitudes().adjoint() + psi.amplitudes() * d.adjoint();
  EXPECT_NEAR(mixed_qfi(rho, drho), pure_qfi(psi.amplitudes(), d), 1e-9);
}

TEST(MixedQfi, RejectsNonPositiveMatrices) {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
  rho(0, 0) = 1.1;
  rho(1, 1) = -0.1;
  EXPECT_THROW(mixed_qfi(rho, Eigen::MatrixXcd::Zero(2, 2)), ValidationError);
}

TEST(FidelityOracle, RequiresNonzeroStepAndUnitTrace) {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Identity(2, 2) * 0.5;
  EXPECT_THROW(fidelity_qfi_oracle(rho, rho, 0.0), ValidationError);
  EXPECT_THROW(fidelity_qfi_oracle(rho * 2.0, rho, 1e-3), ValidationError);
  EXPECT_NEAR(fidelity_qfi_oracle(rho, rho, 1e-3), 0.0, 1e-6);
}
