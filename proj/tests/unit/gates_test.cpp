#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "ringgyro/gates.hpp"

using namespace ringgyro;

namespace {

constexpr double kPi = std::numbers::pi;

// Single-particle matrix of a gate: column k is the image of an atom on site k.
Eigen::Matrix3cd single_particle(const GateSet& g, bool tritter) {
  const auto& b = g.basis_ptr();
  Eigen::Matrix3cd m;
  for (int k = 0; k < 3; ++k) {
    std::vector<int> occ(3, 0);
    occ[static_cast<std::size_t>(k)] = 1;
    const auto out = tritter ? g.tritter(fock_state(b, occ)) : g.beam_splitter(fock_state(b, occ));
    for (int j = 0; j < 3; ++j) {
      std::vector<int> e(3, 0);
      e[static_cast<std::size_t>(j)] = 1;
      m(j, k) = out.amplitude(e);
    }
  }
  return m;
}

}  // namespace

TEST(BeamSplitter, SingleAtomGoesToEqualSuperpositionWithQuarterTurn) {
  const GateSet g(FockBasis::enumerate(1, 3), 2.5);
  const auto m = single_particle(g, false);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(m(0, 0) - r), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(m(1, 0) - oracle::Complex(0, r)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(m(2, 2) - 1.0), 0.0, 1e-12);
}

TEST(BeamSplitter, FockInputGivesBinomialAmplitudes) {
  for (int n : {2, 5, 8}) {
    const auto b = FockBasis::enumerate(n, 3);
    const GateSet g(b, 1.0);
    std::vector<int> in{n, 0, 0};
    const auto out = g.beam_splitter(fock_state(b, in));
    for (int m = 0; m <= n; ++m) {
      const double mag = std::sqrt(std::tgamma(n + 1.0) / (std::tgamma(m + 1.0) * std::tgamma(n - m + 1.0))) /
                         std::pow(2.0, n / 2.0);
      const oracle::Complex want = std::pow(oracle::Complex(0, 1), m) * mag;
      EXPECT_NEAR(std::abs(out.amplitude(std::vector<int>{n - m, m, 0}) - want), 0.0, 1e-10) << n << " " << m;
    }
  }
}

TEST(Tritter, SingleParticleMatchesSymmetricTritterUpToGlobalPhase) {
  const GateSet g(FockBasis::enumerate(1, 3), 0.7);
  const auto m = single_particle(g, true);
  const oracle::Complex w = std::polar(1.0, 2.0 * kPi / 3.0);
  Eigen::Matrix3cd s3;
  s3 << 1.0, w, w, w, 1.0, w, w, w, 1.0;
  s3 /= std::sqrt(3.0);
  const oracle::Complex ratio = m(0, 0) / s3(0, 0);
  EXPECT_NEAR(std::abs(ratio), 1.0, 1e-10);
  EXPECT_LT((m - ratio * s3).norm(), 1e-10);
}

TEST(GateAlgebra, InversesUndoForwardGates) {
  std::mt19937_64 rng(21);
  for (int n : {1, 4, 8}) {
    const auto b = FockBasis::enumerate(n, 3);
    const GateSet g(b, 3.0);
    const auto s = oracle::random_state(b, rng);
    EXPECT_LT(oracle::phase_distance(g.inverse_tritter(g.tritter(s)).amplitudes(), s.amplitudes()), 1e-10);
    // The splitter's total hold pi/J gives (-1)^(n0+n1): identity on the two
    // ports, a pi phase on the idle site.
    const auto bs = g.inverse_beam_splitter(g.beam_splitter(s));
    const auto expected = apply_mode_phase(s, 2, kPi);
    EXPECT_LT(oracle::phase_distance(bs.amplitudes(), expected.amplitudes()), 1e-10);
    for (int n2 = 0; n2 <= n; ++n2) {
      Eigen::VectorXcd v = s.amplitudes();
      for (std::size_t i = 0; i < b->size(); ++i) {
        if (b->count(i, 2) != n2) v[static_cast<Eigen::Index>(i)] = 0.0;
      }
      const StateVector sector(b, v / v.norm());
      const auto back = g.inverse_beam_splitter(g.beam_splitter(sector));
      EXPECT_LT(oracle::phase_distance(back.amplitudes(), sector.amplitudes()), 1e-10);
    }
    const auto p = apply_gate(apply_gate(s, GateSpec::phase_step(50.0)), GateSpec::phase_step(-50.0));
    EXPECT_LT((p.amplitudes() - s.amplitudes()).norm(), 1e-12);
  }
}

TEST(GateAlgebra, GateSetMatchesDirectEvolution) {
  std::mt19937_64 rng(2);
  const auto b = FockBasis::enumerate(4, 3);
  const GateSet g(b, 1.3);
  const auto s = oracle::random_state(b, rng);
  EXPECT_LT((g.tritter(s).amplitudes() - apply_gate(s, GateSpec::tritter(1.3)).amplitudes()).norm(), 1e-12);
  EXPECT_LT((g.beam_splitter(s).amplitudes() - apply_gate(s, GateSpec::beam_splitter(1.3)).amplitudes()).norm(),
            1e-12);
}

TEST(PhaseStep, SignOfOffsetSelectsDirection) {
  EXPECT_NEAR(phase_step_angle(GateSpec::phase_step(1e6)), 2.0 * kPi / 3.0, 1e-12);
  EXPECT_NEAR(phase_step_angle(GateSpec::phase_step(-3.0)), -2.0 * kPi / 3.0, 1e-12);
  EXPECT_NEAR(GateSpec::phase_step(4.0 * kPi / (3.0 * 500e-9)).hold_time, 500e-9, 1e-20);
}

TEST(GateSpec, WrongHoldTimeIsRejected) {
  auto bs = GateSpec::beam_splitter(2.0);
  bs.hold_time *= 1.01;
  EXPECT_THROW(bs.validate(), GateSpecError);
  auto t = GateSpec::tritter(2.0);
  t.coupling = 0.0;
  EXPECT_THROW(t.validate(), GateSpecError);
  EXPECT_THROW(GateSpec::phase_step(0.0).validate(), GateSpecError);
  auto same = GateSpec::beam_splitter(1.0, {1, 1});
  EXPECT_THROW(same.validate(), GateSpecError);
}

TEST(GateSpec, HoldTimes) {
  EXPECT_NEAR(GateSpec::beam_splitter(10.0).hold_time, kPi / 40.0, 1e-15);
  EXPECT_NEAR(GateSpec::inverse_beam_splitter(10.0).hold_time, 3.0 * kPi / 40.0, 1e-15);
  EXPECT_NEAR(GateSpec::tritter(10.0).hold_time, 2.0 * kPi / 90.0, 1e-15);
  EXPECT_NEAR(GateSpec::inverse_tritter(10.0).hold_time, 4.0 * kPi / 90.0, 1e-15);
}

TEST(BeamSplitter, OtherSitePairsUseTheirLink) {
  const auto b = FockBasis::enumerate(1, 3);
  const auto out = apply_gate(fock_state(b, {0, 0, 1}), GateSpec::beam_splitter(1.0, {1, 2}));
  EXPECT_NEAR(std::norm(out.amplitude(std::vector<int>{0, 1, 0})), 0.5, 1e-12);
  EXPECT_NEAR(std::norm(out.amplitude(std::vector<int>{1, 0, 0})), 0.0, 1e-12);
}
