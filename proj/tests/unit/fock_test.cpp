#include <gtest/gtest.h>

#include <numbers>
#include <set>

#include "ringgyro/fock.hpp"

using namespace ringgyro;

TEST(FockBasis, SizesMatchStarsAndBars) {
  EXPECT_EQ(FockBasis::enumerate(2, 3)->size(), 6u);
  EXPECT_EQ(FockBasis::enumerate(60, 3)->size(), 1891u);
  EXPECT_EQ(FockBasis::enumerate(5, 1)->size(), 1u);
  EXPECT_EQ(FockBasis::enumerate(4, 4)->size(), 35u);
}

TEST(FockBasis, VacuumHasOneElement) {
  const auto b = FockBasis::enumerate(0, 3);
  ASSERT_EQ(b->size(), 1u);
  EXPECT_EQ(b->occupation(0), (OccupationVector{0, 0, 0}));
}

TEST(FockBasis, IndexIsBijective) {
  const auto b = FockBasis::enumerate(7, 3);
  std::set<OccupationVector> seen;
  for (std::size_t i = 0; i < b->size(); ++i) {
    const auto occ = b->occupation(i);
    int sum = 0;
    for (int n : occ) {
      EXPECT_GE(n, 0);
      sum += n;
    }
    EXPECT_EQ(sum, 7);
    EXPECT_EQ(b->index_of(occ), i);
    seen.insert(occ);
  }
  EXPECT_EQ(seen.size(), b->size());
}

TEST(FockBasis, OrderingStartsWithAllAtomsInModeZero) {
  const auto b = FockBasis::enumerate(3, 3);
  EXPECT_EQ(b->occupation(0), (OccupationVector{3, 0, 0}));
  EXPECT_EQ(b->occupation(b->size() - 1), (OccupationVector{0, 0, 3}));
}

TEST(FockBasis, CapacityErrorNamesDimension) {
  try {
    FockBasis::enumerate(100, 4, 1000);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("176851"), std::string::npos) << e.what();
  }
}

TEST(FockBasis, RejectsNegativeInputs) {
  EXPECT_THROW(FockBasis::enumerate(-1, 3), Error);
  EXPECT_THROW(FockBasis::enumerate(2, 0), Error);
}

TEST(FockState, UnitAmplitudeAtIndex) {
  const auto b = FockBasis::enumerate(3, 3);
  const auto s = fock_state(b, {3, 0, 0});
  EXPECT_DOUBLE_EQ(std::abs(s.amplitude(std::vector<int>{3, 0, 0})), 1.0);
  EXPECT_NEAR(s.norm(), 1.0, 1e-15);
  const auto b2 = FockBasis::enumerate(2, 3);
  const auto t = fock_state(b2, {1, 1, 0});
  EXPECT_EQ(t.amplitudes()[static_cast<Eigen::Index>(b2->index_of(std::vector<int>{1, 1, 0}))], Complex(1.0));
}

TEST(FockState, WrongParticleNumberThrows) {
  const auto b = FockBasis::enumerate(2, 3);
  EXPECT_THROW(fock_state(b, {2, 1, 0}), InvalidOccupation);
  EXPECT_THROW(fock_state(b, {2, 0}), InvalidOccupation);
  EXPECT_THROW(fock_state(b, {3, -1, 0}), InvalidOccupation);
}

TEST(ModePhase, TwoAtomsPickUpDoublePhase) {
  const auto b = FockBasis::enumerate(2, 3);
  const double chi = 2.0 * std::numbers::pi / 3.0;
  const auto s = apply_mode_phase(fock_state(b, {0, 0, 2}), 2, chi);
  const Complex a = s.amplitude(std::vector<int>{0, 0, 2});
  EXPECT_NEAR(std::abs(a - std::polar(1.0, 4.0 * std::numbers::pi / 3.0)), 0.0, 1e-15);
}

TEST(ModePhase, EmptyModeAndFullTurnAreIdentities) {
  const auto b = FockBasis::enumerate(4, 3);
  const auto s = fock_state(b, {4, 0, 0});
  EXPECT_NEAR((apply_mode_phase(s, 2, 1.234).amplitudes() - s.amplitudes()).norm(), 0.0, 1e-15);

  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(b->size()));
  const StateVector mixed(b, v / v.norm());
  EXPECT_NEAR((apply_mode_phase(mixed, 1, 2.0 * std::numbers::pi).amplitudes() - mixed.amplitudes()).norm(), 0.0,
              1e-13);
  EXPECT_NEAR(apply_mode_phase(mixed, 0, 0.7).norm(), 1.0, 1e-14);
  EXPECT_THROW(apply_mode_phase(mixed, 3, 0.1), Error);
}

TEST(StateVector, RejectsSizeMismatch) {
  const auto b = FockBasis::enumerate(2, 3);
  EXPECT_THROW(StateVector(b, Eigen::VectorXcd::Zero(5)), ValidationError);
}

TEST(StateVector, InnerRequiresSameBasis) {
  const auto a = fock_state(FockBasis::enumerate(2, 3), {2, 0, 0});
  const auto b = fock_state(FockBasis::enumerate(2, 2), {2, 0});
  EXPECT_THROW(a.inner(b), ValidationError);
}

TEST(DensityOperator, ValidatesHermiticityAndTrace) {
  const auto b = FockBasis::enumerate(1, 2);
  Eigen::MatrixXcd rho(2, 2);
  rho << 0.5, 0.5, 0.5, 0.5;
  EXPECT_NO_THROW(DensityOperator(b, rho));
  Eigen::MatrixXcd skew = rho;
  skew(0, 1) = Complex(0.5, 0.1);
  EXPECT_THROW(DensityOperator(b, skew), ValidationError);
  EXPECT_THROW(DensityOperator(b, rho * 0.5), ValidationError);
  EXPECT_NO_THROW(DensityOperator(b, rho * 0.5, true));
}

TEST(DensityOperator, FromPureIsProjector) {
  const auto b = FockBasis::enumerate(2, 2);
  Eigen::VectorXcd v(3);
  v << 1.0, Complex(0, 1), 1.0;
  const StateVector s(b, v / v.norm());
  const auto rho = DensityOperator::from_pure(s);
  EXPECT_NEAR(rho.trace(), 1.0, 1e-14);
  EXPECT_NEAR((rho.matrix() * rho.matrix() - rho.matrix()).norm(), 0.0, 1e-14);
}
