#include "compart/partition.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace compart;

namespace {

struct HippeForms {
  double t;
  double e1() const { return std::exp(-t); }
  double e3() const { return std::exp(-3 * t); }
  double c() const { return std::cos(t); }
  double s() const { return std::sin(t); }
  double c2() const { return std::cos(2 * t); }
  double s2() const { return std::sin(2 * t); }

  Matrix X() const {
    Matrix m(2, 2);
    m(0, 0) = 7.0 / 3 - 11 * c() / 30 + 13 * s() / 30 - 5 * e1() / 3 - 3 * e3() / 10;
    m(0, 1) = 2.0 / 3 - 16 * c2() / 195 - 2 * s2() / 195 - 13 * e1() / 15 + 11 * e3() / 39;
    m(1, 0) = 4.0 / 3 - 4 * c() / 15 + 2 * s() / 15 - 5 * e1() / 3 + 3 * e3() / 5;
    m(1, 1) = 5.0 / 3 - 46 * c2() / 195 + 43 * s2() / 195 - 13 * e1() / 15 - 22 * e3() / 39;
    return m;
  }

  Matrix T_in() const {
    const double cc = c() * c();
    Matrix m(2, 2);
    m(0, 0) = 35.0 / 9 - 8 * c() / 45 + 49 * s() / 45 - 10 * e1() / 9 + 2 * e3() / 5;
    m(0, 1) = 742.0 / 585 - 184 * cc / 585 + 86 * s2() / 585 - 26 * e1() / 45 - 44 * e3() / 117;
    m(1, 0) = 28.0 / 9 - 22 * c() / 45 + 26 * s() / 45 - 20 * e1() / 9 - 2 * e3() / 5;
    m(1, 1) = 2339.0 / 585 - 128 * cc / 585 + 577 * s2() / 585 - 52 * e1() / 45 + 44 * e3() / 117;
    return m;
  }
};

PartitionTrajectory hippe_run(double t1 = 10.0) {
  return decompose(testsupport::shared(testsupport::hippe_periodic()), 0.0, t1);
}

}  // namespace

TEST_CASE("hippe substorages and subthroughflows follow the closed forms") {
  const PartitionTrajectory p = hippe_run();
  for (double t : {0.0, 0.25, 1.0, 2.0, 3.7, 6.0, 10.0}) {
    const HippeForms f{t};
    const SubthroughflowSet s = p.subthroughflows(t);
    CHECK(testsupport::max_abs(s.state.X - f.X()) < 1e-7);
    CHECK(testsupport::max_abs(s.state.x0 - Vector::Constant(2, 3 * f.e1())) < 1e-7);
    CHECK(testsupport::max_abs(s.T_in - f.T_in()) < 1e-7);
    CHECK(std::abs(s.tau0_in(0) - 2 * f.e1()) < 1e-7);
    CHECK(std::abs(s.tau0_in(1) - 4 * f.e1()) < 1e-7);
  }
  CHECK(p.state(1.0).X(0, 0) == doctest::Approx(1.8717913921).epsilon(1e-8));
}

TEST_CASE("decomposition is exhaustive") {
  for (const char* which : {"hippe", "hallam"}) {
    const CompartmentalModel m =
        std::string(which) == "hippe" ? testsupport::hippe_periodic() : testsupport::hallam_gaussian();
    const PartitionTrajectory p = decompose(testsupport::shared(m), 0.0, 30.0);
    // Aggregate storage solved on its own.
    const Trajectory agg = integrate(
        [&m](double t, std::span<const double> u, std::span<double> du) {
          const Vector d = m.rhs(t, Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())));
          std::copy(d.data(), d.data() + d.size(), du.begin());
        },
        m.x_init(), 0.0, 30.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int k = 0; k < 200; ++k) {
      const double t = u(rng);
      const SubthroughflowSet s = p.subthroughflows(t);
      const double scale = std::max(1.0, s.x.cwiseAbs().maxCoeff());
      CHECK(testsupport::max_abs(s.state.aggregate() - agg.at(t)) < 1e-6 * scale);
      // Inward and outward totals are recovered from the subsystems.
      CHECK(testsupport::max_abs(s.tau0_in + s.T_in.rowwise().sum() - s.flows.tau_in) < 1e-6 * scale);
      CHECK(testsupport::max_abs(s.tau0_out + s.T_out.rowwise().sum() - s.flows.tau_out) < 1e-6 * scale);
      // Intensity identities.
      CHECK(testsupport::max_abs(s.T_tilde - s.q.Qx * s.state.X) < 1e-12 * scale);
      CHECK(testsupport::max_abs(s.T_out - s.q.r_inv.asDiagonal() * s.state.X) < 1e-12 * scale);
      CHECK(testsupport::max_abs(s.q.A - (s.q.Qx - Matrix(s.q.r_inv.asDiagonal()))) < 1e-14 * scale);
      CHECK((s.state.X.array() >= -1e-9).all());
    }
  }
}

TEST_CASE("zero inputs leave the subsystems empty") {
  const CompartmentalModel m = with_inputs(testsupport::model("hallam"), {"0", "0", "0"});
  const PartitionTrajectory p = decompose(testsupport::shared(m), 0.0, 5.0);
  for (double t : {0.5, 2.0, 5.0}) {
    const DecomposedState s = p.state(t);
    CHECK(s.X.isZero(0.0));
    CHECK((s.x0.array() > 0.0).all());
  }
}

TEST_CASE("subsystem matrices") {
  const PartitionTrajectory p = hippe_run(4.0);
  const SubthroughflowSet s = p.subthroughflows(2.5);
  for (std::size_t k = 0; k <= 2; ++k) {
    const SubsystemMatrices m = subsystem_matrices(s, k);
    const Vector xk = k == 0 ? s.state.x0 : Vector(s.state.X.col(static_cast<Eigen::Index>(k - 1)));
    CHECK(m.X_k.diagonal().isApprox(xk));
    // Subsystem balance: T_in_k = Z_k 1 + F_k 1, T_out_k = Y_k 1 + F_k^T 1.
    const Vector in = m.Z_k.rowwise().sum() + m.F_k.rowwise().sum();
    const Vector out = m.Y_k.rowwise().sum() + m.F_k.colwise().sum().transpose();
    CHECK(testsupport::max_abs(m.T_in_k.diagonal() - in) < 1e-12);
    CHECK(testsupport::max_abs(m.T_out_k.diagonal() - out) < 1e-12);
    if (k == 0) CHECK(m.Z_k.isZero());
  }
  // Subsystem flows add up to the whole.
  Matrix F = subsystem_matrices(s, 0).F_k;
  for (std::size_t k = 1; k <= 2; ++k) F += subsystem_matrices(s, k).F_k;
  CHECK(testsupport::max_abs(F - s.flows.F) < 1e-7);
}

TEST_CASE("residence times") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::model("hippe")), 0.0, 5.0);
  const IntensitySet q = p.subthroughflows(3.0).q;
  CHECK(q.r(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(q.r(1) == doctest::Approx(3.0 / 7).epsilon(1e-12));
  CHECK(testsupport::max_abs(q.R() * q.r_inv.asDiagonal().toDenseMatrix() - Matrix::Identity(2, 2)) < 1e-12);
}

TEST_CASE("empty compartments use the one-sided limit") {
  const CompartmentalModel h = testsupport::model("hippe");
  const IntensitySet q = intensities(h, 0.0, Vector::Zero(2));
  CHECK(q.Qx(0, 1) == doctest::Approx(2.0 / 3));
  CHECK(q.Qx(1, 0) == doctest::Approx(4.0 / 3));
  CHECK(q.r_inv(0) == doctest::Approx(5.0 / 3));
  CHECK(std::isfinite(q.A.sum()));
}

TEST_CASE("hallam nutrient share from the nutrient input") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::model("hallam")), 0.0, 50.0);
  const DecomposedState s = p.state(50.0);
  CHECK(s.X(0, 2) == doctest::Approx(0.64).epsilon(1e-2));
  CHECK(s.x0.maxCoeff() < 1e-6);
}

TEST_CASE("state packing round-trips") {
  DecomposedState s{Matrix::Random(3, 3), Vector::Random(3)};
  const Vector u = pack_state(s);
  CHECK(u.size() == 12);
  const DecomposedState back = unpack_state(std::span<const double>(u.data(), 12), 3);
  CHECK(back.X == s.X);
  CHECK(back.x0 == s.x0);
}
