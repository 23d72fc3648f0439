#include "compart/odeint.hpp"
#include "compart/model.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace compart;

namespace {

VectorField model_field(const CompartmentalModel& m) {
  return [&m](double t, std::span<const double> u, std::span<double> du) {
    const Vector d = m.rhs(t, Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())));
    std::copy(d.data(), d.data() + d.size(), du.begin());
  };
}

Matrix hippe_A() {
  Matrix A(2, 2);
  A << -5.0 / 3, 2.0 / 3, 4.0 / 3, -7.0 / 3;
  return A;
}

}  // namespace

TEST_CASE("exponential decay") {
  VectorField f = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = -x[0]; };
  const Trajectory tr = integrate(f, Vector::Ones(1), 0.0, 1.0);
  CHECK(std::abs(tr.at(1.0)(0) - std::exp(-1.0)) < 1e-8);
  CHECK(tr.t0() == 0.0);
  CHECK(tr.t_end() == 1.0);
  for (std::size_t k = 0; k + 1 < tr.size(); ++k) CHECK(tr.times()[k] < tr.times()[k + 1]);
}

TEST_CASE("interpolation is exact at stored times") {
  const CompartmentalModel g = testsupport::model("hallam");
  const Trajectory tr = integrate(model_field(g), g.x_init(), 0.0, 5.0);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const Vector v = tr.at(tr.times()[k]);
    for (std::size_t i = 0; i < tr.dimension(); ++i) CHECK(v(static_cast<Eigen::Index>(i)) == tr.state(k)[i]);
  }
  CHECK_THROWS_AS(tr.at(5.5), ValidationError);
  CHECK_THROWS_AS(tr.at(-0.1), ValidationError);
}

TEST_CASE("aggregate linear solution") {
  const CompartmentalModel h = testsupport::model("hippe");
  const Trajectory tr = integrate(model_field(h), h.x_init(), 0.0, 2.0);
  const double want = 2.0 * std::exp(-2.0) + 1.0;
  CHECK(want == doctest::Approx(1.270671).epsilon(1e-6));
  CHECK(std::abs(tr.at(2.0)(0) - want) < 1e-8);
  CHECK(std::abs(tr.at(2.0)(1) - want) < 1e-8);
}

TEST_CASE("nonlinear model settles") {
  const CompartmentalModel g = testsupport::model("hallam");
  const Trajectory tr = integrate(model_field(g), g.x_init(), 0.0, 20.0);
  const Vector r = g.rhs(20.0, tr.at(20.0));
  CHECK(r.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("dense output matches a refined run") {
  // x' = -x + sin(3t): smooth, with a known solution.
  VectorField f = [](double t, std::span<const double> x, std::span<double> dx) { dx[0] = -x[0] + std::sin(3 * t); };
  auto exact = [](double t) { return (std::sin(3 * t) - 3 * std::cos(3 * t)) / 10 + 1.3 * std::exp(-t); };
  IntegratorConfig cfg;
  cfg.rtol = 1e-9;
  cfg.atol = 1e-12;
  const Trajectory coarse = integrate(f, Vector::Ones(1), 0.0, 10.0, cfg);
  const double mean_step = 10.0 / static_cast<double>(coarse.size() - 1);
  IntegratorConfig fine_cfg = cfg;
  fine_cfg.max_step = mean_step / 2;
  const Trajectory fine = integrate(f, Vector::Ones(1), 0.0, 10.0, fine_cfg);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int k = 0; k < 100; ++k) {
    const double t = u(rng);
    CHECK(std::abs(coarse.at(t)(0) - fine.at(t)(0)) < 1e-8);
    CHECK(std::abs(coarse.at(t)(0) - exact(t)) < 1e-8);
  }
}

TEST_CASE("tiny negative states are clamped before evaluation") {
  double seen = 1.0;
  VectorField f = [&](double, std::span<const double> x, std::span<double> dx) {
    seen = std::min(seen, x[0]);
    dx[0] = 0.0;
  };
  Vector x0(1);
  x0 << -1e-11;
  integrate(f, x0, 0.0, 1.0);
  CHECK(seen == 0.0);
}

TEST_CASE("integration failures") {
  VectorField blowup = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = x[0] * x[0]; };
  CHECK_THROWS_AS(integrate(blowup, Vector::Ones(1), 0.0, 2.0), NumericalError);
  VectorField nan = [](double t, std::span<const double>, std::span<double> dx) { dx[0] = t > 0.5 ? NAN : 1.0; };
  CHECK_THROWS_AS(integrate(nan, Vector::Ones(1), 0.0, 1.0), NumericalError);
  VectorField ok = [](double, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; };
  CHECK_THROWS_AS(integrate(ok, Vector::Ones(1), 1.0, 1.0), ValidationError);
}

TEST_CASE("fundamental matrix") {
  const Trajectory zero = fundamental_matrix([](double) { return Matrix::Zero(3, 3); }, 3, 0.0, 4.0);
  CHECK(matrix_at(zero, 3, 2.5).isApprox(Matrix::Identity(3, 3)));

  const Trajectory scalar = fundamental_matrix([](double) { return Matrix::Constant(1, 1, -0.7); }, 1, 1.0, 3.0);
  CHECK(std::abs(matrix_at(scalar, 1, 3.0)(0, 0) - std::exp(-1.4)) < 1e-8);

  const Matrix A = hippe_A();
  const Trajectory V = fundamental_matrix([&](double) { return A; }, 2, 0.0, 5.0);
  const double e1 = std::exp(-1.0), e3 = std::exp(-3.0);
  Matrix want(2, 2);
  want << 2 * e1 / 3 + e3 / 3, e1 / 3 - e3 / 3, 2 * e1 / 3 - 2 * e3 / 3, e1 / 3 + 2 * e3 / 3;
  CHECK(want(0, 0) == doctest::Approx(0.261849).epsilon(1e-5));
  CHECK(testsupport::max_abs(matrix_at(V, 2, 1.0) - want) < 1e-8);
  CHECK(testsupport::max_abs(propagator(A, 1.0) - want) < 1e-12);
  // Substochastic: every column of V has nonnegative entries summing to at most one.
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const Matrix Vt = matrix_at(V, 2, t);
    CHECK((Vt.array() >= 0.0).all());
    CHECK((Vt.colwise().sum().array() <= 1.0 + 1e-12).all());
  }
}

TEST_CASE("propagator of a defective matrix") {
  Matrix J(2, 2);
  J << -1, 1, 0, -1;
  Matrix want(2, 2);
  const double t = 1.7;
  want << 1, t, 0, 1;
  want *= std::exp(-t);
  CHECK(testsupport::max_abs(propagator(J, t) - want) < 1e-12);
}

TEST_CASE("linear solution with constant inputs") {
  LinearSystem sys{hippe_A(), Vector(Vector::Ones(2))};
  const Vector x0 = Vector::Constant(2, 3.0);
  const LinearSolution s = linear_solution(sys, x0, 0.0, 1.0);
  const double e1 = std::exp(-1.0), e3 = std::exp(-3.0);
  Matrix want(2, 2);
  want << 7.0 / 9 - e3 / 9 - 2 * e1 / 3, 2.0 / 9 + e3 / 9 - e1 / 3, 4.0 / 9 + 2 * e3 / 9 - 2 * e1 / 3,
      5.0 / 9 - 2 * e3 / 9 - e1 / 3;
  CHECK(want(0, 0) == doctest::Approx(0.526993).epsilon(1e-5));
  CHECK(testsupport::max_abs(s.X - want) < 1e-12);
  CHECK(s.x0.isApprox(Vector::Constant(2, 3 * e1), 1e-12));

  const LinearSolution s0 = linear_solution(sys, x0, 0.0, 0.0);
  CHECK(s0.X.isZero());
  CHECK(s0.x0 == x0);
}

TEST_CASE("linear solution with a singular matrix") {
  LinearSystem sys{Matrix::Zero(2, 2), Vector{{1.0, 2.0}}};
  const LinearSolution s = linear_solution(sys, Vector::Ones(2), 0.0, 3.0);
  Matrix want = Matrix::Zero(2, 2);
  want(0, 0) = 3.0;
  want(1, 1) = 6.0;
  CHECK(testsupport::max_abs(s.X - want) < 1e-10);
}

TEST_CASE("integrate and linear_solution agree on the linear fixture") {
  const CompartmentalModel h = testsupport::hippe_periodic();
  const Trajectory tr = integrate(model_field(h), h.x_init(), 0.0, 10.0);
  LinearSystem sys{hippe_A(), std::function<Vector(double)>([](double t) {
                     return Vector{{3 + std::sin(t), 3 + std::sin(2 * t)}};
                   })};
  for (double t : {0.5, 1.0, 2.5, 5.0, 7.5, 10.0}) {
    const LinearSolution s = linear_solution(sys, h.x_init(), 0.0, t);
    const Vector agg = s.x0 + s.X.rowwise().sum();
    CHECK(testsupport::max_abs(agg - tr.at(t)) < 1e-7);
  }
}

TEST_CASE("scaled substorage") {
  const Matrix A = hippe_A();
  CHECK(scaled_substorage(A, 0.0, 0.0).isZero());
  Matrix S(2, 2);
  S << 7.0 / 9, 2.0 / 9, 4.0 / 9, 5.0 / 9;
  CHECK(testsupport::max_abs(scaled_substorage(A, 0.0, 50.0) - S) < 1e-8);
  CHECK(testsupport::max_abs(scaled_substorage(A, 0.0, 50.0) + A.inverse()) < 1e-8);
  const Matrix a = Matrix::Constant(1, 1, -1.0);
  CHECK(std::abs(scaled_substorage(a, 0.0, 2.0)(0, 0) - (1 - std::exp(-2.0))) < 1e-12);
  // Singular A: the integral of e^{0} is the elapsed time.
  CHECK(std::abs(scaled_substorage(Matrix::Zero(1, 1), 1.0, 4.0)(0, 0) - 3.0) < 1e-10);
}
