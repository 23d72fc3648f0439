#include "compart/diact.hpp"
#include "compart/staticnet.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace compart;

namespace {

StaticSolution hippe_static() {
  const CompartmentalModel h = testsupport::model("hippe");
  return static_partition(h, find_steady_state(h, h.x_init()));
}

}  // namespace

TEST_CASE("hippe steady state and partition") {
  const StaticSolution s = hippe_static();
  CHECK(testsupport::max_abs(s.x - Vector::Ones(2)) < 1e-10);
  Matrix X(2, 2);
  X << 7.0 / 9, 2.0 / 9, 4.0 / 9, 5.0 / 9;
  CHECK(testsupport::max_abs(s.X - X) < 1e-9);
  // Unit inputs make S and X coincide.
  CHECK(testsupport::max_abs(s.S - X) < 1e-9);
  CHECK(s.r(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(s.r(1) == doctest::Approx(3.0 / 7).epsilon(1e-12));
  CHECK(s.x0.isZero());
  CHECK(s.s_rn_residual < 1e-12);
}

TEST_CASE("holistic relations") {
  for (const char* which : {"hippe", "hallam"}) {
    const CompartmentalModel m = testsupport::model(which);
    const StaticSolution s = static_partition(m, find_steady_state(m, m.x_init()));
    const Eigen::Index n = s.x.size();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix Z = s.z.asDiagonal(), R = s.R(), T = s.tau.asDiagonal();
    CHECK(testsupport::max_abs(s.S - R * s.N) < 1e-9);
    CHECK(testsupport::max_abs(s.X - s.S * Z) < 1e-9);
    CHECK(testsupport::max_abs(s.T - s.N * Z) < 1e-9);
    CHECK(testsupport::max_abs(s.X - R * s.T) < 1e-9);
    CHECK(testsupport::max_abs(s.N - (I + s.F * T.inverse() * s.N)) < 1e-9);
    CHECK(testsupport::max_abs(s.A * s.S + I) < 1e-9);
    // Row sums recover the steady state and the throughflows.
    CHECK(testsupport::max_abs(s.X.rowwise().sum() - s.x) < 1e-9);
    CHECK(testsupport::max_abs(s.T.rowwise().sum() - s.tau) < 1e-9);
  }
}

TEST_CASE("output-oriented duals") {
  const StaticSolution s = hippe_static();
  const OutputOriented o = output_oriented(s);
  CHECK(o.storage_duality < 1e-9);
  CHECK(o.flow_duality < 1e-9);
  CHECK(testsupport::max_abs(o.x_bar - s.x) < 1e-9);
  CHECK(testsupport::max_abs(o.S_bar - s.R() * o.N_bar) < 1e-12);
  CHECK(testsupport::max_abs(o.T_bar.rowwise().sum() - s.tau) < 1e-9);
}

TEST_CASE("static transient and the geometric cycling sum") {
  const StaticSolution s = hippe_static();
  const CompartmentalModel h = testsupport::model("hippe");
  const SubflowPath once = parse_path("k=1: 0 -> 1 -> 2 -> 0", h);
  const std::vector<StaticNodeFlow> f = static_transient(s, once);
  REQUIRE(f.size() == 2);
  CHECK(f[0].inflow == doctest::Approx(1.0));
  CHECK(f[0].storage == doctest::Approx(0.6));
  CHECK(f[0].outflow.value() == doctest::Approx(4.0 / 5));
  CHECK(f[1].outflow.value() == doctest::Approx(4.0 / 5 * 5.0 / 7));
  CHECK(static_local_input(s, once) == 1.0);

  SubflowPath loop = parse_path("k=1: 0 -> 1 -> 2 -> 1", h);
  loop.cycles = 40;
  const StaticCumulative c = static_cumulative(s, loop);
  CHECK(c.visits == 40);
  const StaticDiact cyc = static_diact(s, DiactKind::Cycling);
  CHECK(std::abs(c.inflow - cyc.T_tilde(0, 0)) < 1e-9);
  CHECK(std::abs(c.inflow - 8.0 / 27) < 1e-9);
  CHECK(std::abs(c.storage - cyc.X_tilde(0, 0)) < 1e-9);
}

TEST_CASE("hallam steady state agrees with long integration") {
  const CompartmentalModel g = testsupport::model("hallam");
  const Vector x_ss = find_steady_state(g, g.x_init());
  const Trajectory tr = integrate(
      [&g](double t, std::span<const double> u, std::span<double> du) {
        const Vector d = g.rhs(t, Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())));
        std::copy(d.data(), d.data() + d.size(), du.begin());
      },
      g.x_init(), 0.0, 50.0);
  CHECK(testsupport::max_abs(x_ss - tr.at(50.0)) < 1e-6);
  CHECK(g.rhs(0.0, x_ss).cwiseAbs().maxCoeff() < 1e-10);
  const StaticSolution s = static_partition(g, x_ss);
  CHECK(s.r(0) == doctest::Approx(0.87).epsilon(0.012));
  CHECK(s.X(0, 2) == doctest::Approx(0.64).epsilon(0.016));
}

TEST_CASE("zero inputs drain to the empty state") {
  const CompartmentalModel g = with_inputs(testsupport::model("hallam"), {"0", "0", "0"});
  const Vector x_ss = find_steady_state(g, g.x_init());
  CHECK(x_ss.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("steady state failures") {
  // No outputs and a constant input: storage grows without bound.
  const CompartmentalModel m = load_model(R"j({"compartments": ["a"], "inputs": ["1"], "initial": [1]})j");
  SteadyStateConfig cfg;
  cfg.fallback_horizon = 50.0;
  CHECK_THROWS_AS(find_steady_state(m, m.x_init(), cfg), NumericalError);
}
