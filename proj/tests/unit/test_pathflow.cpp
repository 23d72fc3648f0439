#include "compart/diact.hpp"
#include "compart/pathflow.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace compart;

namespace {

std::vector<double> uniform_grid(double a, double b, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

// Largest gap between the cumulative path inflows into compartment 1 and the
// composite transfer flow from 2 to 1.
double reconciliation_gap(const PartitionTrajectory& p, std::size_t mw) {
  const CompartmentalModel& m = p.model();
  TransientOptions opt;
  opt.grid = uniform_grid(0.0, 10.0, 101);
  SubflowPath a = parse_path("k=1: 0 -> 1 -> 2 -> 1", m);
  SubflowPath b = parse_path("k=2: 0 -> 2 -> 1 -> 2 -> 1", m);
  a.cycles = b.cycles = mw;
  const CumulativeRecord ra = cumulative_transient(p, a, opt);
  const CumulativeRecord rb = cumulative_transient(p, b, opt);
  double gap = 0.0;
  for (std::size_t i = 0; i < opt.grid.size(); ++i) {
    const double dyn = diact_flows(p, opt.grid[i], DiactKind::Transfer, FlowScope::composite())(0, 1);
    gap = std::max(gap, std::abs(ra.inflow[i] + rb.inflow[i] - dyn));
  }
  return gap;
}

}  // namespace

TEST_CASE("path specs") {
  const CompartmentalModel g = testsupport::model("hallam");
  const SubflowPath p = parse_path("k=1: 0 -> nutrient -> 2 -> consumer; cycles=3", g);
  CHECK(p.subsystem == 1);
  CHECK(p.nodes == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(p.cycles == 3);
  CHECK_FALSE(p.exits());
  CHECK(p.storage_positions() == std::vector<std::size_t>{1, 2, 3});
  CHECK(to_string(p) == "k=1: 0 -> 1 -> 2 -> 3; cycles=3");
  CHECK(parse_path(to_string(p), g).nodes == p.nodes);
  CHECK(parse_path("k=2, cycles=4: 0 -> 2 -> 1 -> 0", g).cycles == 4);
  CHECK(parse_path("k=0: 2 -> 1 -> 0", g).exits());

  for (const char* bad : {"0 -> 1", "k=4: 0 -> 1", "k=1: 0", "k=1: 0 -> 0", "k=1: 0 -> 1 -> 0 -> 2", "k=1: 0 -> 5",
                          "k=1: 0 -> plankton", "k=1: 0 -> 1 ->", "k=1: 0 -> 1; cycles=0", "k=1: 0 -> 1; depth=2",
                          "k=x: 0 -> 1", "k=1: 0 -> 1 -> 3"})
    CHECK_THROWS_AS(parse_path(bad, g), ValidationError);
}

TEST_CASE("disconnected links name both ends") {
  const CompartmentalModel chain = load_model(R"j({"compartments": ["a", "b", "c"],
    "flows": [{"from": "a", "to": "b", "expr": "x1"}, {"from": "b", "to": "c", "expr": "x2"}],
    "outputs": [null, null, "x3"]})j");
  try {
    parse_path("k=1: 0 -> 1 -> 3", chain);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("a -> c") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_path("k=1: 0 -> 1 -> 0", chain), ValidationError);
  CHECK_NOTHROW(parse_path("k=1: 0 -> 1 -> 2 -> 3 -> 0", chain));
}

TEST_CASE("initial subsystem transfer storage") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::hippe_periodic()), 0.0, 6.0);
  const TransientRecord r = transient_flows(p, parse_path("k=0: 2 -> 1", p.model()));
  REQUIRE(r.nodes.size() == 1);
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double t = r.times[i];
    CHECK(std::abs(r.nodes[0].inflow[i] - 2 * std::exp(-t)) < 1e-7);
    CHECK(std::abs(r.nodes[0].storage[i] - (3 * std::exp(-t) - 3 * std::exp(-5 * t / 3))) < 1e-7);
  }
}

TEST_CASE("simultaneous and post-hoc modes agree") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::hallam_gaussian()), 0.0, 30.0);
  const SubflowPath path = parse_path("k=2: 0 -> 2 -> 3 -> 1 -> 2 -> 0", p.model());
  TransientOptions a, b;
  a.t1 = b.t1 = 5.0;
  b.mode = SolveMode::PostHoc;
  const TransientRecord ra = transient_flows(p, path, a), rb = transient_flows(p, path, b);
  REQUIRE(ra.times == rb.times);
  CHECK(ra.times.front() == 5.0);
  for (std::size_t m = 0; m < ra.nodes.size(); ++m)
    for (std::size_t i = 0; i < ra.times.size(); ++i) {
      CHECK(std::abs(ra.nodes[m].storage[i] - rb.nodes[m].storage[i]) < 1e-7);
      CHECK(std::abs(ra.nodes[m].inflow[i] - rb.nodes[m].inflow[i]) < 1e-7);
    }
}

TEST_CASE("storage before activation is zero") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::model("hallam")), 0.0, 10.0);
  TransientOptions opt;
  opt.t1 = 4.0;
  opt.grid = {0.0, 2.0, 4.0, 6.0, 10.0};
  const TransientRecord r = transient_flows(p, parse_path("k=1: 0 -> 1 -> 2", p.model()), opt);
  for (const auto& ns : r.nodes) {
    CHECK(ns.storage[0] == 0.0);
    CHECK(ns.storage[1] == 0.0);
    CHECK(ns.storage[2] == 0.0);
    CHECK(ns.storage[4] > 0.0);
  }
  CHECK(r.nodes[0].inflow[3] == doctest::Approx(1.0));
  opt.t1 = 11.0;
  CHECK_THROWS_AS(transient_flows(p, parse_path("k=1: 0 -> 1", p.model()), opt), ValidationError);
}

TEST_CASE("a path through an input-free subsystem carries nothing") {
  const CompartmentalModel m = with_inputs(testsupport::model("hallam"), {"1", "0", "1"});
  const PartitionTrajectory p = decompose(testsupport::shared(m), 0.0, 10.0);
  const TransientRecord r = transient_flows(p, parse_path("k=2: 0 -> 2 -> 3 -> 0", m));
  for (const auto& ns : r.nodes) {
    CHECK(*std::max_element(ns.storage.begin(), ns.storage.end()) == 0.0);
    CHECK(*std::max_element(ns.outflow.begin(), ns.outflow.end()) == 0.0);
  }
}

TEST_CASE("exit flow of a long path stays small") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::model("hallam")), 0.0, 50.0);
  const SubflowPath path = parse_path("k=1: 0 -> 1 -> 2 -> 3 -> 1 -> 2 -> 1 -> 0", p.model());
  TransientOptions opt;
  opt.grid = uniform_grid(0.0, 50.0, 501);
  const TransientRecord r = transient_flows(p, path, opt);
  const auto& exit = r.exit_flow();
  const double peak = *std::max_element(exit.begin(), exit.end());
  CHECK(peak > 1e-5);
  CHECK(peak <= 7e-5);
  CHECK(*std::min_element(exit.begin(), exit.end()) >= 0.0);
}

TEST_CASE("unrolling counts visits of the designated node") {
  const CompartmentalModel h = testsupport::model("hippe");
  std::vector<std::size_t> counted;
  SubflowPath p = parse_path("k=1: 0 -> 1 -> 2 -> 1; cycles=3", h);
  const SubflowPath u = unroll(p, counted);
  CHECK(u.nodes == std::vector<std::size_t>{0, 1, 2, 1, 2, 1, 2, 1, 2});
  CHECK(counted == std::vector<std::size_t>{3, 5, 7});
  p = parse_path("k=2: 0 -> 2 -> 1 -> 2 -> 1; cycles=2", h);
  CHECK(unroll(p, counted).nodes == std::vector<std::size_t>{0, 2, 1, 2, 1, 2});
  CHECK(counted == std::vector<std::size_t>{2, 4});
  // Without a repeated node there is nothing to unroll.
  p = parse_path("k=2: 0 -> 2 -> 1; cycles=5", h);
  CHECK(unroll(p, counted).nodes == p.nodes);
  CHECK(counted == std::vector<std::size_t>{2});
  // A compartment head opens the loop.
  p = parse_path("k=0: 1 -> 2 -> 1; cycles=2", h);
  CHECK(unroll(p, counted).nodes == std::vector<std::size_t>{1, 2, 1, 2, 1, 2});
  CHECK(counted == std::vector<std::size_t>{2, 4});
  CHECK_THROWS_AS(unroll(parse_path("k=1: 0 -> 1 -> 0", h), counted), ValidationError);
}

TEST_CASE("cumulative path flows converge to the composite transfer flow") {
  const PartitionTrajectory p = decompose(testsupport::shared(testsupport::hippe_periodic()), 0.0, 10.0);
  const double g2 = reconciliation_gap(p, 2), g4 = reconciliation_gap(p, 4), g8 = reconciliation_gap(p, 8);
  CHECK(g4 <= g2);
  CHECK(g8 <= g4);
  CHECK(g8 <= 1e-2);
  CHECK(g8 < 1e-4);
}
