#include "compart/model.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace compart;
using testsupport::model;

TEST_CASE("fixtures load") {
  const CompartmentalModel h = model("hippe");
  CHECK(h.size() == 2);
  CHECK(h.labels() == std::vector<std::string>{"x1", "x2"});
  CHECK(h.x_init().isApprox(Vector::Constant(2, 3.0)));
  const CompartmentalModel g = model("hallam");
  CHECK(g.size() == 3);
  CHECK(g.param_names().size() == 6);
}

TEST_CASE("flow snapshot at the initial state") {
  const CompartmentalModel h = model("hippe");
  const FlowSnapshot s = h.evaluate_flows(0.0, Vector::Constant(2, 3.0));
  Matrix F(2, 2);
  F << 0, 2, 4, 0;
  CHECK(testsupport::max_abs(s.F - F) < 1e-14);
  CHECK(s.tau_in.isApprox(Vector{{3.0, 5.0}}));
  CHECK(s.tau_out.isApprox(Vector{{5.0, 7.0}}));

  const CompartmentalModel g = model("hallam");
  const FlowSnapshot q = g.evaluate_flows(0.0, Vector::Ones(3));
  CHECK(std::abs(q.F(1, 0) - 1.0 / 1.098) < 1e-12);
  CHECK(std::abs(q.F(2, 1) - 2.0 / 21.0) < 1e-12);
  CHECK(std::abs(q.F(0, 1) - 2.7) < 1e-12);
  CHECK(std::abs(q.F(0, 2) - 2.025) < 1e-12);
  CHECK(q.F(0, 0) == 0.0);
  CHECK(q.F(2, 0) == 0.0);
}

TEST_CASE("snapshot identities") {
  for (const char* name : {"hippe", "hallam"}) {
    const CompartmentalModel m = model(name);
    const Vector x = Vector::LinSpaced(static_cast<Eigen::Index>(m.size()), 0.4, 2.2);
    const FlowSnapshot s = m.evaluate_flows(1.5, x);
    CHECK(s.tau_in.isApprox(s.z + s.F.rowwise().sum()));
    CHECK(s.tau_out.isApprox(s.y + s.F.colwise().sum().transpose()));
    CHECK(testsupport::max_abs(s.tau_in - s.tau_out - m.rhs(1.5, x)) < 1e-13);
    // Internal flows leave and enter the same total.
    CHECK(std::abs(s.F.rowwise().sum().sum() - s.F.colwise().sum().sum()) < 1e-13);
  }
}

TEST_CASE("zero state with factored flows") {
  const CompartmentalModel h = model("hippe");
  const FlowSnapshot s = h.evaluate_flows(0.0, Vector::Zero(2));
  CHECK(s.F.isZero());
  CHECK(s.tau_in.isApprox(s.z));
  CHECK(s.tau_out.isZero());
}

TEST_CASE("schema errors") {
  CHECK_THROWS_AS(load_model(R"j({"compartments": []})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": 0})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"flows": []})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "extra": 1})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a", "a"]})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "initial": {"a": -1}})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "initial": [1, 2]})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a", "b"], "flows": [{"from": "a", "to": "c", "expr": "x1"}]})j"),
                  ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a", "b"], "flows": [{"from": 1, "to": 2, "expr": "x3"}]})j"),
                  ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "params": {"t": 1}})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "params": {"x1": 1}})j"), ValidationError);
  CHECK_THROWS_AS(load_model(R"j({"compartments": ["a"], "flows": [{"from": "a", "to": "a", "expr": "x1"}]})j"),
                  ValidationError);
  CHECK_THROWS_AS(load_model("not json"), ValidationError);
}

TEST_CASE("labels default from a count") {
  const CompartmentalModel m = load_model(R"j({
    // comments are allowed
    "compartments": 2,
    "flows": [{"from": 1, "to": 2, "expr": "k*x1"}],
    "params": {"k": 0.5},
    "outputs": ["x1", "x2"],
    "initial": [1, 0]
  })j");
  CHECK(m.labels() == std::vector<std::string>{"x1", "x2"});
  CHECK(m.evaluate_flows(0.0, Vector::Ones(2)).F(1, 0) == 0.5);
}

TEST_CASE("input override") {
  const CompartmentalModel h = with_inputs(model("hippe"), {"3+sin(t)", "3+sin(2*t)"});
  CHECK(h.evaluate_inputs(1.0, Vector::Ones(2))(1) == doctest::Approx(3.0 + std::sin(2.0)));
  CHECK_THROWS_AS(with_inputs(model("hippe"), {"1"}), ValidationError);
  CHECK_THROWS_AS(with_inputs(model("hippe"), {"1", "x3"}), ValidationError);
}

TEST_CASE("evaluation errors name the flow") {
  const CompartmentalModel m = load_model(R"j({"compartments": ["a", "b"],
    "flows": [{"from": "a", "to": "b", "expr": "1/(x1 - 1)"}]})j");
  try {
    m.evaluate_flows(0.0, Vector::Ones(2));
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(e.module() == "model");
    CHECK(std::string(e.what()).find("a -> b") != std::string::npos);
  }
}

TEST_CASE("validation of the fixtures") {
  const ValidationReport h = validate_model(model("hippe"));
  CHECK(h.ok());
  for (const auto& c : h.checks) CHECK_MESSAGE(c.status != CheckStatus::Fail, c.name);
  CHECK(h.check("strong_form").status == CheckStatus::NotRequired);

  const ValidationReport g = validate_model(model("hallam"));
  CHECK(g.ok());
  CHECK(g.check("conservative").status == CheckStatus::Pass);
  CHECK(g.check("factorable").status == CheckStatus::Pass);
  CHECK(g.check("nonnegative").status == CheckStatus::Pass);
  CHECK_FALSE(g.check("strong_form").holds);

  ValidationOptions strict;
  strict.require_strong_form = true;
  const ValidationReport gs = validate_model(model("hallam"), strict);
  CHECK_FALSE(gs.ok());
  CHECK(gs.check("strong_form").status == CheckStatus::Fail);
  bool names_f12 = false;
  for (const auto& d : gs.check("strong_form").details) names_f12 |= d.find("producer -> nutrient") != std::string::npos;
  CHECK(names_f12);
}

TEST_CASE("a constant leak is not factorable") {
  const CompartmentalModel m = load_model(R"j({"compartments": ["a", "b"],
    "flows": [{"from": "b", "to": "a", "expr": "1"}], "outputs": ["x1", "x2"], "initial": [1, 1]})j");
  const ValidationReport r = validate_model(m);
  CHECK(r.check("factorable").status == CheckStatus::Fail);
  CHECK_FALSE(r.ok());
}

TEST_CASE("negative flows are caught") {
  const CompartmentalModel m = load_model(R"j({"compartments": ["a", "b"],
    "flows": [{"from": "b", "to": "a", "expr": "-x2"}], "initial": [1, 1]})j");
  const ValidationReport r = validate_model(m);
  CHECK(r.check("nonnegative").status == CheckStatus::Fail);
}

TEST_CASE("default probes are seeded") {
  const CompartmentalModel g = model("hallam");
  const auto a = default_probes(g), b = default_probes(g);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].t == b[i].t);
    CHECK(a[i].x == b[i].x);
    CHECK((a[i].x.array() > 0.0).all());
  }
}
