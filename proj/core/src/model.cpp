#include "compart/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

namespace compart {

using nlohmann::json;

CompartmentalModel::CompartmentalModel(std::vector<std::string> labels, std::vector<std::string> param_names,
                                       Vector param_values, Vector x_init)
    : labels_(std::move(labels)),
      param_names_(std::move(param_names)),
      param_values_(std::move(param_values)),
      x_init_(std::move(x_init)) {
  const std::size_t n = labels_.size();
  if (n == 0) throw ValidationError("model", "model has no compartments");
  if (static_cast<std::size_t>(x_init_.size()) != n)
    throw ValidationError("model", "initial state has wrong length");
  if (static_cast<std::size_t>(param_values_.size()) != param_names_.size())
    throw ValidationError("model", "parameter names and values differ in length");
  flows_.resize(n * n);
  inputs_.resize(n);
  outputs_.resize(n);
}

expr::Symbols CompartmentalModel::symbols() const { return {size(), param_names_}; }

void CompartmentalModel::set_flow(std::size_t i, std::size_t j, std::optional<expr::Expression> e) {
  flows_.at(i * size() + j) = std::move(e);
}
void CompartmentalModel::set_input(std::size_t i, std::optional<expr::Expression> e) { inputs_.at(i) = std::move(e); }
void CompartmentalModel::set_output(std::size_t i, std::optional<expr::Expression> e) {
  outputs_.at(i) = std::move(e);
}
void CompartmentalModel::set_x_init(Vector x) {
  if (static_cast<std::size_t>(x.size()) != size()) throw ValidationError("model", "initial state has wrong length");
  if ((x.array() < 0.0).any()) throw ValidationError("model", "negative initial stock");
  x_init_ = std::move(x);
}

expr::Expression CompartmentalModel::compile(std::string_view source) const { return expr::parse(source, symbols()); }

double CompartmentalModel::eval(const expr::Expression& e, double t, const Vector& x) const {
  expr::Env env{t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                std::span<const double>(param_values_.data(), static_cast<std::size_t>(param_values_.size()))};
  return e.evaluate(env);
}

void CompartmentalModel::evaluate_F(double t, const Vector& x, Matrix& F) const {
  const std::size_t n = size();
  F.setZero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& e = flows_[i * n + j];
      if (!e) continue;
      try {
        F(i, j) = eval(*e, t, x);
      } catch (const expr::EvalError& err) {
        throw NumericalError("model", "flow " + labels_[j] + " -> " + labels_[i] + ": " + err.what());
      }
    }
  }
}

Vector CompartmentalModel::evaluate_inputs(double t, const Vector& x) const {
  Vector z = Vector::Zero(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!inputs_[i]) continue;
    try {
      z(i) = eval(*inputs_[i], t, x);
    } catch (const expr::EvalError& err) {
      throw NumericalError("model", "input to " + labels_[i] + ": " + err.what());
    }
  }
  return z;
}

Vector CompartmentalModel::evaluate_outputs(double t, const Vector& x) const {
  Vector y = Vector::Zero(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!outputs_[i]) continue;
    try {
      y(i) = eval(*outputs_[i], t, x);
    } catch (const expr::EvalError& err) {
      throw NumericalError("model", "output from " + labels_[i] + ": " + err.what());
    }
  }
  return y;
}

FlowSnapshot CompartmentalModel::evaluate_flows(double t, const Vector& x) const {
  FlowSnapshot s;
  s.t = t;
  evaluate_F(t, x, s.F);
  s.z = evaluate_inputs(t, x);
  s.y = evaluate_outputs(t, x);
  s.tau_in = s.z + s.F.rowwise().sum();
  s.tau_out = s.y + s.F.colwise().sum().transpose();
  return s;
}

Vector CompartmentalModel::rhs(double t, const Vector& x) const {
  FlowSnapshot s = evaluate_flows(t, x);
  return s.tau_in - s.tau_out;
}

namespace {

bool is_reserved(const std::string& name) {
  static const std::set<std::string> kReserved{"t", "sin", "cos", "exp", "sqrt", "abs", "min", "max"};
  if (kReserved.count(name)) return true;
  return name.size() > 1 && name[0] == 'x' &&
         std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_identifier(const std::string& name) {
  if (name.empty()) return false;
  auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  if (!alpha(name[0])) return false;
  return std::all_of(name.begin(), name.end(),
                     [&](char c) { return alpha(c) || std::isdigit(static_cast<unsigned char>(c)); });
}

[[noreturn]] void schema(const std::string& msg) { throw ValidationError("model", "schema: " + msg); }

std::string expr_source(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  schema(where + " must be a string expression or a number");
}

std::size_t resolve_compartment(const json& v, const std::vector<std::string>& labels, const std::string& where) {
  if (v.is_number_integer()) {
    auto k = v.get<long long>();
    if (k < 1 || static_cast<std::size_t>(k) > labels.size())
      schema(where + " index " + std::to_string(k) + " out of range");
    return static_cast<std::size_t>(k - 1);
  }
  if (v.is_string()) {
    auto s = v.get<std::string>();
    auto it = std::find(labels.begin(), labels.end(), s);
    if (it == labels.end()) schema(where + " refers to unknown compartment '" + s + "'");
    return static_cast<std::size_t>(it - labels.begin());
  }
  schema(where + " must be a compartment name or 1-based index");
}

expr::Expression compile_at(const CompartmentalModel& m, const std::string& src, const std::string& where) {
  try {
    return m.compile(src);
  } catch (const expr::ParseError& e) {
    throw ValidationError("model", where + ": " + e.what() + " in '" + src + "'");
  }
}

// inputs/outputs: either {label: expr} or [expr, ...] of length n.
template <class Setter>
void read_vector_exprs(const json& doc, const char* key, const CompartmentalModel& m, Setter set) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  const auto& labels = m.labels();
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      std::size_t i = resolve_compartment(json(it.key()), labels, std::string(key));
      std::string where = std::string(key) + "." + it.key();
      set(i, compile_at(m, expr_source(it.value(), where), where));
    }
  } else if (v.is_array()) {
    if (v.size() != labels.size()) schema(std::string(key) + " array must have one entry per compartment");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].is_null()) continue;
      std::string where = std::string(key) + "[" + std::to_string(i) + "]";
      set(i, compile_at(m, expr_source(v[i], where), where));
    }
  } else {
    schema(std::string(key) + " must be an object or an array");
  }
}

}  // namespace

CompartmentalModel load_model(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError("model", std::string("document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema("top level must be an object");
  static const std::set<std::string> kKeys{"compartments", "flows",  "inputs",      "outputs",
                                           "params",       "initial", "description", "name"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!kKeys.count(it.key())) schema("unknown key '" + it.key() + "'");

  if (!doc.contains("compartments")) schema("'compartments' is required");
  std::vector<std::string> labels;
  const json& comps = doc["compartments"];
  if (comps.is_number_unsigned() || comps.is_number_integer()) {
    // A bare count: labels default to x1..xn.
    const long long count = comps.get<long long>();
    for (long long i = 1; i <= count; ++i) labels.push_back("x" + std::to_string(i));
  } else if (comps.is_array()) {
    for (const auto& c : comps) {
      if (!c.is_string() || c.get<std::string>().empty()) schema("compartment names must be non-empty strings");
      labels.push_back(c.get<std::string>());
    }
  } else {
    schema("'compartments' must be a list of names or a count");
  }
  if (labels.empty()) schema("'compartments' must not be empty");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
    schema("compartment names must be unique");
  const std::size_t n = labels.size();

  std::vector<std::string> pnames;
  std::vector<double> pvals;
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) schema("'params' must be an object of name: number");
    for (auto it = doc["params"].begin(); it != doc["params"].end(); ++it) {
      if (!is_identifier(it.key())) schema("parameter name '" + it.key() + "' is not an identifier");
      if (is_reserved(it.key())) schema("parameter name '" + it.key() + "' is reserved");
      if (!it.value().is_number()) schema("parameter '" + it.key() + "' must be a number");
      pnames.push_back(it.key());
      pvals.push_back(it.value().get<double>());
    }
  }

  Vector x0 = Vector::Zero(n);
  if (doc.contains("initial")) {
    const json& v = doc["initial"];
    if (v.is_object()) {
      for (auto it = v.begin(); it != v.end(); ++it) {
        std::size_t i = resolve_compartment(json(it.key()), labels, "initial");
        if (!it.value().is_number()) schema("initial." + it.key() + " must be a number");
        x0(i) = it.value().get<double>();
      }
    } else if (v.is_array()) {
      if (v.size() != n) schema("'initial' array must have one entry per compartment");
      for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].is_number()) schema("'initial' entries must be numbers");
        x0(i) = v[i].get<double>();
      }
    } else {
      schema("'initial' must be an object or an array");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!(x0(i) >= 0.0) || !std::isfinite(x0(i)))
      throw ValidationError("model", "negative or non-finite initial stock for '" + labels[i] + "'");

  CompartmentalModel m(labels, pnames, Eigen::Map<Vector>(pvals.data(), static_cast<Eigen::Index>(pvals.size())),
                       x0);

  if (doc.contains("flows")) {
    if (!doc["flows"].is_array()) schema("'flows' must be a list");
    std::size_t idx = 0;
    for (const auto& f : doc["flows"]) {
      std::string where = "flows[" + std::to_string(idx++) + "]";
      if (!f.is_object() || !f.contains("from") || !f.contains("to") || !f.contains("expr"))
        schema(where + " needs 'from', 'to' and 'expr'");
      std::size_t j = resolve_compartment(f["from"], labels, where + ".from");
      std::size_t i = resolve_compartment(f["to"], labels, where + ".to");
      if (i == j) schema(where + " runs from " + labels[j] + " to itself");
      if (m.flow(i, j)) schema(where + " duplicates flow " + labels[j] + " -> " + labels[i]);
      m.set_flow(i, j, compile_at(m, expr_source(f["expr"], where), where));
    }
  }
  read_vector_exprs(doc, "inputs", m, [&](std::size_t i, expr::Expression e) { m.set_input(i, std::move(e)); });
  read_vector_exprs(doc, "outputs", m, [&](std::size_t i, expr::Expression e) { m.set_output(i, std::move(e)); });
  return m;
}

CompartmentalModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model", "cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

CompartmentalModel with_inputs(const CompartmentalModel& model, const std::vector<std::string>& sources) {
  if (sources.size() != model.size())
    throw ValidationError("model", "input override needs " + std::to_string(model.size()) + " expressions, got " +
                                       std::to_string(sources.size()));
  CompartmentalModel m = model;
  for (std::size_t i = 0; i < sources.size(); ++i)
    m.set_input(i, compile_at(m, sources[i], "input override " + std::to_string(i + 1)));
  return m;
}

bool ValidationReport::ok() const {
  return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == CheckStatus::Fail; });
}

const CheckResult& ValidationReport::check(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no check named " + std::string(name));
}

std::vector<Probe> default_probes(const CompartmentalModel& model, const ValidationOptions& options) {
  std::vector<Probe> probes;
  probes.push_back({0.0, model.x_init()});
  const double scale = std::max(1.0, model.x_init().maxCoeff());
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> ux(0.05 * scale, 2.0 * scale);
  std::uniform_real_distribution<double> ut(0.0, 10.0);
  for (std::size_t p = 0; p < options.random_probes; ++p) {
    Vector x(model.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = ux(rng);
    probes.push_back({ut(rng), x});
  }
  return probes;
}

namespace {

constexpr double kProbeEps[3] = {1e-4, 1e-6, 1e-8};

// Evaluates f with one or two coordinates pushed toward zero and reports
// whether f / (product of the pushed coordinates) stays bounded.
bool bounded_ratio(const std::function<double(const Vector&)>& f, const Probe& p, std::size_t a,
                   std::optional<std::size_t> b, std::string& why) {
  double q[3];
  for (int k = 0; k < 3; ++k) {
    Vector x = p.x;
    x(a) = kProbeEps[k];
    double denom = kProbeEps[k] * (b ? x(*b) : 1.0);
    double v;
    try {
      v = f(x);
    } catch (const Error& e) {
      why = e.what();
      return false;
    }
    q[k] = v / denom;
    if (!std::isfinite(q[k])) {
      why = "ratio is not finite";
      return false;
    }
  }
  if (std::abs(q[2]) > 10.0 * std::abs(q[0]) + 1e-6) {
    std::ostringstream os;
    os << "ratio grows from " << q[0] << " to " << q[2];
    why = os.str();
    return false;
  }
  return true;
}

}  // namespace

ValidationReport validate_model(const CompartmentalModel& model, const std::vector<Probe>& probes,
                                const ValidationOptions& options) {
  const std::size_t n = model.size();
  const auto& L = model.labels();
  ValidationReport report;
  CheckResult cons, fact, strong, nonneg;
  cons.name = "conservative";
  fact.name = "factorable";
  strong.name = "strong_form";
  nonneg.name = "nonnegative";

  for (const auto& p : probes) {
    FlowSnapshot s;
    try {
      s = model.evaluate_flows(p.t, p.x);
    } catch (const Error& e) {
      cons.status = CheckStatus::Fail;
      cons.details.push_back(e.what());
      continue;
    }
    // (a) with z = y = 0 the aggregate derivative must vanish.
    const double internal_in = s.F.rowwise().sum().sum();
    const double internal_out = s.F.colwise().sum().sum();
    const double dsum = (s.F.rowwise().sum() - s.F.colwise().sum().transpose()).sum();
    const double scale = std::max(1.0, s.F.cwiseAbs().sum());
    if (std::abs(dsum) > 1e-9 * scale || std::abs(internal_in - internal_out) > 1e-9 * scale) {
      cons.status = CheckStatus::Fail;
      std::ostringstream os;
      os << "sum of derivatives without z, y is " << dsum << " at t=" << p.t;
      cons.details.push_back(os.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        if (s.F(i, j) < -1e-12)
          nonneg.details.push_back("flow " + L[j] + " -> " + L[i] + " negative at probe t=" + std::to_string(p.t));
      if (s.z(i) < -1e-12) nonneg.details.push_back("input to " + L[i] + " negative");
      if (s.y(i) < -1e-12) nonneg.details.push_back("output from " + L[i] + " negative");
    }
  }
  if (!nonneg.details.empty()) nonneg.status = CheckStatus::Fail;

  auto with_env = [&](const expr::Expression& e, double t) {
    return [&model, e, t](const Vector& x) {
      expr::Env env{t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                    std::span<const double>(model.param_values().data(),
                                            static_cast<std::size_t>(model.param_values().size()))};
      return e.evaluate(env);
    };
  };

  std::set<std::string> fact_bad, strong_bad;
  for (const auto& p : probes) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& e = model.flow(i, j);
        if (!e) continue;
        std::string name = "flow " + L[j] + " -> " + L[i];
        std::string why;
        // (b) donor factor: f_ij / x_j bounded as x_j -> 0.
        if (!bounded_ratio(with_env(*e, p.t), p, j, std::nullopt, why) && fact_bad.insert(name).second)
          fact.details.push_back(name + ": " + why);
        // (c) strong form: f_ij / (x_i x_j) bounded as either factor -> 0.
        if (i != j && !strong_bad.count(name)) {
          bool ok = bounded_ratio(with_env(*e, p.t), p, i, j, why);
          if (ok) ok = bounded_ratio(with_env(*e, p.t), p, j, i, why);
          if (!ok) {
            strong_bad.insert(name);
            strong.details.push_back(name + ": " + why);
          }
        }
      }
      if (const auto& y = model.output(j)) {
        std::string name = "output from " + L[j];
        std::string why;
        if (!bounded_ratio(with_env(*y, p.t), p, j, std::nullopt, why) && fact_bad.insert(name).second)
          fact.details.push_back(name + ": " + why);
      }
    }
  }
  if (!fact.details.empty()) fact.status = CheckStatus::Fail;
  strong.holds = strong.details.empty();
  strong.status = options.require_strong_form ? (strong.holds ? CheckStatus::Pass : CheckStatus::Fail)
                                              : CheckStatus::NotRequired;

  report.checks = {cons, fact, strong, nonneg};
  return report;
}

ValidationReport validate_model(const CompartmentalModel& model, const ValidationOptions& options) {
  return validate_model(model, default_probes(model, options), options);
}

}  // namespace compart
