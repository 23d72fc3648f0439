#include "cli.hpp"

#include "compart/diact.hpp"
#include "compart/interact.hpp"
#include "compart/model.hpp"
#include "compart/partition.hpp"
#include "compart/pathflow.hpp"
#include "compart/staticnet.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <variant>

namespace compart::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

using Cell = std::variant<std::string, double, long long>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

long long idx(std::size_t i) { return static_cast<long long>(i); }

std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return num(*d);
  return std::to_string(std::get<long long>(c));
}

json cell_json(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return std::strtod(num(*d).c_str(), nullptr);
  return std::get<long long>(c);
}

/// Collects tables and summary lines, then writes them in one go.
class Output {
 public:
  Output(const RunConfig& cfg) : cfg_(cfg) {}

  Table& table(std::string name, std::vector<std::string> columns) {
    tables_.push_back({std::move(name), std::move(columns), {}});
    return tables_.back();
  }
  void note(const std::string& line) { summary_ << line << '\n'; }
  json& manifest_extra() { return extra_; }

  void write(const fs::path& dir) const {
    std::vector<std::string> files;
    if (cfg_.format == "csv") {
      for (const auto& t : tables_) {
        const std::string file = t.name + ".csv";
        std::ofstream os = open(dir / file);
        for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
        os << '\n';
        for (const auto& r : t.rows) {
          for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << cell_text(r[c]);
          os << '\n';
        }
        files.push_back(file);
      }
    } else {
      json doc = json::object();
      for (const auto& t : tables_) {
        json rows = json::array();
        for (const auto& r : t.rows) {
          json row = json::array();
          for (const auto& c : r) row.push_back(cell_json(c));
          rows.push_back(std::move(row));
        }
        doc[t.name] = {{"columns", t.columns}, {"rows", std::move(rows)}};
      }
      open(dir / "results.json") << doc.dump(1) << '\n';
      files.push_back("results.json");
    }
    open(dir / "summary.txt") << summary_.str();
    files.push_back("summary.txt");

    json m;
    m["tool"] = "compart";
    m["version"] = kVersion;
    m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    m["command"] = cfg_.command;
    m["model"] = cfg_.model_path;
    m["t_span"] = {cfg_.t0, cfg_.t_end};
    if (cfg_.times.empty())
      m["grid"] = cfg_.grid;
    else
      m["times"] = cfg_.times;
    m["tolerances"] = {{"rtol", cfg_.rtol}, {"atol", cfg_.atol}};
    m["inputs"] = cfg_.z;
    m["format"] = cfg_.format;
    m["files"] = files;
    for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
    open(dir / "manifest.json") << m.dump(2) << '\n';
  }

 private:
  static std::ofstream open(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("cli", "cannot write " + p.string());
    return os;
  }

  const RunConfig& cfg_;
  std::deque<Table> tables_;  // stable references across table()
  std::ostringstream summary_;
  json extra_ = json::object();
};

std::vector<double> make_grid(const RunConfig& c) {
  if (!(c.t_end > c.t0)) throw ValidationError("cli", "t_end must be greater than t0");
  if (!c.times.empty()) {
    for (std::size_t q = 0; q < c.times.size(); ++q) {
      if (c.times[q] < c.t0 || c.times[q] > c.t_end) throw ValidationError("cli", "output time outside the span");
      if (q && c.times[q] <= c.times[q - 1]) throw ValidationError("cli", "output times must increase");
    }
    return c.times;
  }
  if (c.grid < 2) throw ValidationError("cli", "grid needs at least two points");
  std::vector<double> g(c.grid);
  for (std::size_t q = 0; q < c.grid; ++q)
    g[q] = c.t0 + (c.t_end - c.t0) * static_cast<double>(q) / static_cast<double>(c.grid - 1);
  g.back() = c.t_end;
  return g;
}

IntegratorConfig integrator(const RunConfig& c) {
  IntegratorConfig ic;
  ic.rtol = c.rtol;
  ic.atol = c.atol;
  return ic;
}

std::shared_ptr<const CompartmentalModel> load(const RunConfig& c) {
  if (c.model_path.empty()) throw ValidationError("cli", "no model given");
  CompartmentalModel m = load_model_file(c.model_path);
  if (!c.z.empty()) m = with_inputs(m, c.z);
  return std::make_shared<const CompartmentalModel>(std::move(m));
}

PartitionTrajectory partition_of(const RunConfig& c, std::shared_ptr<const CompartmentalModel> m) {
  PartitionConfig pc;
  pc.integrator = integrator(c);
  return decompose(std::move(m), c.t0, c.t_end, pc);
}

std::vector<DiactKind> kinds_of(const RunConfig& c) {
  std::vector<DiactKind> k;
  if (c.kinds.empty()) return {kAllDiactKinds.begin(), kAllDiactKinds.end()};
  for (const auto& s : c.kinds) k.push_back(parse_kind(s));
  return k;
}

FlowScope scope_of(const std::string& s) {
  if (s == "composite") return FlowScope::composite();
  if (s == "simple") return FlowScope::simple();
  if (s.rfind("subsystem:", 0) == 0) {
    const std::string v = s.substr(10);
    char* end = nullptr;
    const unsigned long l = std::strtoul(v.c_str(), &end, 10);
    if (!v.empty() && *end == '\0') return FlowScope::of_subsystem(l);
  }
  throw ValidationError("cli", "unknown scope '" + s + "' (composite, simple, subsystem:<l>)");
}

void vector_rows(Table& t, double time, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) t.add({time, idx(static_cast<std::size_t>(i) + 1), v(i)});
}

std::string vec_text(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + "]";
}

void cmd_simulate(const RunConfig& c, Output& out) {
  auto m = load(c);
  const auto grid = make_grid(c);
  VectorField f = [&](double t, std::span<const double> u, std::span<double> du) {
    const Vector d = m->rhs(t, Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size())));
    std::copy(d.data(), d.data() + d.size(), du.begin());
  };
  Trajectory tr = integrate(f, m->x_init(), c.t0, c.t_end, integrator(c));
  Table& st = out.table("storage", {"t", "i", "value"});
  Table& ti = out.table("throughflow_in", {"t", "i", "value"});
  Table& to = out.table("throughflow_out", {"t", "i", "value"});
  for (double t : grid) {
    const Vector x = tr.at(t);
    const FlowSnapshot s = m->evaluate_flows(t, x);
    vector_rows(st, t, x);
    vector_rows(ti, t, s.tau_in);
    vector_rows(to, t, s.tau_out);
  }
  out.note("simulate " + c.model_path);
  out.note("steps: " + std::to_string(tr.size()));
  out.note("x(" + num(c.t_end) + ") = " + vec_text(tr.at(c.t_end)));
}

void cmd_partition(const RunConfig& c, Output& out) {
  auto m = load(c);
  const auto grid = make_grid(c);
  PartitionTrajectory p = partition_of(c, m);
  Table& sx = out.table("substorage", {"t", "i", "k", "value"});
  Table& tin = out.table("subthroughflow_in", {"t", "i", "k", "value"});
  Table& tout = out.table("subthroughflow_out", {"t", "i", "k", "value"});
  Table& st = out.table("storage", {"t", "i", "value"});
  Table& rt = out.table("residence", {"t", "i", "value"});
  auto with_initial = [](Table& t, double time, const Vector& v0, const Matrix& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      t.add({time, idx(static_cast<std::size_t>(i) + 1), 0LL, v0(i)});
      for (Eigen::Index k = 0; k < M.cols(); ++k)
        t.add({time, idx(static_cast<std::size_t>(i) + 1), idx(static_cast<std::size_t>(k) + 1), M(i, k)});
    }
  };
  for (double t : grid) {
    const SubthroughflowSet s = p.subthroughflows(t);
    with_initial(sx, t, s.state.x0, s.state.X);
    with_initial(tin, t, s.tau0_in, s.T_in);
    with_initial(tout, t, s.tau0_out, s.T_out);
    vector_rows(st, t, s.x);
    vector_rows(rt, t, s.q.r);
  }
  const SubthroughflowSet last = p.subthroughflows(c.t_end);
  out.note("partition " + c.model_path);
  out.note("x(" + num(c.t_end) + ") = " + vec_text(last.x));
  out.note("residence times at t_end = " + vec_text(last.q.r));
  for (const auto& w : last.q.warnings) out.note("warning: " + w);
}

void cmd_path(const RunConfig& c, Output& out) {
  auto m = load(c);
  if (c.paths.empty()) throw ValidationError("cli", "path command needs at least one --path");
  PartitionTrajectory p = partition_of(c, m);
  TransientOptions opt;
  opt.grid = make_grid(c);
  opt.t1 = std::isnan(c.t1) ? c.t0 : c.t1;
  opt.integrator = integrator(c);
  if (c.mode == "simultaneous")
    opt.mode = SolveMode::Simultaneous;
  else if (c.mode == "posthoc")
    opt.mode = SolveMode::PostHoc;
  else
    throw ValidationError("cli", "unknown path mode '" + c.mode + "'");
  json specs = json::array();
  for (std::size_t w = 0; w < c.paths.size(); ++w) {
    SubflowPath path = parse_path(c.paths[w], *m);
    if (c.paths[w].find("cycles") == std::string::npos) path.cycles = c.mw;
    specs.push_back(to_string(path));
    const std::string tag = std::to_string(w + 1);
    TransientRecord rec = transient_flows(p, path, opt);
    Table& t = out.table("path_" + tag, {"t", "position", "compartment", "quantity", "value"});
    for (std::size_t q = 0; q < rec.times.size(); ++q)
      for (const auto& n : rec.nodes) {
        const Cell pos = idx(n.position), comp = idx(n.compartment);
        t.add({rec.times[q], pos, comp, std::string("inflow"), n.inflow[q]});
        t.add({rec.times[q], pos, comp, std::string("storage"), n.storage[q]});
        if (!n.outflow.empty()) t.add({rec.times[q], pos, comp, std::string("outflow"), n.outflow[q]});
        t.add({rec.times[q], pos, comp, std::string("leaving"), n.leaving[q]});
      }
    out.note("path " + tag + ": " + to_string(path));
    if (!path.exits()) {
      CumulativeRecord cum = cumulative_transient(p, path, opt);
      Table& ct = out.table("cumulative_" + tag, {"t", "quantity", "value"});
      for (std::size_t q = 0; q < cum.times.size(); ++q) {
        ct.add({cum.times[q], std::string("inflow"), cum.inflow[q]});
        ct.add({cum.times[q], std::string("storage"), cum.storage[q]});
        ct.add({cum.times[q], std::string("outflow"), cum.outflow[q]});
      }
      out.note("  cumulative at compartment " + std::to_string(cum.designated) + " over " +
               std::to_string(cum.visits.size()) + " visits: " + to_string(cum.unrolled));
    } else {
      const auto& e = rec.exit_flow();
      double peak = 0.0;
      for (double v : e) peak = std::max(peak, v);
      out.note("  max exit flow " + num(peak));
    }
  }
  out.manifest_extra()["paths"] = specs;
  out.manifest_extra()["mode"] = c.mode;
  out.manifest_extra()["mw"] = c.mw;
}

void cmd_diact(const RunConfig& c, Output& out) {
  auto m = load(c);
  const auto grid = make_grid(c);
  const auto kinds = kinds_of(c);
  const FlowScope scope = scope_of(c.scope);
  PartitionTrajectory p = partition_of(c, m);
  Table& ft = out.table("diact_flow", {"t", "kind", "i", "j", "value"});
  for (double t : grid) {
    const SubthroughflowSet s = p.subthroughflows(t);
    for (DiactKind k : kinds) {
      const Matrix M = diact_flows(s, k, scope);
      for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
          ft.add({t, std::string(kind_name(k)), idx(static_cast<std::size_t>(i) + 1),
                  idx(static_cast<std::size_t>(j) + 1), M(i, j)});
    }
  }
  out.note("diact " + c.model_path + " scope " + c.scope);
  if (c.storage) {
    const double t1 = std::isnan(c.t1) ? c.t0 : c.t1;
    DiactStorageSeries ser = diact_storages(p, kinds, scope, t1, grid, integrator(c));
    Table& st = out.table("diact_storage", {"t", "kind", "i", "j", "value"});
    for (std::size_t q = 0; q < grid.size(); ++q)
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const Matrix& M = ser.values[k][q];
        for (Eigen::Index i = 0; i < M.rows(); ++i)
          for (Eigen::Index j = 0; j < M.cols(); ++j)
            st.add({grid[q], std::string(kind_name(kinds[k])), idx(static_cast<std::size_t>(i) + 1),
                    idx(static_cast<std::size_t>(j) + 1), M(i, j)});
      }
    out.note("storages accumulated from t1 = " + num(t1));
  }
  json ks = json::array();
  for (DiactKind k : kinds) ks.push_back(kind_name(k));
  out.manifest_extra()["kinds"] = ks;
  out.manifest_extra()["scope"] = c.scope;
  out.manifest_extra()["storage"] = c.storage;
}

void cmd_static(const RunConfig& c, Output& out) {
  auto m = load(c);
  SteadyStateConfig sc;
  sc.t = c.t_static;
  sc.integrator = integrator(c);
  const Vector xs = find_steady_state(*m, m->x_init(), sc);
  const StaticSolution s = static_partition(*m, xs, c.t_static);
  Table& vt = out.table("static_state", {"i", "quantity", "value"});
  const std::pair<const char*, const Vector*> vecs[] = {{"x", &s.x}, {"z", &s.z}, {"y", &s.y}, {"tau", &s.tau},
                                                        {"r", &s.r}};
  for (const auto& [name, v] : vecs)
    for (Eigen::Index i = 0; i < v->size(); ++i) vt.add({idx(static_cast<std::size_t>(i) + 1), std::string(name), (*v)(i)});
  const std::pair<const char*, const Matrix*> mats[] = {{"X", &s.X}, {"T", &s.T}, {"N", &s.N}, {"S", &s.S},
                                                        {"A", &s.A}, {"F", &s.F}};
  for (const auto& [name, M] : mats) {
    Table& t = out.table(std::string("static_") + name, {"i", "k", "value"});
    for (Eigen::Index i = 0; i < M->rows(); ++i)
      for (Eigen::Index k = 0; k < M->cols(); ++k)
        t.add({idx(static_cast<std::size_t>(i) + 1), idx(static_cast<std::size_t>(k) + 1), (*M)(i, k)});
  }
  Table& dt = out.table("static_diact", {"kind", "quantity", "i", "j", "value"});
  for (DiactKind k : kinds_of(c)) {
    const StaticDiact d = static_diact(s, k);
    const std::pair<const char*, const Matrix*> parts[] = {{"N", &d.N}, {"S", &d.S}, {"T", &d.T}, {"X", &d.X},
                                                           {"T_simple", &d.T_tilde}, {"X_simple", &d.X_tilde}};
    for (const auto& [name, M] : parts)
      for (Eigen::Index i = 0; i < M->rows(); ++i)
        for (Eigen::Index j = 0; j < M->cols(); ++j)
          dt.add({std::string(kind_name(k)), std::string(name), idx(static_cast<std::size_t>(i) + 1),
                  idx(static_cast<std::size_t>(j) + 1), (*M)(i, j)});
  }
  out.note("static " + c.model_path + " at t = " + num(c.t_static));
  out.note("steady state x = " + vec_text(s.x));
  out.note("residence times = " + vec_text(s.r));
  out.note("max |S - R N| / max |S| = " + num(s.s_rn_residual));
  try {
    const OutputOriented o = output_oriented(s);
    Table& ot = out.table("static_output", {"quantity", "i", "j", "value"});
    const std::pair<const char*, const Matrix*> parts[] = {{"N_bar", &o.N_bar}, {"S_bar", &o.S_bar},
                                                           {"X_bar", &o.X_bar}, {"T_bar", &o.T_bar}};
    for (const auto& [name, M] : parts)
      for (Eigen::Index i = 0; i < M->rows(); ++i)
        for (Eigen::Index j = 0; j < M->cols(); ++j)
          ot.add({std::string(name), idx(static_cast<std::size_t>(i) + 1), idx(static_cast<std::size_t>(j) + 1),
                  (*M)(i, j)});
    out.note("duality residuals: storage " + num(o.storage_duality) + ", flow " + num(o.flow_duality));
  } catch (const NumericalError& e) {
    out.note(std::string("output-oriented analysis skipped: ") + e.what());
  }
}

void cmd_interact(const RunConfig& c, Output& out) {
  auto m = load(c);
  const auto grid = make_grid(c);
  auto kinds = kinds_of(c);
  const Basis basis = parse_basis(c.basis);
  const Source source = parse_source(c.source);
  const Normalization norm = parse_normalization(c.normalization);
  std::vector<DiactKind> computed = kinds;
  if (norm == Normalization::PairwiseTransfer &&
      std::find(computed.begin(), computed.end(), DiactKind::Transfer) == computed.end())
    computed.push_back(DiactKind::Transfer);
  PartitionTrajectory p = partition_of(c, m);
  const double t1 = std::isnan(c.t1) ? c.t0 : c.t1;
  const DiactSeries series = basis == Basis::Flow ? flow_series(p, computed, source, grid)
                                                  : storage_series(p, computed, source, t1, grid, integrator(c));
  auto pairs = c.pairs;
  if (pairs.empty())
    for (std::size_t i = 1; i <= m->size(); ++i)
      for (std::size_t j = 1; j < i; ++j) pairs.emplace_back(i, j);
  Table& t = out.table("interaction", {"t", "i", "j", "kind", "sign", "strength", "net"});
  json jp = json::array();
  for (const auto& pr : pairs) {
    jp.push_back({pr.first, pr.second});
    for (DiactKind k : kinds) {
      const InteractionReport r = classify(series, pr, k, norm);
      for (std::size_t q = 0; q < r.times.size(); ++q)
        t.add({r.times[q], idx(pr.first), idx(pr.second), std::string(kind_name(k)), static_cast<long long>(r.sign[q]),
               r.strength[q], r.net[q]});
      const int last = r.sign.back();
      const std::string_view label = sign_label(last);
      out.note("(" + std::to_string(pr.first) + "," + std::to_string(pr.second) + ") " + std::string(kind_name(k)) +
               " at t_end: sign " + (last > 0 ? "+" : last < 0 ? "-" : "0") +
               (label.empty() ? "" : " (" + std::string(label) + ")") + ", strength " + num(r.strength.back()));
    }
  }
  json ks = json::array();
  for (DiactKind k : kinds) ks.push_back(kind_name(k));
  out.manifest_extra()["kinds"] = ks;
  out.manifest_extra()["pairs"] = jp;
  out.manifest_extra()["basis"] = c.basis;
  out.manifest_extra()["source"] = c.source;
  out.manifest_extra()["normalization"] = c.normalization;
}

int cmd_validate(const RunConfig& c, std::ostream& os) {
  auto m = load(c);
  ValidationOptions vo;
  vo.require_strong_form = c.strong;
  const ValidationReport rep = validate_model(*m, vo);
  for (const auto& ch : rep.checks) {
    const char* st = ch.status == CheckStatus::Pass ? "pass" : ch.status == CheckStatus::Fail ? "FAIL" : "not required";
    os << ch.name << ": " << st;
    if (ch.status == CheckStatus::NotRequired) os << (ch.holds ? " (holds)" : " (does not hold)");
    os << '\n';
    for (const auto& d : ch.details) os << "  " << d << '\n';
  }
  return rep.ok() ? kOk : kValidation;
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("cli", "pair must look like i,j");
  try {
    const long long i = std::stoll(s.substr(0, comma)), j = std::stoll(s.substr(comma + 1));
    if (i < 1 || j < 1 || i == j) throw ValidationError("cli", "pair needs two distinct 1-based indices");
    return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
  } catch (const std::logic_error&) {
    throw ValidationError("cli", "pair must look like i,j");
  }
}

}  // namespace

std::vector<std::string> split_top_level(const std::string& text) {
  std::vector<std::string> parts;
  auto push = [&](std::string s) {
    const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? std::string() : s.substr(b, e - b + 1));
  };
  if (text.find_first_not_of(" \t") == std::string::npos) return parts;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      push(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  push(cur);
  return parts;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cli", "cannot open run file " + path);
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError("cli", std::string("run file: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("cli", "run file must be an object");
  static const std::vector<std::string> known{"command", "model", "t0", "t_end", "grid", "times", "rtol", "atol",
                                              "z", "mw", "paths", "kinds", "pairs", "out", "format", "scope",
                                              "storage", "t1", "mode", "basis", "source", "normalization",
                                              "t_static", "strong", "description"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ValidationError("cli", "run file: unknown key '" + it.key() + "'");
  RunConfig c;
  try {
    c.command = j.at("command").get<std::string>();
    fs::path model = j.at("model").get<std::string>();
    if (model.is_relative()) model = fs::path(path).parent_path() / model;
    c.model_path = model.lexically_normal().string();
    c.t0 = j.value("t0", c.t0);
    c.t_end = j.value("t_end", c.t_end);
    c.grid = j.value("grid", c.grid);
    c.times = j.value("times", c.times);
    c.rtol = j.value("rtol", c.rtol);
    c.atol = j.value("atol", c.atol);
    c.z = j.value("z", c.z);
    c.mw = j.value("mw", c.mw);
    c.paths = j.value("paths", c.paths);
    c.kinds = j.value("kinds", c.kinds);
    for (const auto& p : j.value("pairs", json::array())) c.pairs.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    if (j.contains("out")) {
      fs::path o = j["out"].get<std::string>();
      if (o.is_relative()) o = fs::path(path).parent_path() / o;
      c.out = o.lexically_normal().string();
    }
    c.format = j.value("format", c.format);
    c.scope = j.value("scope", c.scope);
    c.storage = j.value("storage", c.storage);
    if (j.contains("t1")) c.t1 = j["t1"].get<double>();
    c.mode = j.value("mode", c.mode);
    c.basis = j.value("basis", c.basis);
    c.source = j.value("source", c.source);
    c.normalization = j.value("normalization", c.normalization);
    c.t_static = j.value("t_static", c.t_static);
    c.strong = j.value("strong", c.strong);
  } catch (const json::exception& e) {
    throw ValidationError("cli", std::string("run file: ") + e.what());
  }
  return c;
}

int execute(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.command == "validate") return cmd_validate(config, out);
    RunConfig c = config;
    if (c.format == "text") c.format = "json";
    if (c.format != "csv" && c.format != "json") throw ValidationError("cli", "format must be csv or json");
    if (c.out.empty()) {
      const char* env = std::getenv("COMPART_OUT");
      c.out = env && *env ? env : "compart-out";
    }
    const fs::path dir(c.out);
    if (fs::exists(dir / "manifest.json") && !c.force)
      throw ValidationError("cli", "output directory " + c.out + " already holds a run (use --force)");
    Output o(c);
    if (c.command == "simulate")
      cmd_simulate(c, o);
    else if (c.command == "partition")
      cmd_partition(c, o);
    else if (c.command == "path")
      cmd_path(c, o);
    else if (c.command == "diact")
      cmd_diact(c, o);
    else if (c.command == "static")
      cmd_static(c, o);
    else if (c.command == "interact")
      cmd_interact(c, o);
    else
      throw ValidationError("cli", "unknown command '" + c.command + "'");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cli", "cannot create " + c.out + ": " + ec.message());
    o.write(dir);
    out << "wrote " << c.out << '\n';
    return kOk;
  } catch (const NumericalError& e) {
    err << "error [" << e.module() << "]: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error [" << e.module() << "]: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compartmental system decomposition and flow analysis", "compart"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig c;
  std::string z, times, kinds, pairs;
  std::vector<std::string> pair_list;

  auto common = [&](CLI::App* s) {
    s->add_option("model", c.model_path, "model document")->required();
    s->add_option("--t0", c.t0, "start time");
    s->add_option("--t-end", c.t_end, "end time");
    s->add_option("--grid", c.grid, "number of uniform output times");
    s->add_option("--times", times, "explicit output times, comma separated");
    s->add_option("--rtol", c.rtol, "relative tolerance");
    s->add_option("--atol", c.atol, "absolute tolerance");
    s->add_option("--z", z, "input expressions, comma separated, one per compartment");
    s->add_option("--out", c.out, "output directory (default $COMPART_OUT or ./compart-out)");
    s->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json", "text"}));
    s->add_flag("--force", c.force, "overwrite an existing run in the output directory");
  };

  auto* sim = app.add_subcommand("simulate", "aggregate trajectory");
  common(sim);
  auto* part = app.add_subcommand("partition", "substorages and subthroughflows");
  common(part);
  auto* path = app.add_subcommand("path", "transient flows along subflow paths");
  common(path);
  path->add_option("--path", c.paths, "path such as 'k=1: 0->1->2->1'")->required();
  path->add_option("--mw", c.mw, "cycles counted by the cumulative series");
  path->add_option("--mode", c.mode, "simultaneous or posthoc")->check(CLI::IsMember({"simultaneous", "posthoc"}));
  path->add_option("--t1", c.t1, "activation time");
  auto* dia = app.add_subcommand("diact", "direct, indirect, acyclic, cycling and transfer flows");
  common(dia);
  dia->add_option("--kinds", kinds, "kinds, comma separated (default all)");
  dia->add_option("--scope", c.scope, "composite, simple or subsystem:<l>");
  dia->add_flag("--storage", c.storage, "also compute storages");
  dia->add_option("--t1", c.t1, "storage activation time");
  auto* sta = app.add_subcommand("static", "steady-state network analysis");
  common(sta);
  sta->add_option("--kinds", kinds, "kinds, comma separated (default all)");
  sta->add_option("--t", c.t_static, "time at which inputs are evaluated");
  auto* inter = app.add_subcommand("interact", "sign and strength of pairwise interactions");
  common(inter);
  inter->add_option("--pair", pair_list, "pair i,j (repeatable, default all)");
  inter->add_option("--kinds", kinds, "kinds, comma separated (default all)");
  inter->add_option("--basis", c.basis, "flow or storage");
  inter->add_option("--source", c.source, "composite, simple or initial-subsystem");
  inter->add_option("--norm", c.normalization,
                    "pairwise-diact, pairwise-transfer, pairwise-throughflow or global-throughflow");
  inter->add_option("--t1", c.t1, "storage activation time");
  auto* val = app.add_subcommand("validate", "check the model's structural assumptions");
  val->add_option("model", c.model_path, "model document")->required();
  val->add_flag("--strong", c.strong, "require the strong form");
  std::string run_file;
  bool run_force = false;
  std::string run_out;
  auto* runc = app.add_subcommand("run", "execute a JSON run file");
  runc->add_option("config", run_file, "run file")->required();
  runc->add_option("--out", run_out, "override the output directory");
  runc->add_flag("--force", run_force, "overwrite an existing run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (runc->parsed()) {
      RunConfig rc = load_run_config(run_file);
      if (!run_out.empty()) rc.out = run_out;
      rc.force = rc.force || run_force;
      return execute(rc, out, err);
    }
    for (auto* s : app.get_subcommands()) c.command = s->get_name();
    if (!z.empty()) c.z = split_top_level(z);
    if (!kinds.empty()) c.kinds = split_top_level(kinds);
    if (!times.empty())
      for (const auto& s : split_top_level(times)) c.times.push_back(std::stod(s));
    for (const auto& p : pair_list) c.pairs.push_back(parse_pair(p));
  } catch (const Error& e) {
    err << "error [" << e.module() << "]: " << e.what() << '\n';
    return kValidation;
  } catch (const std::logic_error&) {
    err << "error [cli]: malformed number in --times\n";
    return kValidation;
  }
  return execute(c, out, err);
}

}  // namespace compart::cli
