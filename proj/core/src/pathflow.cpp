#include "compart/pathflow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace compart {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(const std::string& msg, std::string_view spec) {
  throw ValidationError("pathflow", msg + " in path '" + std::string(spec) + "'");
}

std::optional<std::size_t> to_uint(std::string_view s) {
  s = trim(s);
  std::size_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Parses "name=value" and returns value when name matches.
std::optional<std::size_t> option(std::string_view s, std::string_view name, std::string_view spec) {
  s = trim(s);
  auto eq = s.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  if (trim(s.substr(0, eq)) != name) return std::nullopt;
  auto v = to_uint(s.substr(eq + 1));
  if (!v) bad("'" + std::string(name) + "' needs a non-negative integer", spec);
  return v;
}

void split_options(std::string_view s, std::vector<std::string_view>& out) {
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',' || s[i] == ';') {
      auto part = trim(s.substr(start, i - start));
      if (!part.empty()) out.push_back(part);
      start = i + 1;
    }
  }
}

bool link_exists(const CompartmentalModel& m, std::size_t from, std::size_t to) {
  if (from == 0) return to != 0;
  if (to == 0) return m.output(from - 1).has_value();
  return m.flow(to - 1, from - 1).has_value();
}

}  // namespace

std::vector<std::size_t> SubflowPath::storage_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t p = 1; p < nodes.size(); ++p)
    if (nodes[p] != 0) out.push_back(p);
  return out;
}

SubflowPath parse_path(std::string_view spec, const CompartmentalModel& model) {
  const std::size_t n = model.size();
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) bad("missing 'k=<subsystem>:' header", spec);
  SubflowPath p;
  bool have_k = false;

  std::vector<std::string_view> header;
  split_options(spec.substr(0, colon), header);
  for (auto h : header) {
    if (auto k = option(h, "k", spec)) {
      p.subsystem = *k;
      have_k = true;
    } else if (auto c = option(h, "cycles", spec)) {
      p.cycles = *c;
    } else {
      bad("unknown header item '" + std::string(h) + "'", spec);
    }
  }
  if (!have_k) bad("missing subsystem 'k=...'", spec);
  if (p.subsystem > n) bad("subsystem k=" + std::to_string(p.subsystem) + " out of range 0.." + std::to_string(n), spec);

  std::string_view body = spec.substr(colon + 1);
  auto semi = body.find_first_of(";");
  if (semi != std::string_view::npos) {
    std::vector<std::string_view> opts;
    split_options(body.substr(semi + 1), opts);
    for (auto o : opts) {
      if (auto c = option(o, "cycles", spec))
        p.cycles = *c;
      else
        bad("unknown option '" + std::string(o) + "'", spec);
    }
    body = body.substr(0, semi);
  }
  if (p.cycles == 0) bad("cycles must be at least 1", spec);

  std::size_t start = 0;
  for (;;) {
    auto arrow = body.find("->", start);
    auto tok = trim(body.substr(start, arrow == std::string_view::npos ? std::string_view::npos : arrow - start));
    if (tok.empty()) bad("empty node", spec);
    std::size_t node;
    if (auto v = to_uint(tok)) {
      node = *v;
      if (node > n) bad("unknown compartment " + std::string(tok), spec);
    } else {
      auto it = std::find(model.labels().begin(), model.labels().end(), std::string(tok));
      if (it == model.labels().end()) bad("unknown compartment '" + std::string(tok) + "'", spec);
      node = static_cast<std::size_t>(it - model.labels().begin()) + 1;
    }
    p.nodes.push_back(node);
    if (arrow == std::string_view::npos) break;
    start = arrow + 2;
  }
  if (p.nodes.size() < 2) bad("a path needs at least one link", spec);
  for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i)
    if (p.nodes[i] == 0) bad("the environment may only appear at the head or the tail", spec);
  if (p.nodes[0] == 0 && p.nodes[1] == 0) bad("a path cannot run from the environment to the environment", spec);
  for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
    if (!link_exists(model, p.nodes[i], p.nodes[i + 1])) {
      auto name = [&](std::size_t v) { return v == 0 ? std::string("environment") : model.labels()[v - 1]; };
      bad("disconnected link " + name(p.nodes[i]) + " -> " + name(p.nodes[i + 1]), spec);
    }
  }
  return p;
}

std::string to_string(const SubflowPath& path) {
  std::ostringstream os;
  os << "k=" << path.subsystem << ": ";
  for (std::size_t i = 0; i < path.nodes.size(); ++i) os << (i ? " -> " : "") << path.nodes[i];
  os << "; cycles=" << path.cycles;
  return os.str();
}

const std::vector<double>& TransientRecord::exit_flow() const {
  if (!path.exits() || nodes.empty()) throw ValidationError("pathflow", "path does not end in the environment");
  return nodes.back().outflow;
}

namespace {

struct NodeRates {
  std::vector<double> inflow, outflow, leaving, dstate;
};

// Evaluates the chained balance of every path node at one time.
class PathEvaluator {
 public:
  PathEvaluator(const CompartmentalModel& model, const SubflowPath& path)
      : model_(model), path_(path), positions_(path.storage_positions()) {}

  std::size_t size() const { return positions_.size(); }
  const std::vector<std::size_t>& positions() const { return positions_; }

  void rates(double t, const DecomposedState& s, std::span<const double> w, NodeRates& r) const {
    const std::size_t L = positions_.size();
    r.inflow.assign(L, 0.0);
    r.outflow.assign(L, 0.0);
    r.leaving.assign(L, 0.0);
    r.dstate.assign(L, 0.0);
    const Vector x = s.aggregate();
    const FlowSnapshot f = model_.evaluate_flows(t, x);
    const IntensitySet q = intensities(model_, f, x);
    const Vector y_over_x = q.r_inv - q.Qx.colwise().sum().transpose();
    const std::size_t k = path_.subsystem;

    const std::size_t head = path_.nodes[0], first = path_.nodes[1];
    double in = 0.0;
    if (head == 0) {
      if (k >= 1 && first == k) in = f.z(static_cast<Eigen::Index>(k) - 1);
    } else {
      const auto h = static_cast<Eigen::Index>(head) - 1;
      const double xhk = k == 0 ? s.x0(h) : s.X(h, static_cast<Eigen::Index>(k) - 1);
      in = q.Qx(static_cast<Eigen::Index>(first) - 1, h) * xhk;
    }
    for (std::size_t m = 0; m < L; ++m) {
      const std::size_t pos = positions_[m];
      const auto c = static_cast<Eigen::Index>(path_.nodes[pos]) - 1;
      r.inflow[m] = in;
      r.leaving[m] = q.r_inv(c) * w[m];
      r.dstate[m] = in - r.leaving[m];
      if (pos + 1 < path_.nodes.size()) {
        const std::size_t next = path_.nodes[pos + 1];
        const double rate = next == 0 ? y_over_x(c) : q.Qx(static_cast<Eigen::Index>(next) - 1, c);
        r.outflow[m] = rate * w[m];
        in = r.outflow[m];
      } else {
        r.outflow[m] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }

 private:
  const CompartmentalModel& model_;
  const SubflowPath& path_;
  std::vector<std::size_t> positions_;
};

std::vector<double> default_grid(double a, double b, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = i + 1 == count ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

}  // namespace

TransientRecord transient_flows(const PartitionTrajectory& partition, const SubflowPath& path,
                                const TransientOptions& options) {
  const CompartmentalModel& model = partition.model();
  const std::size_t n = model.size();
  const double t1 = std::isnan(options.t1) ? partition.t0() : options.t1;
  if (t1 < partition.t0() || t1 > partition.t_end())
    throw ValidationError("pathflow", "activation time outside the partition span");
  for (std::size_t v : path.nodes)
    if (v > n) throw ValidationError("pathflow", "path does not match the model");

  PathEvaluator ev(model, path);
  const std::size_t L = ev.size();
  const std::size_t nu = n * (n + 1);

  TransientRecord rec;
  rec.path = path;
  rec.t1 = t1;
  rec.times = options.grid.empty() ? default_grid(t1, partition.t_end(), 201) : options.grid;
  for (double t : rec.times)
    if (t < partition.t0() || t > partition.t_end()) throw ValidationError("pathflow", "grid outside partition span");

  std::function<void(double, DecomposedState&, std::vector<double>&)> sample;
  Trajectory traj;
  const double t_end = partition.t_end();
  const bool active = t_end > t1;

  if (options.mode == SolveMode::Simultaneous) {
    VectorField f = [&](double t, std::span<const double> u, std::span<double> du) {
      decomposed_rhs(model, t, u.subspan(0, nu), du.subspan(0, nu));
      NodeRates r;
      ev.rates(t, unpack_state(u.subspan(0, nu), n), u.subspan(nu), r);
      std::copy(r.dstate.begin(), r.dstate.end(), du.begin() + static_cast<std::ptrdiff_t>(nu));
    };
    Vector u0(static_cast<Eigen::Index>(nu + L));
    u0.head(static_cast<Eigen::Index>(nu)) = partition.trajectory().at(t1);
    u0.tail(static_cast<Eigen::Index>(L)).setZero();
    if (active) traj = integrate(f, u0, t1, t_end, options.integrator);
    sample = [&, u0](double t, DecomposedState& s, std::vector<double>& w) {
      Vector u = (!active || t <= t1) ? u0 : traj.at(t);
      s = unpack_state(std::span<const double>(u.data(), nu), n);
      w.assign(u.data() + nu, u.data() + nu + L);
    };
  } else {
    VectorField f = [&](double t, std::span<const double> w, std::span<double> dw) {
      NodeRates r;
      ev.rates(t, partition.state(t), w, r);
      std::copy(r.dstate.begin(), r.dstate.end(), dw.begin());
    };
    Vector w0 = Vector::Zero(static_cast<Eigen::Index>(L));
    if (active) traj = integrate(f, w0, t1, t_end, options.integrator);
    sample = [&](double t, DecomposedState& s, std::vector<double>& w) {
      s = partition.state(t);
      if (!active || t <= t1) {
        w.assign(L, 0.0);
      } else {
        Vector v = traj.at(t);
        w.assign(v.data(), v.data() + L);
      }
    };
  }

  rec.nodes.resize(L);
  for (std::size_t m = 0; m < L; ++m) {
    rec.nodes[m].position = ev.positions()[m];
    rec.nodes[m].compartment = path.nodes[ev.positions()[m]];
  }
  const bool has_terminal_outflow = path.exits();
  NodeRates r;
  DecomposedState s;
  std::vector<double> w;
  for (double t : rec.times) {
    const bool before = t < t1;
    sample(std::max(t, t1), s, w);
    if (!before) ev.rates(t, s, w, r);
    for (std::size_t m = 0; m < L; ++m) {
      auto& ns = rec.nodes[m];
      const bool terminal = m + 1 == L && !has_terminal_outflow;
      ns.inflow.push_back(before ? 0.0 : r.inflow[m]);
      ns.storage.push_back(before ? 0.0 : w[m]);
      ns.leaving.push_back(before ? 0.0 : r.leaving[m]);
      if (!terminal) ns.outflow.push_back(before ? 0.0 : r.outflow[m]);
    }
  }
  return rec;
}

SubflowPath unroll(const SubflowPath& path, std::vector<std::size_t>& counted) {
  counted.clear();
  if (path.exits()) throw ValidationError("pathflow", "cumulative quantities need a path that ends in a compartment");
  const std::size_t q = path.nodes.size() - 1;
  const std::size_t d = path.nodes[q];
  // A compartment head counts as an earlier visit: "k=0: 1 -> 2 -> 1" is a loop.
  std::optional<std::size_t> prev;
  for (std::size_t i = q; i-- > 0;)
    if (path.nodes[i] == d) {
      prev = i;
      break;
    }
  if (!prev) {
    counted.push_back(q);
    return path;
  }
  const std::vector<std::size_t> cycle(path.nodes.begin() + static_cast<std::ptrdiff_t>(*prev) + 1,
                                       path.nodes.end());
  SubflowPath out = path;
  out.nodes.clear();
  std::size_t i = 0;
  for (;;) {
    const std::size_t node = i <= q ? path.nodes[i] : cycle[(i - q - 1) % cycle.size()];
    out.nodes.push_back(node);
    if (i >= 2 && node == d) {
      counted.push_back(i);
      if (counted.size() == path.cycles) break;
    }
    ++i;
  }
  // One more link so the last counted visit has a defined outflow.
  ++i;
  out.nodes.push_back(i <= q ? path.nodes[i] : cycle[(i - q - 1) % cycle.size()]);
  return out;
}

CumulativeRecord cumulative_transient(const PartitionTrajectory& partition, const SubflowPath& path,
                                      const TransientOptions& options) {
  CumulativeRecord out;
  out.unrolled = unroll(path, out.visits);
  out.designated = path.nodes.back();
  TransientRecord rec = transient_flows(partition, out.unrolled, options);
  out.times = rec.times;
  const std::size_t T = rec.times.size();
  out.inflow.assign(T, 0.0);
  out.storage.assign(T, 0.0);
  out.outflow.assign(T, 0.0);
  for (const auto& ns : rec.nodes) {
    if (std::find(out.visits.begin(), out.visits.end(), ns.position) == out.visits.end()) continue;
    const auto& leaving = ns.outflow.empty() ? ns.leaving : ns.outflow;
    for (std::size_t m = 0; m < T; ++m) {
      out.inflow[m] += ns.inflow[m];
      out.storage[m] += ns.storage[m];
      out.outflow[m] += leaving[m];
    }
  }
  return out;
}

}  // namespace compart
