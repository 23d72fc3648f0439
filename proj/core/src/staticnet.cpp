#include "compart/staticnet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace compart {

namespace {

Matrix fd_jacobian(const CompartmentalModel& m, double t, const Vector& x, const Vector& g) {
  const Eigen::Index n = x.size();
  Matrix J(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
    Vector xp = x, xm = x;
    xp(j) += h;
    if (x(j) - h >= 0.0) {
      xm(j) -= h;
      J.col(j) = (m.rhs(t, xp) - m.rhs(t, xm)) / (2.0 * h);
    } else {
      J.col(j) = (m.rhs(t, xp) - g) / h;
    }
  }
  return J;
}

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Returns true on convergence; x is updated in place either way.
bool newton(const CompartmentalModel& m, Vector& x, const SteadyStateConfig& cfg) {
  Vector g = m.rhs(cfg.t, x);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (inf_norm(g) <= cfg.tol) return true;
    Matrix J = fd_jacobian(m, cfg.t, x, g);
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) return false;
    Vector dx = -lu.solve(g);
    double lambda = 1.0;
    bool improved = false;
    const double scale = std::max(1.0, inf_norm(x));
    for (int h = 0; h <= cfg.max_halvings; ++h, lambda *= 0.5) {
      Vector xn = x + lambda * dx;
      for (Eigen::Index i = 0; i < xn.size(); ++i)
        if (xn(i) < 0.0 && xn(i) > -1e-12 * scale) xn(i) = 0.0;
      if ((xn.array() < 0.0).any()) continue;
      Vector gn;
      try {
        gn = m.rhs(cfg.t, xn);
      } catch (const Error&) {
        continue;
      }
      if (inf_norm(gn) < inf_norm(g)) {
        x = xn;
        g = gn;
        improved = true;
        break;
      }
    }
    if (!improved) return inf_norm(g) <= cfg.tol;
  }
  return inf_norm(g) <= cfg.tol;
}

}  // namespace

Vector find_steady_state(const CompartmentalModel& model, const Vector& guess, const SteadyStateConfig& cfg) {
  if (guess.size() != static_cast<Eigen::Index>(model.size()))
    throw ValidationError("staticnet", "steady-state guess has wrong length");
  if ((guess.array() < 0.0).any()) throw ValidationError("staticnet", "steady-state guess must be nonnegative");
  Vector x = guess;
  if (!newton(model, x, cfg)) {
    // Let the dynamics do the work, then polish.
    VectorField f = [&](double, std::span<const double> u, std::span<double> du) {
      Vector xv = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
      Vector d = model.rhs(cfg.t, xv);
      std::copy(d.data(), d.data() + d.size(), du.begin());
    };
    double horizon = 10.0;
    bool done = false;
    while (horizon <= cfg.fallback_horizon && !done) {
      Trajectory tr = integrate(f, x, 0.0, horizon, cfg.integrator);
      x = tr.at(horizon);
      done = newton(model, x, cfg);
      horizon *= 10.0;
    }
    if (!done) {
      std::ostringstream os;
      os << "steady state not found; residual " << inf_norm(model.rhs(cfg.t, x));
      throw NumericalError("staticnet", os.str());
    }
  }
  if ((x.array() < 0.0).any()) throw NumericalError("staticnet", "steady state has a negative component");
  return x;
}

StaticSolution static_partition(const CompartmentalModel& model, const Vector& x_ss, double t) {
  const Eigen::Index n = x_ss.size();
  if (n != static_cast<Eigen::Index>(model.size())) throw ValidationError("staticnet", "state has wrong length");
  FlowSnapshot f = model.evaluate_flows(t, x_ss);
  StaticSolution s;
  s.t = t;
  s.x = x_ss;
  s.z = f.z;
  s.y = f.y;
  s.tau = f.tau_out;
  s.F = f.F;
  s.x0 = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x_ss(i) > 0.0))
      throw NumericalError("staticnet", "compartment '" + model.labels()[i] + "' is empty at steady state");
    if (!(s.tau(i) > 0.0))
      throw NumericalError("staticnet", "compartment '" + model.labels()[i] + "' has no outward throughflow");
  }
  const Matrix I = Matrix::Identity(n, n);
  const Vector tau_inv = s.tau.cwiseInverse();
  s.A = (s.F - Matrix(s.tau.asDiagonal())) * x_ss.cwiseInverse().asDiagonal();
  Eigen::FullPivLU<Matrix> luA(s.A);
  if (!luA.isInvertible() || luA.rcond() < 1e-14)
    throw NumericalError("staticnet", "flow intensity matrix is singular (non-dissipative system)");
  Matrix M = I - s.F * tau_inv.asDiagonal();
  Eigen::FullPivLU<Matrix> luM(M);
  if (!luM.isInvertible() || luM.rcond() < 1e-14)
    throw NumericalError("staticnet", "I - F T^{-1} is singular (non-dissipative system)");
  s.S = -luA.inverse();
  s.N = luM.inverse();
  s.X = s.S * s.z.asDiagonal();
  s.T = s.N * s.z.asDiagonal();
  s.r = x_ss.cwiseProduct(tau_inv);
  const Matrix RN = s.r.asDiagonal() * s.N;
  s.s_rn_residual = (s.S - RN).cwiseAbs().maxCoeff() / std::max(1e-300, s.S.cwiseAbs().maxCoeff());
  if (s.s_rn_residual > 1e-8) {
    std::ostringstream os;
    os << "S and R N disagree (relative residual " << s.s_rn_residual << ")";
    throw NumericalError("staticnet", os.str());
  }
  return s;
}

OutputOriented output_oriented(const StaticSolution& s) {
  const Eigen::Index n = s.x.size();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(s.y(i) > 0.0))
      throw NumericalError("staticnet", "output matrix is singular: no output from compartment " +
                                            std::to_string(i + 1));
  const Matrix I = Matrix::Identity(n, n);
  OutputOriented o;
  Matrix M = I - s.F.transpose() * s.tau.cwiseInverse().asDiagonal();
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw NumericalError("staticnet", "I - F^T T^{-1} is singular");
  o.N_bar = lu.inverse();
  o.S_bar = s.r.asDiagonal() * o.N_bar;
  o.x_bar = o.S_bar * s.y;
  o.X_bar = o.S_bar * s.y.asDiagonal();
  o.T_bar = o.N_bar * s.y.asDiagonal();
  const Matrix Xd = s.x.asDiagonal(), Td = s.tau.asDiagonal();
  o.storage_duality = (s.S * Xd - Xd * o.S_bar.transpose()).cwiseAbs().maxCoeff();
  o.flow_duality = (s.N * Td - Td * o.N_bar.transpose()).cwiseAbs().maxCoeff();
  return o;
}

double static_local_input(const StaticSolution& s, const SubflowPath& path) {
  const std::size_t k = path.subsystem, head = path.nodes.at(0), first = path.nodes.at(1);
  if (head == 0) return (k >= 1 && first == k) ? s.z(static_cast<Eigen::Index>(k) - 1) : 0.0;
  if (k == 0) return 0.0;
  const auto h = static_cast<Eigen::Index>(head) - 1;
  return s.F(static_cast<Eigen::Index>(first) - 1, h) / s.x(h) * s.X(h, static_cast<Eigen::Index>(k) - 1);
}

std::vector<StaticNodeFlow> static_transient(const StaticSolution& s, const SubflowPath& path,
                                             std::optional<double> local_input) {
  double in = local_input ? *local_input : static_local_input(s, path);
  std::vector<StaticNodeFlow> out;
  for (std::size_t pos : path.storage_positions()) {
    const auto c = static_cast<Eigen::Index>(path.nodes[pos]) - 1;
    if (!(s.tau(c) > 0.0)) throw NumericalError("staticnet", "zero throughflow on path node " + std::to_string(c + 1));
    StaticNodeFlow nf;
    nf.position = pos;
    nf.compartment = path.nodes[pos];
    nf.inflow = in;
    nf.storage = s.x(c) / s.tau(c) * in;
    if (pos + 1 < path.nodes.size()) {
      const std::size_t next = path.nodes[pos + 1];
      const double f = next == 0 ? s.y(c) : s.F(static_cast<Eigen::Index>(next) - 1, c);
      nf.outflow = f / s.tau(c) * in;
      in = *nf.outflow;
    }
    out.push_back(nf);
  }
  return out;
}

StaticCumulative static_cumulative(const StaticSolution& s, const SubflowPath& path,
                                   std::optional<double> local_input) {
  std::vector<std::size_t> counted;
  SubflowPath unrolled = unroll(path, counted);
  double in = local_input ? *local_input : static_local_input(s, path);
  auto nodes = static_transient(s, unrolled, in);
  StaticCumulative c;
  for (const auto& nf : nodes) {
    if (std::find(counted.begin(), counted.end(), nf.position) == counted.end()) continue;
    const auto idx = static_cast<Eigen::Index>(nf.compartment) - 1;
    c.inflow += nf.inflow;
    c.storage += nf.storage;
    c.outflow += nf.outflow ? *nf.outflow : nf.storage * s.tau(idx) / s.x(idx);
    ++c.visits;
  }
  return c;
}

}  // namespace compart
