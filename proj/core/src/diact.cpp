#include "compart/diact.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace compart {

std::string_view kind_name(DiactKind kind) {
  switch (kind) {
    case DiactKind::Direct: return "direct";
    case DiactKind::Indirect: return "indirect";
    case DiactKind::Acyclic: return "acyclic";
    case DiactKind::Cycling: return "cycling";
    case DiactKind::Transfer: return "transfer";
  }
  return "?";
}

char kind_letter(DiactKind kind) { return kind_name(kind)[0]; }

DiactKind parse_kind(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (DiactKind k : kAllDiactKinds)
    if (s == kind_name(k) || (s.size() == 1 && s[0] == kind_letter(k))) return k;
  throw ValidationError("diact", "unknown diact kind '" + std::string(text) + "'");
}

double throughflow_epsilon(const Vector& tau_out) {
  return 1e-10 * std::max(1.0, tau_out.size() ? tau_out.cwiseAbs().maxCoeff() : 0.0);
}

Distribution diact_distribution(const SubthroughflowSet& s, DiactKind kind) {
  const Eigen::Index n = s.x.size();
  const Vector own_out = s.T_out.diagonal();
  const double eps = throughflow_epsilon(s.flows.tau_out);
  Distribution d;
  d.flagged.assign(static_cast<std::size_t>(n), false);
  Vector inv(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    d.flagged[static_cast<std::size_t>(k)] = !(own_out(k) > eps);
    inv(k) = d.flagged[static_cast<std::size_t>(k)] ? 0.0 : 1.0 / own_out(k);
  }
  auto transfer = [&] { return Matrix(s.T_tilde * inv.asDiagonal()); };
  auto cycling = [&] {
    const Vector row = s.T_tilde.diagonal().cwiseProduct(inv);
    return Matrix(row.asDiagonal() * s.T_out * inv.asDiagonal());
  };
  switch (kind) {
    case DiactKind::Direct: d.N = s.q.Qtau; break;
    case DiactKind::Transfer: d.N = transfer(); break;
    case DiactKind::Indirect: d.N = transfer() - s.q.Qtau; break;
    case DiactKind::Cycling: d.N = cycling(); break;
    case DiactKind::Acyclic: d.N = transfer() - cycling(); break;
  }
  for (Eigen::Index k = 0; k < n; ++k)
    if (d.flagged[static_cast<std::size_t>(k)]) d.N.col(k).setZero();
  return d;
}

Distribution diact_distribution(const PartitionTrajectory& p, double t, DiactKind kind) {
  return diact_distribution(p.subthroughflows(t), kind);
}

Matrix diact_flows(const SubthroughflowSet& s, DiactKind kind, FlowScope scope) {
  const Matrix N = diact_distribution(s, kind).N;
  switch (scope.type) {
    case FlowScope::Type::Composite: return N * (s.flows.tau_out - s.tau0_out).asDiagonal();
    case FlowScope::Type::Simple: return N * s.T_out.diagonal().asDiagonal();
    case FlowScope::Type::Subsystem: {
      const auto l = static_cast<Eigen::Index>(scope.subsystem);
      if (l > s.x.size()) throw ValidationError("diact", "subsystem index out of range");
      const Vector col = l == 0 ? s.tau0_out : Vector(s.T_out.col(l - 1));
      return N * col.asDiagonal();
    }
  }
  return N;
}

Matrix diact_flows(const PartitionTrajectory& p, double t, DiactKind kind, FlowScope scope) {
  return diact_flows(p.subthroughflows(t), kind, scope);
}

double diact_storage(const PartitionTrajectory& p, const FlowSeries& tau, std::size_t i, double t1, double t,
                     const IntegratorConfig& config) {
  if (t < t1) throw ValidationError("diact", "storage requested before activation time");
  if (t == t1) return 0.0;
  const auto idx = static_cast<Eigen::Index>(i);
  VectorField f = [&](double s, std::span<const double> x, std::span<double> dx) {
    const double rate = p.subthroughflows(s).q.r_inv(idx);
    dx[0] = tau(s) - rate * x[0];
  };
  Vector x0 = Vector::Zero(1);
  return integrate(f, x0, t1, t, config).at(t)(0);
}

double diact_storage_quadrature(const PartitionTrajectory& p, const FlowSeries& tau, std::size_t i, double t1,
                                double t, std::size_t panels) {
  if (t < t1) throw ValidationError("diact", "storage requested before activation time");
  if (t == t1 || panels == 0) return 0.0;
  static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                   0.9061798459386640};
  static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                   0.2369268850561891};
  const auto idx = static_cast<Eigen::Index>(i);
  auto rate = [&](double s) { return p.subthroughflows(s).q.r_inv(idx); };
  auto gl = [&](double a, double b) {
    double sum = 0.0;
    for (int q = 0; q < 5; ++q) sum += gw[q] * rate(0.5 * (a + b) + 0.5 * (b - a) * gx[q]);
    return 0.5 * (b - a) * sum;
  };
  const double h = (t - t1) / static_cast<double>(panels);
  std::vector<double> node_s, node_w, node_lambda;
  double lambda_a = 0.0;
  for (std::size_t m = 0; m < panels; ++m) {
    const double a = t1 + h * static_cast<double>(m), b = m + 1 == panels ? t : a + h;
    for (int q = 0; q < 5; ++q) {
      const double s = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
      node_s.push_back(s);
      node_w.push_back(0.5 * (b - a) * gw[q]);
      node_lambda.push_back(lambda_a + gl(a, s));
    }
    lambda_a += gl(a, b);
  }
  double x = 0.0;
  for (std::size_t q = 0; q < node_s.size(); ++q) x += node_w[q] * tau(node_s[q]) * std::exp(node_lambda[q] - lambda_a);
  return x;
}

DiactStorageSeries diact_storages(const PartitionTrajectory& p, const std::vector<DiactKind>& kinds, FlowScope scope,
                                  double t1, const std::vector<double>& grid, const IntegratorConfig& config) {
  const auto n = static_cast<Eigen::Index>(p.size());
  const auto K = static_cast<Eigen::Index>(kinds.size());
  DiactStorageSeries out;
  out.times = grid;
  out.kinds = kinds;
  out.values.assign(kinds.size(), {});
  if (t1 < p.t0() || t1 > p.t_end()) throw ValidationError("diact", "activation time outside the partition span");
  Trajectory traj;
  const bool active = p.t_end() > t1;
  if (active) {
    VectorField f = [&](double t, std::span<const double> u, std::span<double> du) {
      const SubthroughflowSet s = p.subthroughflows(t);
      for (Eigen::Index k = 0; k < K; ++k) {
        Eigen::Map<const Matrix> X(u.data() + k * n * n, n, n);
        Eigen::Map<Matrix> dX(du.data() + k * n * n, n, n);
        dX = diact_flows(s, kinds[static_cast<std::size_t>(k)], scope) - s.q.r_inv.asDiagonal() * X;
      }
    };
    traj = integrate(f, Vector(Vector::Zero(K * n * n)), t1, p.t_end(), config);
  }
  for (double t : grid) {
    Vector u = (!active || t <= t1) ? Vector(Vector::Zero(K * n * n)) : traj.at(t);
    for (Eigen::Index k = 0; k < K; ++k)
      out.values[static_cast<std::size_t>(k)].push_back(Eigen::Map<const Matrix>(u.data() + k * n * n, n, n));
  }
  return out;
}

StaticDiact static_diact(const StaticSolution& s, DiactKind kind) {
  const Eigen::Index n = s.x.size();
  const Matrix I = Matrix::Identity(n, n);
  const Vector Nd = s.N.diagonal();
  for (Eigen::Index i = 0; i < n; ++i)
    if (Nd(i) == 0.0)
      throw NumericalError("diact", "diagonal of N is zero at entry " + std::to_string(i + 1));
  const Matrix Ninv = Nd.cwiseInverse().asDiagonal();
  const Matrix direct = s.F * s.tau.cwiseInverse().asDiagonal();
  const Matrix transfer = (s.N - I) * Ninv;
  StaticDiact d;
  d.kind = kind;
  switch (kind) {
    case DiactKind::Direct: d.N = direct; break;
    case DiactKind::Indirect: d.N = transfer - direct; break;
    case DiactKind::Acyclic: d.N = (Ninv * s.N - I) * Ninv; break;
    case DiactKind::Cycling: d.N = (s.N - Ninv * s.N) * Ninv; break;
    case DiactKind::Transfer: d.N = transfer; break;
  }
  const Matrix R = s.r.asDiagonal();
  const Matrix Tdiag = s.tau.asDiagonal();
  const Matrix Tsimple = s.T.diagonal().asDiagonal();
  d.S = R * d.N;
  d.T = d.N * Tdiag;
  d.X = d.S * Tdiag;
  d.T_tilde = d.N * Tsimple;
  d.X_tilde = d.S * Tsimple;
  for (Eigen::Index l = 0; l < n; ++l) {
    const Matrix Tl = s.T.col(l).asDiagonal();
    d.T_sub.push_back(d.N * Tl);
    d.X_sub.push_back(d.S * Tl);
  }
  d.tau_tilde = d.T_tilde.rowwise().sum();
  d.x_tilde = d.X_tilde.rowwise().sum();
  return d;
}

}  // namespace compart
