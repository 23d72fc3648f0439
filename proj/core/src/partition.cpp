#include "compart/partition.hpp"

#include <cmath>
#include <sstream>

namespace compart {

double storage_epsilon(const Vector& x) {
  return 1e-12 * std::max(1.0, x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
}

IntensitySet intensities(const CompartmentalModel& model, const FlowSnapshot& flows, const Vector& x) {
  const Eigen::Index n = x.size();
  const double eps = storage_epsilon(x);
  IntensitySet q;
  q.Qx.resize(n, n);
  q.Qtau.resize(n, n);
  q.r.resize(n);
  q.r_inv.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (x(j) > eps) {
      q.Qx.col(j) = flows.F.col(j) / x(j);
      q.r_inv(j) = flows.tau_out(j) / x(j);
    } else {
      // One-sided limit of f_ij / x_j, probed at x_j = eps.
      Vector xp = x;
      xp(j) = eps;
      FlowSnapshot s;
      bool ok = true;
      try {
        s = model.evaluate_flows(flows.t, xp);
      } catch (const Error&) {
        ok = false;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = ok ? s.F(i, j) / eps : 0.0;
        q.Qx(i, j) = std::isfinite(v) ? v : 0.0;
      }
      double v = ok ? s.tau_out(j) / eps : 0.0;
      q.r_inv(j) = std::isfinite(v) ? v : 0.0;
    }
    const double tau = flows.tau_out(j);
    if (tau > 0.0) {
      q.Qtau.col(j) = flows.F.col(j) / tau;
      q.r(j) = x(j) / tau;
    } else {
      q.Qtau.col(j).setZero();
      q.r(j) = std::numeric_limits<double>::infinity();
      q.warnings.push_back("zero outward throughflow in '" + model.labels()[j] + "'; residence time is infinite");
    }
  }
  q.A = q.Qx;
  q.A.diagonal() -= q.r_inv;
  return q;
}

IntensitySet intensities(const CompartmentalModel& model, double t, const Vector& x) {
  return intensities(model, model.evaluate_flows(t, x), x);
}

Vector pack_state(const DecomposedState& s) {
  const Eigen::Index n = s.x0.size();
  Vector u(n * (n + 1));
  u.head(n) = s.x0;
  u.tail(n * n) = Eigen::Map<const Vector>(s.X.data(), n * n);
  return u;
}

DecomposedState unpack_state(std::span<const double> u, std::size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  DecomposedState s;
  s.x0 = Eigen::Map<const Vector>(u.data(), N);
  s.X = Eigen::Map<const Matrix>(u.data() + n, N, N);
  return s;
}

void decomposed_rhs(const CompartmentalModel& model, double t, std::span<const double> u, std::span<double> du) {
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::Map<const Matrix> U(u.data(), n, n + 1);
  Eigen::Map<Matrix> dU(du.data(), n, n + 1);
  Vector x = U.rowwise().sum();
  FlowSnapshot s = model.evaluate_flows(t, x);
  IntensitySet q = intensities(model, s, x);
  dU.noalias() = q.A * U;
  for (Eigen::Index k = 0; k < n; ++k) dU(k, k + 1) += s.z(k);
}

SubthroughflowSet subthroughflows(const CompartmentalModel& model, double t, const DecomposedState& state) {
  SubthroughflowSet s;
  s.t = t;
  s.state = state;
  s.x = state.aggregate();
  s.flows = model.evaluate_flows(t, s.x);
  s.q = intensities(model, s.flows, s.x);
  s.T_tilde = s.q.Qx * state.X;
  s.T_in = s.T_tilde;
  s.T_in.diagonal() += s.flows.z;
  s.T_out = s.q.r_inv.asDiagonal() * state.X;
  s.tau0_in = s.q.Qx * state.x0;
  s.tau0_out = s.q.r_inv.cwiseProduct(state.x0);
  return s;
}

SubsystemMatrices subsystem_matrices(const SubthroughflowSet& s, std::size_t k) {
  const Eigen::Index n = s.x.size();
  if (k > static_cast<std::size_t>(n)) throw ValidationError("partition", "subsystem index out of range");
  const Vector xk = k == 0 ? s.state.x0 : Vector(s.state.X.col(static_cast<Eigen::Index>(k) - 1));
  const double eps = storage_epsilon(s.x);
  Vector xinv(n);
  for (Eigen::Index i = 0; i < n; ++i) xinv(i) = s.x(i) > eps ? 1.0 / s.x(i) : 0.0;
  // y_i / x_i consistent with the guarded intensities.
  const Vector y_over_x = s.q.r_inv - s.q.Qx.colwise().sum().transpose();

  SubsystemMatrices m;
  m.X_k = xk.asDiagonal();
  m.D = xinv.asDiagonal() * s.state.X;
  m.D_k = xinv.cwiseProduct(xk).asDiagonal();
  m.F_k = s.q.Qx * m.X_k;
  m.Z_k = Matrix::Zero(n, n);
  if (k > 0) m.Z_k(static_cast<Eigen::Index>(k) - 1, static_cast<Eigen::Index>(k) - 1) =
      s.flows.z(static_cast<Eigen::Index>(k) - 1);
  m.Y_k = y_over_x.cwiseProduct(xk).asDiagonal();
  m.T_in_k = m.Z_k;
  m.T_in_k.diagonal() += m.F_k.rowwise().sum();
  m.T_out_k = s.q.r_inv.cwiseProduct(xk).asDiagonal();
  return m;
}

PartitionTrajectory::PartitionTrajectory(std::shared_ptr<const CompartmentalModel> model, Trajectory traj)
    : model_(std::move(model)), traj_(std::move(traj)) {}

DecomposedState PartitionTrajectory::state(double t) const {
  Vector u = traj_.at(t);
  return unpack_state(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), size());
}

SubthroughflowSet PartitionTrajectory::subthroughflows(double t) const {
  return compart::subthroughflows(*model_, t, state(t));
}

SubsystemMatrices PartitionTrajectory::subsystem(double t, std::size_t k) const {
  return subsystem_matrices(subthroughflows(t), k);
}

PartitionTrajectory decompose(std::shared_ptr<const CompartmentalModel> model, double t0, double t1,
                              const PartitionConfig& config) {
  if (!model) throw ValidationError("partition", "no model");
  DecomposedState s0;
  const auto n = static_cast<Eigen::Index>(model->size());
  s0.x0 = model->x_init();
  s0.X = Matrix::Zero(n, n);
  const CompartmentalModel& m = *model;
  VectorField f = [&m](double t, std::span<const double> u, std::span<double> du) { decomposed_rhs(m, t, u, du); };
  Trajectory traj = integrate(f, pack_state(s0), t0, t1, config.integrator);
  return PartitionTrajectory(std::move(model), std::move(traj));
}

}  // namespace compart
