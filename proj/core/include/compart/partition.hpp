#ifndef COMPART_PARTITION_HPP
#define COMPART_PARTITION_HPP

#include "compart/model.hpp"
#include "compart/odeint.hpp"

#include <memory>
#include <string>
#include <vector>

namespace compart {

/// Substorages at one time. Column k of X is subsystem k+1; x0 is the initial subsystem.
struct DecomposedState {
  Matrix X;
  Vector x0;
  Vector aggregate() const { return x0 + X.rowwise().sum(); }
};

/// Flow intensities at one state.
struct IntensitySet {
  Matrix A;      // Qx - R^{-1}
  Matrix Qx;     // F X^{-1} (column j scaled by 1/x_j)
  Matrix Qtau;   // F T^{-1} (column j scaled by 1/tau_j)
  Vector r;      // residence times x_i / tau_i; +inf where tau_i = 0
  Vector r_inv;  // tau_i / x_i, the outward intensity; exact, not 1/r
  std::vector<std::string> warnings;
  Matrix R() const { return r.asDiagonal(); }
};

/// Subthroughflows at one time. Column k+1 in one-based notation is column k here.
struct SubthroughflowSet {
  double t = 0.0;
  FlowSnapshot flows;
  DecomposedState state;
  Vector x;            // aggregate storage
  IntensitySet q;
  Matrix T_in;         // Z + Qx X
  Matrix T_out;        // R^{-1} X
  Matrix T_tilde;      // T_in - Z = Qx X
  Vector tau0_in;      // Qx x0
  Vector tau0_out;     // R^{-1} x0
  Vector diag_in() const { return T_in.diagonal(); }
  Vector diag_out() const { return T_out.diagonal(); }
  Vector diag_tilde() const { return T_tilde.diagonal(); }
};

/// Matrices of subsystem k (k = 0 is the initial subsystem).
struct SubsystemMatrices {
  Matrix F_k, X_k, Z_k, Y_k, T_in_k, T_out_k, D, D_k;
};

struct PartitionConfig {
  IntegratorConfig integrator;
};

/// Threshold below which a storage counts as empty for intensity division.
double storage_epsilon(const Vector& x);

/// Intensities at (t, x). Empty compartments use the one-sided limit
/// f_ij(x_j = eps)/eps when finite and 0 otherwise.
IntensitySet intensities(const CompartmentalModel& model, double t, const Vector& x);
IntensitySet intensities(const CompartmentalModel& model, const FlowSnapshot& flows, const Vector& x);

SubthroughflowSet subthroughflows(const CompartmentalModel& model, double t, const DecomposedState& state);

/// Packs and unpacks the decomposed state: [x0 | X(:,0) | ... | X(:,n-1)].
Vector pack_state(const DecomposedState& s);
DecomposedState unpack_state(std::span<const double> u, std::size_t n);

/// Right-hand side of the n(n+1) decomposed equations.
void decomposed_rhs(const CompartmentalModel& model, double t, std::span<const double> u, std::span<double> du);

/// Solution of the decomposed system over [t0, t1].
class PartitionTrajectory {
 public:
  PartitionTrajectory(std::shared_ptr<const CompartmentalModel> model, Trajectory traj);

  const CompartmentalModel& model() const noexcept { return *model_; }
  std::shared_ptr<const CompartmentalModel> model_ptr() const noexcept { return model_; }
  const Trajectory& trajectory() const noexcept { return traj_; }
  std::size_t size() const noexcept { return model_->size(); }
  double t0() const { return traj_.t0(); }
  double t_end() const { return traj_.t_end(); }
  const std::vector<double>& times() const noexcept { return traj_.times(); }

  DecomposedState state(double t) const;
  SubthroughflowSet subthroughflows(double t) const;
  SubsystemMatrices subsystem(double t, std::size_t k) const;

 private:
  std::shared_ptr<const CompartmentalModel> model_;
  Trajectory traj_;
};

PartitionTrajectory decompose(std::shared_ptr<const CompartmentalModel> model, double t0, double t1,
                              const PartitionConfig& config = {});

SubsystemMatrices subsystem_matrices(const SubthroughflowSet& s, std::size_t k);

}  // namespace compart

#endif
