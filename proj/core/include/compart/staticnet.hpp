#ifndef COMPART_STATICNET_HPP
#define COMPART_STATICNET_HPP

#include "compart/model.hpp"
#include "compart/odeint.hpp"
#include "compart/pathflow.hpp"

#include <optional>
#include <vector>

namespace compart {

struct SteadyStateConfig {
  double t = 0.0;  // time at which inputs and flows are evaluated
  double tol = 1e-10;
  int max_iterations = 100;
  int max_halvings = 40;
  double fallback_horizon = 1e4;  // long-time integration budget when Newton stalls
  IntegratorConfig integrator;
};

/// Damped Newton with a finite-difference Jacobian; long-time integration
/// as fallback. Throws NumericalError if neither reaches the tolerance.
Vector find_steady_state(const CompartmentalModel& model, const Vector& guess, const SteadyStateConfig& config = {});

/// Steady-state network at x_ss. Column k of X and T belongs to input k.
struct StaticSolution {
  double t = 0.0;
  Vector x, z, y, tau;
  Matrix F;
  Matrix A;  // (F - T) X^{-1}
  Matrix X;  // -A^{-1} Z
  Matrix T;  // N Z
  Matrix N;  // (I - F T^{-1})^{-1}
  Matrix S;  // -A^{-1}
  Vector r;  // residence times
  Vector x0;  // initial subsystem, zero at steady state
  double s_rn_residual = 0.0;  // max |S - R N| / max |S|
  Matrix R() const { return r.asDiagonal(); }
};

StaticSolution static_partition(const CompartmentalModel& model, const Vector& x_ss, double t = 0.0);

/// Output-oriented duals of a static solution.
struct OutputOriented {
  Matrix N_bar;  // (I - F^T T^{-1})^{-1}
  Matrix S_bar;  // R N_bar
  Vector x_bar;  // S_bar y
  Matrix X_bar;  // S_bar Y
  Matrix T_bar;  // N_bar Y
  double storage_duality = 0.0;  // max |S X - X S_bar^T|
  double flow_duality = 0.0;     // max |N T - T N_bar^T|
};

OutputOriented output_oriented(const StaticSolution& s);

/// Static transient flow at one path node.
struct StaticNodeFlow {
  std::size_t position = 0;
  std::size_t compartment = 0;  // 1-based
  double inflow = 0.0;
  double storage = 0.0;
  std::optional<double> outflow;  // absent at the terminal node
};

/// Local input of a path at steady state: z_k for "0 -> k", otherwise the
/// static subflow from the head into the first node.
double static_local_input(const StaticSolution& s, const SubflowPath& path);

std::vector<StaticNodeFlow> static_transient(const StaticSolution& s, const SubflowPath& path,
                                             std::optional<double> local_input = std::nullopt);

struct StaticCumulative {
  double inflow = 0.0;
  double storage = 0.0;
  double outflow = 0.0;
  std::size_t visits = 0;
};

/// Static counterpart of cumulative_transient: sums the counted visits of the unrolled path.
StaticCumulative static_cumulative(const StaticSolution& s, const SubflowPath& path,
                                   std::optional<double> local_input = std::nullopt);

}  // namespace compart

#endif
