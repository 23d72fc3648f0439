#ifndef COMPART_ODEINT_HPP
#define COMPART_ODEINT_HPP

#include "compart/common.hpp"

#include <functional>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace compart {

struct IntegratorConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  double first_step = 0.0;  // 0 selects automatically
  std::size_t max_steps = 2'000'000;
};

/// dxdt = f(t, x). Both spans have the state dimension.
using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> dxdt)>;

/// Accepted steps of a Dormand-Prince 5(4) run with its continuous extension.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::size_t dim) : dim_(dim) {}

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  double t0() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  std::span<const double> state(std::size_t k) const { return {states_.data() + k * dim_, dim_}; }

  /// Dense output at any t in [t0, t_end]; exact at stored times.
  void interpolate(double t, std::span<double> out) const;
  Vector at(double t) const;

  // Used by the integrator.
  void push_initial(double t, std::span<const double> x);
  void push_step(double t, std::span<const double> x, const double* coeffs);

 private:
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;
  // Per step k (from times_[k] to times_[k+1]): 4*dim coefficients Q such
  // that x(t_k + s*h) = x_k + h * sum_p Q_p s^(p+1).
  std::vector<double> coeffs_;
};

/// Adaptive explicit Runge-Kutta (Dormand-Prince 5(4)) on [t0, t1], t1 > t0.
/// Components in (-atol, 0) are clamped to 0 before every field evaluation.
/// Throws NumericalError on step-size underflow or non-finite derivatives.
Trajectory integrate(const VectorField& field, std::span<const double> x0, double t0, double t1,
                     const IntegratorConfig& config = {});
Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double t1,
                     const IntegratorConfig& config = {});

/// V' = A(t) V, V(t0) = I. States hold vec(V) column-major.
Trajectory fundamental_matrix(const std::function<Matrix(double)>& A, std::size_t n, double t0, double t1,
                              const IntegratorConfig& config = {});
/// Reads V(t) from a fundamental_matrix trajectory.
Matrix matrix_at(const Trajectory& traj, std::size_t rows, double t);

/// Linear constant-coefficient system X' = Z(t) + A X.
struct LinearSystem {
  Matrix A;
  /// Constant input vector (diagonal of Z) or a time-dependent one.
  std::variant<Vector, std::function<Vector(double)>> z;
};

struct LinearSolution {
  Matrix X;   // X(t), X(t0) = 0
  Vector x0;  // e^{(t-t0)A} x0
};

/// exp(tau * A): eigendecomposition when the eigenvector matrix is well
/// conditioned (cond <= 1e8), scaling-and-squaring otherwise.
Matrix propagator(const Matrix& A, double tau);

LinearSolution linear_solution(const LinearSystem& sys, const Vector& x0, double t0, double t,
                               const IntegratorConfig& config = {});

/// S(t) = integral over [t0, t] of e^{(t-s)A} ds.
Matrix scaled_substorage(const Matrix& A, double t0, double t);

}  // namespace compart

#endif
