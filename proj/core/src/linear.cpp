#include "compart/odeint.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>

namespace compart {

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr double kMaxEigenvectorCondition = 1e8;

/// e^{tau A} for one fixed A; the eigendecomposition is computed once.
class ExpCache {
 public:
  explicit ExpCache(const Matrix& A) : A_(A) {
    if (A.rows() == 0) return;
    Eigen::EigenSolver<Matrix> es(A);
    if (es.info() != Eigen::Success) return;
    CMatrix V = es.eigenvectors();
    Eigen::JacobiSVD<CMatrix> svd(V);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(cond <= kMaxEigenvectorCondition)) return;
    V_ = V;
    Vinv_ = V.inverse();
    lambda_ = es.eigenvalues();
    diagonal_ = true;
  }

  bool diagonalizable() const noexcept { return diagonal_; }

  Matrix at(double tau) const {
    if (A_.rows() == 0) return Matrix(0, 0);
    if (!diagonal_) return Matrix((A_ * tau).exp());
    CVector e = (lambda_ * tau).array().exp();
    return (V_ * e.asDiagonal() * Vinv_).real();
  }

 private:
  Matrix A_;
  CMatrix V_, Vinv_;
  CVector lambda_;
  bool diagonal_ = false;
};

bool well_conditioned(const Matrix& A) {
  if (A.rows() == 0) return false;
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible()) return false;
  Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1) > 1e-12 * sv(0);
}

}  // namespace

Matrix propagator(const Matrix& A, double tau) { return ExpCache(A).at(tau); }

LinearSolution linear_solution(const LinearSystem& sys, const Vector& x0, double t0, double t,
                               const IntegratorConfig& cfg) {
  const Matrix& A = sys.A;
  const Eigen::Index n = A.rows();
  if (A.cols() != n || x0.size() != n) throw ValidationError("odeint", "linear system dimensions do not match");
  ExpCache E(A);
  LinearSolution out;
  out.x0 = E.at(t - t0) * x0;
  if (t == t0) {
    out.X = Matrix::Zero(n, n);
    return out;
  }

  if (const Vector* z = std::get_if<Vector>(&sys.z)) {
    if (z->size() != n) throw ValidationError("odeint", "input vector has wrong length");
    if (well_conditioned(A)) {
      Matrix I = Matrix::Identity(n, n);
      out.X = A.fullPivLu().solve(E.at(t - t0) - I) * z->asDiagonal();
      return out;
    }
    out.X = scaled_substorage(A, t0, t) * z->asDiagonal();
    return out;
  }

  // Time-dependent input: integrate s -> e^{(t-s)A} Z(s) over [t0, t].
  const auto& zfun = std::get<std::function<Vector(double)>>(sys.z);
  VectorField f = [&](double s, std::span<const double>, std::span<double> dv) {
    Vector z = zfun(s);
    Eigen::Map<Matrix> dV(dv.data(), n, n);
    dV.noalias() = E.at(t - s) * z.asDiagonal();
  };
  Vector zero = Vector::Zero(n * n);
  IntegratorConfig qc = cfg;
  qc.rtol = std::min(cfg.rtol, 1e-10);
  qc.atol = std::min(cfg.atol, 1e-12);
  Trajectory q = integrate(f, zero, t0, t, qc);
  out.X = matrix_at(q, static_cast<std::size_t>(n), t);
  return out;
}

Matrix scaled_substorage(const Matrix& A, double t0, double t) {
  const Eigen::Index n = A.rows();
  if (t == t0) return Matrix::Zero(n, n);
  if (well_conditioned(A)) {
    Matrix I = Matrix::Identity(n, n);
    return A.fullPivLu().solve(ExpCache(A).at(t - t0) - I);
  }
  // Block exponential: exp([[A, I], [0, 0]] tau) holds the integral in its upper-right block.
  Matrix B = Matrix::Zero(2 * n, 2 * n);
  B.topLeftCorner(n, n) = A;
  B.topRightCorner(n, n) = Matrix::Identity(n, n);
  Matrix E = (B * (t - t0)).exp();
  return E.topRightCorner(n, n);
}

}  // namespace compart
