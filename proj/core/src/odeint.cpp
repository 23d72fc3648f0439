#include "compart/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace compart {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525,
                 E7 = -1.0 / 40;

// Shampine's fourth-order continuous extension, rows = stages, cols = powers of s.
constexpr double P[7][4] = {
    {1.0, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0.0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0.0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0.0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0.0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

std::string describe_state(double t, std::span<const double> x) {
  std::ostringstream os;
  os << "t=" << t << ", state=[";
  for (std::size_t i = 0; i < x.size() && i < 12; ++i) os << (i ? ", " : "") << x[i];
  if (x.size() > 12) os << ", ...";
  os << "]";
  return os.str();
}

class Stepper {
 public:
  Stepper(const VectorField& f, std::size_t n, double atol) : f_(f), n_(n), atol_(atol), clamped_(n) {}

  void eval(double t, const double* x, double* dx) {
    for (std::size_t i = 0; i < n_; ++i) clamped_[i] = (x[i] < 0.0 && x[i] > -atol_) ? 0.0 : x[i];
    f_(t, std::span<const double>(clamped_.data(), n_), std::span<double>(dx, n_));
    for (std::size_t i = 0; i < n_; ++i)
      if (!std::isfinite(dx[i]))
        throw NumericalError("odeint", "non-finite derivative in component " + std::to_string(i) + " at " +
                                           describe_state(t, std::span<const double>(clamped_.data(), n_)));
  }

 private:
  const VectorField& f_;
  std::size_t n_;
  double atol_;
  std::vector<double> clamped_;
};

double rms_norm(const std::vector<double>& v, const std::vector<double>& scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] / scale[i]) * (v[i] / scale[i]);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

void Trajectory::push_initial(double t, std::span<const double> x) {
  times_.assign(1, t);
  states_.assign(x.begin(), x.end());
  coeffs_.clear();
}

void Trajectory::push_step(double t, std::span<const double> x, const double* coeffs) {
  times_.push_back(t);
  states_.insert(states_.end(), x.begin(), x.end());
  coeffs_.insert(coeffs_.end(), coeffs, coeffs + 4 * dim_);
}

void Trajectory::interpolate(double t, std::span<double> out) const {
  if (times_.empty()) throw ValidationError("odeint", "empty trajectory");
  const double span = t_end() - t0();
  const double slack = 1e-12 * std::max(1.0, std::abs(span));
  if (t < t0() - slack || t > t_end() + slack) {
    std::ostringstream os;
    os << "t=" << t << " outside trajectory span [" << t0() << ", " << t_end() << "]";
    throw ValidationError("odeint", os.str());
  }
  t = std::clamp(t, t0(), t_end());
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (times_[k] == t || k + 1 >= times_.size()) {
    auto row = state(k);
    std::copy(row.begin(), row.end(), out.begin());
    return;
  }
  const double h = times_[k + 1] - times_[k];
  const double s = (t - times_[k]) / h;
  const double s1 = s, s2 = s * s, s3 = s2 * s, s4 = s3 * s;
  const double* q = coeffs_.data() + k * 4 * dim_;
  auto row = state(k);
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* qi = q + 4 * i;
    out[i] = row[i] + h * (qi[0] * s1 + qi[1] * s2 + qi[2] * s3 + qi[3] * s4);
  }
}

Vector Trajectory::at(double t) const {
  Vector v(static_cast<Eigen::Index>(dim_));
  interpolate(t, std::span<double>(v.data(), dim_));
  return v;
}

Trajectory integrate(const VectorField& field, std::span<const double> x0, double t0, double t1,
                     const IntegratorConfig& cfg) {
  if (!(t1 > t0) || !std::isfinite(t0) || !std::isfinite(t1))
    throw ValidationError("odeint", "integration span must be finite with t1 > t0");
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw ValidationError("odeint", "tolerances must be positive");
  const std::size_t n = x0.size();
  Trajectory traj(n);
  traj.push_initial(t0, x0);
  if (n == 0) {
    std::vector<double> none;
    traj.push_step(t1, none, none.data());
    return traj;
  }

  Stepper st(field, n, cfg.atol);
  std::vector<double> y(x0.begin(), x0.end()), ynew(n), tmp(n), err(n), scale(n), coeffs(4 * n);
  std::vector<std::vector<double>> k(7, std::vector<double>(n));
  st.eval(t0, y.data(), k[0].data());

  const double max_step = std::min(cfg.max_step, t1 - t0);
  double h = cfg.first_step;
  if (h <= 0.0) {
    // Hairer-Wanner starting step heuristic.
    for (std::size_t i = 0; i < n; ++i) scale[i] = cfg.atol + cfg.rtol * std::abs(y[i]);
    double d0 = rms_norm(y, scale), d1 = rms_norm(k[0], scale);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, max_step);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k[0][i];
    st.eval(t0 + h0, tmp.data(), k[1].data());
    for (std::size_t i = 0; i < n; ++i) err[i] = k[1][i] - k[0][i];
    double d2 = rms_norm(err, scale) / h0;
    double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100.0 * h0, h1, max_step});
  }
  h = std::min(h, max_step);

  double t = t0;
  std::size_t steps = 0;
  bool last_rejected = false;
  while (t < t1) {
    if (++steps > cfg.max_steps)
      throw NumericalError("odeint", "maximum number of steps exceeded at " + describe_state(t, y));
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) throw NumericalError("odeint", "step size underflow at " + describe_state(t, y));
    bool final_step = false;
    if (t + h >= t1 || t + 1.0001 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * A21 * k[0][i];
    st.eval(t + C2 * h, tmp.data(), k[1].data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    st.eval(t + C3 * h, tmp.data(), k[2].data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    st.eval(t + C4 * h, tmp.data(), k[3].data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    st.eval(t + C5 * h, tmp.data(), k[4].data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    const double tn = final_step ? t1 : t + h;
    st.eval(tn, tmp.data(), k[5].data());
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    st.eval(tn, ynew.data(), k[6].data());

    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
      scale[i] = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
    }
    const double en = rms_norm(err, scale);

    if (en <= 1.0) {
      for (std::size_t i = 0; i < n; ++i)
        for (int p = 0; p < 4; ++p) {
          double q = 0.0;
          for (int s = 0; s < 7; ++s) q += k[s][i] * P[s][p];
          coeffs[4 * i + p] = q;
        }
      for (std::size_t i = 0; i < n; ++i)
        if (ynew[i] < 0.0 && ynew[i] > -cfg.atol) ynew[i] = 0.0;
      t = tn;
      traj.push_step(t, ynew, coeffs.data());
      y.swap(ynew);
      std::swap(k[0], k[6]);
      double factor = en == 0.0 ? 10.0 : std::min(10.0, 0.9 * std::pow(en, -0.2));
      if (last_rejected) factor = std::min(1.0, factor);
      h = std::min(h * factor, max_step);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      last_rejected = true;
    }
  }
  return traj;
}

Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double t1, const IntegratorConfig& cfg) {
  return integrate(field, std::span<const double>(x0.data(), static_cast<std::size_t>(x0.size())), t0, t1, cfg);
}

Trajectory fundamental_matrix(const std::function<Matrix(double)>& A, std::size_t n, double t0, double t1,
                              const IntegratorConfig& cfg) {
  const auto N = static_cast<Eigen::Index>(n);
  Matrix I = Matrix::Identity(N, N);
  VectorField f = [&](double t, std::span<const double> v, std::span<double> dv) {
    Eigen::Map<const Matrix> V(v.data(), N, N);
    Eigen::Map<Matrix> dV(dv.data(), N, N);
    dV.noalias() = A(t) * V;
  };
  return integrate(f, std::span<const double>(I.data(), n * n), t0, t1, cfg);
}

Matrix matrix_at(const Trajectory& traj, std::size_t rows, double t) {
  Vector v = traj.at(t);
  const auto r = static_cast<Eigen::Index>(rows);
  return Eigen::Map<const Matrix>(v.data(), r, v.size() / r);
}

}  // namespace compart
