#include "mpp/flight_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mpp/error.hpp"

namespace mpp {

Vec6 AircraftState::to_vector() const {
  Vec6 out;
  out << x, z, v, theta, theta_dot, gamma;
  return out;
}

AircraftState AircraftState::from_vector(const Vec6& s) {
  return {s(0), s(1), s(2), s(3), s(4), s(5)};
}

void AircraftParams::validate() const {
  if (!(m > 0.0) || !(I_yy > 0.0) || !(rho > 0.0) || !(S > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "aircraft mass, inertia, air density and wing area must be "
                "positive");
  }
  for (double value : {m, I_yy, g, rho, S, c, C_L0, C_Lalpha, C_D0, K, C_M0,
                       C_Malpha, C_Malphadot, C_Mdelta_e}) {
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::InvalidArgument,
                  "aircraft parameters must be finite");
    }
  }
  if (thrust_gamma_sign != 1.0 && thrust_gamma_sign != -1.0) {
    throw Error(ErrorCode::InvalidArgument, "thrust_gamma_sign must be +1 or -1");
  }
}

AeroCoefficients aero_coefficients(double alpha, double alpha_dot,
                                   double elevator,
                                   const AircraftParams& p) {
  const double C_L = p.C_L0 + p.C_Lalpha * alpha;
  const double C_D = p.C_D0 + p.K * C_L * C_L;
  const double C_M = p.C_M0 + p.C_Malpha * alpha + p.C_Malphadot * alpha_dot +
                     p.C_Mdelta_e * elevator;
  return {C_L, C_D, C_M};
}

Vec6 state_derivative(const AircraftState& s, const ControlInput& u,
                      const AircraftParams& p) {
  if (!(s.v > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "airspeed must be positive to evaluate dynamics, got " +
                    std::to_string(s.v));
  }
  const double alpha = s.theta - s.gamma;
  const double qbar_s = 0.5 * p.rho * s.v * s.v * p.S;
  const double sin_g = std::sin(s.gamma);
  const double cos_g = std::cos(s.gamma);
  const double sin_a = std::sin(alpha);
  const double cos_a = std::cos(alpha);

  // Forces do not involve the pitching moment, so gamma_dot is resolved first
  // and then feeds alpha_dot into C_M.
  const auto force_coeffs = aero_coefficients(alpha, 0.0, 0.0, p);
  const double lift = qbar_s * force_coeffs.C_L;
  const double drag = qbar_s * force_coeffs.C_D;

  const double v_dot = -drag / p.m - p.g * sin_g + u.thrust / p.m * cos_a;
  const double gamma_dot = lift / (p.m * s.v) - p.g / s.v * cos_g -
                           p.thrust_gamma_sign * u.thrust / (p.m * s.v) * sin_a;
  const double alpha_dot = s.theta_dot - gamma_dot;
  const double C_M = aero_coefficients(alpha, alpha_dot, u.elevator, p).C_M;
  const double theta_ddot = qbar_s * p.c * C_M / p.I_yy;

  Vec6 d;
  d << s.v * cos_g, s.v * sin_g, v_dot, s.theta_dot, theta_ddot, gamma_dot;
  return d;
}

AircraftState step_rk4(const AircraftState& state, const ControlInput& input,
                       double dt, const AircraftParams& params) {
  if (dt < 0.0) throw Error(ErrorCode::InvalidArgument, "dt must be >= 0");
  if (dt == 0.0) return state;
  const Vec6 y = state.to_vector();
  auto f = [&](const Vec6& s) {
    return state_derivative(AircraftState::from_vector(s), input, params);
  };
  const Vec6 k1 = f(y);
  const Vec6 k2 = f(y + 0.5 * dt * k1);
  const Vec6 k3 = f(y + 0.5 * dt * k2);
  const Vec6 k4 = f(y + dt * k3);
  return AircraftState::from_vector(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

namespace {

Eigen::Vector3d trim_residual(double v, const Eigen::Vector3d& unknowns,
                              const AircraftParams& p) {
  AircraftState s{0.0, 0.0, v, unknowns(0), 0.0, 0.0};
  ControlInput u{unknowns(1), unknowns(2)};
  const Vec6 d = state_derivative(s, u, p);
  return {d(state_index::kV), d(state_index::kGamma),
          d(state_index::kThetaDot)};
}

}  // namespace

TrimPoint find_trim(double v_target, const AircraftParams& params) {
  if (!(v_target > 0.0) || !std::isfinite(v_target)) {
    throw Error(ErrorCode::NoTrim, "trim airspeed must be positive");
  }
  params.validate();

  Eigen::Vector3d w(0.0, params.m * params.g * params.C_D0 / params.C_L0, 0.0);
  Eigen::Vector3d r = trim_residual(v_target, w, params);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    if (r.norm() < 1e-12) {
      converged = true;
      break;
    }
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(w(j)));
      Eigen::Vector3d wp = w, wm = w;
      wp(j) += h;
      wm(j) -= h;
      J.col(j) = (trim_residual(v_target, wp, params) -
                  trim_residual(v_target, wm, params)) /
                 (2.0 * h);
    }
    const Eigen::Vector3d step = J.fullPivLu().solve(-r);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::Vector3d trial = w + lambda * step;
      const Eigen::Vector3d r_trial = trim_residual(v_target, trial, params);
      if (r_trial.norm() < r.norm() || r_trial.norm() < 1e-12) {
        w = trial;
        r = r_trial;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      converged = r.norm() < 1e-10;
      break;
    }
  }
  if (!converged && r.norm() < 1e-10) converged = true;
  if (!converged) {
    throw Error(ErrorCode::NoTrim, "Newton iteration did not converge at v = " +
                                       std::to_string(v_target));
  }
  if (w(1) < 0.0) {
    throw Error(ErrorCode::NoTrim, "trim requires negative thrust");
  }
  return {AircraftState{0.0, 0.0, v_target, w(0), 0.0, 0.0},
          ControlInput{w(1), w(2)}};
}

Jacobians linearize(const AircraftState& state, const ControlInput& input,
                    const AircraftParams& params, double rel_eps) {
  Jacobians J;
  const Vec6 x = state.to_vector();
  const Eigen::Vector2d u = input.to_vector();
  for (int j = 0; j < 6; ++j) {
    const double h = rel_eps * std::max(1.0, std::abs(x(j)));
    Vec6 xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.A.col(j) = (state_derivative(AircraftState::from_vector(xp), input, params) -
                  state_derivative(AircraftState::from_vector(xm), input, params)) /
                 (2.0 * h);
  }
  for (int j = 0; j < 2; ++j) {
    const double h = rel_eps * std::max(1.0, std::abs(u(j)));
    Eigen::Vector2d up = u, um = u;
    up(j) += h;
    um(j) -= h;
    J.B.col(j) = (state_derivative(state, ControlInput::from_vector(up), params) -
                  state_derivative(state, ControlInput::from_vector(um), params)) /
                 (2.0 * h);
  }
  return J;
}

DiscreteModel discretize_zoh(const Eigen::MatrixXd& A_c,
                             const Eigen::MatrixXd& B_c, double dt) {
  const Eigen::Index n = A_c.rows();
  const Eigen::Index m = B_c.cols();
  if (A_c.cols() != n || B_c.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "discretize_zoh: A must be n x n and B n x m");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A_c * dt;
  M.topRightCorner(n, m) = B_c * dt;
  const Eigen::MatrixXd E = M.exp();
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

LinearModel make_linear_model(double v_trim, double dt,
                              const AircraftParams& params) {
  const auto trim = find_trim(v_trim, params);
  const auto J = linearize(trim.state, trim.input, params);
  const auto D = discretize_zoh(J.A, J.B, dt);
  LinearModel model;
  model.A_c = J.A;
  model.B_c = J.B;
  model.A_d = D.A;
  model.B_d = D.B;
  model.dt = dt;
  model.trim_state = trim.state;
  model.trim_input = trim.input;
  return model;
}

}  // namespace mpp
