#pragma once

#include <Eigen/Core>

namespace mpp {

using Vec2 = Eigen::Vector2d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

/// Index of each longitudinal state inside a 6-vector.
namespace state_index {
inline constexpr int kX = 0;
inline constexpr int kZ = 1;
inline constexpr int kV = 2;
inline constexpr int kTheta = 3;
inline constexpr int kThetaDot = 4;
inline constexpr int kGamma = 5;
}  // namespace state_index

namespace input_index {
inline constexpr int kThrust = 0;
inline constexpr int kElevator = 1;
}  // namespace input_index

struct AircraftState {
  double x = 0.0;          // downrange (m)
  double z = 0.0;          // height (m)
  double v = 0.0;          // airspeed (m/s)
  double theta = 0.0;      // pitch (rad)
  double theta_dot = 0.0;  // pitch rate (rad/s)
  double gamma = 0.0;      // flight path angle (rad)

  Vec6 to_vector() const;
  static AircraftState from_vector(const Vec6& v);
  Vec2 position() const { return {x, z}; }

  bool operator==(const AircraftState&) const = default;
};

struct ControlInput {
  double thrust = 0.0;    // N
  double elevator = 0.0;  // rad

  Eigen::Vector2d to_vector() const { return {thrust, elevator}; }
  static ControlInput from_vector(const Eigen::Vector2d& u) {
    return {u(0), u(1)};
  }

  bool operator==(const ControlInput&) const = default;
};

/// Physical and aerodynamic constants of the airframe. Defaults describe a
/// small hobby RC aircraft.
struct AircraftParams {
  double m = 3.2;
  double I_yy = 0.17;
  double g = 9.81;
  double rho = 1.225;
  double S = 0.25;
  double c = 0.13;
  double C_L0 = 0.5;
  double C_Lalpha = 5.73;
  double C_D0 = 0.1;
  double K = 0.05;
  double C_M0 = 0.5;
  double C_Malpha = -8.02;
  double C_Malphadot = -0.46;
  double C_Mdelta_e = 0.2;
  // +1 reproduces the "- T sin(alpha) / (m v)" term of the flight-path-angle
  // equation as published; -1 gives the conventional point-mass sign.
  double thrust_gamma_sign = 1.0;

  void validate() const;
};

struct AeroCoefficients {
  double C_L;
  double C_D;
  double C_M;
};

AeroCoefficients aero_coefficients(double alpha, double alpha_dot,
                                   double elevator,
                                   const AircraftParams& params);

/// Time derivative (xdot, zdot, vdot, thetadot, thetaddot, gammadot).
/// Throws InvalidArgument if state.v <= 0.
Vec6 state_derivative(const AircraftState& state, const ControlInput& input,
                      const AircraftParams& params);

/// One classical Runge-Kutta step with the input held constant.
AircraftState step_rk4(const AircraftState& state, const ControlInput& input,
                       double dt, const AircraftParams& params);

struct TrimPoint {
  AircraftState state;
  ControlInput input;
};

/// Straight-and-level equilibrium at the requested airspeed.
TrimPoint find_trim(double v_target, const AircraftParams& params);

struct Jacobians {
  Mat6 A;
  Mat62 B;
};

/// Central finite-difference Jacobians of state_derivative. The perturbation
/// for component i is rel_eps * max(1, |value_i|).
Jacobians linearize(const AircraftState& state, const ControlInput& input,
                    const AircraftParams& params, double rel_eps = 1e-6);

struct DiscreteModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// Zero-order-hold discretization through the exponential of the augmented
/// block matrix [[A, B], [0, 0]] * dt.
DiscreteModel discretize_zoh(const Eigen::MatrixXd& A_c,
                             const Eigen::MatrixXd& B_c, double dt);

struct LinearModel {
  Mat6 A_c;
  Mat62 B_c;
  Mat6 A_d;
  Mat62 B_d;
  double dt = 0.0;
  AircraftState trim_state;
  ControlInput trim_input;
};

/// Trim, linearize and discretize in one call.
LinearModel make_linear_model(double v_trim, double dt,
                              const AircraftParams& params);

}  // namespace mpp
