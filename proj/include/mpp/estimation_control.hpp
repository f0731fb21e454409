#pragma once

#include <array>

#include <Eigen/Core>

#include "mpp/flight_dynamics.hpp"

namespace mpp {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using RowVec4 = Eigen::RowVector4d;

/// Weights of the attitude/flight-path regulator. The regulated subsystem is
/// (v, theta, theta_dot, gamma) driven by the elevator.
struct LQRConfig {
  Mat4 Q = Eigen::Vector4d(1.0, 1.0, 0.0, 1000.0).asDiagonal();
  double R = 0.5;
  std::array<int, 4> state_indices = {state_index::kV, state_index::kTheta,
                                      state_index::kThetaDot,
                                      state_index::kGamma};
};

struct EKFState {
  AircraftState estimate;
  Mat6 covariance = Mat6::Zero();
};

struct SensorNoise {
  double sigma_v = 0.3;                       // m/s
  double sigma_theta = 0.5 * 3.14159265358979323846 / 180.0;  // rad
};

/// Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0, taken from the
/// stable invariant subspace of the Hamiltonian matrix (ordered Schur form).
/// Throws NotStabilizable when that subspace is not n-dimensional or the
/// subspace basis is singular.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Extracts the regulated 4-state / elevator subsystem from a 6-state model.
struct RegulatedSubsystem {
  Mat4 A;
  Vec4 B;
};
RegulatedSubsystem extract_subsystem(const LinearModel& model,
                                     const LQRConfig& cfg);

RowVec4 lqr_gain(const LinearModel& model, const LQRConfig& cfg);

Vec4 regulated_states(const AircraftState& s, const LQRConfig& cfg);

/// Elevator feedback around the reference; thrust passes through open-loop.
ControlInput hf_control(const EKFState& ekf, const AircraftState& ref_state,
                        const ControlInput& ref_input, const RowVec4& K,
                        const LQRConfig& cfg = {});

Mat6 default_process_noise();

EKFState ekf_predict(const EKFState& ekf, const ControlInput& input, double dt,
                     const Mat6& process_noise, const AircraftParams& params);

EKFState ekf_update(const EKFState& ekf, double meas_v, double meas_theta,
                    const SensorNoise& noise);

}  // namespace mpp
