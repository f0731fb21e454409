#include "mpp/estimation_control.hpp"

#include <cmath>
#include <complex>
#include <utility>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mpp/error.hpp"

namespace mpp {

namespace {

using cd = std::complex<double>;

struct PlaneRotation {
  double c;
  cd s;
};

// Rotation with [c s; -conj(s) c] * [f; g] = [r; 0].
PlaneRotation make_rotation(cd f, cd g) {
  if (g == cd(0.0)) return {1.0, cd(0.0)};
  if (f == cd(0.0)) return {0.0, std::conj(g) / std::abs(g)};
  const double norm = std::hypot(std::abs(f), std::abs(g));
  return {std::abs(f) / norm, (f / std::abs(f)) * std::conj(g) / norm};
}

void rotate(cd& x, cd& y, double c, cd s) {
  const cd xn = c * x + s * y;
  y = c * y - std::conj(s) * x;
  x = xn;
}

// Swaps the adjacent diagonal entries k, k+1 of the upper-triangular Schur
// factor T while keeping U T U^H invariant.
void swap_schur(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U, Eigen::Index k) {
  const Eigen::Index n = T.rows();
  const cd t11 = T(k, k);
  const cd t22 = T(k + 1, k + 1);
  const auto rot = make_rotation(T(k, k + 1), t22 - t11);
  for (Eigen::Index j = k + 2; j < n; ++j) rotate(T(k, j), T(k + 1, j), rot.c, rot.s);
  for (Eigen::Index i = 0; i < k; ++i)
    rotate(T(i, k), T(i, k + 1), rot.c, std::conj(rot.s));
  T(k, k) = t22;
  T(k + 1, k + 1) = t11;
  for (Eigen::Index i = 0; i < n; ++i)
    rotate(U(i, k), U(i, k + 1), rot.c, std::conj(rot.s));
}

}  // namespace

Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "solve_care: inconsistent sizes");
  }
  Eigen::LLT<Eigen::MatrixXd> R_llt(R);
  if (R_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "R must be positive definite");
  }

  Eigen::MatrixXd H(2 * n, 2 * n);
  H << A, -B * R_llt.solve(B.transpose()), -Q, -A.transpose();

  Eigen::ComplexSchur<Eigen::MatrixXd> schur(H);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::NotStabilizable, "Schur decomposition failed");
  }
  Eigen::MatrixXcd T = schur.matrixT();
  Eigen::MatrixXcd U = schur.matrixU();

  const double scale = std::max(1.0, H.lpNorm<Eigen::Infinity>());
  Eigen::Index stable_count = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const double re = T(i, i).real();
    if (std::abs(re) <= 1e-12 * scale) {
      throw Error(ErrorCode::NotStabilizable,
                  "Hamiltonian has eigenvalues on the imaginary axis");
    }
    if (re < 0.0) ++stable_count;
  }
  if (stable_count != n) {
    throw Error(ErrorCode::NotStabilizable,
                "stable invariant subspace has wrong dimension");
  }

  // Bubble the stable eigenvalues to the leading block.
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (Eigen::Index k = 0; k + 1 < 2 * n; ++k) {
      if (T(k, k).real() > 0.0 && T(k + 1, k + 1).real() < 0.0) {
        swap_schur(T, U, k);
        swapped = true;
      }
    }
  }

  const Eigen::MatrixXcd U1 = U.topLeftCorner(n, n);
  const Eigen::MatrixXcd U2 = U.bottomLeftCorner(n, n);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(U1);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::NotStabilizable, "stable subspace basis is singular");
  }
  // P = U2 U1^-1, i.e. U1^T P^T = U2^T.
  const Eigen::MatrixXcd Pc =
      U1.transpose().fullPivLu().solve(U2.transpose()).transpose();
  Eigen::MatrixXd P = Pc.real();
  P = 0.5 * (P + P.transpose()).eval();
  return P;
}

RegulatedSubsystem extract_subsystem(const LinearModel& model,
                                     const LQRConfig& cfg) {
  RegulatedSubsystem sub;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      sub.A(i, j) = model.A_c(cfg.state_indices[i], cfg.state_indices[j]);
    }
    sub.B(i) = model.B_c(cfg.state_indices[i], input_index::kElevator);
  }
  return sub;
}

RowVec4 lqr_gain(const LinearModel& model, const LQRConfig& cfg) {
  if (!(cfg.R > 0.0)) throw Error(ErrorCode::InvalidArgument, "LQR R must be > 0");
  const auto sub = extract_subsystem(model, cfg);
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = cfg.R;
  const Eigen::MatrixXd P = solve_care(sub.A, sub.B, cfg.Q, R);
  return (sub.B.transpose() * P) / cfg.R;
}

Vec4 regulated_states(const AircraftState& s, const LQRConfig& cfg) {
  const Vec6 full = s.to_vector();
  Vec4 out;
  for (int i = 0; i < 4; ++i) out(i) = full(cfg.state_indices[i]);
  return out;
}

ControlInput hf_control(const EKFState& ekf, const AircraftState& ref_state,
                        const ControlInput& ref_input, const RowVec4& K,
                        const LQRConfig& cfg) {
  const Vec4 err =
      regulated_states(ekf.estimate, cfg) - regulated_states(ref_state, cfg);
  return {ref_input.thrust, ref_input.elevator - K.dot(err)};
}

Mat6 default_process_noise() {
  Vec6 diag;
  diag << 1e-4, 1e-4, 1e-3, 1e-4, 1e-3, 1e-4;
  return diag.asDiagonal();
}

EKFState ekf_predict(const EKFState& ekf, const ControlInput& input, double dt,
                     const Mat6& process_noise, const AircraftParams& params) {
  if (dt < 0.0) throw Error(ErrorCode::InvalidArgument, "dt must be >= 0");
  if (dt == 0.0) return ekf;
  const auto J = linearize(ekf.estimate, input, params);
  const Mat6 F = (J.A * dt).exp();
  EKFState out;
  out.estimate = step_rk4(ekf.estimate, input, dt, params);
  out.covariance = F * ekf.covariance * F.transpose() + process_noise * dt;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

EKFState ekf_update(const EKFState& ekf, double meas_v, double meas_theta,
                    const SensorNoise& noise) {
  if (!(noise.sigma_v > 0.0) || !(noise.sigma_theta > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sensor sigmas must be positive");
  }
  Eigen::Matrix<double, 2, 6> H = Eigen::Matrix<double, 2, 6>::Zero();
  H(0, state_index::kV) = 1.0;
  H(1, state_index::kTheta) = 1.0;
  const Eigen::Matrix2d R =
      Eigen::Vector2d(noise.sigma_v * noise.sigma_v,
                      noise.sigma_theta * noise.sigma_theta)
          .asDiagonal();

  const Vec6 x = ekf.estimate.to_vector();
  const Eigen::Vector2d innovation(meas_v - x(state_index::kV),
                                   meas_theta - x(state_index::kTheta));
  const Mat6& P = ekf.covariance;
  const Eigen::Matrix2d S = H * P * H.transpose() + R;
  const Eigen::Matrix<double, 6, 2> K =
      S.llt().solve(H * P).transpose();  // P H' S^-1 with S, P symmetric
  const Mat6 IKH = Mat6::Identity() - K * H;

  EKFState out;
  out.estimate = AircraftState::from_vector(x + K * innovation);
  out.covariance = IKH * P * IKH.transpose() + K * R * K.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

}  // namespace mpp
