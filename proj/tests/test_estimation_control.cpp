#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mpp/error.hpp"
#include "mpp/estimation_control.hpp"

using namespace mpp;
using Catch::Matchers::WithinAbs;

namespace {

const AircraftParams kParams{};

double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  return (A.transpose() * P + P * A - P * B * R.inverse() * B.transpose() * P + Q)
      .norm();
}

Eigen::MatrixXd scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m << v;
  return m;
}

}  // namespace

TEST_CASE("care scalar closed forms") {
  auto P = solve_care(scalar(-1), scalar(1), scalar(1), scalar(1));
  CHECK_THAT(P(0, 0), WithinAbs(std::sqrt(2.0) - 1.0, 1e-12));
  CHECK_THAT(P(0, 0), WithinAbs(0.414214, 1e-6));

  P = solve_care(scalar(0), scalar(1), scalar(1), scalar(1));
  CHECK_THAT(P(0, 0), WithinAbs(1.0, 1e-12));
}

TEST_CASE("care with zero state cost on a stable plant") {
  Eigen::MatrixXd A(2, 2);
  A << -1, 2, 0, -3;
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  const auto P = solve_care(A, B, Eigen::MatrixXd::Zero(2, 2), scalar(1));
  CHECK(P.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("care residual on random stabilizable systems") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + trial % 2;
    Eigen::MatrixXd A(n, n), B(n, m), Lq(n, n), Lr(m, m);
    for (int i = 0; i < n * n; ++i) A.data()[i] = N(rng);
    for (int i = 0; i < n * m; ++i) B.data()[i] = N(rng);
    for (int i = 0; i < n * n; ++i) Lq.data()[i] = N(rng);
    for (int i = 0; i < m * m; ++i) Lr.data()[i] = N(rng);
    const Eigen::MatrixXd Q = Lq * Lq.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd R = Lr * Lr.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m);
    const auto P = solve_care(A, B, Q, R);
    CHECK(care_residual(A, B, Q, R, P) < 1e-8 * (1 + P.norm()));
    CHECK((P - P.transpose()).norm() < 1e-10 * (1 + P.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    const Eigen::MatrixXd K = R.inverse() * B.transpose() * P;
    Eigen::EigenSolver<Eigen::MatrixXd> cl(A - B * K);
    CHECK(cl.eigenvalues().real().maxCoeff() < 0.0);
  }
}

TEST_CASE("care rejects an unstabilizable pair") {
  Eigen::MatrixXd A(2, 2);
  A << 1, 0, 0, -1;
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  try {
    solve_care(A, B, Eigen::MatrixXd::Identity(2, 2), scalar(1));
    FAIL("expected NotStabilizable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotStabilizable);
  }
}

TEST_CASE("lqr at trim is stabilizing") {
  const auto model = make_linear_model(12.0, 0.25, kParams);
  const LQRConfig cfg;
  const RowVec4 K = lqr_gain(model, cfg);
  const auto sub = extract_subsystem(model, cfg);
  Eigen::EigenSolver<Mat4> es(sub.A - sub.B * K);
  for (int i = 0; i < 4; ++i) CHECK(es.eigenvalues()(i).real() < 0.0);
}

TEST_CASE("lqr gain is invariant to common scaling of Q and R") {
  const auto model = make_linear_model(12.0, 0.25, kParams);
  LQRConfig cfg;
  const RowVec4 K1 = lqr_gain(model, cfg);
  cfg.Q *= 7.5;
  cfg.R *= 7.5;
  const RowVec4 K2 = lqr_gain(model, cfg);
  CHECK((K1 - K2).cwiseAbs().maxCoeff() < 1e-9 * (1 + K1.norm()));
}

TEST_CASE("lqr with zero weights on a stable plant has zero gain") {
  LinearModel model = make_linear_model(12.0, 0.25, kParams);
  LQRConfig cfg;
  const auto sub = extract_subsystem(model, cfg);
  Eigen::EigenSolver<Mat4> es(sub.A);
  // Short-period and phugoid must both be damped for this case to apply.
  REQUIRE(es.eigenvalues().real().maxCoeff() < 0.0);
  cfg.Q.setZero();
  CHECK(lqr_gain(model, cfg).norm() < 1e-10);
}

TEST_CASE("hf control") {
  const auto model = make_linear_model(12.0, 0.25, kParams);
  const LQRConfig cfg;
  const RowVec4 K = lqr_gain(model, cfg);
  const AircraftState ref = model.trim_state;
  const ControlInput ref_u = model.trim_input;

  EKFState ekf{ref, Mat6::Identity()};
  CHECK(hf_control(ekf, ref, ref_u, K, cfg) == ref_u);

  ekf.estimate.gamma += 0.01;
  const auto u = hf_control(ekf, ref, ref_u, K, cfg);
  CHECK(u.thrust == ref_u.thrust);
  const double delta = u.elevator - ref_u.elevator;
  CHECK(delta != 0.0);
  CHECK(std::signbit(delta) != std::signbit(K(3)));
  CHECK_THAT(delta, WithinAbs(-K(3) * 0.01, 1e-15));

  ekf.estimate.v += 1.0;
  ekf.estimate.x += 5.0;
  ekf.estimate.z -= 3.0;
  CHECK(hf_control(ekf, ref, ref_u, K, cfg).thrust == ref_u.thrust);
}

TEST_CASE("ekf predict edge cases") {
  const auto trim = find_trim(12.0, kParams);
  EKFState ekf{trim.state, Mat6::Zero()};
  const auto same = ekf_predict(ekf, trim.input, 0.0, default_process_noise(), kParams);
  CHECK(same.estimate == ekf.estimate);
  CHECK(same.covariance == ekf.covariance);

  EKFState e = ekf;
  for (int i = 0; i < 100; ++i) e = ekf_predict(e, trim.input, 0.01, Mat6::Zero(), kParams);
  CHECK(e.covariance.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ekf predict grows covariance from zero") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const auto trim = find_trim(12.0, kParams);
  for (int trial = 0; trial < 30; ++trial) {
    AircraftState s = trim.state;
    s.v += 2 * U(rng);
    s.theta += 0.1 * U(rng);
    s.gamma += 0.1 * U(rng);
    s.theta_dot += 0.3 * U(rng);
    ControlInput u{trim.input.thrust * (1 + 0.3 * U(rng)), trim.input.elevator + 0.1 * U(rng)};
    EKFState e{s, Mat6::Zero()};
    double prev = 0.0;
    for (int i = 0; i < 50; ++i) {
      e = ekf_predict(e, u, 0.01, default_process_noise(), kParams);
      e.estimate = s;  // hold the linearization point
      const double tr = e.covariance.trace();
      CHECK(tr >= prev - 1e-15);
      prev = tr;
    }
  }
}

TEST_CASE("ekf update limits") {
  const auto trim = find_trim(12.0, kParams);
  EKFState ekf{trim.state, 0.1 * Mat6::Identity()};

  const auto exact = ekf_update(ekf, 12.7, trim.state.theta + 0.03, {1e-9, 1e-9});
  CHECK_THAT(exact.estimate.v, WithinAbs(12.7, 1e-6));
  CHECK_THAT(exact.estimate.theta, WithinAbs(trim.state.theta + 0.03, 1e-6));

  const auto same = ekf_update(ekf, trim.state.v, trim.state.theta, {});
  CHECK((same.estimate.to_vector() - ekf.estimate.to_vector()).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(ekf_update(ekf, 12, 0, {0.0, 0.1}), Error);
}

TEST_CASE("ekf update never inflates measured variances") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N(0.0, 1.0);
  const auto trim = find_trim(12.0, kParams);
  for (int trial = 0; trial < 100; ++trial) {
    Mat6 L;
    for (int i = 0; i < 36; ++i) L.data()[i] = N(rng);
    EKFState ekf{trim.state, L * L.transpose() + 1e-3 * Mat6::Identity()};
    const auto post = ekf_update(ekf, 12 + N(rng), trim.state.theta + 0.1 * N(rng), {});
    CHECK(post.covariance(2, 2) <= ekf.covariance(2, 2) + 1e-12);
    CHECK(post.covariance(3, 3) <= ekf.covariance(3, 3) + 1e-12);
  }
}

TEST_CASE("ekf covariance stays symmetric psd over long runs") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> N(0.0, 1.0);
  const auto trim = find_trim(12.0, kParams);
  EKFState ekf{trim.state, 0.01 * Mat6::Identity()};
  double min_eig = 1.0;
  double max_asym = 0.0;
  for (int k = 0; k < 10000; ++k) {
    ekf = ekf_predict(ekf, trim.input, 0.01, default_process_noise(), kParams);
    ekf = ekf_update(ekf, 12.0 + 0.3 * N(rng), trim.state.theta + 0.01 * N(rng), {});
    if (k % 100 == 0) {
      Eigen::SelfAdjointEigenSolver<Mat6> es(ekf.covariance);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
      max_asym = std::max(max_asym,
                          (ekf.covariance - ekf.covariance.transpose()).cwiseAbs().maxCoeff());
    }
  }
  CHECK(min_eig >= -1e-10);
  CHECK(max_asym <= 1e-12);
}

TEST_CASE("ekf converges with noise-free measurements") {
  const auto trim = find_trim(12.0, kParams);
  const SensorNoise noise;
  const double dt = 0.01;
  const Vec4 offsets[] = {{0.5, 0.02, 0.05, -0.02},
                          {-1.0, -0.03, 0.0, 0.03},
                          {0.2, 0.05, -0.1, 0.0}};
  for (const Vec4& off : offsets) {
    AircraftState truth = trim.state;
    EKFState ekf{trim.state, Mat6::Zero()};
    ekf.estimate.v += off(0);
    ekf.estimate.theta += off(1);
    ekf.estimate.theta_dot += off(2);
    ekf.estimate.gamma += off(3);
    ekf.covariance.diagonal() << 0.01, 0.01, 1.0, 0.01, 0.01, 0.01;
    const LQRConfig cfg;
    auto err = [&] {
      return (regulated_states(ekf.estimate, cfg) - regulated_states(truth, cfg)).norm();
    };
    const double initial = err();
    for (int k = 0; k < 1000; ++k) {
      truth = step_rk4(truth, trim.input, dt, kParams);
      ekf = ekf_predict(ekf, trim.input, dt, default_process_noise(), kParams);
      ekf = ekf_update(ekf, truth.v, truth.theta, noise);
    }
    CHECK(err() < 0.01 * initial);
  }
}
