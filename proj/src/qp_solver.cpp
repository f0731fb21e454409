#include "mpp/qp_solver.hpp"

#include <ostream>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mpp/error.hpp"

namespace mpp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(QPStatus status) {
  switch (status) {
    case QPStatus::Optimal: return "Optimal";
    case QPStatus::Infeasible: return "Infeasible";
    case QPStatus::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

void QPProblem::validate() const {
  const Index N = Qbar.rows();
  if (Qbar.cols() != N || Abar.cols() != N || bbar.size() != Abar.rows() ||
      Gbar.cols() != N || hbar.size() != Gbar.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "QP matrices have inconsistent sizes");
  }
  if ((Qbar - Qbar.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Qbar.norm())) {
    throw Error(ErrorCode::InvalidArgument, "Q must be symmetric");
  }
}

namespace {

// Inequality-only QP on the reduced variable: min 1/2 z'Pz + c'z, Gz <= h.
struct DenseOps {
  const MatrixXd& P;
  const VectorXd& c_;
  const MatrixXd& G_;
  const VectorXd& h_;
  Eigen::LLT<MatrixXd> llt;
  MatrixXd K;

  Index n() const { return P.rows(); }
  Index m() const { return G_.rows(); }
  const VectorXd& h() const { return h_; }
  const VectorXd& c() const { return c_; }
  VectorXd mulP(const VectorXd& z) const { return P * z; }
  VectorXd mulG(const VectorXd& z) const { return G_ * z; }
  VectorXd mulGt(const VectorXd& l) const { return G_.transpose() * l; }

  bool factor(const VectorXd& w) {
    const MatrixXd Gs = w.cwiseSqrt().asDiagonal() * G_;
    K = P;
    K.noalias() += Gs.transpose() * Gs;
    double shift = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      llt.compute(K);
      if (llt.info() == Eigen::Success) return true;
      shift = shift == 0.0 ? 1e-12 * (1.0 + K.diagonal().cwiseAbs().maxCoeff()) : shift * 100;
      K.diagonal().array() += shift;
    }
    return false;
  }
  VectorXd solve(const VectorXd& r) const { return llt.solve(r); }
};

// Elastic problem over (y, t): min 1't  s.t.  G0 y - t <= h0,  -t <= 0.
struct ElasticOps {
  const MatrixXd& G0;
  const VectorXd& h0;
  double reg;
  VectorXd h_;
  VectorXd c_;
  VectorXd w1, D;
  Eigen::LLT<MatrixXd> llt;

  ElasticOps(const MatrixXd& G, const VectorXd& h, double regularization)
      : G0(G), h0(h), reg(regularization) {
    const Index m0 = G0.rows();
    h_ = VectorXd::Zero(2 * m0);
    h_.head(m0) = h0;
    c_ = VectorXd::Zero(G0.cols() + m0);
    c_.tail(m0).setOnes();
  }

  Index n0() const { return G0.cols(); }
  Index m0() const { return G0.rows(); }
  Index n() const { return n0() + m0(); }
  Index m() const { return 2 * m0(); }
  const VectorXd& h() const { return h_; }
  const VectorXd& c() const { return c_; }
  VectorXd mulP(const VectorXd& z) const { return reg * z; }
  VectorXd mulG(const VectorXd& z) const {
    VectorXd out(m());
    out.head(m0()) = G0 * z.head(n0()) - z.tail(m0());
    out.tail(m0()) = -z.tail(m0());
    return out;
  }
  VectorXd mulGt(const VectorXd& l) const {
    VectorXd out(n());
    out.head(n0()) = G0.transpose() * l.head(m0());
    out.tail(m0()) = -l.head(m0()) - l.tail(m0());
    return out;
  }
  bool factor(const VectorXd& w) {
    w1 = w.head(m0());
    D = w1 + w.tail(m0());
    D.array() += reg;
    const VectorXd w_eff = w1.array() - w1.array().square() / D.array();
    const MatrixXd Gs = w_eff.cwiseMax(0.0).cwiseSqrt().asDiagonal() * G0;
    MatrixXd K = MatrixXd::Identity(n0(), n0()) * reg;
    K.noalias() += Gs.transpose() * Gs;
    llt.compute(K);
    return llt.info() == Eigen::Success;
  }
  VectorXd solve(const VectorXd& r) const {
    const VectorXd ry = r.head(n0());
    const VectorXd rt = r.tail(m0());
    VectorXd out(n());
    out.head(n0()) = llt.solve(ry + G0.transpose() * (w1.cwiseQuotient(D).cwiseProduct(rt)));
    out.tail(m0()) = (rt + w1.cwiseProduct(G0 * out.head(n0()))).cwiseQuotient(D);
    return out;
  }
};

enum class IpmState { Converged, Stalled, MaxIterations };

struct IpmIterate {
  VectorXd z, s, lam;
  int iterations = 0;
  IpmState state = IpmState::MaxIterations;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

// Mehrotra predictor-corrector. `stall_check` is invoked once the primal
// residual stops improving; returning true aborts with state Stalled,
// returning false lets the iteration continue without further checks.
template <class Ops, class StallCheck>
IpmIterate mehrotra(Ops& ops, double tol, int max_iters, StallCheck&& stall_check) {
  const Index n = ops.n();
  const Index m = ops.m();
  IpmIterate it;

  if (m == 0) {
    it.s.resize(0);
    it.lam.resize(0);
    if (!ops.factor(VectorXd::Zero(0))) {
      it.state = IpmState::Stalled;
      it.z = VectorXd::Zero(n);
      return it;
    }
    it.z = ops.solve(-ops.c());
    it.state = IpmState::Converged;
    return it;
  }

  const VectorXd& h = ops.h();
  const VectorXd& c = ops.c();
  const double h_scale = 1.0 + h.lpNorm<Eigen::Infinity>();
  const double c_scale = 1.0 + c.lpNorm<Eigen::Infinity>();

  // Least-squares start followed by the usual positivity shifts.
  if (!ops.factor(VectorXd::Ones(m))) {
    it.state = IpmState::Stalled;
    it.z = VectorXd::Zero(n);
    return it;
  }
  VectorXd z = ops.solve(-c + ops.mulGt(h));
  VectorXd s = h - ops.mulG(z);
  VectorXd lam = -s;
  s.array() += std::max(0.0, -1.5 * s.minCoeff());
  lam.array() += std::max(0.0, -1.5 * lam.minCoeff());
  if (s.dot(lam) <= 0.0) {
    s.array() += 1.0;
    lam.array() += 1.0;
  }
  const double sl = s.dot(lam);
  s.array() += 0.5 * sl / lam.sum();
  lam.array() += 0.5 * sl / s.sum();

  std::vector<double> pres_history;
  bool stall_checked = false;

  for (int iter = 0; iter < max_iters; ++iter) {
    const VectorXd Gz = ops.mulG(z);
    const VectorXd r_d = ops.mulP(z) + c + ops.mulGt(lam);
    const VectorXd r_p = Gz + s - h;
    const double mu = s.dot(lam) / static_cast<double>(m);
    const double pres = r_p.lpNorm<Eigen::Infinity>() / h_scale;
    const double dres = r_d.lpNorm<Eigen::Infinity>() / c_scale;
    pres_history.push_back(pres);
    it.iterations = iter;

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(mu)) {
      it.state = IpmState::Stalled;
      break;
    }
    if (pres <= tol && dres <= tol && mu <= tol) {
      it.state = IpmState::Converged;
      break;
    }
    const std::size_t k = pres_history.size();
    const bool slow = k > 6 && pres > tol && pres > 0.5 * pres_history[k - 6];
    const bool blown = lam.lpNorm<Eigen::Infinity>() > 1e12;
    if ((slow || blown) && !stall_checked) {
      stall_checked = true;
      if (stall_check()) {
        it.state = IpmState::Stalled;
        break;
      }
    }

    const VectorXd w = lam.cwiseQuotient(s);
    if (!ops.factor(w)) {
      it.state = IpmState::Stalled;
      break;
    }
    auto newton = [&](const VectorXd& r_c, VectorXd& dz, VectorXd& ds, VectorXd& dl) {
      const VectorXd t = (lam.cwiseProduct(r_p) - r_c).cwiseQuotient(s);
      dz = ops.solve(-r_d - ops.mulGt(t));
      const VectorXd Gdz = ops.mulG(dz);
      dl = w.cwiseProduct(Gdz) + t;
      ds = -r_p - Gdz;
    };

    VectorXd dz_a, ds_a, dl_a;
    newton(s.cwiseProduct(lam), dz_a, ds_a, dl_a);
    const double a_aff = std::min({1.0, max_step(s, ds_a), max_step(lam, dl_a)});
    const double mu_aff =
        (s + a_aff * ds_a).dot(lam + a_aff * dl_a) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    VectorXd dz, ds, dl;
    const VectorXd r_c = s.cwiseProduct(lam) + ds_a.cwiseProduct(dl_a) -
                         VectorXd::Constant(m, sigma * mu);
    newton(r_c, dz, ds, dl);
    const double a = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lam, dl)));
    if (!(a > 1e-14)) {
      if (!stall_checked) {
        stall_checked = true;
        if (stall_check()) {
          it.state = IpmState::Stalled;
          break;
        }
      }
    }
    z += a * dz;
    s += a * ds;
    lam += a * dl;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
    it.iterations = iter + 1;
  }
  it.z = std::move(z);
  it.s = std::move(s);
  it.lam = std::move(lam);
  return it;
}

double elastic_optimum(const ReducedQP& red, const VectorXd& h_red,
                       const QPSolverOptions& options) {
  if (h_red.size() == 0) return 0.0;
  ElasticOps ops(red.G, h_red, options.regularization);
  // The elastic problem is always feasible and bounded; give it room.
  auto res = mehrotra(ops, options.tol, std::max(100, 2 * options.max_iters),
                      [] { return false; });
  const VectorXd y = res.z.head(red.G.cols());
  return (red.G * y - h_red).cwiseMax(0.0).sum();
}

}  // namespace

ReducedQP reduce_qp(const QPProblem& problem, double regularization) {
  problem.validate();
  const Index N = problem.num_variables();
  const Index me = problem.Abar.rows();
  ReducedQP red;

  if (me == 0) {
    red.Z = MatrixXd::Identity(N, N);
    red.x_p = VectorXd::Zero(N);
    red.Q1 = MatrixXd::Zero(N, 0);
    red.R = MatrixXd::Zero(0, 0);
    red.perm = Eigen::VectorXi::Zero(0);
  } else {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(problem.Abar.transpose());
    qr.setThreshold(1e-12);
    red.rank = qr.rank();
    if (red.rank < me) {
      throw Error(ErrorCode::RankDeficient, "equality matrix lacks full row rank");
    }
    const MatrixXd Qfull = qr.householderQ();
    red.Q1 = Qfull.leftCols(me);
    red.Z = Qfull.rightCols(N - me);
    red.R = qr.matrixR().topLeftCorner(me, me).triangularView<Eigen::Upper>();
    red.perm = qr.colsPermutation().indices();
    // A' Perm = Q1 R  =>  A = Perm R' Q1', and Q1' x = R^-T Perm' b.
    VectorXd pb(me);
    for (Index i = 0; i < me; ++i) pb(i) = problem.bbar(red.perm(i));
    const VectorXd y = red.R.transpose().triangularView<Eigen::Lower>().solve(pb);
    red.x_p = red.Q1 * y;
  }
  MatrixXd H = 2.0 * problem.Qbar;
  H.diagonal().array() += 2.0 * regularization;
  const MatrixXd HZ = H * red.Z;
  red.P = red.Z.transpose() * HZ;
  red.P = 0.5 * (red.P + red.P.transpose()).eval();
  red.c = HZ.transpose() * red.x_p;
  red.G = problem.Gbar * red.Z;
  red.Gx_p = problem.Gbar * red.x_p;
  return red;
}

double phase1_violation(const QPProblem& problem, const QPSolverOptions& options,
                        const ReducedQP* reduced) {
  ReducedQP local;
  if (!reduced) {
    local = reduce_qp(problem, options.regularization);
    reduced = &local;
  }
  return elastic_optimum(*reduced, problem.hbar - reduced->Gx_p, options);
}

QPSolution solve_qp(const QPProblem& problem, const QPSolverOptions& options,
                    const ReducedQP* reduced) {
  ReducedQP local;
  if (!reduced) {
    local = reduce_qp(problem, options.regularization);
    reduced = &local;
  } else if (reduced->G.rows() != problem.Gbar.rows() ||
             reduced->Z.rows() != problem.num_variables()) {
    throw Error(ErrorCode::DimensionMismatch, "cached reduction does not match problem");
  }
  const ReducedQP& red = *reduced;
  const VectorXd h_red = problem.hbar - red.Gx_p;

  QPSolution sol;
  double violation = -1.0;
  auto certify = [&] {
    violation = elastic_optimum(red, h_red, options);
    return violation > options.infeasibility_tol;
  };

  DenseOps ops{red.P, red.c, red.G, h_red, {}, {}};
  const auto res = mehrotra(ops, options.tol, options.max_iters, certify);
  sol.iterations = res.iterations;

  if (res.state == IpmState::Converged) {
    sol.status = QPStatus::Optimal;
  } else if (res.state == IpmState::Stalled && violation > options.infeasibility_tol) {
    sol.status = QPStatus::Infeasible;
  } else {
    if (violation < 0.0) violation = elastic_optimum(red, h_red, options);
    sol.status = violation > options.infeasibility_tol ? QPStatus::Infeasible
                                                        : QPStatus::MaxIterations;
  }
  sol.phase1_violation = violation;

  sol.xbar = red.x_p + red.Z * res.z;
  sol.cost = sol.xbar.dot(problem.Qbar * sol.xbar);
  sol.ineq_multipliers = res.lam;

  const Index me = problem.Abar.rows();
  if (me > 0) {
    // Least-squares equality multipliers from A' nu = -(2Qx + G'mu).
    VectorXd r = -2.0 * problem.Qbar * sol.xbar;
    if (res.lam.size() > 0) r -= problem.Gbar.transpose() * res.lam;
    const VectorXd q = red.R.triangularView<Eigen::Upper>().solve(red.Q1.transpose() * r);
    sol.eq_multipliers.resize(me);
    for (Index i = 0; i < me; ++i) sol.eq_multipliers(red.perm(i)) = q(i);
  }
  return sol;
}

void write_qp(std::ostream& out, const QPProblem& qp) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  out << "# N " << qp.Qbar.rows() << " equalities " << qp.Abar.rows() << " inequalities "
      << qp.Gbar.rows() << " horizon " << qp.n << "\n";
  out << "# Q\n" << qp.Qbar.format(fmt) << "\n";
  out << "# A\n" << qp.Abar.format(fmt) << "\n";
  out << "# b\n" << qp.bbar.transpose().format(fmt) << "\n";
  out << "# G\n" << qp.Gbar.format(fmt) << "\n";
  out << "# h\n" << qp.hbar.transpose().format(fmt) << "\n";
}

}  // namespace mpp
