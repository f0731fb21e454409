#include "mpp/qp_trajectory.hpp"

#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "mpp/error.hpp"

namespace mpp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kCostTieTol = 1e-9;
}  // namespace

Eigen::Matrix2d CostWeights::control_penalty() const {
  if (!thrust_heavier) return C_ctrl;
  Eigen::Matrix2d swapped;
  swapped << C_ctrl(1, 1), C_ctrl(1, 0), C_ctrl(0, 1), C_ctrl(0, 0);
  return swapped;
}

TransitionRows transition_rows(const MatrixXd& A_d, const MatrixXd& B_d) {
  const Index n = A_d.rows();
  return {A_d, B_d, -MatrixXd::Identity(n, n)};
}

TransitionRows apply_rotational_algebraic(const TransitionRows& rows, const MatrixXd& A_d,
                                          const MatrixXd& B_d,
                                          const std::vector<int>& indices) {
  const Index n = A_d.rows();
  if (A_d.cols() != n || B_d.rows() != n || rows.current.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "transition rows do not match A and B");
  }
  const auto k = static_cast<Index>(indices.size());
  MatrixXd sub(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      sub(i, j) = (i == j ? 1.0 : 0.0) - A_d(indices[i], indices[j]);
    }
  }
  if (k > 0) {
    Eigen::JacobiSVD<MatrixXd> svd(sub);
    const auto& sv = svd.singularValues();
    if (!(sv(k - 1) > 1e-10 * std::max(1.0, sv(0)))) {
      throw Error(ErrorCode::SingularSteadyState,
                  "(I - A) is singular on the rotational sub-block");
    }
  }
  TransitionRows out = rows;
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (int r : indices) {
    out.current.row(r).setZero();
    out.input.row(r) = B_d.row(r);
    out.next.row(r) = -(I.row(r) - A_d.row(r));
  }
  return out;
}

QPProblem assemble_qp(const LinearModel& model, const Vec6& x0_dev,
                      const PositionConstraints& constraints, const CostWeights& weights,
                      int n, const AssemblyOptions& options) {
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "horizon must be at least one step");
  if (constraints.knots() != n + 1 || constraints.h.size() != (n + 1) * constraints.p) {
    throw Error(ErrorCode::DimensionMismatch,
                "corridor constraints must cover n + 1 knots");
  }
  const int p = constraints.p;
  const Index N = 8 * static_cast<Index>(n) + 6;

  TransitionRows rows = transition_rows(model.A_d, model.B_d);
  if (options.rotational_algebraic) {
    rows = apply_rotational_algebraic(rows, model.A_d, model.B_d,
                                      {state_index::kTheta, state_index::kThetaDot});
  }

  QPProblem qp;
  qp.n = n;
  qp.Qbar = MatrixXd::Zero(N, N);
  const Eigen::Matrix2d C = weights.control_penalty();
  for (int t = 0; t < n; ++t) qp.Qbar.block<2, 2>(input_offset(t), input_offset(t)) = C;
  qp.Qbar.block<6, 6>(state_offset(n), state_offset(n)) =
      weights.terminal_weight * Mat6::Identity();

  const Index me = 6 + 6 * static_cast<Index>(n);
  qp.Abar = MatrixXd::Zero(me, N);
  qp.bbar = VectorXd::Zero(me);
  qp.Abar.block<6, 6>(0, 0) = Mat6::Identity();
  qp.bbar.head<6>() = x0_dev;
  for (int t = 0; t < n; ++t) {
    const Index r = 6 + 6 * static_cast<Index>(t);
    qp.Abar.block(r, state_offset(t), 6, 6) = rows.current;
    qp.Abar.block(r, input_offset(t), 6, 2) = rows.input;
    qp.Abar.block(r, state_offset(t + 1), 6, 6) = rows.next;
  }

  const int thrust_rows = options.thrust_bound ? n : 0;
  const int link_rows = options.link_adjacent ? n * p : 0;
  const Index mi = static_cast<Index>(n + 1) * p + link_rows + thrust_rows;
  // Straight-and-level reference advance between knots, used to re-express
  // corridor t-1 in the frame of knot t.
  const double ref_step = model.trim_state.v * model.dt;
  qp.Gbar = MatrixXd::Zero(mi, N);
  qp.hbar = VectorXd::Zero(mi);
  Index row = 0;
  for (int t = 0; t <= n; ++t) {
    qp.Gbar.block(row, state_offset(t), p, 6) = constraints.G_rows[static_cast<std::size_t>(t)];
    qp.hbar.segment(row, p) = constraints.h.segment(static_cast<Index>(t) * p, p);
    row += p;
    if (options.link_adjacent && t >= 1) {
      const auto& G_prev = constraints.G_rows[static_cast<std::size_t>(t - 1)];
      qp.Gbar.block(row, state_offset(t), p, 6) = G_prev;
      qp.hbar.segment(row, p) = constraints.h.segment(static_cast<Index>(t - 1) * p, p) -
                                ref_step * G_prev.col(state_index::kX);
      row += p;
    }
    if (options.thrust_bound && t < n) {
      qp.Gbar(row, input_offset(t) + input_index::kThrust) = -1.0;
      qp.hbar(row) = model.trim_input.thrust;
      ++row;
    }
  }
  return qp;
}

AircraftState trim_at(const LinearModel& model, const Vec2& position) {
  AircraftState s = model.trim_state;
  s.x = position.x();
  s.z = position.y();
  return s;
}

std::string_view to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::Optimal: return "Optimal";
    case CandidateStatus::Infeasible: return "Infeasible";
    case CandidateStatus::MaxIterations: return "MaxIterations";
    case CandidateStatus::SeedOccupied: return "SeedOccupied";
    case CandidateStatus::CorridorDegenerate: return "CorridorDegenerate";
  }
  return "Unknown";
}

RefineResult evaluate_candidates(const std::vector<Path>& paths, const LinearModel& model,
                                 const OccupancyGrid& grid, const AircraftState& x0,
                                 const RefineConfig& cfg, bool keep_artifacts) {
  const int n = cfg.horizon_steps;
  const double v = model.trim_state.v;
  const auto dirs = SearchDirections::evenly_spaced(cfg.corridor.num_directions);
  const auto refs = straight_reference(x0.position(), v, model.dt, n);
  const Vec6 x0_dev = x0.to_vector() - trim_at(model, x0.position()).to_vector();

  RefineResult result;
  std::optional<ReducedQP> reduction;
  double best_cost = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < paths.size(); ++k) {
    CandidateReport report;
    report.index = static_cast<int>(k);
    try {
      auto corridor = raytrace_corridor(grid, collocate(paths[k], v, model.dt, n), dirs,
                                        cfg.corridor.max_ray);
      auto constraints = build_constraints(corridor, refs, dirs, cfg.corridor.padding);
      const QPProblem qp = assemble_qp(model, x0_dev, constraints, cfg.weights, n, cfg.assembly);
      if (keep_artifacts) {
        result.corridors.push_back(corridor);
        result.constraints.push_back(constraints);
      }
      // Q, A, b and G coincide across candidates; only h differs.
      if (!reduction) reduction = reduce_qp(qp, cfg.solver.regularization);
      const QPSolution sol = solve_qp(qp, cfg.solver, &*reduction);
      report.iterations = sol.iterations;
      report.cost = sol.cost;
      switch (sol.status) {
        case QPStatus::Optimal: report.status = CandidateStatus::Optimal; break;
        case QPStatus::Infeasible: report.status = CandidateStatus::Infeasible; break;
        case QPStatus::MaxIterations: report.status = CandidateStatus::MaxIterations; break;
      }
      // Costs equal to solver precision count as ties and keep the lower
      // index.
      const bool better = !result.best || sol.cost < best_cost - kCostTieTol * (1.0 + best_cost);
      if (sol.status == QPStatus::Optimal && better) {
        best_cost = sol.cost;
        Trajectory traj;
        traj.dt = model.dt;
        traj.cost = sol.cost;
        traj.candidate = static_cast<int>(k);
        for (int t = 0; t <= n; ++t) {
          const Vec6 base = trim_at(model, refs[static_cast<std::size_t>(t)]).to_vector();
          traj.knots.push_back(
              AircraftState::from_vector(base + sol.xbar.segment<6>(state_offset(t))));
        }
        for (int t = 0; t < n; ++t) {
          traj.controls.push_back(ControlInput::from_vector(
              model.trim_input.to_vector() + sol.xbar.segment<2>(input_offset(t))));
        }
        result.best = std::move(traj);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SeedOccupied) {
        report.status = CandidateStatus::SeedOccupied;
      } else if (e.code() == ErrorCode::CorridorDegenerate) {
        report.status = CandidateStatus::CorridorDegenerate;
      } else {
        throw;
      }
      if (keep_artifacts) {
        result.corridors.emplace_back();
        result.constraints.emplace_back();
      }
    }
    result.reports.push_back(report);
  }
  return result;
}

Trajectory refine_and_select(const std::vector<Path>& paths, const LinearModel& model,
                             const OccupancyGrid& grid, const AircraftState& x0,
                             const RefineConfig& cfg) {
  if (paths.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate paths");
  auto result = evaluate_candidates(paths, model, grid, x0, cfg);
  if (!result.best) throw Error(ErrorCode::AllInfeasible, "no candidate produced a trajectory");
  return std::move(*result.best);
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
  out << "t,x,z,v,theta,theta_dot,gamma,T,de\n";
  out.precision(12);
  for (std::size_t i = 0; i < traj.knots.size(); ++i) {
    const auto& k = traj.knots[i];
    out << static_cast<double>(i) * traj.dt << ',' << k.x << ',' << k.z << ',' << k.v << ','
        << k.theta << ',' << k.theta_dot << ',' << k.gamma << ',';
    if (i < traj.controls.size()) {
      out << traj.controls[i].thrust << ',' << traj.controls[i].elevator;
    } else {
      out << ',';
    }
    out << '\n';
  }
}

void write_candidate_reports(std::ostream& out, const std::vector<CandidateReport>& reports) {
  out << "candidate status iterations cost\n";
  out.precision(12);
  for (const auto& r : reports) {
    out << r.index << ' ' << to_string(r.status) << ' ' << r.iterations << ' ' << r.cost
        << '\n';
  }
}

}  // namespace mpp
