#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpp/corridor_raytracer.hpp"
#include "mpp/flight_dynamics.hpp"
#include "mpp/multipath_planner.hpp"
#include "mpp/qp_solver.hpp"

namespace mpp {

struct CostWeights {
  // Per-step control penalty over (thrust, elevator) in the printed
  // orientation; `thrust_heavier` swaps the diagonal so thrust carries the
  // larger weight.
  Eigen::Matrix2d C_ctrl = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  bool thrust_heavier = true;
  double terminal_weight = 100.0;

  Eigen::Matrix2d control_penalty() const;
};

/// One block row of the dynamics equalities:
///   current * dx_t + input * du_t + next * dx_{t+1} = 0.
struct TransitionRows {
  Eigen::MatrixXd current;
  Eigen::MatrixXd input;
  Eigen::MatrixXd next;
};

/// Plain discrete transition rows (A, B, -I).
TransitionRows transition_rows(const Eigen::MatrixXd& A_d, const Eigen::MatrixXd& B_d);

/// Replaces the listed rows by their steady-state form (I - A) x_{t+1} = B u_t,
/// i.e. current = 0, input = B, next = -(I - A) on those rows. Throws
/// SingularSteadyState if (I - A) restricted to those rows and columns is
/// numerically singular.
TransitionRows apply_rotational_algebraic(const TransitionRows& rows,
                                          const Eigen::MatrixXd& A_d,
                                          const Eigen::MatrixXd& B_d,
                                          const std::vector<int>& indices);

struct AssemblyOptions {
  bool rotational_algebraic = true;
  bool thrust_bound = true;
  // Also constrain knot t+1 by the corridor of knot t, so each straight
  // segment between consecutive knots lies inside one convex corridor.
  bool link_adjacent = false;
};

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;

/// Offset of dx_t and du_t inside the stacked variable
/// [dx_0; du_0; ...; dx_{n-1}; du_{n-1}; dx_n].
inline Eigen::Index state_offset(int t) { return 8 * static_cast<Eigen::Index>(t); }
inline Eigen::Index input_offset(int t) { return 8 * static_cast<Eigen::Index>(t) + 6; }

/// Inequality rows are ordered knot by knot: the p corridor rows of knot t,
/// then (with link_adjacent, t >= 1) the p rows of corridor t-1 acting on
/// knot t, then the thrust row of du_t (t < n).
QPProblem assemble_qp(const LinearModel& model, const Vec6& x0_dev,
                      const PositionConstraints& constraints, const CostWeights& weights,
                      int n, const AssemblyOptions& options = {});

/// Trim state placed at a given position (gamma = 0, theta_dot = 0).
AircraftState trim_at(const LinearModel& model, const Vec2& position);

struct Trajectory {
  std::vector<AircraftState> knots;   // n+1 absolute states
  std::vector<ControlInput> controls; // n absolute controls, held over each step
  double dt = 0.0;
  double cost = 0.0;
  int candidate = -1;
};

enum class CandidateStatus {
  Optimal,
  Infeasible,
  MaxIterations,
  SeedOccupied,
  CorridorDegenerate,
};
std::string_view to_string(CandidateStatus status);

struct CandidateReport {
  int index = 0;
  CandidateStatus status = CandidateStatus::Infeasible;
  int iterations = 0;
  double cost = 0.0;
};

struct RefineConfig {
  int horizon_steps = 18;
  CorridorConfig corridor;
  CostWeights weights;
  AssemblyOptions assembly;
  QPSolverOptions solver;
};

struct RefineResult {
  std::optional<Trajectory> best;
  std::vector<CandidateReport> reports;
  // Per-candidate artifacts, filled only when requested (debug dumps).
  std::vector<Corridor> corridors;
  std::vector<PositionConstraints> constraints;
};

/// Collocate, raytrace, assemble and solve every candidate; keep the optimal
/// solution of least cost, the lowest index winning when costs agree to 1e-9
/// relative. `x0` is the current state estimate in world coordinates.
RefineResult evaluate_candidates(const std::vector<Path>& paths, const LinearModel& model,
                                 const OccupancyGrid& grid, const AircraftState& x0,
                                 const RefineConfig& cfg, bool keep_artifacts = false);

/// As evaluate_candidates but throws AllInfeasible when no candidate solves.
Trajectory refine_and_select(const std::vector<Path>& paths, const LinearModel& model,
                             const OccupancyGrid& grid, const AircraftState& x0,
                             const RefineConfig& cfg);

/// CSV dump of knots and held controls: t,x,z,v,theta,theta_dot,gamma,T,de
/// (the last knot carries no control).
void write_trajectory(std::ostream& out, const Trajectory& traj);

/// Tabular dump: candidate status iterations cost.
void write_candidate_reports(std::ostream& out, const std::vector<CandidateReport>& reports);

}  // namespace mpp
