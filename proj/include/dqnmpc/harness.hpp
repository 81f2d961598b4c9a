#pragma once

/**
 * @file
 * @brief Monte Carlo campaigns: pose regulation from sampled initial poses,
 * trajectory tracking under plant mismatch and disturbances, metrics and the
 * orientation cost-curve sweep.
 */

#include "dqnmpc/baseline.hpp"
#include "dqnmpc/dynamics.hpp"
#include "dqnmpc/ocp.hpp"
#include "dqnmpc/reference.hpp"
#include "dqnmpc/sqp.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqnmpc {

enum class ControllerKind { dq, baseline };
enum class ControllerSelection { dq, baseline, both };
/// serial is the reference path; parallel fans runs out with OpenMP.
enum class ExecPolicy { serial, parallel };

std::string to_string(ControllerKind c);
std::string to_string(ControllerSelection c);
ControllerSelection controller_selection_from_string(const std::string& s);
std::vector<ControllerKind> controllers(ControllerSelection s);

class EmptyRecords : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PoseRanges {
  Vec3 p_min{-4.0, -4.0, 0.0};
  Vec3 p_max{4.0, 4.0, 4.0};
  /// Bounds on |ln(r)| (half-angle) before canonicalization.
  double log_min{0.0};
  double log_max{3.14159265358979323846};

  void validate() const;
};

/// One row of the robustness table: plant-side mismatch plus the plant drag coefficient.
struct Scenario {
  std::string name{"ideal"};
  DisturbanceConfig dist{};
  double plant_drag_c{0.0};
};

/// ideal, +78% drag, +20% mass, +20% inertia, 7.07 N force, 0.02 N m moment.
std::vector<Scenario> robustness_scenarios(double nominal_drag_c = 0.25);

/// Lissajous figure-eight used for tracking, calibrated to the given peak speed.
TrajectorySpec default_tracking_trajectory(double v_max = 4.68, double duration = 20.0);

struct ExperimentConfig {
  std::uint64_t seed{42};
  int n_samples{100};
  PoseRanges ranges{};
  ControllerSelection controller{ControllerSelection::both};

  QuadrotorParams params{};
  OcpConfig ocp{OcpConfig::from_params(QuadrotorParams{})};
  Weights dq_weights{};
  BaselineWeights baseline_weights{};
  SolverConfig solver{};

  // regulation
  double sim_duration{10.0};
  /// Controller rate for regulation (Hz); full SQP per step.
  double regulation_rate{20.0};
  SqpMode regulation_mode{SqpMode::full_sqp};
  double pos_tol{0.05};
  double ori_tol{0.05};
  /// End a regulation run once both errors stayed below tolerance this long (s); <= 0 runs the full duration.
  double settle_hold{0.5};

  // tracking
  TrajectorySpec trajectory{default_tracking_trajectory()};
  double control_rate{190.0};
  std::vector<Scenario> scenarios{robustness_scenarios()};
  int tracking_runs{3};
  /// Uniform initial position offset per tracking run (m), per axis.
  double tracking_offset{0.05};

  double divergence_threshold{50.0};

  // SQP iteration study
  int n_iteration_study{20};
  double large_angle_min{1.5707963267948966};  ///< minimum rotation angle (rad)
  double large_pos_min{2.0};                    ///< minimum |p| (m)
  /// Iteration cap for the study, so counts are measured to tol_kkt rather than truncated.
  int study_max_iter{500};

  void validate() const;
  /// Scales the campaign to at most 10 samples and 5 s durations.
  ExperimentConfig smoke() const;
};

/// Deterministic child seed for run `index` (splitmix64 of the pair).
std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index);

struct StepRecord {
  double t{0.0};
  ClassicalState x{};
  ClassicalReference ref{};
  WrenchInput u{};
  int sqp_iters{0};
  KktResiduals kkt{};
  SolveStatus status{SolveStatus::converged};
  double solve_time{0.0};
};

struct RunRecord {
  int index{0};
  std::string scenario;
  ControllerKind controller{ControllerKind::dq};
  std::uint64_t seed{0};
  ClassicalState x0{};
  std::vector<StepRecord> steps;
  bool diverged{false};
  bool converged{false};
  double settle_time{-1.0};
  /// Non-empty if the run aborted on an exception.
  std::string error;
};

struct RunMetrics {
  double pos_rmse{0.0};
  double ori_rmse{0.0};
  double roc_f{0.0};
  double roc_w{0.0};
  double roc_f_mean{0.0};
  double roc_w_mean{0.0};
  double final_pos_err{0.0};
  double final_ori_err{0.0};
  double mean_sqp_iters{0.0};
};

struct MeanStd {
  double mean{0.0};
  double std{0.0};
};

struct MetricsSummary {
  int n_runs{0};
  int n_diverged{0};
  int n_failed{0};
  MeanStd pos_rmse{};
  MeanStd ori_rmse{};
  MeanStd roc_f{};
  MeanStd roc_w{};
  MeanStd roc_f_mean{};
  MeanStd roc_w_mean{};
  double convergence_rate{0.0};
  double mean_sqp_iters{0.0};
};

/// |ln(rd* (x) r)|, the half-angle of the relative rotation.
double orientation_error(const UnitQuaternion& rd, const UnitQuaternion& r);

std::vector<ClassicalState> sample_initial_poses(const ExperimentConfig& cfg);
std::vector<ClassicalState> sample_initial_poses(const ExperimentConfig& cfg, int n, std::uint64_t seed);

/// One closed-loop regulation run to the origin/identity hover.
RunRecord regulation_run(const ExperimentConfig& cfg, ControllerKind c, const ClassicalState& x0, int index);
std::vector<RunRecord> run_regulation(const ExperimentConfig& cfg, ControllerKind c,
                                      ExecPolicy exec = ExecPolicy::parallel, int jobs = 0);

/// One RTI tracking run on the (disturbed) plant.
RunRecord tracking_run(const ExperimentConfig& cfg, ControllerKind c, const Scenario& sc, int index);
std::vector<RunRecord> run_tracking(const ExperimentConfig& cfg, ControllerKind c, const Scenario& sc,
                                    ExecPolicy exec = ExecPolicy::parallel, int jobs = 0);

/// Every selected controller over every sample, ordered by (controller, sample).
std::vector<RunRecord> run_regulation_all(const ExperimentConfig& cfg, ExecPolicy exec = ExecPolicy::parallel,
                                          int jobs = 0);
/// Every scenario x selected controller x tracking run, in that order.
std::vector<RunRecord> run_tracking_all(const ExperimentConfig& cfg, ExecPolicy exec = ExecPolicy::parallel,
                                        int jobs = 0);

RunMetrics run_metrics(const RunRecord& r);
/// Throws EmptyRecords.
MetricsSummary compute_metrics(const std::vector<RunRecord>& records);

struct IterationSample {
  int index{0};
  ClassicalState x0{};
  int sqp_iters{0};
  SolveStatus status{SolveStatus::max_iter};
  KktResiduals kkt{};
};

/// Large-error initial poses: canonical rotation angle >= large_angle_min and |p| >= large_pos_min.
std::vector<ClassicalState> sample_large_errors(const ExperimentConfig& cfg);
/// Cold full-SQP solve of the first OCP from each pose.
std::vector<IterationSample> iteration_study(const ExperimentConfig& cfg, ControllerKind c,
                                             const std::vector<ClassicalState>& poses,
                                             ExecPolicy exec = ExecPolicy::parallel, int jobs = 0);

struct CostCurveRow {
  double theta{0.0};
  double dq{0.0};
  double baseline{0.0};
};

/// 629 angles 0, 0.01, ..., 6.28.
std::vector<double> default_angle_grid();
/// Throws std::invalid_argument for angles outside [0, 2 pi).
std::vector<CostCurveRow> cost_curves(const std::vector<double>& grid);

}  // namespace dqnmpc
