#pragma once

/**
 * @file
 * @brief Campaign drivers and their on-disk artifacts: per-run CSV, summary
 * JSON, the robustness table (CSV + text) and SVG plots.
 *
 * Run CSV columns:
 *   t, px, py, pz, qw, qx, qy, qz, wx, wy, wz, vx, vy, vz, f, tau_x, tau_y, tau_z,
 *   ref_<same 17 state/input columns>, sqp_iters, kkt_stationarity, kkt_eq,
 *   kkt_ineq, kkt_comp, status
 * Position, velocity in the world frame; w is the body rate; q is scalar first.
 * Data files contain no timing columns, so reruns are byte-identical; wall
 * times go to timing.json.
 */

#include "dqnmpc/harness.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqnmpc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Creates parent directories as needed; throws IoError.
void write_file(const std::filesystem::path& path, const std::string& content);

std::string run_csv_header();
std::string run_csv(const RunRecord& r);
std::string cost_curves_csv(const std::vector<CostCurveRow>& rows);

struct KktSummary {
  long n_solves{0};
  long n_converged{0};
  /// Converged solves with any residual >= tol.
  long n_violating{0};
  double max_stationarity{0.0};
  double max_eq{0.0};
  double max_ineq{0.0};
  double max_comp{0.0};
};

KktSummary kkt_summary(const std::vector<RunRecord>& runs, ControllerKind c, double tol);

struct IterationSummary {
  int n{0};
  int n_converged{0};
  MeanStd iters{};
};

IterationSummary iteration_summary(const std::vector<IterationSample>& s);

struct RegulationResult {
  ExperimentConfig cfg;
  std::vector<RunRecord> runs;
  std::map<ControllerKind, std::vector<IterationSample>> study;
  double wall_time{0.0};
};

/// Regulation Monte Carlo plus the cold-start iteration study for every selected controller.
RegulationResult regulate(const ExperimentConfig& cfg, ExecPolicy exec = ExecPolicy::parallel, int jobs = 0);
std::vector<RunRecord> runs_of(const std::vector<RunRecord>& runs, ControllerKind c);
std::string regulation_summary_json(const RegulationResult& r);
/// runs/*.csv, final_errors.csv, kkt.csv, iterations.csv, summary.json, timing.json, config_used.json, *.svg
void write_regulation(const RegulationResult& r, const std::filesystem::path& out);

struct TrackingResult {
  ExperimentConfig cfg;
  std::vector<RunRecord> runs;
  double wall_time{0.0};
};

TrackingResult track(const ExperimentConfig& cfg, ExecPolicy exec = ExecPolicy::parallel, int jobs = 0);

struct TableCell {
  bool present{false};
  bool diverged{false};
  MetricsSummary m{};
};

struct TableRow {
  std::string scenario;
  TableCell dq;
  TableCell baseline;
  /// "pass", "fail" or "n/a" for DQ orientation RMSE < baseline orientation RMSE.
  std::string ori_ordering;
};

std::vector<TableRow> robustness_table(const TrackingResult& r);
std::string table_csv(const std::vector<TableRow>& rows);
std::string table_text(const std::vector<TableRow>& rows);
/// runs/*.csv, table3.csv, table3.txt, summary.json, timing.json, config_used.json, *.svg
void write_tracking(const TrackingResult& r, const std::filesystem::path& out);

/// cost_curves.csv and cost_curves.svg
void write_cost_curves(const std::vector<CostCurveRow>& rows, const std::filesystem::path& out);

}  // namespace dqnmpc
