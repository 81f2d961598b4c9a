#include "dqnmpc/report.hpp"

#include "dqnmpc/config.hpp"
#include "dqnmpc/svg.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dqnmpc {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kDqColor = "#1f77b4";
const char* kBaselineColor = "#d62728";

const char* color_of(ControllerKind c) { return c == ControllerKind::dq ? kDqColor : kBaselineColor; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fixed(double v, int prec) {
  if (!std::isfinite(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// json has no NaN; map it to null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json mean_std(const MeanStd& m) { return {{"mean", num(m.mean)}, {"std", num(m.std)}}; }

json metrics_json(const MetricsSummary& m) {
  return {{"n_runs", m.n_runs},
          {"n_diverged", m.n_diverged},
          {"n_failed", m.n_failed},
          {"pos_rmse", mean_std(m.pos_rmse)},
          {"ori_rmse", mean_std(m.ori_rmse)},
          {"roc_f", mean_std(m.roc_f)},
          {"roc_w", mean_std(m.roc_w)},
          {"roc_f_mean", mean_std(m.roc_f_mean)},
          {"roc_w_mean", mean_std(m.roc_w_mean)},
          {"convergence_rate", num(m.convergence_rate)},
          {"mean_sqp_iters", num(m.mean_sqp_iters)}};
}

void append_state(std::ostringstream& o, const ClassicalState& x, const WrenchInput& u) {
  const auto& q = x.r.quat();
  for (double v : {x.p.x(), x.p.y(), x.p.z(), q.w, q.x, q.y, q.z, x.w.x(), x.w.y(), x.w.z(), x.v.x(), x.v.y(),
                   x.v.z(), u.f, u.tau.x(), u.tau.y(), u.tau.z()}) {
    o << ',' << fmt(v);
  }
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return out;
}

std::string run_file(const RunRecord& r, const std::string& prefix = "") {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%03d", r.index);
  return prefix + safe_name(r.scenario) + "_" + to_string(r.controller) + "_" + idx + ".csv";
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json timing_json(const std::vector<RunRecord>& runs, double wall) {
  json j;
  j["wall_time_s"] = wall;
  std::map<std::string, std::pair<double, long>> per;
  for (const auto& r : runs) {
    auto& e = per[to_string(r.controller)];
    for (const auto& s : r.steps) {
      e.first += s.solve_time;
      ++e.second;
    }
  }
  for (const auto& [name, e] : per) {
    j["controllers"][name] = {{"total_solve_time_s", e.first},
                              {"mean_solve_time_s", e.second > 0 ? e.first / static_cast<double>(e.second) : 0.0},
                              {"n_solves", e.second}};
  }
  return j;
}

}  // namespace

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << content;
  f.close();
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

std::string run_csv_header() {
  static const char* cols[] = {"px", "py", "pz", "qw", "qx", "qy", "qz", "wx", "wy",
                               "wz", "vx", "vy", "vz", "f",  "tau_x", "tau_y", "tau_z"};
  std::string h = "t";
  for (const char* c : cols) h += std::string(",") + c;
  for (const char* c : cols) h += std::string(",ref_") + c;
  h += ",sqp_iters,kkt_stationarity,kkt_eq,kkt_ineq,kkt_comp,status\n";
  return h;
}

std::string run_csv(const RunRecord& r) {
  std::ostringstream o;
  o << run_csv_header();
  for (const auto& s : r.steps) {
    o << fmt(s.t);
    append_state(o, s.x, s.u);
    append_state(o, s.ref.x, s.ref.u);
    o << ',' << s.sqp_iters << ',' << fmt(s.kkt.stationarity) << ',' << fmt(s.kkt.eq_feas) << ','
      << fmt(s.kkt.ineq_feas) << ',' << fmt(s.kkt.comp) << ',' << to_string(s.status) << '\n';
  }
  return o.str();
}

std::string cost_curves_csv(const std::vector<CostCurveRow>& rows) {
  std::ostringstream o;
  o << "theta,dq_cost,baseline_cost\n";
  for (const auto& r : rows) o << fmt(r.theta) << ',' << fmt(r.dq) << ',' << fmt(r.baseline) << '\n';
  return o.str();
}

KktSummary kkt_summary(const std::vector<RunRecord>& runs, ControllerKind c, double tol) {
  KktSummary k;
  for (const auto& r : runs) {
    if (r.controller != c) continue;
    for (const auto& s : r.steps) {
      ++k.n_solves;
      if (s.status != SolveStatus::converged) continue;
      ++k.n_converged;
      if (!(s.kkt.max() < tol)) ++k.n_violating;
      k.max_stationarity = std::max(k.max_stationarity, s.kkt.stationarity);
      k.max_eq = std::max(k.max_eq, s.kkt.eq_feas);
      k.max_ineq = std::max(k.max_ineq, s.kkt.ineq_feas);
      k.max_comp = std::max(k.max_comp, s.kkt.comp);
    }
  }
  return k;
}

IterationSummary iteration_summary(const std::vector<IterationSample>& s) {
  IterationSummary out;
  out.n = static_cast<int>(s.size());
  if (s.empty()) return out;
  for (const auto& x : s) {
    out.iters.mean += x.sqp_iters;
    out.n_converged += x.status == SolveStatus::converged;
  }
  out.iters.mean /= out.n;
  for (const auto& x : s) out.iters.std += (x.sqp_iters - out.iters.mean) * (x.sqp_iters - out.iters.mean);
  out.iters.std = std::sqrt(out.iters.std / out.n);
  return out;
}

RegulationResult regulate(const ExperimentConfig& cfg, ExecPolicy exec, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  RegulationResult r;
  r.cfg = cfg;
  r.runs = run_regulation_all(cfg, exec, jobs);
  const auto poses = sample_large_errors(cfg);
  for (ControllerKind c : controllers(cfg.controller)) r.study[c] = iteration_study(cfg, c, poses, exec, jobs);
  r.wall_time = wall_since(t0);
  return r;
}

std::vector<RunRecord> runs_of(const std::vector<RunRecord>& runs, ControllerKind c) {
  std::vector<RunRecord> out;
  for (const auto& r : runs) {
    if (r.controller == c) out.push_back(r);
  }
  return out;
}

std::string regulation_summary_json(const RegulationResult& r) {
  json j;
  j["seed"] = r.cfg.seed;
  j["n_samples"] = r.cfg.n_samples;
  j["pos_tol"] = r.cfg.pos_tol;
  j["ori_tol"] = r.cfg.ori_tol;
  j["sim_duration"] = r.cfg.sim_duration;
  std::map<ControllerKind, double> rate;
  std::map<ControllerKind, double> iters;
  for (ControllerKind c : controllers(r.cfg.controller)) {
    const auto runs = runs_of(r.runs, c);
    const auto m = compute_metrics(runs);
    rate[c] = m.convergence_rate;
    json cj;
    cj["metrics"] = metrics_json(m);
    const auto k = kkt_summary(r.runs, c, r.cfg.solver.tol_kkt);
    cj["kkt"] = {{"n_solves", k.n_solves},
                 {"n_converged", k.n_converged},
                 {"n_converged_violating", k.n_violating},
                 {"max_stationarity", k.max_stationarity},
                 {"max_eq", k.max_eq},
                 {"max_ineq", k.max_ineq},
                 {"max_comp", k.max_comp}};
    const auto it = r.study.count(c) ? iteration_summary(r.study.at(c)) : IterationSummary{};
    iters[c] = it.iters.mean;
    cj["iteration_study"] = {{"n", it.n}, {"n_converged", it.n_converged}, {"sqp_iters", mean_std(it.iters)}};
    j["controllers"][to_string(c)] = cj;
  }
  if (rate.size() == 2) {
    j["checks"]["dq_convergence_ge_baseline"] = rate[ControllerKind::dq] >= rate[ControllerKind::baseline];
    j["checks"]["dq_mean_iters_le_baseline"] = iters[ControllerKind::dq] <= iters[ControllerKind::baseline];
  }
  if (rate.count(ControllerKind::dq)) j["checks"]["dq_convergence_ge_0.99"] = rate[ControllerKind::dq] >= 0.99;
  return j.dump(2) + "\n";
}

void write_regulation(const RegulationResult& r, const fs::path& out) {
  write_file(out / "config_used.json", dump_config(r.cfg));
  for (const auto& run : r.runs) write_file(out / "runs" / run_file(run), run_csv(run));

  std::ostringstream fe;
  fe << "controller,index,converged,diverged,settle_time,final_pos_err,final_ori_err,pos_rmse,ori_rmse,"
        "mean_sqp_iters,error\n";
  std::ostringstream kk;
  kk << "controller,index,t,sqp_iters,status,kkt_stationarity,kkt_eq,kkt_ineq,kkt_comp\n";
  for (const auto& run : r.runs) {
    const auto m = run_metrics(run);
    fe << to_string(run.controller) << ',' << run.index << ',' << run.converged << ',' << run.diverged << ','
       << fmt(run.settle_time) << ',' << fmt(m.final_pos_err) << ',' << fmt(m.final_ori_err) << ','
       << fmt(m.pos_rmse) << ',' << fmt(m.ori_rmse) << ',' << fmt(m.mean_sqp_iters) << ",\"" << run.error << "\"\n";
    for (const auto& s : run.steps) {
      kk << to_string(run.controller) << ',' << run.index << ',' << fmt(s.t) << ',' << s.sqp_iters << ','
         << to_string(s.status) << ',' << fmt(s.kkt.stationarity) << ',' << fmt(s.kkt.eq_feas) << ','
         << fmt(s.kkt.ineq_feas) << ',' << fmt(s.kkt.comp) << '\n';
    }
  }
  write_file(out / "final_errors.csv", fe.str());
  write_file(out / "kkt.csv", kk.str());

  std::ostringstream it;
  it << "controller,index,px,py,pz,rotation_angle,sqp_iters,status,kkt_max\n";
  for (const auto& [c, samples] : r.study) {
    for (const auto& s : samples) {
      it << to_string(c) << ',' << s.index << ',' << fmt(s.x0.p.x()) << ',' << fmt(s.x0.p.y()) << ','
         << fmt(s.x0.p.z()) << ',' << fmt(2.0 * quat_log(s.x0.r).norm()) << ',' << s.sqp_iters << ','
         << to_string(s.status) << ',' << fmt(s.kkt.max()) << '\n';
    }
  }
  write_file(out / "iterations.csv", it.str());
  write_file(out / "summary.json", regulation_summary_json(r));
  write_file(out / "timing.json", timing_json(r.runs, r.wall_time).dump(2) + "\n");

  // final error scatter
  std::vector<svg::Series> scatter;
  std::vector<svg::Series> traces;
  std::vector<svg::BoxGroup> kkt_groups;
  std::vector<svg::BoxGroup> iter_groups;
  for (ControllerKind c : controllers(r.cfg.controller)) {
    svg::Series s{to_string(c), {}, {}, color_of(c), false};
    svg::Series tr{to_string(c), {}, {}, color_of(c), false};
    svg::BoxGroup st{to_string(c) + " stat", {}, color_of(c)}, eq{to_string(c) + " eq", {}, color_of(c)},
        in{to_string(c) + " ineq", {}, color_of(c)}, cp{to_string(c) + " comp", {}, color_of(c)};
    for (const auto& run : r.runs) {
      if (run.controller != c) continue;
      const auto m = run_metrics(run);
      s.x.push_back(m.final_pos_err);
      s.y.push_back(m.final_ori_err);
      for (const auto& step : run.steps) {
        tr.x.push_back(step.t);
        tr.y.push_back((step.x.p - step.ref.x.p).norm());
        if (step.status == SolveStatus::converged) {
          st.values.push_back(step.kkt.stationarity);
          eq.values.push_back(step.kkt.eq_feas);
          in.values.push_back(step.kkt.ineq_feas);
          cp.values.push_back(step.kkt.comp);
        }
      }
    }
    scatter.push_back(s);
    traces.push_back(tr);
    for (auto* g : {&st, &eq, &in, &cp}) kkt_groups.push_back(*g);
    if (r.study.count(c)) {
      svg::BoxGroup g{to_string(c), {}, color_of(c)};
      for (const auto& x : r.study.at(c)) g.values.push_back(x.sqp_iters);
      iter_groups.push_back(g);
    }
  }
  write_file(out / "final_errors.svg",
             svg::line_plot({"Final errors per run", "position error [m]", "orientation error [rad]"}, scatter));
  write_file(out / "position_error.svg",
             svg::line_plot({"Position error over time", "t [s]", "|p_d - p| [m]"}, traces));
  svg::PlotSpec kp{"KKT residuals of converged solves", "", "residual", true, 900, 420};
  write_file(out / "kkt.svg", svg::box_plot(kp, kkt_groups));
  write_file(out / "sqp_iters.svg",
             svg::box_plot({"SQP iterations, large initial errors", "", "iterations"}, iter_groups));
}

TrackingResult track(const ExperimentConfig& cfg, ExecPolicy exec, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  TrackingResult r;
  r.cfg = cfg;
  r.runs = run_tracking_all(cfg, exec, jobs);
  r.wall_time = wall_since(t0);
  return r;
}

std::vector<TableRow> robustness_table(const TrackingResult& r) {
  std::vector<TableRow> rows;
  for (const auto& sc : r.cfg.scenarios) {
    TableRow row;
    row.scenario = sc.name;
    for (ControllerKind c : controllers(r.cfg.controller)) {
      std::vector<RunRecord> runs;
      for (const auto& run : r.runs) {
        if (run.scenario == sc.name && run.controller == c) runs.push_back(run);
      }
      if (runs.empty()) continue;
      TableCell& cell = c == ControllerKind::dq ? row.dq : row.baseline;
      cell.present = true;
      cell.m = compute_metrics(runs);
      cell.diverged = cell.m.n_diverged > 0 || cell.m.n_failed > 0;
    }
    if (!row.dq.present || !row.baseline.present) {
      row.ori_ordering = "n/a";
    } else if (row.dq.diverged) {
      row.ori_ordering = "fail";
    } else if (row.baseline.diverged) {
      row.ori_ordering = "pass";
    } else {
      row.ori_ordering = row.dq.m.ori_rmse.mean < row.baseline.m.ori_rmse.mean ? "pass" : "fail";
    }
    rows.push_back(row);
  }
  return rows;
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::ostringstream o;
  o << "scenario,dq_pos_rmse_mean,dq_pos_rmse_std,baseline_pos_rmse_mean,baseline_pos_rmse_std,"
       "dq_ori_rmse_mean,dq_ori_rmse_std,baseline_ori_rmse_mean,baseline_ori_rmse_std,"
       "dq_roc_f,dq_roc_w,baseline_roc_f,baseline_roc_w,dq_diverged,baseline_diverged,ori_ordering\n";
  auto cell = [](const TableCell& c, double v) { return !c.present ? std::string("") : c.diverged ? std::string("diverged") : fmt(v); };
  for (const auto& r : rows) {
    o << r.scenario << ',' << cell(r.dq, r.dq.m.pos_rmse.mean) << ',' << cell(r.dq, r.dq.m.pos_rmse.std) << ','
      << cell(r.baseline, r.baseline.m.pos_rmse.mean) << ',' << cell(r.baseline, r.baseline.m.pos_rmse.std) << ','
      << cell(r.dq, r.dq.m.ori_rmse.mean) << ',' << cell(r.dq, r.dq.m.ori_rmse.std) << ','
      << cell(r.baseline, r.baseline.m.ori_rmse.mean) << ',' << cell(r.baseline, r.baseline.m.ori_rmse.std) << ','
      << cell(r.dq, r.dq.m.roc_f.mean) << ',' << cell(r.dq, r.dq.m.roc_w.mean) << ','
      << cell(r.baseline, r.baseline.m.roc_f.mean) << ',' << cell(r.baseline, r.baseline.m.roc_w.mean) << ','
      << r.dq.diverged << ',' << r.baseline.diverged << ',' << r.ori_ordering << '\n';
  }
  return o.str();
}

std::string table_text(const std::vector<TableRow>& rows) {
  auto pm = [](const TableCell& c, const MeanStd& m) {
    if (!c.present) return std::string("-");
    if (c.diverged) return std::string("diverged");
    char sd[32];
    std::snprintf(sd, sizeof sd, "%.1e", m.std);
    return fixed(m.mean, 4) + " +/- " + (std::isfinite(m.std) ? std::string(sd) : std::string("nan"));
  };
  auto roc = [](const TableCell& c) {
    if (!c.present) return std::string("-");
    if (c.diverged) return std::string("diverged");
    return fixed(c.m.roc_f.mean, 2) + ", " + fixed(c.m.roc_w.mean, 2);
  };
  char line[512];
  std::ostringstream o;
  std::snprintf(line, sizeof line, "%-16s | %-43s | %-43s | %-31s | %s\n", "", "Position RMSE [m] (mean +/- std)",
                "Orientation RMSE [rad] (mean +/- std)", "Rate of change |du_f|, |du_w|", "ori check");
  o << line;
  std::snprintf(line, sizeof line, "%-16s | %-21s %-21s | %-21s %-21s | %-15s %-15s | %s\n", "Scenario", "DQ-NMPC",
                "Baseline-NMPC", "DQ-NMPC", "Baseline-NMPC", "DQ-NMPC", "Baseline-NMPC", "DQ < Baseline");
  o << line << std::string(162, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-16s | %-21s %-21s | %-21s %-21s | %-15s %-15s | %s\n", r.scenario.c_str(),
                  pm(r.dq, r.dq.m.pos_rmse).c_str(), pm(r.baseline, r.baseline.m.pos_rmse).c_str(),
                  pm(r.dq, r.dq.m.ori_rmse).c_str(), pm(r.baseline, r.baseline.m.ori_rmse).c_str(), roc(r.dq).c_str(),
                  roc(r.baseline).c_str(), r.ori_ordering.c_str());
    o << line;
  }
  return o.str();
}

void write_tracking(const TrackingResult& r, const fs::path& out) {
  write_file(out / "config_used.json", dump_config(r.cfg));
  for (const auto& run : r.runs) write_file(out / "runs" / run_file(run, "track_"), run_csv(run));
  const auto rows = robustness_table(r);
  write_file(out / "table3.csv", table_csv(rows));
  write_file(out / "table3.txt", table_text(rows));

  json j;
  j["seed"] = r.cfg.seed;
  j["trajectory"] = {{"kind", to_string(r.cfg.trajectory.kind)},
                     {"v_max", r.cfg.trajectory.max_speed()},
                     {"duration", r.cfg.trajectory.duration}};
  j["control_rate"] = r.cfg.control_rate;
  bool all_pass = true;
  for (const auto& row : rows) {
    json sj;
    if (row.dq.present) sj["dq"] = metrics_json(row.dq.m), sj["dq"]["diverged"] = row.dq.diverged;
    if (row.baseline.present) sj["baseline"] = metrics_json(row.baseline.m), sj["baseline"]["diverged"] = row.baseline.diverged;
    sj["ori_ordering"] = row.ori_ordering;
    all_pass = all_pass && row.ori_ordering == "pass";
    j["scenarios"][row.scenario] = sj;
  }
  j["checks"]["dq_ori_rmse_lt_baseline_all_scenarios"] = all_pass;
  write_file(out / "summary.json", j.dump(2) + "\n");
  write_file(out / "timing.json", timing_json(r.runs, r.wall_time).dump(2) + "\n");

  // orientation error over time, first run of each scenario
  for (const auto& sc : r.cfg.scenarios) {
    std::vector<svg::Series> ori, pos;
    for (const auto& run : r.runs) {
      if (run.scenario != sc.name || run.index != 0) continue;
      svg::Series so{to_string(run.controller), {}, {}, color_of(run.controller), true};
      svg::Series sp = so;
      for (const auto& s : run.steps) {
        so.x.push_back(s.t);
        so.y.push_back(orientation_error(s.ref.x.r, s.x.r));
        sp.x.push_back(s.t);
        sp.y.push_back((s.ref.x.p - s.x.p).norm());
      }
      ori.push_back(so);
      pos.push_back(sp);
    }
    const std::string n = safe_name(sc.name);
    write_file(out / ("ori_error_" + n + ".svg"),
               svg::line_plot({"Orientation error, " + sc.name, "t [s]", "|ln(r_d* r)| [rad]"}, ori));
    write_file(out / ("pos_error_" + n + ".svg"),
               svg::line_plot({"Position error, " + sc.name, "t [s]", "|p_d - p| [m]"}, pos));
  }
}

void write_cost_curves(const std::vector<CostCurveRow>& rows, const fs::path& out) {
  write_file(out / "cost_curves.csv", cost_curves_csv(rows));
  svg::Series dq{"dual quaternion |ln|^2", {}, {}, kDqColor, true};
  svg::Series b{"baseline |Im q_e|^2", {}, {}, kBaselineColor, true};
  for (const auto& r : rows) {
    dq.x.push_back(r.theta);
    dq.y.push_back(r.dq);
    b.x.push_back(r.theta);
    b.y.push_back(r.baseline);
  }
  write_file(out / "cost_curves.svg",
             svg::line_plot({"Orientation error cost vs rotation angle", "theta [rad]", "cost"}, {dq, b}));
}

}  // namespace dqnmpc
