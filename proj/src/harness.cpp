#include "dqnmpc/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <type_traits>

namespace dqnmpc {

std::string to_string(ControllerKind c) { return c == ControllerKind::dq ? "dq" : "baseline"; }

std::string to_string(ControllerSelection c) {
  switch (c) {
    case ControllerSelection::dq: return "dq";
    case ControllerSelection::baseline: return "baseline";
    case ControllerSelection::both: return "both";
  }
  return "?";
}

ControllerSelection controller_selection_from_string(const std::string& s) {
  if (s == "dq") return ControllerSelection::dq;
  if (s == "baseline") return ControllerSelection::baseline;
  if (s == "both") return ControllerSelection::both;
  throw std::invalid_argument("unknown controller '" + s + "' (dq, baseline, both)");
}

std::vector<ControllerKind> controllers(ControllerSelection s) {
  switch (s) {
    case ControllerSelection::dq: return {ControllerKind::dq};
    case ControllerSelection::baseline: return {ControllerKind::baseline};
    case ControllerSelection::both: return {ControllerKind::dq, ControllerKind::baseline};
  }
  return {};
}

void PoseRanges::validate() const {
  if (!((p_max - p_min).minCoeff() >= 0.0)) throw std::invalid_argument("pose_ranges: p_min must not exceed p_max");
  if (!(log_min >= 0.0 && log_min <= log_max && log_max <= std::numbers::pi)) {
    throw std::invalid_argument("pose_ranges: need 0 <= log_min <= log_max <= pi");
  }
}

std::vector<Scenario> robustness_scenarios(double nominal_drag_c) {
  std::vector<Scenario> s(6);
  s[0].name = "ideal";
  s[1].name = "drag+78%";
  s[1].dist.drag_scale = 1.78;
  s[1].plant_drag_c = nominal_drag_c;
  s[2].name = "mass+20%";
  s[2].dist.mass_scale = 1.2;
  s[3].name = "inertia+20%";
  s[3].dist.inertia_scale = 1.2;
  s[4].name = "force7.07N";
  s[4].dist.ext_force = Vec3(0.0, 0.0, 7.07);
  s[5].name = "moment0.02Nm";
  s[5].dist.ext_moment = Vec3(0.02, 0.0, 0.0);
  return s;
}

TrajectorySpec default_tracking_trajectory(double v_max, double duration) {
  return calibrate_max_speed(make_lissajous({0.0, 0.0, 2.0}, {2.0, 1.5, 0.3}, 1.0, duration), v_max);
}

void ExperimentConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("experiment.n_samples must be >= 1");
  ranges.validate();
  params.validate();
  ocp.validate();
  dq_weights.validate();
  baseline_weights.validate();
  solver.validate();
  trajectory.validate();
  if (!(sim_duration > 0.0)) throw std::invalid_argument("experiment.sim_duration must be > 0");
  if (!(regulation_rate > 0.0)) throw std::invalid_argument("experiment.regulation_rate must be > 0");
  if (!(control_rate > 0.0)) throw std::invalid_argument("experiment.control_rate must be > 0");
  if (!(pos_tol > 0.0 && ori_tol > 0.0)) throw std::invalid_argument("experiment tolerances must be > 0");
  if (scenarios.empty()) throw std::invalid_argument("scenarios must not be empty");
  for (const auto& s : scenarios) {
    s.dist.validate();
    if (!(s.plant_drag_c >= 0.0)) throw std::invalid_argument("scenario " + s.name + ": plant_drag_c must be >= 0");
  }
  if (tracking_runs < 1) throw std::invalid_argument("experiment.tracking_runs must be >= 1");
  if (!(tracking_offset >= 0.0)) throw std::invalid_argument("experiment.tracking_offset must be >= 0");
  if (!(divergence_threshold > 0.0)) throw std::invalid_argument("experiment.divergence_threshold must be > 0");
  if (n_iteration_study < 1) throw std::invalid_argument("experiment.n_iteration_study must be >= 1");
  if (study_max_iter < 1) throw std::invalid_argument("experiment.study_max_iter must be >= 1");
  if (!(large_angle_min >= 0.0 && large_angle_min <= std::numbers::pi)) {
    throw std::invalid_argument("experiment.large_angle_min must lie in [0, pi]");
  }
}

ExperimentConfig ExperimentConfig::smoke() const {
  ExperimentConfig c = *this;
  c.n_samples = std::min(c.n_samples, 10);
  c.n_iteration_study = std::min(c.n_iteration_study, 10);
  c.tracking_runs = 1;
  c.sim_duration = std::min(c.sim_duration, 5.0);
  c.trajectory.duration = std::min(c.trajectory.duration, 5.0);
  return c;
}

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ index);
}

double orientation_error(const UnitQuaternion& rd, const UnitQuaternion& r) { return quat_log(rd.conj() * r).norm(); }

namespace {

ClassicalState sample_pose(const PoseRanges& rg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  ClassicalState x;
  for (int i = 0; i < 3; ++i) x.p[i] = rg.p_min[i] + (rg.p_max[i] - rg.p_min[i]) * u01(rng);
  Vec3 axis;
  do {
    axis = Vec3(n01(rng), n01(rng), n01(rng));
  } while (axis.norm() < 1e-9);
  const double phi = rg.log_min + (rg.log_max - rg.log_min) * u01(rng);
  x.r = quat_exp(phi * axis.normalized());
  return x;
}

template <class F>
std::vector<std::invoke_result_t<F, int>> run_indexed(int n, ExecPolicy exec, int jobs, F&& f) {
  std::vector<std::invoke_result_t<F, int>> out(n);
  if (exec == ExecPolicy::serial) {
    for (int i = 0; i < n; ++i) out[i] = f(i);
  } else {
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int i = 0; i < n; ++i) out[i] = f(i);
  }
  return out;
}

// Per-controller conversions between plant coordinates and decision coordinates.
struct DqAdapter {
  QuadrotorParams p;
  DqModel::State state(const ClassicalState& x) const { return flat::pack(to_dq_state(x)); }
  WrenchInput wrench(const DqModel::Input& u) const { return wrench_from_dual_input(ocp::expand_input(u, p), p); }
  ReferencePoint ref(const ClassicalReference& r) const { return to_reference_point(r, p); }
};

struct BaselineAdapter {
  ClassicalModel::State state(const ClassicalState& x) const { return flat::pack(x); }
  WrenchInput wrench(const ClassicalModel::Input& u) const { return flat::unpack_wrench(u); }
  const ClassicalReference& ref(const ClassicalReference& r) const { return r; }
};

struct LoopSpec {
  SqpMode mode{SqpMode::full_sqp};
  double ctrl_dt{0.05};
  int n_steps{0};
  QuadrotorParams truth{};
  DisturbanceConfig dist{};
  double divergence{50.0};
  // settle detection (regulation only)
  bool detect_settle{false};
  double pos_tol{0.05};
  double ori_tol{0.05};
  double hold{0.5};
};

bool finite_state(const ClassicalState& x) {
  return x.p.allFinite() && x.v.allFinite() && x.w.allFinite() && x.r.quat().coeffs().allFinite();
}

template <class Model, class Adapter, class RefAt>
void closed_loop(const Model& model, const Adapter& ad, const SolverConfig& scfg, const LoopSpec& ls, RefAt&& ref_at,
                 RunRecord& rec) {
  SolverConfig sc = scfg;
  sc.mode = ls.mode;
  SqpSolver<Model> solver(model, sc);
  const int N = model.horizon();
  const double shift = ls.ctrl_dt / model.dt();
  std::vector<typename Model::Ref> refs(N);
  std::optional<Trajectory<Model>> warm;
  ClassicalState x = rec.x0;
  double settle_start = -1.0;
  for (int i = 0; i < ls.n_steps; ++i) {
    const double t = i * ls.ctrl_dt;
    ClassicalReference ref0;
    for (int k = 0; k < N; ++k) {
      const ClassicalReference rk = ref_at(t + k * model.dt());
      if (k == 0) ref0 = rk;
      refs[k] = ad.ref(rk);
    }
    const auto xs = ad.state(x);
    StepRecord step;
    step.t = t;
    step.x = x;
    step.ref = ref0;
    typename Model::Input u;
    if (ls.mode == SqpMode::full_sqp) {
      auto res = solver.solve(xs, refs, warm ? &*warm : nullptr);
      u = res.traj.u.front();
      warm = shift_warm_start(model, res.traj, shift);
      step.sqp_iters = res.stats.sqp_iters;
      step.kkt = res.stats.kkt;
      step.status = res.stats.status;
      step.solve_time = res.stats.solve_time;
    } else {
      if (!warm) warm = solver.initial_guess(xs, refs);
      auto res = solver.rti_step(xs, refs, *warm, shift);
      u = res.u;
      warm = std::move(res.traj);
      step.sqp_iters = res.stats.sqp_iters;
      step.kkt = res.stats.kkt;
      step.status = res.stats.status;
      step.solve_time = res.stats.solve_time;
    }
    step.u = ad.wrench(u);
    rec.steps.push_back(step);

    if (ls.detect_settle) {
      const bool inside = (x.p - ref0.x.p).norm() < ls.pos_tol && orientation_error(ref0.x.r, x.r) < ls.ori_tol;
      if (!inside) {
        settle_start = -1.0;
      } else if (settle_start < 0.0) {
        settle_start = t;
      }
      if (inside && ls.hold > 0.0 && t - settle_start >= ls.hold - 1e-12) break;
    }

    x = plant_step(x, step.u, ls.truth, ls.dist, ls.ctrl_dt);
    const ClassicalReference next = ref_at(t + ls.ctrl_dt);
    if (!finite_state(x) || (x.p - next.x.p).norm() > ls.divergence) {
      rec.diverged = true;
      break;
    }
  }
  if (ls.detect_settle && !rec.diverged) {
    rec.converged = settle_start >= 0.0;
    rec.settle_time = settle_start;
  }
}

template <class Loop>
void dispatch(const ExperimentConfig& cfg, ControllerKind c, Loop&& loop) {
  if (c == ControllerKind::dq) {
    loop(DqModel(cfg.params, cfg.ocp, cfg.dq_weights), DqAdapter{cfg.params});
  } else {
    loop(ClassicalModel(cfg.params, cfg.ocp, cfg.baseline_weights), BaselineAdapter{});
  }
}

}  // namespace

std::vector<ClassicalState> sample_initial_poses(const ExperimentConfig& cfg, int n, std::uint64_t seed) {
  cfg.ranges.validate();
  std::vector<ClassicalState> out(n);
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(child_seed(seed, static_cast<std::uint64_t>(i)));
    out[i] = sample_pose(cfg.ranges, rng);
  }
  return out;
}

std::vector<ClassicalState> sample_initial_poses(const ExperimentConfig& cfg) {
  return sample_initial_poses(cfg, cfg.n_samples, cfg.seed);
}

RunRecord regulation_run(const ExperimentConfig& cfg, ControllerKind c, const ClassicalState& x0, int index) {
  RunRecord rec;
  rec.index = index;
  rec.scenario = "regulation";
  rec.controller = c;
  rec.seed = child_seed(cfg.seed, static_cast<std::uint64_t>(index));
  rec.x0 = x0;
  try {
    LoopSpec ls;
    ls.mode = cfg.regulation_mode;
    ls.ctrl_dt = 1.0 / cfg.regulation_rate;
    ls.n_steps = static_cast<int>(std::llround(cfg.sim_duration * cfg.regulation_rate));
    ls.truth = cfg.params;
    ls.divergence = cfg.divergence_threshold;
    ls.detect_settle = true;
    ls.pos_tol = cfg.pos_tol;
    ls.ori_tol = cfg.ori_tol;
    ls.hold = cfg.settle_hold;
    const ClassicalReference hover = hover_reference(Vec3::Zero(), UnitQuaternion::identity(), cfg.params);
    dispatch(cfg, c, [&](const auto& model, const auto& ad) {
      closed_loop(model, ad, cfg.solver, ls, [&](double) { return hover; }, rec);
    });
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.converged = false;
  }
  return rec;
}

std::vector<RunRecord> run_regulation(const ExperimentConfig& cfg, ControllerKind c, ExecPolicy exec, int jobs) {
  cfg.validate();
  const auto poses = sample_initial_poses(cfg);
  return run_indexed(cfg.n_samples, exec, jobs, [&](int i) { return regulation_run(cfg, c, poses[i], i); });
}

RunRecord tracking_run(const ExperimentConfig& cfg, ControllerKind c, const Scenario& sc, int index) {
  RunRecord rec;
  rec.index = index;
  rec.scenario = sc.name;
  rec.controller = c;
  rec.seed = child_seed(cfg.seed, static_cast<std::uint64_t>(index));
  try {
    const TrajectorySpec& traj = cfg.trajectory;
    auto ref_at = [&](double t) {
      return flat_to_classical(eval_flat(traj, std::clamp(t, 0.0, traj.duration)), cfg.params);
    };
    // Same offset for every controller and scenario at a given run index.
    std::mt19937_64 rng(rec.seed);
    std::uniform_real_distribution<double> off(-cfg.tracking_offset, cfg.tracking_offset);
    rec.x0 = ref_at(0.0).x;
    for (int i = 0; i < 3; ++i) rec.x0.p[i] += off(rng);

    LoopSpec ls;
    ls.mode = SqpMode::rti;
    ls.ctrl_dt = 1.0 / cfg.control_rate;
    ls.n_steps = static_cast<int>(std::floor(traj.duration * cfg.control_rate + 1e-9));
    ls.truth = cfg.params;
    ls.truth.drag_c = sc.plant_drag_c;
    ls.dist = sc.dist;
    ls.divergence = cfg.divergence_threshold;
    dispatch(cfg, c, [&](const auto& model, const auto& ad) { closed_loop(model, ad, cfg.solver, ls, ref_at, rec); });
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

std::vector<RunRecord> run_tracking(const ExperimentConfig& cfg, ControllerKind c, const Scenario& sc,
                                    ExecPolicy exec, int jobs) {
  cfg.validate();
  return run_indexed(cfg.tracking_runs, exec, jobs, [&](int i) { return tracking_run(cfg, c, sc, i); });
}

std::vector<RunRecord> run_regulation_all(const ExperimentConfig& cfg, ExecPolicy exec, int jobs) {
  cfg.validate();
  const auto poses = sample_initial_poses(cfg);
  const auto cs = controllers(cfg.controller);
  const int n = cfg.n_samples;
  return run_indexed(static_cast<int>(cs.size()) * n, exec, jobs,
                     [&](int i) { return regulation_run(cfg, cs[i / n], poses[i % n], i % n); });
}

std::vector<RunRecord> run_tracking_all(const ExperimentConfig& cfg, ExecPolicy exec, int jobs) {
  cfg.validate();
  const auto cs = controllers(cfg.controller);
  const int nr = cfg.tracking_runs;
  const int nc = static_cast<int>(cs.size());
  const int total = static_cast<int>(cfg.scenarios.size()) * nc * nr;
  return run_indexed(total, exec, jobs, [&](int i) {
    const int s = i / (nc * nr);
    const int c = (i / nr) % nc;
    return tracking_run(cfg, cs[c], cfg.scenarios[s], i % nr);
  });
}

RunMetrics run_metrics(const RunRecord& r) {
  RunMetrics m;
  const auto& s = r.steps;
  if (s.empty()) return m;
  double sp = 0.0, so = 0.0, iters = 0.0;
  for (const auto& st : s) {
    const double ep = (st.ref.x.p - st.x.p).norm();
    const double eo = orientation_error(st.ref.x.r, st.x.r);
    sp += ep * ep;
    so += eo * eo;
    iters += st.sqp_iters;
  }
  const double n = static_cast<double>(s.size());
  m.pos_rmse = std::sqrt(sp / n);
  m.ori_rmse = std::sqrt(so / n);
  for (size_t k = 0; k + 1 < s.size(); ++k) {
    m.roc_f += std::abs(s[k + 1].u.f - s[k].u.f);
    m.roc_w += (s[k + 1].u.tau - s[k].u.tau).norm();
  }
  if (s.size() > 1) {
    m.roc_f_mean = m.roc_f / (n - 1.0);
    m.roc_w_mean = m.roc_w / (n - 1.0);
  }
  m.final_pos_err = (s.back().ref.x.p - s.back().x.p).norm();
  m.final_ori_err = orientation_error(s.back().ref.x.r, s.back().x.r);
  m.mean_sqp_iters = iters / n;
  return m;
}

MetricsSummary compute_metrics(const std::vector<RunRecord>& records) {
  if (records.empty()) throw EmptyRecords("compute_metrics: no run records");
  MetricsSummary out;
  out.n_runs = static_cast<int>(records.size());
  std::vector<RunMetrics> ok;
  int converged = 0;
  double iters = 0.0;
  long steps = 0;
  for (const auto& r : records) {
    if (!r.error.empty()) ++out.n_failed;
    if (r.diverged) ++out.n_diverged;
    if (r.converged) ++converged;
    for (const auto& s : r.steps) iters += s.sqp_iters;
    steps += static_cast<long>(r.steps.size());
    if (r.error.empty() && !r.diverged && !r.steps.empty()) ok.push_back(run_metrics(r));
  }
  out.convergence_rate = static_cast<double>(converged) / out.n_runs;
  out.mean_sqp_iters = steps > 0 ? iters / static_cast<double>(steps) : 0.0;
  auto stat = [&](auto field) {
    MeanStd ms;
    if (ok.empty()) {
      ms.mean = ms.std = std::numeric_limits<double>::quiet_NaN();
      return ms;
    }
    for (const auto& m : ok) ms.mean += m.*field;
    ms.mean /= static_cast<double>(ok.size());
    for (const auto& m : ok) ms.std += (m.*field - ms.mean) * (m.*field - ms.mean);
    ms.std = std::sqrt(ms.std / static_cast<double>(ok.size()));
    return ms;
  };
  out.pos_rmse = stat(&RunMetrics::pos_rmse);
  out.ori_rmse = stat(&RunMetrics::ori_rmse);
  out.roc_f = stat(&RunMetrics::roc_f);
  out.roc_w = stat(&RunMetrics::roc_w);
  out.roc_f_mean = stat(&RunMetrics::roc_f_mean);
  out.roc_w_mean = stat(&RunMetrics::roc_w_mean);
  return out;
}

std::vector<ClassicalState> sample_large_errors(const ExperimentConfig& cfg) {
  cfg.ranges.validate();
  std::vector<ClassicalState> out(cfg.n_iteration_study);
  const std::uint64_t base = child_seed(cfg.seed, 0x5157ULL);
  for (int i = 0; i < cfg.n_iteration_study; ++i) {
    std::mt19937_64 rng(child_seed(base, static_cast<std::uint64_t>(i)));
    for (int tries = 0;; ++tries) {
      if (tries > 100000) throw std::invalid_argument("pose ranges admit no large-error samples");
      const auto x = sample_pose(cfg.ranges, rng);
      if (2.0 * quat_log(x.r).norm() >= cfg.large_angle_min && x.p.norm() >= cfg.large_pos_min) {
        out[i] = x;
        break;
      }
    }
  }
  return out;
}

std::vector<IterationSample> iteration_study(const ExperimentConfig& cfg, ControllerKind c,
                                             const std::vector<ClassicalState>& poses, ExecPolicy exec, int jobs) {
  cfg.validate();
  return run_indexed(static_cast<int>(poses.size()), exec, jobs, [&](int i) {
    IterationSample s;
    s.index = i;
    s.x0 = poses[i];
    const ClassicalReference hover = hover_reference(Vec3::Zero(), UnitQuaternion::identity(), cfg.params);
    SolverConfig sc = cfg.solver;
    sc.mode = SqpMode::full_sqp;
    sc.max_sqp_iter = cfg.study_max_iter;
    dispatch(cfg, c, [&](const auto& model, const auto& ad) {
      using M = std::decay_t<decltype(model)>;
      SqpSolver<M> solver(model, sc);
      const std::vector<typename M::Ref> refs(model.horizon(), ad.ref(hover));
      const auto res = solver.solve(ad.state(poses[i]), refs);
      s.sqp_iters = res.stats.sqp_iters;
      s.status = res.stats.status;
      s.kkt = res.stats.kkt;
    });
    return s;
  });
}

std::vector<double> default_angle_grid() {
  std::vector<double> g(629);
  for (int i = 0; i < 629; ++i) g[i] = 0.01 * i;
  return g;
}

std::vector<CostCurveRow> cost_curves(const std::vector<double>& grid) {
  std::vector<CostCurveRow> rows;
  rows.reserve(grid.size());
  const UnitDualQuaternion id{};
  for (const double th : grid) {
    if (!(th >= 0.0 && th < 2.0 * std::numbers::pi)) {
      throw std::invalid_argument("cost_curves: angle " + std::to_string(th) + " outside [0, 2 pi)");
    }
    const auto r = UnitQuaternion::from_axis_angle(Vec3::UnitX(), th);
    CostCurveRow row;
    row.theta = th;
    row.dq = log_vector(pose_error(id, dq_from_pose(Vec3::Zero(), r))).squaredNorm();
    row.baseline = baseline_orientation_error(UnitQuaternion::identity(), r).squaredNorm();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dqnmpc
