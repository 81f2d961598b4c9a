#include "dqnmpc/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace dqnmpc {

namespace {

using json = nlohmann::json;

SqpMode sqp_mode_from(const std::string& s, const std::string& key) {
  if (s == "full_sqp") return SqpMode::full_sqp;
  if (s == "rti") return SqpMode::rti;
  throw ConfigError(key, "expected full_sqp or rti, got '" + s + "'");
}

StepRule step_rule_from(const std::string& s, const std::string& key) {
  if (s == "full_step") return StepRule::full_step;
  if (s == "backtracking") return StepRule::backtracking;
  throw ConfigError(key, "expected full_step or backtracking, got '" + s + "'");
}

InitStrategy init_from(const std::string& s, const std::string& key) {
  if (s == "reference") return InitStrategy::reference;
  if (s == "rollout") return InitStrategy::rollout;
  throw ConfigError(key, "expected reference or rollout, got '" + s + "'");
}

std::string init_name(InitStrategy i) { return i == InitStrategy::reference ? "reference" : "rollout"; }

// An object whose keys must all be consumed; anything left over is an unknown key.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json* find(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& k, double& out) {
    if (const json* v = find(k)) {
      if (!v->is_number()) throw ConfigError(key_path(k), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& k, int& out) {
    if (const json* v = find(k)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(k), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& k, std::uint64_t& out) {
    if (const json* v = find(k)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        throw ConfigError(key_path(k), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& k, bool& out) {
    if (const json* v = find(k)) {
      if (!v->is_boolean()) throw ConfigError(key_path(k), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& k, std::string& out) {
    if (const json* v = find(k)) {
      if (!v->is_string()) throw ConfigError(key_path(k), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <int n>
  void get(const std::string& k, Eigen::Matrix<double, n, 1>& out) {
    if (const json* v = find(k)) out = vector<n>(*v, key_path(k));
  }
  /// Diagonal as a flat list, or the full matrix as a nested list.
  template <int n>
  void get(const std::string& k, Eigen::Matrix<double, n, n>& out) {
    const json* v = find(k);
    if (!v) return;
    const std::string kp = key_path(k);
    if (!v->is_array() || v->size() != static_cast<size_t>(n)) {
      throw ConfigError(kp, "expected " + std::to_string(n) + " diagonal entries or an " + std::to_string(n) + "x" +
                                std::to_string(n) + " nested list");
    }
    if ((*v)[0].is_array()) {
      for (int i = 0; i < n; ++i) out.row(i) = vector<n>((*v)[i], kp).transpose();
    } else {
      out = vector<n>(*v, kp).asDiagonal();
    }
  }
  template <class F>
  void get_enum(const std::string& k, F&& parse) {
    std::string s;
    get(k, s);
    if (j_.contains(k)) parse(s, key_path(k));
  }

  Section sub(const std::string& k) {
    const json* v = find(k);
    static const json empty = json::object();
    return Section(v ? *v : empty, key_path(k));
  }
  bool has(const std::string& k) const { return j_.contains(k); }
  const json& raw() const { return j_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  template <int n>
  static Eigen::Matrix<double, n, 1> vector(const json& v, const std::string& kp) {
    if (!v.is_array() || v.size() != static_cast<size_t>(n)) {
      throw ConfigError(kp, "expected a list of " + std::to_string(n) + " numbers");
    }
    Eigen::Matrix<double, n, 1> out;
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_number()) throw ConfigError(kp, "expected a list of " + std::to_string(n) + " numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_quadrotor(Section s, QuadrotorParams& p) {
  s.get("mass", p.mass);
  s.get("inertia", p.inertia);
  s.get("gravity", p.gravity);
  s.get("f_min", p.f_min);
  s.get("f_max", p.f_max);
  s.get("tau_min", p.tau_min);
  s.get("tau_max", p.tau_max);
  s.get("drag_c", p.drag_c);
  s.finish();
}

void read_dq_weights(Section s, Weights& w) {
  s.get("Qp", w.Qp);
  s.get("Qv", w.Qv);
  s.get("R", w.R);
  s.get("QpN", w.QpN);
  s.get("QvN", w.QvN);
  s.finish();
}

void read_baseline_weights(Section s, BaselineWeights& w) {
  s.get("Qpos", w.Qpos);
  s.get("Qvel", w.Qvel);
  s.get("Qquat", w.Qquat);
  s.get("Qomega", w.Qomega);
  s.get("Rb", w.Rb);
  s.get("QposN", w.QposN);
  s.get("QvelN", w.QvelN);
  s.get("QquatN", w.QquatN);
  s.get("QomegaN", w.QomegaN);
  s.finish();
}

void read_ocp(Section s, OcpConfig& o) {
  s.get("horizon_s", o.horizon_s);
  s.get("N", o.N);
  s.get("norm_tol", o.norm_tol);
  s.get("fd_jacobians", o.fd_jacobians);
  s.finish();
}

void read_solver(Section s, SolverConfig& c) {
  s.get_enum("mode", [&](const std::string& v, const std::string& k) { c.mode = sqp_mode_from(v, k); });
  s.get("max_sqp_iter", c.max_sqp_iter);
  s.get("tol_kkt", c.tol_kkt);
  s.get_enum("step_rule", [&](const std::string& v, const std::string& k) { c.step_rule = step_rule_from(v, k); });
  s.get("alpha0", c.alpha0);
  s.get("beta", c.beta);
  s.get("armijo_c", c.armijo_c);
  s.get("levenberg", c.levenberg);
  s.get("merit_penalty", c.merit_penalty);
  s.get("min_step", c.min_step);
  s.get("second_order_correction", c.second_order_correction);
  s.get("qp_max_iter", c.qp_max_iter);
  s.get_enum("init", [&](const std::string& v, const std::string& k) { c.init = init_from(v, k); });
  s.finish();
}

void read_trajectory(Section s, TrajectorySpec& t) {
  s.get_enum("kind", [&](const std::string& v, const std::string& k) {
    try {
      t.kind = trajectory_kind_from_string(v);
    } catch (const std::exception& e) {
      throw ConfigError(k, e.what());
    }
  });
  s.get("center", t.center);
  s.get("amplitudes", t.amplitudes);
  s.get("angular_freqs", t.angular_freqs);
  s.get("phases", t.phases);
  s.get_enum("yaw_mode", [&](const std::string& v, const std::string& k) {
    try {
      t.yaw_mode = yaw_mode_from_string(v);
    } catch (const std::exception& e) {
      throw ConfigError(k, e.what());
    }
  });
  s.get("yaw0", t.yaw0);
  s.get("duration", t.duration);
  double v_max = -1.0;
  s.get("v_max", v_max);
  s.finish();
  if (v_max > 0.0) {
    try {
      t = calibrate_max_speed(t, v_max);
    } catch (const std::exception& e) {
      throw ConfigError(s.key_path("v_max"), e.what());
    }
  } else if (s.has("v_max")) {
    throw ConfigError(s.key_path("v_max"), "must be > 0");
  }
}

void read_disturbances(Section s, std::vector<Scenario>& out) {
  double nominal = 0.25;
  s.get("nominal_drag_c", nominal);
  out = robustness_scenarios(nominal);
  if (const json* list = s.find("scenarios")) {
    if (!list->is_array() || list->empty()) throw ConfigError(s.key_path("scenarios"), "expected a non-empty list");
    out.clear();
    for (size_t i = 0; i < list->size(); ++i) {
      Section e((*list)[i], s.key_path("scenarios[" + std::to_string(i) + "]"));
      Scenario sc;
      sc.name = "scenario" + std::to_string(i);
      e.get("name", sc.name);
      e.get("drag_scale", sc.dist.drag_scale);
      e.get("mass_scale", sc.dist.mass_scale);
      e.get("inertia_scale", sc.dist.inertia_scale);
      e.get("ext_force", sc.dist.ext_force);
      e.get("ext_moment", sc.dist.ext_moment);
      e.get("plant_drag_c", sc.plant_drag_c);
      e.finish();
      out.push_back(sc);
    }
  }
  s.finish();
}

void read_experiment(Section s, ExperimentConfig& c) {
  s.get("seed", c.seed);
  s.get("n_samples", c.n_samples);
  s.get_enum("controller", [&](const std::string& v, const std::string& k) {
    try {
      c.controller = controller_selection_from_string(v);
    } catch (const std::exception& e) {
      throw ConfigError(k, e.what());
    }
  });
  s.get("p_min", c.ranges.p_min);
  s.get("p_max", c.ranges.p_max);
  s.get("log_min", c.ranges.log_min);
  s.get("log_max", c.ranges.log_max);
  s.get("sim_duration", c.sim_duration);
  s.get("regulation_rate", c.regulation_rate);
  s.get_enum("regulation_mode", [&](const std::string& v, const std::string& k) { c.regulation_mode = sqp_mode_from(v, k); });
  s.get("pos_tol", c.pos_tol);
  s.get("ori_tol", c.ori_tol);
  s.get("settle_hold", c.settle_hold);
  s.get("control_rate", c.control_rate);
  s.get("tracking_runs", c.tracking_runs);
  s.get("tracking_offset", c.tracking_offset);
  s.get("divergence_threshold", c.divergence_threshold);
  s.get("n_iteration_study", c.n_iteration_study);
  s.get("large_angle_min", c.large_angle_min);
  s.get("large_pos_min", c.large_pos_min);
  s.get("study_max_iter", c.study_max_iter);
  s.finish();
}

template <int n>
json vec_json(const Eigen::Matrix<double, n, 1>& v) {
  json a = json::array();
  for (int i = 0; i < n; ++i) a.push_back(v[i]);
  return a;
}

template <int n>
json mat_json(const Eigen::Matrix<double, n, n>& m) {
  if (m.isDiagonal(0.0)) return vec_json<n>(m.diagonal());
  json a = json::array();
  for (int i = 0; i < n; ++i) a.push_back(vec_json<n>(m.row(i).transpose()));
  return a;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  Section root(doc, "");
  const json* ver = root.find("schema_version");
  if (!ver) throw ConfigError("schema_version", "required field is missing");
  if (!ver->is_number_integer() || ver->get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  ExperimentConfig cfg;
  read_quadrotor(root.sub("quadrotor"), cfg.params);
  cfg.ocp = OcpConfig::from_params(cfg.params);
  {
    Section w = root.sub("weights");
    read_dq_weights(w.sub("dq"), cfg.dq_weights);
    read_baseline_weights(w.sub("baseline"), cfg.baseline_weights);
    w.finish();
  }
  read_ocp(root.sub("ocp"), cfg.ocp);
  read_solver(root.sub("solver"), cfg.solver);
  read_trajectory(root.sub("trajectory"), cfg.trajectory);
  read_disturbances(root.sub("disturbances"), cfg.scenarios);
  read_experiment(root.sub("experiment"), cfg);
  root.finish();

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  const auto& p = c.params;
  j["quadrotor"] = {{"mass", p.mass},   {"inertia", vec_json<3>(p.inertia)}, {"gravity", p.gravity},
                    {"f_min", p.f_min}, {"f_max", p.f_max},                  {"tau_min", vec_json<3>(p.tau_min)},
                    {"tau_max", vec_json<3>(p.tau_max)}, {"drag_c", p.drag_c}};
  const auto& w = c.dq_weights;
  const auto& b = c.baseline_weights;
  j["weights"]["dq"] = {{"Qp", mat_json<6>(w.Qp)}, {"Qv", mat_json<6>(w.Qv)}, {"R", mat_json<6>(w.R)},
                        {"QpN", mat_json<6>(w.QpN)}, {"QvN", mat_json<6>(w.QvN)}};
  j["weights"]["baseline"] = {{"Qpos", mat_json<3>(b.Qpos)},   {"Qvel", mat_json<3>(b.Qvel)},
                              {"Qquat", mat_json<3>(b.Qquat)}, {"Qomega", mat_json<3>(b.Qomega)},
                              {"Rb", mat_json<4>(b.Rb)},       {"QposN", mat_json<3>(b.QposN)},
                              {"QvelN", mat_json<3>(b.QvelN)}, {"QquatN", mat_json<3>(b.QquatN)},
                              {"QomegaN", mat_json<3>(b.QomegaN)}};
  j["ocp"] = {{"horizon_s", c.ocp.horizon_s}, {"N", c.ocp.N}, {"norm_tol", c.ocp.norm_tol},
              {"fd_jacobians", c.ocp.fd_jacobians}};
  const auto& s = c.solver;
  j["solver"] = {{"mode", to_string(s.mode)},
                 {"max_sqp_iter", s.max_sqp_iter},
                 {"tol_kkt", s.tol_kkt},
                 {"step_rule", to_string(s.step_rule)},
                 {"alpha0", s.alpha0},
                 {"beta", s.beta},
                 {"armijo_c", s.armijo_c},
                 {"levenberg", s.levenberg},
                 {"merit_penalty", s.merit_penalty},
                 {"min_step", s.min_step},
                 {"second_order_correction", s.second_order_correction},
                 {"qp_max_iter", s.qp_max_iter},
                 {"init", init_name(s.init)}};
  const auto& t = c.trajectory;
  j["trajectory"] = {{"kind", to_string(t.kind)},
                     {"center", vec_json<3>(t.center)},
                     {"amplitudes", vec_json<3>(t.amplitudes)},
                     {"angular_freqs", vec_json<3>(t.angular_freqs)},
                     {"phases", vec_json<3>(t.phases)},
                     {"yaw_mode", to_string(t.yaw_mode)},
                     {"yaw0", t.yaw0},
                     {"duration", t.duration}};
  json sc = json::array();
  for (const auto& e : c.scenarios) {
    sc.push_back({{"name", e.name},
                  {"drag_scale", e.dist.drag_scale},
                  {"mass_scale", e.dist.mass_scale},
                  {"inertia_scale", e.dist.inertia_scale},
                  {"ext_force", vec_json<3>(e.dist.ext_force)},
                  {"ext_moment", vec_json<3>(e.dist.ext_moment)},
                  {"plant_drag_c", e.plant_drag_c}});
  }
  j["disturbances"] = {{"scenarios", sc}};
  j["experiment"] = {{"seed", c.seed},
                     {"n_samples", c.n_samples},
                     {"controller", to_string(c.controller)},
                     {"p_min", vec_json<3>(c.ranges.p_min)},
                     {"p_max", vec_json<3>(c.ranges.p_max)},
                     {"log_min", c.ranges.log_min},
                     {"log_max", c.ranges.log_max},
                     {"sim_duration", c.sim_duration},
                     {"regulation_rate", c.regulation_rate},
                     {"regulation_mode", to_string(c.regulation_mode)},
                     {"pos_tol", c.pos_tol},
                     {"ori_tol", c.ori_tol},
                     {"settle_hold", c.settle_hold},
                     {"control_rate", c.control_rate},
                     {"tracking_runs", c.tracking_runs},
                     {"tracking_offset", c.tracking_offset},
                     {"divergence_threshold", c.divergence_threshold},
                     {"n_iteration_study", c.n_iteration_study},
                     {"large_angle_min", c.large_angle_min},
                     {"large_pos_min", c.large_pos_min},
                     {"study_max_iter", c.study_max_iter}};
  return j.dump(2) + "\n";
}

}  // namespace dqnmpc
