#include "dqnmpc/cli.hpp"

#include "dqnmpc/config.hpp"
#include "dqnmpc/report.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <ostream>

namespace dqnmpc {

namespace {

struct Options {
  std::string config;
  std::string out;
  int jobs{0};
  bool smoke{false};
  std::vector<double> grid;
  int points{0};
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (const char* s = std::getenv("DQNMPC_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || *end != '\0' || s[0] == '-') throw ConfigError("DQNMPC_SEED", "not an unsigned integer: " + std::string(s));
    cfg.seed = v;
  }
  if (o.smoke) cfg = cfg.smoke();
  return cfg;
}

int regulate_cmd(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto r = regulate(cfg, ExecPolicy::parallel, o.jobs);
  write_regulation(r, o.out);
  for (ControllerKind c : controllers(cfg.controller)) {
    const auto m = compute_metrics(runs_of(r.runs, c));
    out << to_string(c) << ": convergence " << m.convergence_rate * 100.0 << "% of " << m.n_runs << " runs";
    if (r.study.count(c)) out << ", mean SQP iterations (large errors) " << iteration_summary(r.study.at(c)).iters.mean;
    out << '\n';
  }
  out << "wrote " << o.out << " in " << r.wall_time << " s\n";
  return kExitOk;
}

int track_cmd(const Options& o, std::ostream& out) {
  const auto cfg = load(o);
  const auto r = track(cfg, ExecPolicy::parallel, o.jobs);
  write_tracking(r, o.out);
  out << table_text(robustness_table(r));
  out << "wrote " << o.out << " in " << r.wall_time << " s\n";
  return kExitOk;
}

int costcurves_cmd(const Options& o, std::ostream& out) {
  if (!o.config.empty()) load(o);  // only validated; the curves have no parameters
  std::vector<double> grid = o.grid;
  if (grid.empty() && o.points > 0) {
    for (int i = 0; i < o.points; ++i) grid.push_back(o.points == 1 ? 0.0 : 2.0 * M_PI * i / o.points);
  }
  if (grid.empty()) grid = default_angle_grid();
  const auto rows = cost_curves(grid);
  write_cost_curves(rows, o.out);
  out << "wrote " << rows.size() << " rows to " << o.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-quaternion NMPC quadrotor experiments"};
  app.require_subcommand(1);
  Options o;
  o.jobs = omp_get_num_procs();

  auto common = [&](CLI::App* sub, bool campaign) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    if (campaign) {
      sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
      sub->add_flag("--smoke", o.smoke, "at most 10 samples and 5 s durations");
    }
  };
  auto* reg = app.add_subcommand("regulate", "pose regulation Monte Carlo and SQP iteration study");
  common(reg, true);
  auto* trk = app.add_subcommand("track", "Lissajous tracking under the disturbance scenarios");
  common(trk, true);
  auto* cc = app.add_subcommand("costcurves", "orientation cost versus rotation angle");
  common(cc, false);
  cc->add_option("--grid", o.grid, "comma separated angles in [0, 2pi)")->delimiter(',');
  cc->add_option("--points", o.points, "uniform grid of n points on [0, 2pi)")->check(CLI::PositiveNumber);
  // keep these accepted for a uniform command line
  cc->add_option("--jobs", o.jobs);
  cc->add_flag("--smoke", o.smoke);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      for (auto* s : {reg, trk, cc}) {
        if (s->parsed()) out << s->help();
      }
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (reg->parsed()) return regulate_cmd(o, out);
    if (trk->parsed()) return track_cmd(o, out);
    return costcurves_cmd(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    // e.g. a cost-curve grid outside [0, 2pi)
    err << "invalid argument: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace dqnmpc
