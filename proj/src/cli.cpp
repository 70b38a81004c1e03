#include "tpr/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tpr/harness.hpp"
#include "tpr/io.hpp"
#include "tpr/landscape.hpp"
#include "tpr/version.hpp"

namespace tpr {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitStream = 0x696E6974;  // "init"

struct InstanceArgs {
  Index n = 4;
  Index m = 40;
  std::uint64_t seed = 7;
  std::string instance_path;
};

struct OutputArgs {
  std::string out;
  std::string format = "json";
};

void add_instance_flags(CLI::App* cmd, InstanceArgs& a) {
  cmd->add_option("--n", a.n, "signal dimension")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--m", a.m, "number of measurements")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", a.seed, "base seed")->capture_default_str();
  cmd->add_option("--instance", a.instance_path, "load the instance from a JSON file instead of sampling")
      ->check(CLI::ExistingFile);
}

void add_output_flags(CLI::App* cmd, OutputArgs& o, const char* out_help) {
  cmd->add_option("--out", o.out, out_help);
  cmd->add_option("--format", o.format, "stdout format when --out is not given")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

ProblemInstance<double> resolve_instance(const InstanceArgs& a) {
  if (!a.instance_path.empty()) return instance_from_json(read_json_file(a.instance_path));
  return sample_instance<double>(a.n, a.m, a.seed);
}

Json instance_config(const ProblemInstance<double>& inst, const InstanceArgs& a) {
  Json doc;
  doc["n"] = inst.n();
  doc["m"] = inst.m();
  doc["instance_seed"] = inst.ensemble.seed();
  doc["instance_file"] = a.instance_path.empty() ? Json(nullptr) : Json(a.instance_path);
  return doc;
}

Json with_header(const char* command, Json config) {
  Json doc;
  doc["version"] = kVersion;
  doc["command"] = command;
  doc["config"] = std::move(config);
  return doc;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// Writes `json_doc` or `csv_text` to stdout, or both to files in out_dir.
void emit(const OutputArgs& o, const Json& json_doc, const std::optional<std::string>& csv_text,
          const char* stem) {
  if (o.out.empty()) {
    if (o.format == "csv" && csv_text) {
      std::cout << *csv_text;
    } else {
      std::cout << json_doc.dump(2) << '\n';
    }
    return;
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_json_file(dir / fmt::format("{}_summary.json", stem), json_doc);
  if (csv_text) write_text_file(dir / fmt::format("{}.csv", stem), *csv_text);
}

Json trajectory_summary(const ProblemInstance<double>& inst, const Trajectory<double>& traj, Outcome outcome,
                        std::size_t tail_window) {
  const double md = static_cast<double>(inst.m());
  Json doc;
  doc["classification"] = std::string(to_string(outcome));
  doc["diverged"] = traj.diverged;
  doc["steps"] = traj.steps();
  doc["initial_loss"] = traj.initial_loss;
  doc["final_loss"] = traj.loss.back();
  doc["final_normalized_loss"] = traj.loss.back() / md;
  doc["final_orbit_dist_rel"] = traj.orbit_dist_rel.back();
  doc["tail_slope"] = tail_log_slope(traj, inst.m(), tail_window);
  double margin = traj.certificate_margin.front();
  for (double v : traj.certificate_margin) margin = std::min(margin, v);
  doc["min_certificate_margin"] = finite_or_null(margin);
  return doc;
}

// ---- subcommands ---------------------------------------------------------------

int run_gen(const InstanceArgs& a, const std::string& out) {
  const auto inst = resolve_instance(a);
  const Json doc = instance_to_json(inst);
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json_file(out, doc);
  }
  return 0;
}

struct SolveArgs {
  double eta = 5e-5;
  std::size_t iters = 5000;
  double init_box = 10;
  double stop_tol = 1e-10;
  double loss_tol = 1e-6;
  double dist_tol = 1e-4;
  std::size_t stride = 10;
};

int run_solve(const InstanceArgs& a, const SolveArgs& s, const OutputArgs& o) {
  const auto inst = resolve_instance(a);
  const std::uint64_t init_seed = derive_seed(inst.ensemble.seed(), kInitStream, 0);
  const RealVector<double> x0 = box_initialization<double>(inst.ensemble.embed_dim(), s.init_box, init_seed);
  const auto schedule = StepSchedule<double>::scaled(s.eta, inst.m());
  const auto traj = gd_run(inst, x0, schedule, GdOptions{s.iters, s.stop_tol, s.stride});
  const auto outcome = success_check(inst, traj, s.loss_tol, s.dist_tol);

  Json config = instance_config(inst, a);
  config["init_seed"] = init_seed;
  config["init_box"] = s.init_box;
  config["schedule"] = "scaled";
  config["eta"] = s.eta;
  config["step"] = schedule(0);
  config["iters"] = s.iters;
  config["stop_tol"] = s.stop_tol;
  config["loss_tol"] = s.loss_tol;
  config["dist_tol"] = s.dist_tol;
  Json doc = with_header("solve", config);
  doc["result"] = trajectory_summary(inst, traj, outcome, 1000);
  doc["certificate"] = certificate_to_json(boundedness_certificate(inst, traj));

  std::ostringstream csv;
  write_trajectory_csv(csv, traj, inst.m(), false, doc["config"]);
  emit(o, doc, csv.str(), "trajectory");
  return 0;
}

struct FlowArgs {
  double t_end = 1.0;
  double h = 0;
  std::string method = "rk4";
  double stop_ratio = 1e-6;
  double init_scale = 1.0;
  std::size_t stride = 10;
};

int run_flow(const InstanceArgs& a, const FlowArgs& f, const OutputArgs& o) {
  const auto inst = resolve_instance(a);
  const std::uint64_t init_seed = derive_seed(inst.ensemble.seed(), kInitStream, 0);
  GaussianStream rng(init_seed);
  RealVector<double> x0(inst.ensemble.embed_dim());
  for (Index k = 0; k < x0.size(); ++k) x0[k] = f.init_scale * rng.normal();

  FlowOptions fo;
  fo.t_end = f.t_end;
  fo.h = f.h > 0 ? f.h : default_flow_step(inst, x0);
  fo.method = f.method == "euler" ? FlowMethod::Euler : FlowMethod::RK4;
  fo.stride = f.stride;
  fo.stop_ratio = f.stop_ratio;
  const auto traj = flow_integrate(inst, x0, fo);
  const auto outcome = success_check(inst, traj);

  Json config = instance_config(inst, a);
  config["init_seed"] = init_seed;
  config["init_scale"] = f.init_scale;
  config["t_end"] = f.t_end;
  config["h"] = fo.h;
  config["method"] = f.method;
  config["stop_ratio"] = f.stop_ratio;
  Json doc = with_header("flow", config);
  doc["result"] = trajectory_summary(inst, traj, outcome, 1000);
  doc["result"]["final_time"] = traj.time.back();
  doc["certificate"] = certificate_to_json(boundedness_certificate(inst, traj));

  std::ostringstream csv;
  write_trajectory_csv(csv, traj, inst.m(), true, doc["config"]);
  emit(o, doc, csv.str(), "flow");
  return 0;
}

struct OpNormArgs {
  int restarts = 20;
  int max_iter = 200;
  double tol = 1e-8;
};

int run_opnorm(const InstanceArgs& a, const OpNormArgs& p, const std::string& out) {
  const auto ens = a.instance_path.empty() ? sample_ensemble<double>(a.n, a.m, a.seed)
                                           : resolve_instance(a).ensemble;
  const OpNormOptions opts{p.restarts, p.max_iter, p.tol, derive_seed(ens.seed(), 0x6F706E6F726DULL)};
  const auto est = opnorm_estimate(ens, opts);
  Json config;
  config["n"] = ens.n();
  config["m"] = ens.m();
  config["ensemble_seed"] = ens.seed();
  config["restart_seed"] = opts.seed;
  config["restarts"] = p.restarts;
  config["max_iter"] = p.max_iter;
  config["tol"] = p.tol;
  Json doc = with_header("opnorm", config);
  doc["estimate"] = estimate_to_json(est);
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_json_file(out, doc);
  }
  return 0;
}

struct LandscapeArgs {
  double delta0 = 1e-4;
  double c1 = 40;
  double c2 = 120;
  std::size_t samples = 10000;
  double radius = 3;
  int orbit_points = 16;
};

int run_landscape(const InstanceArgs& a, const LandscapeArgs& l, const OutputArgs& o) {
  const auto inst = resolve_instance(a);
  LandscapeConfig<double> cfg;
  cfg.delta0 = l.delta0;
  cfg.c1 = l.c1;
  cfg.c2 = l.c2;
  cfg = config_for(inst, cfg);
  const std::uint64_t coverage_seed = derive_seed(inst.ensemble.seed(), 0x636F76);
  const auto cov = coverage_check(inst.gt_plus, cfg, l.samples, l.radius, coverage_seed);

  Json config = instance_config(inst, a);
  config["delta0"] = l.delta0;
  config["c1"] = l.c1;
  config["c2"] = l.c2;
  config["c"] = cfg.c;
  config["samples"] = l.samples;
  config["radius"] = l.radius;
  config["coverage_seed"] = coverage_seed;
  Json doc = with_header("landscape", config);
  doc["coverage"] = {{"fraction", cov.fraction},
                     {"points", cov.samples.size()},
                     {"covered", cov.covered},
                     {"uncovered", cov.uncovered.size()}};
  Json points = Json::array();
  for (const auto& cp : g_critical_points(inst.gt_plus, l.orbit_points, derive_seed(coverage_seed, 1))) {
    Json entry = region_report_to_json(classify_point(inst, cp.x, cfg));
    entry["kind"] = std::string(to_string(cp.kind));
    points.push_back(std::move(entry));
  }
  doc["critical_points"] = std::move(points);

  std::ostringstream csv;
  write_coverage_csv(csv, cov, doc["config"]);
  emit(o, doc, csv.str(), "coverage");
  return 0;
}

int run_reproduce(const CampaignSpec& spec, const OutputArgs& o) {
  if (spec.experiment == Experiment::Fig2Grid) {
    const auto result = run_fig2(spec);
    emit(o, fig2_summary(spec, result), fig2_csv(spec, result), "fig2");
  } else {
    const auto result = run_fig3(spec);
    emit(o, fig3_summary(spec, result), fig3_csv(spec, result), "fig3");
  }
  return 0;
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Quartic phase retrieval: instances, descent, landscape diagnostics and experiment campaigns"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  InstanceArgs inst_args;
  OutputArgs out_args;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "sample an instance and write it as JSON");
  add_instance_flags(gen, inst_args);
  gen->add_option("--out", gen_out, "output JSON file (stdout if omitted)");

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "gradient descent from a box initialization");
  add_instance_flags(solve, inst_args);
  add_output_flags(solve, out_args, "output directory for trajectory.csv and trajectory_summary.json");
  solve->add_option("--eta", solve_args.eta, "step on f/m (step on f is eta/m)")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--iters", solve_args.iters, "iteration budget")->capture_default_str();
  solve->add_option("--init-box", solve_args.init_box, "half-width of the initialization box")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--stop-tol", solve_args.stop_tol, "stop once f/m falls below this")->capture_default_str();
  solve->add_option("--stride", solve_args.stride, "iterate thinning stride")->check(CLI::PositiveNumber)->capture_default_str();

  OpNormArgs opnorm_args;
  std::string opnorm_out;
  auto* opnorm = app.add_subcommand("opnorm", "estimate the moment-gap operator norm");
  add_instance_flags(opnorm, inst_args);
  opnorm->add_option("--restarts", opnorm_args.restarts, "random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  opnorm->add_option("--max-iter", opnorm_args.max_iter, "sweeps per restart")->check(CLI::PositiveNumber)->capture_default_str();
  opnorm->add_option("--tol", opnorm_args.tol, "relative improvement tolerance")->capture_default_str();
  opnorm->add_option("--out", opnorm_out, "output JSON file (stdout if omitted)");

  LandscapeArgs landscape_args;
  auto* landscape = app.add_subcommand("landscape", "region coverage and critical-point classification");
  add_instance_flags(landscape, inst_args);
  add_output_flags(landscape, out_args, "output directory for coverage.csv and coverage_summary.json");
  landscape->add_option("--delta0", landscape_args.delta0, "concentration level")->check(CLI::PositiveNumber)->capture_default_str();
  landscape->add_option("--c1", landscape_args.c1, "region 1 constant")->check(CLI::PositiveNumber)->capture_default_str();
  landscape->add_option("--c2", landscape_args.c2, "curvature constant")->check(CLI::PositiveNumber)->capture_default_str();
  landscape->add_option("--samples", landscape_args.samples, "uniform samples in the ball")->capture_default_str();
  landscape->add_option("--radius", landscape_args.radius, "ball radius relative to the ground-truth norm")->check(CLI::PositiveNumber)->capture_default_str();

  FlowArgs flow_args;
  auto* flow = app.add_subcommand("flow", "integrate the gradient flow and check the boundedness certificate");
  add_instance_flags(flow, inst_args);
  add_output_flags(flow, out_args, "output directory for flow.csv and flow_summary.json");
  flow->add_option("--t-end", flow_args.t_end, "final time")->check(CLI::PositiveNumber)->capture_default_str();
  flow->add_option("--step", flow_args.h, "step size (0 selects the default rule)")->check(CLI::NonNegativeNumber)->capture_default_str();
  flow->add_option("--method", flow_args.method, "integrator")->check(CLI::IsMember({"rk4", "euler"}))->capture_default_str();
  flow->add_option("--stop-ratio", flow_args.stop_ratio, "stop once f <= ratio * f(x0); 0 disables")->check(CLI::NonNegativeNumber)->capture_default_str();
  flow->add_option("--init-scale", flow_args.init_scale, "standard deviation of the Gaussian start")->check(CLI::PositiveNumber)->capture_default_str();

  auto* reproduce = app.add_subcommand("reproduce", "run an experiment campaign");
  reproduce->require_subcommand(1);
  CampaignSpec fig2_spec = CampaignSpec::fig2_defaults();
  CampaignSpec fig3_spec = CampaignSpec::fig3_defaults();
  auto add_campaign_flags = [&](CLI::App* cmd, CampaignSpec& spec) {
    cmd->add_option("--n", spec.n_values, "dimensions (repeatable)")->check(CLI::PositiveNumber);
    cmd->add_option("--m", spec.m_values, "measurement counts (repeatable)")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", spec.seed, "base seed")->capture_default_str();
    cmd->add_option("--trials", spec.trials, "trials per cell")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--workers", spec.workers, "worker threads (0 = hardware concurrency)")->capture_default_str();
    add_output_flags(cmd, out_args, "output directory");
  };
  auto* fig2 = reproduce->add_subcommand("fig2", "operator-norm concentration over an (n, m) grid");
  add_campaign_flags(fig2, fig2_spec);
  fig2->add_option("--restarts", fig2_spec.restarts, "random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  fig2->add_option("--max-iter", fig2_spec.max_iter, "sweeps per restart")->check(CLI::PositiveNumber)->capture_default_str();
  auto* fig3 = reproduce->add_subcommand("fig3", "descent loss curves from box initializations");
  add_campaign_flags(fig3, fig3_spec);
  fig3->add_option("--eta", fig3_spec.eta, "step on f/m")->check(CLI::PositiveNumber)->capture_default_str();
  fig3->add_option("--iters", fig3_spec.iters, "iteration budget")->capture_default_str();
  fig3->add_option("--init-box", fig3_spec.init_box, "half-width of the initialization box")->check(CLI::PositiveNumber)->capture_default_str();

  landscape->add_option("--orbit-points", landscape_args.orbit_points, "orbit representatives to classify")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*fig2) fig2_spec.validate();
    if (*fig3) fig3_spec.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*gen) return run_gen(inst_args, gen_out);
    if (*solve) return run_solve(inst_args, solve_args, out_args);
    if (*opnorm) return run_opnorm(inst_args, opnorm_args, opnorm_out);
    if (*landscape) return run_landscape(inst_args, landscape_args, out_args);
    if (*flow) return run_flow(inst_args, flow_args, out_args);
    if (*fig2) return run_reproduce(fig2_spec, out_args);
    if (*fig3) return run_reproduce(fig3_spec, out_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace tpr
