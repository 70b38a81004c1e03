#include "tpr/harness.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "tpr/version.hpp"

namespace tpr {

namespace {

constexpr std::uint64_t kFig2Stream = 0x66696732;      // "fig2"
constexpr std::uint64_t kFig3Stream = 0x66696733;      // "fig3"
constexpr std::uint64_t kInitStream = 0x696E6974;      // "init"
constexpr std::uint64_t kOpNormStream = 0x6F706E6F726D;  // "opnorm"

std::uint64_t grid_key(Index n, Index m) {
  return (static_cast<std::uint64_t>(n) << 32) ^ static_cast<std::uint64_t>(m);
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Fig2Grid: return "fig2";
    case Experiment::Fig3Loss: return "fig3";
    case Experiment::OpNormSingle: return "opnorm";
    case Experiment::SolveSingle: return "solve";
    case Experiment::Landscape: return "landscape";
    case Experiment::Flow: return "flow";
  }
  return "unknown";
}

CampaignSpec CampaignSpec::fig2_defaults() {
  CampaignSpec s;
  s.experiment = Experiment::Fig2Grid;
  s.n_values = {1, 2};
  s.m_values = {250, 500, 1000, 2000, 4000};
  s.trials = 5;
  return s;
}

CampaignSpec CampaignSpec::fig3_defaults() {
  CampaignSpec s;
  s.experiment = Experiment::Fig3Loss;
  s.n_values = {4};
  s.m_values = {10, 20, 30, 40};
  s.trials = 20;
  return s;
}

void CampaignSpec::validate() const {
  if (n_values.empty() || m_values.empty()) throw std::invalid_argument("campaign: grids must be nonempty");
  for (Index n : n_values)
    if (n < 1) throw std::invalid_argument("campaign: n must be >= 1");
  for (Index m : m_values)
    if (m < 1) throw std::invalid_argument("campaign: m must be >= 1");
  if (trials < 1) throw std::invalid_argument("campaign: trials must be >= 1");
  if (!(eta > 0) || !std::isfinite(eta)) throw std::invalid_argument("campaign: eta must be positive");
  if (!(init_box > 0)) throw std::invalid_argument("campaign: init box must be positive");
  if (restarts < 1) throw std::invalid_argument("campaign: restarts must be >= 1");
  if (max_iter < 1) throw std::invalid_argument("campaign: max_iter must be >= 1");
  if (!(delta0 > 0) || !(c1 > 0) || !(c2 > 0)) throw std::invalid_argument("campaign: delta0, c1, c2 must be positive");
  if (experiment == Experiment::Fig3Loss && n_values.size() != 1)
    throw std::invalid_argument("campaign: fig3 takes a single n");
}

Json CampaignSpec::to_json() const {
  Json doc;
  doc["experiment"] = std::string(to_string(experiment));
  doc["n"] = n_values;
  doc["m"] = m_values;
  doc["trials"] = trials;
  doc["seed"] = seed;
  switch (experiment) {
    case Experiment::Fig2Grid:
    case Experiment::OpNormSingle:
      doc["restarts"] = restarts;
      doc["max_iter"] = max_iter;
      doc["tol"] = tol;
      break;
    case Experiment::Fig3Loss:
    case Experiment::SolveSingle:
      doc["schedule"] = "scaled";
      doc["eta"] = eta;
      doc["iters"] = iters;
      doc["init_box"] = init_box;
      doc["stop_tol"] = stop_tol;
      doc["loss_tol"] = loss_tol;
      doc["dist_tol"] = dist_tol;
      doc["tail_window"] = tail_window;
      break;
    case Experiment::Landscape:
      doc["delta0"] = delta0;
      doc["c1"] = c1;
      doc["c2"] = c2;
      break;
    case Experiment::Flow:
      break;
  }
  return doc;
}

std::uint64_t fig2_ensemble_seed(std::uint64_t seed, Index n, Index m, int trial) {
  return derive_seed(derive_seed(seed, kFig2Stream, grid_key(n, m)), static_cast<std::uint64_t>(trial));
}

std::uint64_t fig3_instance_seed(std::uint64_t seed, Index n, Index m) {
  return derive_seed(seed, kFig3Stream, grid_key(n, m));
}

std::uint64_t fig3_init_seed(std::uint64_t instance_seed, int trial) {
  return derive_seed(instance_seed, kInitStream, static_cast<std::uint64_t>(trial));
}

Fig2Result run_fig2(const CampaignSpec& spec) {
  spec.validate();
  struct Task {
    std::size_t cell;
    int trial;
  };
  Fig2Result result;
  std::vector<Task> tasks;
  for (Index n : spec.n_values)
    for (Index m : spec.m_values) {
      Fig2Cell cell;
      cell.n = n;
      cell.m = m;
      cell.trials = spec.trials;
      cell.seed = spec.seed;
      cell.values.assign(static_cast<std::size_t>(spec.trials), 0.0);
      cell.ensemble_seeds.assign(static_cast<std::size_t>(spec.trials), 0);
      for (int t = 0; t < spec.trials; ++t) tasks.push_back({result.cells.size(), t});
      result.cells.push_back(std::move(cell));
    }

  std::vector<char> converged(tasks.size(), 0);
  parallel_for(tasks.size(), spec.workers, [&](std::size_t i) {
    auto& cell = result.cells[tasks[i].cell];
    const auto t = static_cast<std::size_t>(tasks[i].trial);
    const std::uint64_t ens_seed = fig2_ensemble_seed(spec.seed, cell.n, cell.m, tasks[i].trial);
    const auto ens = sample_ensemble<double>(cell.n, cell.m, ens_seed);
    const OpNormOptions opts{spec.restarts, spec.max_iter, spec.tol, derive_seed(ens_seed, kOpNormStream)};
    const auto est = opnorm_estimate(ens, opts);
    cell.values[t] = est.value;
    cell.ensemble_seeds[t] = ens_seed;
    converged[i] = est.converged ? 1 : 0;
  });

  for (std::size_t i = 0; i < tasks.size(); ++i) result.cells[tasks[i].cell].converged += converged[i];
  for (auto& cell : result.cells) {
    const double count = static_cast<double>(cell.values.size());
    cell.mean = std::accumulate(cell.values.begin(), cell.values.end(), 0.0) / count;
    double ss = 0;
    for (double v : cell.values) ss += (v - cell.mean) * (v - cell.mean);
    cell.std = cell.values.size() > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
  }
  return result;
}

Fig3Result run_fig3(const CampaignSpec& spec) {
  spec.validate();
  Fig3Result result;
  result.n = spec.n_values.front();
  std::vector<ProblemInstance<double>> instances;
  for (Index m : spec.m_values) {
    Fig3Panel panel;
    panel.m = m;
    panel.instance_seed = fig3_instance_seed(spec.seed, result.n, m);
    panel.trials.resize(static_cast<std::size_t>(spec.trials));
    instances.push_back(sample_instance<double>(result.n, m, panel.instance_seed));
    result.panels.push_back(std::move(panel));
  }

  const std::size_t per_panel = static_cast<std::size_t>(spec.trials);
  const GdOptions gd{spec.iters, spec.stop_tol, 10};
  parallel_for(result.panels.size() * per_panel, spec.workers, [&](std::size_t i) {
    auto& panel = result.panels[i / per_panel];
    const auto& inst = instances[i / per_panel];
    const int t = static_cast<int>(i % per_panel);
    Fig3Trial& trial = panel.trials[static_cast<std::size_t>(t)];
    trial.trial = t;
    trial.init_seed = fig3_init_seed(panel.instance_seed, t);
    const RealVector<double> x0 = box_initialization<double>(inst.ensemble.embed_dim(), spec.init_box, trial.init_seed);
    const auto traj = gd_run(inst, x0, StepSchedule<double>::scaled(spec.eta, inst.m()), gd);
    const double md = static_cast<double>(inst.m());
    trial.outcome = success_check(inst, traj, spec.loss_tol, spec.dist_tol);
    trial.steps = traj.steps();
    trial.final_normalized_loss = traj.loss.back() / md;
    trial.final_orbit_dist_rel = traj.orbit_dist_rel.back();
    trial.tail_slope = tail_log_slope(traj, inst.m(), spec.tail_window);
    trial.normalized_loss.reserve(traj.loss.size());
    for (double f : traj.loss) trial.normalized_loss.push_back(f / md);
  });

  for (auto& panel : result.panels)
    for (const auto& trial : panel.trials) panel.successes += trial.outcome == Outcome::ConvergedGlobal ? 1 : 0;
  return result;
}

std::string fig2_csv(const CampaignSpec& spec, const Fig2Result& result) {
  std::ostringstream out;
  write_provenance(out, spec.to_json());
  out << "n,m,mean_opnorm,std,trials,seed,converged\n";
  for (const auto& c : result.cells)
    out << fmt::format("{},{},{},{},{},{},{}\n", c.n, c.m, c.mean, c.std, c.trials, c.seed, c.converged);
  return out.str();
}

std::string fig3_csv(const CampaignSpec& spec, const Fig3Result& result) {
  std::ostringstream out;
  write_provenance(out, spec.to_json());
  out << "m,trial,k,normalized_loss\n";
  std::string buffer;
  for (const auto& panel : result.panels)
    for (const auto& trial : panel.trials) {
      buffer.clear();
      for (std::size_t k = 0; k < trial.normalized_loss.size(); ++k)
        fmt::format_to(std::back_inserter(buffer), "{},{},{},{}\n", panel.m, trial.trial, k, trial.normalized_loss[k]);
      out << buffer;
    }
  return out.str();
}

Json fig2_summary(const CampaignSpec& spec, const Fig2Result& result) {
  Json doc;
  doc["version"] = kVersion;
  doc["config"] = spec.to_json();
  Json cells = Json::array();
  for (const auto& c : result.cells) {
    Json cell;
    cell["n"] = c.n;
    cell["m"] = c.m;
    cell["mean_opnorm"] = c.mean;
    cell["std"] = c.std;
    cell["trials"] = c.trials;
    cell["converged"] = c.converged;
    cell["values"] = c.values;
    cell["ensemble_seeds"] = c.ensemble_seeds;
    cells.push_back(std::move(cell));
  }
  doc["cells"] = std::move(cells);
  return doc;
}

Json fig3_summary(const CampaignSpec& spec, const Fig3Result& result) {
  Json doc;
  doc["version"] = kVersion;
  doc["config"] = spec.to_json();
  doc["n"] = result.n;
  Json panels = Json::array();
  for (const auto& p : result.panels) {
    Json panel;
    panel["m"] = p.m;
    panel["instance_seed"] = p.instance_seed;
    panel["successes"] = p.successes;
    panel["trials"] = p.trials.size();
    Json trials = Json::array();
    for (const auto& t : p.trials) {
      Json tj;
      tj["trial"] = t.trial;
      tj["init_seed"] = t.init_seed;
      tj["outcome"] = std::string(to_string(t.outcome));
      tj["steps"] = t.steps;
      tj["final_normalized_loss"] = t.final_normalized_loss;
      tj["final_orbit_dist_rel"] = t.final_orbit_dist_rel;
      tj["tail_slope"] = t.tail_slope;
      trials.push_back(std::move(tj));
    }
    panel["runs"] = std::move(trials);
    panels.push_back(std::move(panel));
  }
  doc["panels"] = std::move(panels);
  return doc;
}

}  // namespace tpr
