#pragma once

// Experiment campaigns: operator-norm concentration over an (n, m) grid and
// gradient descent loss curves from box initializations. Cells and trials run
// on a worker pool; results are collected by grid index so output bytes do
// not depend on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "tpr/dynamics.hpp"
#include "tpr/io.hpp"
#include "tpr/tensor_ops.hpp"

namespace tpr {

enum class Experiment { Fig2Grid, Fig3Loss, OpNormSingle, SolveSingle, Landscape, Flow };

std::string_view to_string(Experiment e);

struct CampaignSpec {
  Experiment experiment = Experiment::Fig2Grid;
  std::vector<Index> n_values;
  std::vector<Index> m_values;
  int trials = 5;
  std::uint64_t seed = 7;

  // descent
  double eta = 5e-5;
  std::size_t iters = 5000;
  double init_box = 10;
  double stop_tol = 1e-10;
  double loss_tol = 1e-6;
  double dist_tol = 1e-4;
  std::size_t tail_window = 1000;

  // operator norm
  int restarts = 20;
  int max_iter = 200;
  double tol = 1e-8;

  // landscape
  double delta0 = 1e-4;
  double c1 = 40;
  double c2 = 120;

  std::filesystem::path out;
  unsigned workers = 0;  // 0 selects the hardware concurrency

  static CampaignSpec fig2_defaults();
  static CampaignSpec fig3_defaults();

  /// Throws std::invalid_argument on empty grids, nonpositive counts or steps.
  void validate() const;
  /// The resolved configuration (output path and worker count excluded).
  Json to_json() const;
};

struct Fig2Cell {
  Index n = 0;
  Index m = 0;
  double mean = 0;
  double std = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  int converged = 0;
  std::vector<double> values;
  std::vector<std::uint64_t> ensemble_seeds;
};

struct Fig2Result {
  std::vector<Fig2Cell> cells;  // n-major, then m, in grid order
};

struct Fig3Trial {
  int trial = 0;
  std::uint64_t init_seed = 0;
  Outcome outcome = Outcome::Stalled;
  std::size_t steps = 0;
  double final_normalized_loss = 0;
  double final_orbit_dist_rel = 0;
  double tail_slope = 0;
  std::vector<double> normalized_loss;
};

struct Fig3Panel {
  Index m = 0;
  std::uint64_t instance_seed = 0;
  int successes = 0;
  std::vector<Fig3Trial> trials;
};

struct Fig3Result {
  Index n = 0;
  std::vector<Fig3Panel> panels;  // in m-grid order
};

/// Seed of the trial-th ensemble in cell (n, m).
std::uint64_t fig2_ensemble_seed(std::uint64_t seed, Index n, Index m, int trial);
/// Seed of the instance drawn for panel m.
std::uint64_t fig3_instance_seed(std::uint64_t seed, Index n, Index m);
/// Seed of the trial-th box initialization for an instance.
std::uint64_t fig3_init_seed(std::uint64_t instance_seed, int trial);

Fig2Result run_fig2(const CampaignSpec& spec);
Fig3Result run_fig3(const CampaignSpec& spec);

/// Columns n, m, mean_opnorm, std, trials, seed, converged.
std::string fig2_csv(const CampaignSpec& spec, const Fig2Result& result);
/// Long format: m, trial, k, normalized_loss.
std::string fig3_csv(const CampaignSpec& spec, const Fig3Result& result);
Json fig2_summary(const CampaignSpec& spec, const Fig2Result& result);
Json fig3_summary(const CampaignSpec& spec, const Fig3Result& result);

/// Runs body(i) for i in [0, count) on up to `workers` threads. The first
/// exception by index is rethrown after all tasks finish.
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) run(i);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace tpr
