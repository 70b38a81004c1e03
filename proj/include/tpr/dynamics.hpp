#pragma once

// Gradient descent and gradient-flow integration on f, the per-measurement
// boundedness certificate along a trajectory, and success diagnostics.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tpr/complex_embed.hpp"
#include "tpr/ensemble.hpp"
#include "tpr/objective.hpp"
#include "tpr/types.hpp"

namespace tpr {

inline constexpr double kDivergenceThreshold = 1e12;

/// Step sizes alpha_k. A Sequence holds its last entry once exhausted, so
/// every schedule emits infinitely many steps.
template <typename Scalar>
class StepSchedule {
 public:
  enum class Kind { Fixed, Sequence, Scaled };

  static StepSchedule fixed(Scalar alpha, Scalar alpha_bar = kNoCap) {
    return StepSchedule(Kind::Fixed, {alpha}, alpha, alpha_bar);
  }
  /// alpha_hat / m, i.e. a fixed step on the normalized loss f/m.
  static StepSchedule scaled(Scalar alpha_hat, Index m, Scalar alpha_bar = kNoCap) {
    if (m < 1) throw std::invalid_argument("StepSchedule: m must be >= 1");
    return StepSchedule(Kind::Scaled, {alpha_hat / static_cast<Scalar>(m)}, alpha_hat, alpha_bar);
  }
  static StepSchedule sequence(std::vector<Scalar> steps, Scalar alpha_bar = kNoCap) {
    if (steps.empty()) throw std::invalid_argument("StepSchedule: empty sequence");
    return StepSchedule(Kind::Sequence, std::move(steps), Scalar(0), alpha_bar);
  }

  Scalar operator()(std::size_t k) const { return steps_[std::min(k, steps_.size() - 1)]; }
  Kind kind() const { return kind_; }
  /// The configured parameter: alpha for Fixed, alpha_hat for Scaled.
  Scalar parameter() const { return parameter_; }
  Scalar alpha_bar() const { return alpha_bar_; }
  const std::vector<Scalar>& steps() const { return steps_; }

  static constexpr Scalar kNoCap = std::numeric_limits<Scalar>::infinity();

 private:
  StepSchedule(Kind kind, std::vector<Scalar> steps, Scalar parameter, Scalar alpha_bar)
      : kind_(kind), steps_(std::move(steps)), parameter_(parameter), alpha_bar_(alpha_bar) {
    if (!(alpha_bar_ > 0)) throw std::invalid_argument("StepSchedule: alpha_bar must be positive");
    for (Scalar a : steps_) {
      if (!(a > 0) || !std::isfinite(a)) throw std::invalid_argument("StepSchedule: steps must be positive and finite");
      if (a > alpha_bar_) throw std::invalid_argument("StepSchedule: step exceeds alpha_bar");
    }
  }

  Kind kind_;
  std::vector<Scalar> steps_;
  Scalar parameter_;
  Scalar alpha_bar_;
};

constexpr std::string_view to_string(StepSchedule<double>::Kind k) {
  switch (k) {
    case StepSchedule<double>::Kind::Fixed: return "fixed";
    case StepSchedule<double>::Kind::Sequence: return "sequence";
    case StepSchedule<double>::Kind::Scaled: return "scaled";
  }
  return "unknown";
}

/// Per-step series for states x_0, ..., x_K. `time` is the step index for GD
/// and t = k h for the flow. Iterates are thinned to every `stride`-th state
/// plus the final one.
template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> time;
  std::vector<Scalar> loss;
  std::vector<Scalar> orbit_dist_rel;
  std::vector<Scalar> certificate_margin;
  std::vector<std::size_t> iterate_index;
  std::vector<RealVector<Scalar>> iterates;
  Scalar initial_loss = 0;
  bool diverged = false;
  double wall_time = 0;

  std::size_t steps() const { return loss.empty() ? 0 : loss.size() - 1; }
  const RealVector<Scalar>& final_state() const { return iterates.back(); }
};

namespace detail {

template <typename Scalar>
bool escaped(const RealVector<Scalar>& x) {
  return !x.allFinite() || x.cwiseAbs().maxCoeff() > Scalar(kDivergenceThreshold);
}

/// sqrt(2 f(x0) + 2 y_i^2), the per-measurement cap on <A_i x, x>.
template <typename Scalar>
RealVector<Scalar> certificate_bounds(const ProblemInstance<Scalar>& inst, Scalar f0) {
  return (2 * f0 + 2 * inst.measurements.array().square()).sqrt().matrix();
}

/// Shared bookkeeping for GD and the flow: records series for every state and
/// keeps thinned iterates.
template <typename Scalar>
class Recorder {
 public:
  Recorder(const ProblemInstance<Scalar>& inst, const RealVector<Scalar>& x0, std::size_t stride)
      : inst_(inst), stride_(std::max<std::size_t>(stride, 1)), g_norm_(inst.gt_plus.norm()) {
    const auto s0 = residual_state(inst, x0);
    traj_.initial_loss = f_value(s0);
    bounds_ = certificate_bounds(inst, traj_.initial_loss);
  }

  /// Records state k with its residual state; returns f(x).
  Scalar record(std::size_t k, Scalar t, const RealVector<Scalar>& x, const ResidualState<Scalar>& s) {
    const Scalar f = f_value(s);
    traj_.time.push_back(t);
    traj_.loss.push_back(f);
    traj_.orbit_dist_rel.push_back(embedded_dist_to_orbit(x, inst_.gt_plus) / g_norm_);
    traj_.certificate_margin.push_back((bounds_ - s.quad).minCoeff());
    if (k % stride_ == 0) {
      traj_.iterate_index.push_back(k);
      traj_.iterates.push_back(x);
    }
    return f;
  }

  Trajectory<Scalar> finish(std::size_t k, const RealVector<Scalar>& x, double wall) {
    if (traj_.iterate_index.empty() || traj_.iterate_index.back() != k) {
      traj_.iterate_index.push_back(k);
      traj_.iterates.push_back(x);
    }
    traj_.wall_time = wall;
    return std::move(traj_);
  }

  Trajectory<Scalar>& trajectory() { return traj_; }

 private:
  const ProblemInstance<Scalar>& inst_;
  std::size_t stride_;
  Scalar g_norm_;
  RealVector<Scalar> bounds_;
  Trajectory<Scalar> traj_;
};

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename Scalar>
void check_start(const ProblemInstance<Scalar>& inst, const RealVector<Scalar>& x0) {
  if (x0.size() != inst.ensemble.embed_dim()) throw std::invalid_argument("dynamics: dimension mismatch");
  if (!x0.allFinite()) throw std::invalid_argument("dynamics: non-finite initial point");
}

/// x - alpha grad f(x). The flow's Euler step calls this same function.
template <typename Scalar>
RealVector<Scalar> descent_step(const RealVector<Scalar>& x, const RealVector<Scalar>& grad, Scalar alpha) {
  return x - alpha * grad;
}

}  // namespace detail

struct GdOptions {
  std::size_t max_iter = 5000;
  double stop_tol = 1e-10;  // on f/m
  std::size_t stride = 10;
};

/// x_{k+1} = x_k - alpha_k grad f(x_k).
template <typename Scalar>
Trajectory<Scalar> gd_run(const ProblemInstance<Scalar>& inst, const RealVector<Scalar>& x0,
                          const StepSchedule<Scalar>& schedule, const GdOptions& opts = {}) {
  detail::check_start(inst, x0);
  const auto start = std::chrono::steady_clock::now();
  const Scalar m = static_cast<Scalar>(inst.m());
  detail::Recorder<Scalar> rec(inst, x0, opts.stride);
  RealVector<Scalar> x = x0;
  std::size_t k = 0;
  for (;; ++k) {
    const auto s = residual_state(inst, x);
    const Scalar f = rec.record(k, static_cast<Scalar>(k), x, s);
    if (k >= opts.max_iter || f / m <= static_cast<Scalar>(opts.stop_tol)) break;
    RealVector<Scalar> next = detail::descent_step(x, f_grad(inst, s), schedule(k));
    if (detail::escaped(next)) {
      rec.trajectory().diverged = true;
      break;
    }
    x = std::move(next);
  }
  return rec.finish(k, x, detail::seconds_since(start));
}

enum class FlowMethod { Euler, RK4 };

struct FlowOptions {
  double t_end = 1.0;
  double h = 0;             // 0 selects default_flow_step
  FlowMethod method = FlowMethod::RK4;
  std::size_t stride = 10;
  double stop_ratio = 0;    // stop once f <= stop_ratio f(x0); 0 disables
  std::size_t max_steps = 10'000'000;
};

/// min(1e-4, 0.1 / L) with L = 12 sum_i ||a_i+||^4 (||x0||^2 + ||x_gt||^2),
/// which bounds ||H_f|| on the ball of radius ||x0||.
template <typename Scalar>
Scalar default_flow_step(const ProblemInstance<Scalar>& inst, const RealVector<Scalar>& x0) {
  const Scalar a4 = inst.ensemble.plus().rowwise().squaredNorm().array().square().sum();
  const Scalar curvature = 12 * a4 * (x0.squaredNorm() + inst.gt_plus.squaredNorm());
  if (curvature == Scalar(0)) return Scalar(1e-4);
  return std::min(Scalar(1e-4), Scalar(0.1) / curvature);
}

/// Fixed-step integration of x' = -grad f(x) up to t_end.
template <typename Scalar>
Trajectory<Scalar> flow_integrate(const ProblemInstance<Scalar>& inst, const RealVector<Scalar>& x0,
                                  const FlowOptions& opts = {}) {
  detail::check_start(inst, x0);
  if (opts.h < 0) throw std::invalid_argument("flow_integrate: h must be positive");
  if (!(opts.t_end >= 0)) throw std::invalid_argument("flow_integrate: t_end must be nonnegative");
  const auto start = std::chrono::steady_clock::now();
  const Scalar h = opts.h > 0 ? static_cast<Scalar>(opts.h) : default_flow_step(inst, x0);
  const auto total = static_cast<std::size_t>(std::ceil(opts.t_end / static_cast<double>(h) - 1e-9));
  const std::size_t steps = std::min(total, opts.max_steps);

  detail::Recorder<Scalar> rec(inst, x0, opts.stride);
  const Scalar stop_level = static_cast<Scalar>(opts.stop_ratio) * rec.trajectory().initial_loss;
  RealVector<Scalar> x = x0;
  std::size_t k = 0;
  for (;; ++k) {
    const auto s = residual_state(inst, x);
    const Scalar f = rec.record(k, static_cast<Scalar>(k) * h, x, s);
    if (k >= steps || (opts.stop_ratio > 0 && f <= stop_level)) break;
    const RealVector<Scalar> k1 = f_grad(inst, s);
    RealVector<Scalar> next;
    if (opts.method == FlowMethod::Euler) {
      next = detail::descent_step(x, k1, h);
    } else {
      const RealVector<Scalar> k2 = f_grad(inst, RealVector<Scalar>(x - (h / 2) * k1));
      const RealVector<Scalar> k3 = f_grad(inst, RealVector<Scalar>(x - (h / 2) * k2));
      const RealVector<Scalar> k4 = f_grad(inst, RealVector<Scalar>(x - h * k3));
      next = x - (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    if (detail::escaped(next)) {
      rec.trajectory().diverged = true;
      break;
    }
    x = std::move(next);
  }
  return rec.finish(k, x, detail::seconds_since(start));
}

template <typename Scalar>
struct CertificateReport {
  RealVector<Scalar> per_measurement;  // min over recorded states of bound_i - q_i(x)
  Scalar min_margin;
  std::size_t states_checked;
};

/// Checks <A_i x, x> <= sqrt(2 f(x0) + 2 y_i^2) on the stored iterates
/// (thinned states plus the endpoint).
template <typename Scalar>
CertificateReport<Scalar> boundedness_certificate(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& traj) {
  if (traj.iterates.empty()) throw std::invalid_argument("boundedness_certificate: no stored iterates");
  const RealVector<Scalar> bounds = detail::certificate_bounds(inst, traj.initial_loss);
  RealVector<Scalar> margin = RealVector<Scalar>::Constant(inst.m(), std::numeric_limits<Scalar>::infinity());
  for (const auto& x : traj.iterates) {
    const auto s = residual_state(inst, x);
    margin = margin.cwiseMin(RealVector<Scalar>(bounds - s.quad));
  }
  const Scalar lo = margin.minCoeff();
  return {std::move(margin), lo, traj.iterates.size()};
}

enum class Outcome { ConvergedGlobal, Stalled, Diverged };

constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::ConvergedGlobal: return "ConvergedGlobal";
    case Outcome::Stalled: return "Stalled";
    case Outcome::Diverged: return "Diverged";
  }
  return "Unknown";
}

/// ConvergedGlobal iff the final f/m <= loss_tol and final d(x, G)/||x_gt|| <= dist_tol.
template <typename Scalar>
Outcome success_check(const ProblemInstance<Scalar>& inst, const Trajectory<Scalar>& traj, double loss_tol = 1e-6,
                      double dist_tol = 1e-4) {
  if (traj.loss.empty()) throw std::invalid_argument("success_check: empty trajectory");
  if (traj.diverged) return Outcome::Diverged;
  const double normalized = static_cast<double>(traj.loss.back()) / static_cast<double>(inst.m());
  const double dist = static_cast<double>(traj.orbit_dist_rel.back());
  return normalized <= loss_tol && dist <= dist_tol ? Outcome::ConvergedGlobal : Outcome::Stalled;
}

/// Least-squares slope of log(f/m) against the step index over the last
/// `window` recorded states. Zero-loss states are skipped.
template <typename Scalar>
double tail_log_slope(const Trajectory<Scalar>& traj, Index m, std::size_t window = 1000) {
  const std::size_t count = traj.loss.size();
  const std::size_t first = count > window + 1 ? count - window - 1 : 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t k = first; k < count; ++k) {
    const double v = static_cast<double>(traj.loss[k]) / static_cast<double>(m);
    if (!(v > 0)) continue;
    const double xk = static_cast<double>(k);
    const double yk = std::log(v);
    sx += xk;
    sy += yk;
    sxx += xk * xk;
    sxy += xk * yk;
    ++used;
  }
  if (used < 2) return 0.0;
  const double n = static_cast<double>(used);
  const double denom = n * sxx - sx * sx;
  return denom == 0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

/// Box initialization: every real coordinate uniform in [-radius, radius].
template <typename Scalar = double>
RealVector<Scalar> box_initialization(Index embed_dim, Scalar radius, std::uint64_t seed) {
  GaussianStream rng(seed);
  RealVector<Scalar> x(embed_dim);
  for (Index j = 0; j < embed_dim; ++j) x[j] = static_cast<Scalar>(rng.uniform(-radius, radius));
  return x;
}

}  // namespace tpr
