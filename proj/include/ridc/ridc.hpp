#pragma once

// Revisionist integral deferred correction with forward-backward Euler
// predictor and correctors (RIDC-FBE).
//
// Level 0 marches the split problem with FBE. Level j >= 1 marches the
// corrected solution eta^[j] directly:
//
//   eta^[j]_{n+1} - dt f_S(t_{n+1}, eta^[j]_{n+1})
//     = eta^[j]_n + dt f_N(t_n, eta^[j]_n)
//       - dt f_S(t_{n+1}, eta^[j-1]_{n+1}) - dt f_N(t_n, eta^[j-1]_n)
//       + sum_k w_k (f_S + f_N)(node k, eta^[j-1])
//
// so a linear stiff term costs one solve with the predictor's (I - dt L).
// Both executors below run the same per-step arithmetic on the same inputs,
// which makes their outputs bitwise identical.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/imex.hpp"
#include "ridc/ivp.hpp"
#include "ridc/level_buffer.hpp"
#include "ridc/quadrature.hpp"

namespace ridc {

inline constexpr std::size_t kMaxLevels = kMaxCorrectionLevel + 1;

struct RidcConfig {
  std::size_t levels = 4;    // order p: one predictor + (p - 1) correctors
  std::size_t steps = 100;   // total uniform steps over [t_start, t_end]
  std::size_t restarts = 1;  // number of equal sub-intervals; 1 = no restart
  std::size_t workers = 1;   // threads for run_pipelined, <= levels
  bool record_trajectory = false;
  bool record_trace = false;
  std::chrono::milliseconds watchdog{30000};
};

/// Steps level j sits idle before its first correction: j(j+1)/2.
constexpr std::size_t startup_delay(std::size_t j) noexcept { return j * (j + 1) / 2; }

inline std::size_t steps_per_interval(const RidcConfig& cfg) { return cfg.steps / cfg.restarts; }

inline void validate(const RidcConfig& cfg) {
  if (cfg.levels == 0 || cfg.levels > kMaxLevels) {
    throw ConfigError("levels must be in 1.." + std::to_string(kMaxLevels));
  }
  if (cfg.workers == 0 || cfg.workers > cfg.levels) {
    throw ConfigError("workers must be in 1..levels (" + std::to_string(cfg.levels) + ")");
  }
  if (cfg.restarts == 0) throw ConfigError("restarts must be positive");
  if (cfg.steps == 0 || cfg.steps % cfg.restarts != 0) {
    throw ConfigError("steps (" + std::to_string(cfg.steps) + ") must be a positive multiple of restarts (" +
                      std::to_string(cfg.restarts) + ")");
  }
  const std::size_t min_steps = cfg.levels * (cfg.levels + 1) / 2 + 1;
  if (steps_per_interval(cfg) < min_steps) {
    throw ConfigError("each restart interval needs at least " + std::to_string(min_steps) +
                      " steps to fill a " + std::to_string(cfg.levels) + "-level pipeline, got " +
                      std::to_string(steps_per_interval(cfg)));
  }
}

struct RestartInterval {
  double t_start;
  double dt;
  std::size_t steps;
  double t_end() const { return t_start + static_cast<double>(steps) * dt; }
};

/// R equal sub-intervals sharing one dt = (t_end - t_start) / total_steps.
inline std::vector<RestartInterval> restart_partition(double t_start, double t_end,
                                                      std::size_t restarts, std::size_t total_steps) {
  if (restarts == 0 || total_steps == 0 || total_steps % restarts != 0) {
    throw ConfigError("restart_partition: " + std::to_string(total_steps) +
                      " steps cannot be split into " + std::to_string(restarts) + " equal intervals");
  }
  if (!(t_start < t_end)) throw ConfigError("restart_partition: requires t_start < t_end");
  const std::size_t per = total_steps / restarts;
  const double dt = (t_end - t_start) / static_cast<double>(total_steps);
  std::vector<RestartInterval> out;
  out.reserve(restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    out.push_back({t_start + static_cast<double>(r * per) * dt, dt, per});
  }
  return out;
}

/// Node at which the predictor or a corrector starts: the state with both
/// splits evaluated at t.
inline NodePtr make_node(const SplitIvp& ivp, double t, StateVector state) {
  auto node = std::make_shared<LevelNode>();
  node->f_stiff = ivp.eval_stiff(t, state);
  node->f_nonstiff = ivp.eval_nonstiff(t, state);
  node->state = std::move(state);
  return node;
}

inline LevelNode predict_step(const SplitIvp& ivp, double t_n, const LevelNode& node_n, double dt,
                              const ImplicitSolver& solver) {
  StateVector next = fbe_step_from(ivp, t_n, node_n.state, node_n.f_nonstiff, dt, solver);
  if (!all_finite(next)) throw DivergenceError(0, t_n + dt);
  LevelNode out;
  out.f_stiff = ivp.eval_stiff(t_n + dt, next);
  out.f_nonstiff = ivp.eval_nonstiff(t_n + dt, next);
  out.state = std::move(next);
  return out;
}

inline LevelNode predict_step(const SplitIvp& ivp, double t_n, std::span<const double> y_n, double dt,
                              const ImplicitSolver& solver) {
  LevelNode node{{y_n.begin(), y_n.end()}, ivp.eval_stiff(t_n, y_n), ivp.eval_nonstiff(t_n, y_n)};
  return predict_step(ivp, t_n, node, dt, solver);
}

/// Step indices of the previous level that correction level j reads when
/// advancing from step n, in the weight ordering of the active regime.
inline std::vector<std::size_t> stencil_indices(std::size_t j, std::size_t n) {
  std::vector<std::size_t> idx(j + 1);
  if (n + 1 < j) {
    for (std::size_t k = 0; k <= j; ++k) idx[k] = k;
  } else {
    for (std::size_t k = 0; k <= j; ++k) idx[k] = n + 1 - k;
  }
  return idx;
}

/// Highest previous-level step that correction level j needs to advance from n.
constexpr std::size_t required_input(std::size_t j, std::size_t n) noexcept {
  return n + 1 < j ? j : n + 1;
}

/// Oldest previous-level step that correction level j needs to advance from n.
constexpr std::size_t oldest_input(std::size_t j, std::size_t n) noexcept {
  return n + 1 < j ? 0 : n + 1 - j;
}

/// One correction step of level j from t_n. `window` holds the previous
/// level's nodes at stencil_indices(j, n), ordered to match `weights`.
inline LevelNode correct_step(const SplitIvp& ivp, std::size_t j, std::size_t n, double t_n, double dt,
                              const LevelNode& own_n, std::span<const LevelNode* const> window,
                              const QuadratureWeights& weights, const ImplicitSolver& solver) {
  if (j == 0) throw ContractViolation("correct_step: level must be >= 1");
  if (weights.level != j || window.size() != j + 1 || weights.weights.size() != j + 1) {
    throw ProtocolViolation("correct_step: level " + std::to_string(j) + " got a window of " +
                            std::to_string(window.size()) + " nodes and weights for level " +
                            std::to_string(weights.level));
  }
  const bool startup = n + 1 < j;
  if (startup != (weights.regime == StencilRegime::startup) || (startup && weights.step != n)) {
    throw ProtocolViolation("correct_step: weights regime does not match step " + std::to_string(n));
  }
  for (const LevelNode* node : window) {
    if (node == nullptr) throw ProtocolViolation("correct_step: missing stencil entry");
  }
  const LevelNode& prev_next = startup ? *window[n + 1] : *window[0];
  const LevelNode& prev_cur = startup ? *window[n] : *window[1];

  const std::size_t dim = own_n.state.size();
  StateVector rhs(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double quad = 0.0;
    for (std::size_t k = 0; k <= j; ++k) {
      quad += weights.weights[k] * (window[k]->f_stiff[i] + window[k]->f_nonstiff[i]);
    }
    rhs[i] = own_n.state[i] + dt * own_n.f_nonstiff[i] - dt * prev_next.f_stiff[i] -
             dt * prev_cur.f_nonstiff[i] + quad;
  }
  const double t_next = t_n + dt;
  StateVector next = solver.solve(ivp, t_next, dt, rhs);
  if (!all_finite(next)) throw DivergenceError(j, t_next);
  LevelNode out;
  out.f_stiff = ivp.eval_stiff(t_next, next);
  out.f_nonstiff = ivp.eval_nonstiff(t_next, next);
  out.state = std::move(next);
  return out;
}

struct TraceEvent {
  std::size_t level;
  std::size_t node;  // index of the node just computed (step n -> node n + 1)
  std::uint64_t sequence;
  std::size_t interval;
};

struct RidcSolution {
  StateVector final_state;                 // top level at t_end
  std::vector<StateVector> level_finals;   // every level at t_end
  double wall_seconds = 0.0;
  std::vector<StateVector> trajectory;     // top level at every node, if recorded
  std::vector<TraceEvent> trace;           // compute order, if recorded
};

/// Result of one restart interval.
struct IntervalResult {
  std::vector<StateVector> level_finals;
  std::vector<StateVector> trajectory;
  std::vector<TraceEvent> trace;
};

/// Level 0 over the whole interval, then level 1 from stored level-0 nodes,
/// and so on. Keeps two full levels of history.
inline IntervalResult run_interval_serial(const SplitIvp& ivp, const RestartInterval& iv,
                                          const StateVector& y0, std::size_t levels,
                                          const ImplicitSolver& solver, bool record_trajectory = false) {
  const std::size_t steps = iv.steps;
  const double dt = iv.dt;
  const QuadratureTable table(levels, dt);
  const NodePtr start = make_node(ivp, iv.t_start, y0);

  IntervalResult result;
  std::vector<NodePtr> prev;
  for (std::size_t j = 0; j < levels; ++j) {
    std::vector<NodePtr> cur(steps + 1);
    cur[0] = start;
    std::vector<const LevelNode*> window(j + 1);
    for (std::size_t n = 0; n < steps; ++n) {
      const double t_n = iv.t_start + static_cast<double>(n) * dt;
      if (j == 0) {
        cur[n + 1] = std::make_shared<const LevelNode>(predict_step(ivp, t_n, *cur[n], dt, solver));
      } else {
        const auto idx = stencil_indices(j, n);
        for (std::size_t k = 0; k <= j; ++k) window[k] = prev[idx[k]].get();
        cur[n + 1] = std::make_shared<const LevelNode>(
            correct_step(ivp, j, n, t_n, dt, *cur[n], window, table.at(j, n), solver));
      }
    }
    result.level_finals.push_back(cur[steps]->state);
    if (j + 1 == levels && record_trajectory) {
      for (const auto& node : cur) result.trajectory.push_back(node->state);
    }
    prev = std::move(cur);
  }
  return result;
}

namespace detail {

// One level's marching state inside the pipeline.
class LevelRunner {
 public:
  LevelRunner(std::size_t level, const SplitIvp& ivp, const RestartInterval& iv,
              const QuadratureTable& table, const ImplicitSolver& solver, NodePtr start,
              LevelBuffer* own, LevelBuffer* prev, bool keep_trajectory,
              std::atomic<std::uint64_t>* sequence, std::vector<TraceEvent>* trace,
              std::mutex* trace_mutex, std::size_t interval)
      : level_(level),
        ivp_(ivp),
        iv_(iv),
        table_(table),
        solver_(solver),
        own_(own),
        prev_(prev),
        keep_trajectory_(keep_trajectory),
        sequence_(sequence),
        trace_(trace),
        trace_mutex_(trace_mutex),
        interval_(interval),
        window_(level + 1),
        current_(std::move(start)) {
    if (keep_trajectory_) trajectory_.push_back(current_->state);
  }

  std::size_t level() const noexcept { return level_; }
  std::size_t next_step() const noexcept { return next_step_; }
  bool done() const noexcept { return next_step_ == iv_.steps && !pending_; }
  const LevelNode& current() const noexcept { return *current_; }
  std::vector<StateVector>& trajectory() noexcept { return trajectory_; }

  /// Does as much work as possible without blocking. Returns whether
  /// anything changed.
  bool advance() {
    bool progressed = false;
    for (;;) {
      if (pending_) {
        if (own_ != nullptr) {
          if (!own_->can_publish(next_step_)) break;
          own_->publish(next_step_, std::move(pending_));
        }
        pending_.reset();
        progressed = true;
      }
      if (next_step_ == iv_.steps) break;
      const std::size_t n = next_step_;
      if (prev_ != nullptr &&
          prev_->watermark() < static_cast<std::int64_t>(required_input(level_, n))) {
        break;
      }
      compute(n);
      progressed = true;
    }
    return progressed;
  }

  std::string describe() const {
    std::string s = "level " + std::to_string(level_) + " at step " + std::to_string(next_step_) +
                    "/" + std::to_string(iv_.steps);
    if (pending_) s += " (holding an unpublished node)";
    if (prev_ != nullptr && next_step_ < iv_.steps) {
      s += ", needs step " + std::to_string(required_input(level_, next_step_)) +
           " below (watermark " + std::to_string(prev_->watermark()) + ")";
    }
    return s;
  }

 private:
  void compute(std::size_t n) {
    const double t_n = iv_.t_start + static_cast<double>(n) * iv_.dt;
    NodePtr next;
    if (level_ == 0) {
      next = std::make_shared<const LevelNode>(predict_step(ivp_, t_n, *current_, iv_.dt, solver_));
    } else {
      const auto idx = stencil_indices(level_, n);
      for (std::size_t k = 0; k <= level_; ++k) window_[k] = &prev_->at(idx[k]);
      next = std::make_shared<const LevelNode>(correct_step(ivp_, level_, n, t_n, iv_.dt, *current_,
                                                            window_, table_.at(level_, n), solver_));
      if (n + 1 == iv_.steps) {
        prev_->release_all();
      } else {
        prev_->release_below(oldest_input(level_, n + 1));
      }
    }
    if (trace_ != nullptr) {
      const auto seq = sequence_->fetch_add(1, std::memory_order_relaxed);
      std::lock_guard lock(*trace_mutex_);
      trace_->push_back({level_, n + 1, seq, interval_});
    }
    current_ = next;
    pending_ = std::move(next);
    next_step_ = n + 1;
    if (keep_trajectory_) trajectory_.push_back(current_->state);
  }

  std::size_t level_;
  const SplitIvp& ivp_;
  const RestartInterval& iv_;
  const QuadratureTable& table_;
  const ImplicitSolver& solver_;
  LevelBuffer* own_;
  LevelBuffer* prev_;
  bool keep_trajectory_;
  std::atomic<std::uint64_t>* sequence_;
  std::vector<TraceEvent>* trace_;
  std::mutex* trace_mutex_;
  std::size_t interval_;
  std::vector<const LevelNode*> window_;
  NodePtr current_;
  NodePtr pending_;
  std::size_t next_step_ = 0;
  std::vector<StateVector> trajectory_;
};

}  // namespace detail

/// All levels of one interval marched concurrently by `workers` threads.
/// Level j is owned by worker j % workers; each worker advances its levels
/// as far as their buffers allow and sleeps until another level publishes
/// or releases a slot.
inline IntervalResult run_interval_pipelined(const SplitIvp& ivp, const RestartInterval& iv,
                                             const StateVector& y0, std::size_t levels,
                                             std::size_t workers, const ImplicitSolver& solver,
                                             bool record_trajectory = false, bool record_trace = false,
                                             std::chrono::milliseconds watchdog = std::chrono::milliseconds(30000),
                                             std::size_t interval_index = 0) {
  if (levels == 0 || workers == 0 || workers > levels) {
    throw ConfigError("run_interval_pipelined: need 1 <= workers <= levels");
  }
  const QuadratureTable table(levels, iv.dt);
  const NodePtr start = make_node(ivp, iv.t_start, y0);
  auto signal = std::make_shared<PipelineSignal>();

  // Buffer j is written by level j and read by level j + 1.
  std::vector<std::unique_ptr<LevelBuffer>> buffers;
  for (std::size_t j = 0; j + 1 < levels; ++j) {
    buffers.push_back(std::make_unique<LevelBuffer>(j, signal));
    buffers.back()->publish(0, start);
  }

  std::atomic<std::uint64_t> sequence{0};
  std::vector<TraceEvent> trace;
  std::mutex trace_mutex;
  std::vector<detail::LevelRunner> runners;
  runners.reserve(levels);
  for (std::size_t j = 0; j < levels; ++j) {
    runners.emplace_back(j, ivp, iv, table, solver, start,
                         j + 1 < levels ? buffers[j].get() : nullptr,
                         j > 0 ? buffers[j - 1].get() : nullptr,
                         record_trajectory && j + 1 == levels, &sequence,
                         record_trace ? &trace : nullptr, &trace_mutex, interval_index);
  }

  auto work = [&](std::size_t w) {
    try {
      for (;;) {
        if (signal->aborted()) return;
        const auto seen = signal->generation();
        bool progressed = false;
        bool all_done = true;
        for (std::size_t j = w; j < levels; j += workers) {
          progressed |= runners[j].advance();
          all_done &= runners[j].done();
        }
        if (all_done) return;
        if (!progressed && !signal->wait_changed(seen, watchdog)) {
          std::string msg = "pipeline stalled for " + std::to_string(watchdog.count()) + " ms:";
          for (std::size_t j = w; j < levels; j += workers) msg += " [" + runners[j].describe() + "]";
          throw ProtocolViolation(msg);
        }
      }
    } catch (...) {
      signal->abort(std::current_exception());
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }
  if (auto err = signal->error()) std::rethrow_exception(err);

  IntervalResult result;
  for (const auto& r : runners) result.level_finals.push_back(r.current().state);
  if (record_trajectory) result.trajectory = std::move(runners.back().trajectory());
  result.trace = std::move(trace);
  return result;
}

namespace detail {

template <class RunInterval>
RidcSolution run_restarted(const SplitIvp& ivp, const RidcConfig& cfg, const ImplicitSolver& solver,
                           RunInterval&& run_interval) {
  validate(cfg);
  const auto intervals = restart_partition(ivp.t_start(), ivp.t_end(), cfg.restarts, cfg.steps);
  solver.prefactor(ivp, intervals.front().dt);

  RidcSolution sol;
  StateVector y = ivp.initial_state();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < intervals.size(); ++r) {
    IntervalResult part = run_interval(intervals[r], y, r);
    y = part.level_finals.back();
    if (cfg.record_trajectory) {
      // Interval boundaries are shared; keep the first copy.
      const std::size_t skip = sol.trajectory.empty() ? 0 : 1;
      sol.trajectory.insert(sol.trajectory.end(), part.trajectory.begin() + static_cast<std::ptrdiff_t>(skip),
                            part.trajectory.end());
    }
    sol.trace.insert(sol.trace.end(), part.trace.begin(), part.trace.end());
    sol.level_finals = std::move(part.level_finals);
  }
  sol.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  sol.final_state = std::move(y);
  return sol;
}

}  // namespace detail

inline RidcSolution run_serial(const SplitIvp& ivp, const RidcConfig& cfg, const ImplicitSolver& solver) {
  return detail::run_restarted(ivp, cfg, solver, [&](const RestartInterval& iv, const StateVector& y0, std::size_t) {
    return run_interval_serial(ivp, iv, y0, cfg.levels, solver, cfg.record_trajectory);
  });
}

inline RidcSolution run_pipelined(const SplitIvp& ivp, const RidcConfig& cfg, const ImplicitSolver& solver) {
  return detail::run_restarted(ivp, cfg, solver, [&](const RestartInterval& iv, const StateVector& y0, std::size_t r) {
    return run_interval_pipelined(ivp, iv, y0, cfg.levels, cfg.workers, solver, cfg.record_trajectory,
                                  cfg.record_trace, cfg.watchdog, r);
  });
}

/// Lock-step model of the pipeline: in each round every level that has its
/// inputs computes one node, then blocked nodes are published if the reader
/// has released the slot they overwrite. Returns, per round, the
/// (level, node) pairs computed in it.
inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pipeline_schedule(std::size_t levels,
                                                                                        std::size_t steps) {
  if (levels == 0 || steps == 0) throw ContractViolation("pipeline_schedule: empty pipeline");
  std::vector<std::size_t> next(levels, 0);              // next step to take
  std::vector<std::int64_t> watermark(levels, 0);        // node 0 published everywhere
  std::vector<bool> pending(levels, false);
  std::vector<std::size_t> floor(levels, 0);             // reader floor on buffer j
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> rounds;

  auto finished = [&] {
    for (std::size_t j = 0; j < levels; ++j)
      if (next[j] < steps || pending[j]) return false;
    return true;
  };
  while (!finished()) {
    auto& round = rounds.emplace_back();
    const auto snapshot = watermark;
    for (std::size_t j = 0; j < levels; ++j) {
      if (pending[j] || next[j] == steps) continue;
      if (j > 0 && snapshot[j - 1] < static_cast<std::int64_t>(required_input(j, next[j]))) continue;
      round.emplace_back(j, next[j] + 1);
      if (j > 0) floor[j - 1] = next[j] + 1 == steps ? steps + 1 : oldest_input(j, next[j] + 1);
      ++next[j];
      pending[j] = true;
    }
    for (std::size_t j = 0; j < levels; ++j) {
      if (!pending[j]) continue;
      const std::size_t step = next[j];
      const std::size_t cap = j + 2;
      if (j + 1 == levels || step < cap || step - cap < floor[j]) {
        watermark[j] = static_cast<std::int64_t>(step);
        pending[j] = false;
      }
    }
    if (round.empty()) {
      throw ProtocolViolation("pipeline_schedule: no progress");
    }
  }
  return rounds;
}

}  // namespace ridc
