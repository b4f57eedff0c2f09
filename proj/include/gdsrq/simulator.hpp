#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gdsrq/analysis.hpp"
#include "gdsrq/network.hpp"
#include "gdsrq/objectives.hpp"
#include "gdsrq/quantization.hpp"
#include "gdsrq/random.hpp"
#include "gdsrq/schedule.hpp"

namespace gdsrq {

/// One agent's local iterate x_{i,k} and the running pair behind its
/// weighted time-average z_{i,k} = z_numerator / z_denominator.
struct AgentState {
  std::vector<double> x;
  std::vector<double> z_numerator;
  double z_denominator = 0.0;
  std::uint64_t k = 0;

  AgentState() = default;
  explicit AgentState(std::vector<double> x0)
      : x(std::move(x0)), z_numerator(x.size(), 0.0) {}

  std::vector<double> z() const {
    std::vector<double> out(z_numerator);
    for (double& v : out) v /= z_denominator;
    return out;
  }
};

/// Folds the current iterate x_{i,k} into the time average with weight
/// (k+1)^-lambda_gamma. The normalized weights are then exactly
/// gamma_k^t = (t+1)^-lg / sum_s (s+1)^-lg.
inline void update_time_average(AgentState& s, double lambda_gamma) {
  const double w = std::pow(static_cast<double>(s.k) + 1.0, -lambda_gamma);
  for (std::size_t c = 0; c < s.x.size(); ++c) s.z_numerator[c] += w * s.x[c];
  s.z_denominator += w;
}

/// Nonzero entries of one row of the mixing matrix, ascending column order.
struct MixingRow {
  std::vector<std::size_t> cols;
  std::vector<double> weights;
};

inline std::vector<MixingRow> sparse_rows(const MixingMatrix& m) {
  std::vector<MixingRow> rows(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (m(i, j) != 0.0) {
        rows[i].cols.push_back(j);
        rows[i].weights.push_back(m(i, j));
      }
  return rows;
}

/// Everything a synchronous round reads besides the agent states.
struct StepContext {
  const ObjectiveSpec* objective = nullptr;
  std::vector<MixingRow> mixing;
  Schedule schedule;

  StepContext(const ObjectiveSpec& obj, const MixingMatrix& m, const Schedule& s)
      : objective(&obj), mixing(sparse_rows(m)), schedule(s) {
    if (m.size() != obj.n_agents)
      throw std::invalid_argument("StepContext: mixing matrix size does not match agent count");
  }
};

/// Scratch space for one round: the broadcast buffer holds q_{j,k} for every
/// agent j, written once per round and then read by all neighbors.
struct StepWorkspace {
  std::size_t dim = 0;
  std::vector<double> broadcast;

  StepWorkspace(std::size_t n, std::size_t d) : dim(d), broadcast(n * d) {}
  std::span<double> row(std::size_t i) { return {broadcast.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {broadcast.data() + i * dim, dim}; }
};

/// Phase 1 for agents [begin, end): each agent quantizes its own iterate
/// once with its own stream.
template <class Quantizer>
void quantize_agents(std::span<const AgentState> states, std::span<CounterStream> streams,
                     Quantizer& quantizer, StepWorkspace& ws, std::size_t begin,
                     std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) quantizer(states[i].x, ws.row(i), streams[i]);
}

/// Phase 2 for agents [begin, end):
///   v = (1 - beta_k) x_i + beta_k sum_j a_ij q_j,  x_i <- P_X[v - alpha_k g_i(x_i)]
/// then the time average absorbs x_{i,k+1}. Only agent i's own state is
/// written, so agents may run concurrently once phase 1 has finished.
/// Returns false if any updated coordinate is non-finite.
inline bool update_agents(std::span<AgentState> states, const StepContext& ctx, std::uint64_t k,
                          const StepWorkspace& ws, std::size_t begin, std::size_t end) {
  const ObjectiveSpec& obj = *ctx.objective;
  const double alpha = stepsize_alpha(ctx.schedule, k);
  const double beta = stepsize_beta(ctx.schedule, k);
  const Box box = obj.feasible_box;
  std::vector<double> g(obj.dim);
  bool finite = true;
  for (std::size_t i = begin; i < end; ++i) {
    AgentState& s = states[i];
    obj.local_subgradient(i, s.x, g);
    const MixingRow& row = ctx.mixing[i];
    for (std::size_t c = 0; c < obj.dim; ++c) {
      double mixed = 0.0;
      for (std::size_t n = 0; n < row.cols.size(); ++n)
        mixed += row.weights[n] * ws.broadcast[row.cols[n] * ws.dim + c];
      // lerp is exact at both ends: beta == 1 gives `mixed`, mixed == x gives x.
      const double v = std::lerp(s.x[c], mixed, beta);
      const double next = std::clamp(v - alpha * g[c], box.lo, box.hi);
      finite = finite && std::isfinite(next) && std::isfinite(v);
      s.x[c] = next;
    }
    s.k = k + 1;
    update_time_average(s, ctx.schedule.lambda_gamma);
  }
  return finite;
}

/// One synchronous GDSRQ round over all agents. Every state must sit at
/// iteration k.
template <class Quantizer>
void gdsrq_step(std::span<AgentState> states, const StepContext& ctx, std::uint64_t k,
                std::span<CounterStream> streams, Quantizer& quantizer, StepWorkspace& ws) {
  const std::size_t n = states.size();
  if (n != ctx.objective->n_agents || streams.size() != n)
    throw std::invalid_argument("gdsrq_step: agent count mismatch");
  for (const auto& s : states) {
    if (s.x.size() != ctx.objective->dim)
      throw std::invalid_argument("gdsrq_step: iterate dimension mismatch");
    if (s.k != k)
      throw std::invalid_argument("gdsrq_step: state is at iteration " + std::to_string(s.k) +
                                  ", expected " + std::to_string(k));
  }
  quantize_agents<Quantizer>(states, streams, quantizer, ws, 0, n);
  if (!update_agents(states, ctx, k, ws, 0, n))
    throw std::runtime_error("gdsrq_step: non-finite iterate at iteration " + std::to_string(k));
}

template <class Quantizer>
void gdsrq_step(std::span<AgentState> states, const StepContext& ctx, std::uint64_t k,
                std::span<CounterStream> streams, Quantizer& quantizer) {
  StepWorkspace ws(states.size(), ctx.objective->dim);
  gdsrq_step(states, ctx, k, streams, quantizer, ws);
}

// --- full runs --------------------------------------------------------------

struct RunConfig {
  std::shared_ptr<const ObjectiveSpec> objective;
  std::shared_ptr<const MixingMatrix> mixing;
  /// Computed by reference_optimum when absent.
  std::shared_ptr<const ReferenceSolution> reference;
  QuantizerConfig quantizer;
  Schedule schedule;
  std::uint64_t iterations = 10'000;
  std::uint64_t seed = 1;
  std::uint64_t cadence = 10;
  unsigned threads = 1;
  bool waive_validation = false;
  /// Optional x_i(0); drawn uniformly from the box when empty.
  std::vector<std::vector<double>> initial;
};

class ScheduleValidationError : public std::runtime_error {
 public:
  explicit ScheduleValidationError(ValidationReport report)
      : std::runtime_error(describe(report)), report_(std::move(report)) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  static std::string describe(const ValidationReport& r) {
    std::string s = "schedule violates:";
    for (const auto& c : r.conditions)
      if (!c.passed) s += " " + c.name + " (" + c.inequality + ");";
    return s;
  }
  ValidationReport report_;
};

inline double sigma2_of(const MixingMatrix& m) {
  return m.sigma2 >= 0.0 ? m.sigma2 : second_largest_eigenvalue(m);
}

inline std::string run_fingerprint(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "objective=" << cfg.objective->name << ";n=" << cfg.objective->n_agents
     << ";d=" << cfg.objective->dim << ";bits=" << cfg.quantizer.bits
     << ";alpha0=" << cfg.schedule.alpha0 << ";lambda_alpha=" << cfg.schedule.lambda_alpha
     << ";beta0=" << cfg.schedule.beta0 << ";lambda_beta=" << cfg.schedule.lambda_beta
     << ";lambda_gamma=" << cfg.schedule.lambda_gamma << ";iterations=" << cfg.iterations
     << ";cadence=" << cfg.cadence << ";seed=" << cfg.seed;
  return os.str();
}

inline std::vector<AgentState> initial_states(const RunConfig& cfg) {
  const ObjectiveSpec& obj = *cfg.objective;
  std::vector<AgentState> states;
  states.reserve(obj.n_agents);
  for (std::size_t i = 0; i < obj.n_agents; ++i) {
    std::vector<double> x0;
    if (!cfg.initial.empty()) {
      x0 = cfg.initial.at(i);
      if (x0.size() != obj.dim) throw std::invalid_argument("run: initial iterate dimension");
      project_box(x0, obj.feasible_box);
    } else {
      CounterStream rng = make_stream(cfg.seed, StreamDomain::initial_iterate, i);
      x0.resize(obj.dim);
      for (double& v : x0)
        v = obj.feasible_box.lo + (obj.feasible_box.hi - obj.feasible_box.lo) * rng.uniform01();
    }
    states.emplace_back(std::move(x0));
    update_time_average(states.back(), cfg.schedule.lambda_gamma);
  }
  return states;
}

inline TrajectoryRecord measure(const std::vector<AgentState>& states, const ObjectiveSpec& obj,
                                const ReferenceSolution& ref, std::uint64_t k) {
  const std::size_t n = states.size(), d = obj.dim;
  std::vector<double> xbar(d, 0.0);
  std::vector<std::span<const double>> rows;
  rows.reserve(n);
  for (const auto& s : states) {
    rows.emplace_back(s.x);
    for (std::size_t c = 0; c < d; ++c) xbar[c] += s.x[c];
  }
  for (double& v : xbar) v /= static_cast<double>(n);

  TrajectoryRecord rec;
  rec.k = k;
  rec.r_k = optimality_gap(xbar, ref);
  rec.consensus_sq = consensus_error(rows);
  double fz = 0.0;
  for (const auto& s : states) fz += global_value(obj, s.z());
  rec.gap_z = fz / static_cast<double>(n) - ref.f_star;
  rec.gap_xbar = global_value(obj, xbar) - ref.f_star;
  return rec;
}

/// Runs K synchronous rounds and records metrics every `cadence` rounds
/// (plus round K). Each agent draws from its own stream keyed by
/// (seed, agent), so the result does not depend on `threads`. With several
/// threads the quantizer is shared, so its call operator must be thread-safe.
template <class Quantizer>
RunTrajectory run(const RunConfig& cfg, Quantizer quantizer) {
  if (!cfg.objective || !cfg.mixing) throw std::invalid_argument("run: objective and mixing required");
  if (cfg.cadence < 1) throw std::invalid_argument("run: cadence must be >= 1");
  const ObjectiveSpec& obj = *cfg.objective;

  if (!cfg.waive_validation) {
    auto report = validate_schedule(cfg.schedule, obj.convexity.mu(), sigma2_of(*cfg.mixing));
    if (!report.passed()) throw ScheduleValidationError(std::move(report));
  }

  std::shared_ptr<const ReferenceSolution> ref = cfg.reference;
  if (!ref) ref = std::make_shared<const ReferenceSolution>(reference_optimum(obj));

  const StepContext ctx(obj, *cfg.mixing, cfg.schedule);
  const std::size_t n = obj.n_agents;
  std::vector<AgentState> states = initial_states(cfg);
  std::vector<CounterStream> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    streams.push_back(make_stream(cfg.seed, StreamDomain::quantization, i));
  StepWorkspace ws(n, obj.dim);

  RunTrajectory traj;
  traj.fingerprint = run_fingerprint(cfg);
  traj.seed = cfg.seed;
  const double negative_tol = -10.0 * ref->tol;
  auto record = [&](std::uint64_t k) {
    traj.records.push_back(measure(states, obj, *ref, k));
    if (traj.records.back().gap_z < negative_tol || traj.records.back().gap_xbar < negative_tol)
      ++traj.negative_gap_flags;
  };
  record(0);
  const std::uint64_t K = cfg.iterations;
  if (K == 0) return traj;
  auto due = [&](std::uint64_t k) { return k % cfg.cadence == 0 || k == K; };
  auto nonfinite_error = [](std::uint64_t k) {
    return std::runtime_error("run: non-finite iterate after iteration " + std::to_string(k));
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::uint64_t k = 0; k < K; ++k) {
      quantize_agents(std::span<const AgentState>(states), streams, quantizer, ws, 0, n);
      if (!update_agents(states, ctx, k, ws, 0, n)) throw nonfinite_error(k);
      if (due(k + 1)) record(k + 1);
    }
    return traj;
  }

  // Synchronous rounds on a fixed team: quantize | barrier | update | barrier.
  // The barrier completion step runs single-threaded between phases.
  std::uint64_t k = 0;
  bool update_phase = false;
  bool stop = false;
  std::atomic<bool> finite{true};
  std::exception_ptr failure;
  auto on_phase_done = [&]() noexcept {
    if (update_phase) {
      if (!finite.load(std::memory_order_relaxed)) {
        failure = std::make_exception_ptr(nonfinite_error(k));
        stop = true;
      } else {
        ++k;
        try {
          if (due(k)) record(k);
        } catch (...) {
          failure = std::current_exception();
          stop = true;
        }
        if (k == K) stop = true;
      }
    }
    update_phase = !update_phase;
  };
  std::barrier sync(static_cast<std::ptrdiff_t>(threads), on_phase_done);

  auto worker = [&](unsigned t) {
    const std::size_t begin = n * t / threads, end = n * (t + 1) / threads;
    while (!stop) {
      quantize_agents(std::span<const AgentState>(states), streams, quantizer, ws, begin, end);
      sync.arrive_and_wait();
      if (!update_agents(states, ctx, k, ws, begin, end)) finite.store(false);
      sync.arrive_and_wait();
    }
  };
  {
    std::vector<std::jthread> team;
    team.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) team.emplace_back(worker, t);
    worker(0);
  }
  if (failure) std::rethrow_exception(failure);
  return traj;
}

inline RunTrajectory run(const RunConfig& cfg) {
  return run(cfg, StochasticQuantizer{cfg.quantizer});
}

}  // namespace gdsrq
