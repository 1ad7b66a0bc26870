// Copyright 2026 The decq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DECQ_QLEARNING_HPP_
#define DECQ_QLEARNING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decq/dynamics.hpp"
#include "decq/exact_solver.hpp"
#include "decq/game.hpp"
#include "decq/rng.hpp"

namespace decq {

enum class ResetMode { kProject, kKeep, kZero };

std::string_view to_string(ResetMode m);
ResetMode parse_reset_mode(std::string_view name);

// Which table the experimental recursion of the two-table learner reads its
// continuation from. kBaselineTable is the default.
enum class ExperimentalContinuation { kBaselineTable, kExperimentalTable };

struct LearnerParams {
  double rho = 0.1;             // experimentation probability
  double lambda = 0.5;          // inertia
  double delta = 0.0;           // sub-optimality tolerance
  double step_exponent = 0.51;  // alpha_n = 1 / n^r
  double q_box = 0.0;           // B > 0; 0 selects 2 max|c| / (1 - beta)
  ResetMode reset = ResetMode::kKeep;
};

// Throws std::invalid_argument on out-of-range parameters and returns
// warnings for admissible but unusual settings (delta = 0, a box too small
// to contain the fixed points).
std::vector<std::string> check_learner_params(const StochasticGame& game,
                                              std::span<const LearnerParams> params);

double default_q_box(const StochasticGame& game, int dm);

class PhaseSchedule {
 public:
  static PhaseSchedule constant(std::int64_t length);
  static PhaseSchedule linear(std::int64_t base, std::int64_t slope);
  // Lengths beyond the list repeat its last entry.
  static PhaseSchedule list(std::vector<std::int64_t> lengths);

  std::int64_t length(std::int64_t k) const;

 private:
  enum class Kind { kConstant, kLinear, kList } kind_ = Kind::kConstant;
  std::int64_t base_ = 1;
  std::int64_t slope_ = 0;
  std::vector<std::int64_t> lengths_;
};

struct LearnerState {
  int dm = 0;
  DeterministicPolicy baseline;
  DeterministicPolicy experimental;  // two-table learner only
  Matrix q;                          // Q_t
  Matrix q_hat;                      // two-table learner only
  std::vector<std::int64_t> visits;  // per (x, u), row-major x * |U| + u, current phase
};

LearnerState make_learner_state(const StochasticGame& game, const DeterministicPolicy& baseline);

// alpha_n = n^{-r} for n = 1, 2, ...; index 0 is unused.
class StepSizeTable {
 public:
  explicit StepSizeTable(double exponent) : exponent_(exponent), alpha_{0.0} {}
  double exponent() const { return exponent_; }
  double operator()(std::int64_t n);
  void reserve(std::int64_t n);

 private:
  double exponent_;
  std::vector<double> alpha_;
};

struct PhaseTrace {
  std::int64_t steps = 0;
  std::vector<Matrix> action_counts;  // per DM, num_states x |U^i|
};

struct TwoTableOptions {
  ExperimentalContinuation continuation = ExperimentalContinuation::kBaselineTable;
};

// Simulates T joint steps with every DM holding its baseline policy and
// experimenting with probability rho. Draw order per step: one draw per DM
// in index order, then one transition draw. Visit counters restart at 1.
void alg1_phase(const StochasticGame& game, std::span<LearnerState> states,
                std::span<const LearnerParams> params, std::int64_t T, int& state,
                RandomStream& rng, std::span<StepSizeTable> steps, PhaseTrace* trace = nullptr);

// Near-best-reply set of the learnt table, then the inertia rule and reset.
ActionProduct near_best_replies(const LearnerState& state, double delta);
template <typename Draws>
void alg1_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        Draws&& draws);
void alg1_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        RandomStream& rng);

void apply_reset(Matrix& q, ResetMode mode, double q_box);

void alg2_phase(const StochasticGame& game, std::span<LearnerState> states,
                std::span<const LearnerParams> params, std::int64_t T, int& state,
                RandomStream& rng, std::span<StepSizeTable> steps, const TwoTableOptions& options,
                PhaseTrace* trace = nullptr);

// Both acceptance conditions of the two-table learner.
bool alg2_accepts(const Matrix& q, const Matrix& q_hat, const DeterministicPolicy& baseline,
                  const DeterministicPolicy& experimental, double delta);

// Acceptance with inertia, then a fresh experimental policy drawn uniformly
// from the own policies other than the new baseline, then reset.
void alg2_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        const PolicySpace& space, RandomStream& rng);

struct PhaseRecord {
  std::int64_t phase = 0;
  std::int64_t policy = 0;  // joint ID of pi_k
  bool at_equilibrium = false;
  std::optional<bool> agreement;  // coupled runs only
  std::optional<std::int64_t> reference_policy;
  std::vector<double> q_error;  // per DM, when diagnostics are on
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::int64_t start = 0;
  std::vector<LearnerParams> params;
  std::vector<PhaseRecord> phases;  // entries k = 0 .. num_phases

  double fraction_at_equilibrium() const;
  double fraction_agreement() const;
};

struct RunOptions {
  bool diagnostics = false;
  TwoTableOptions two_table;
  std::optional<double> q_init;  // defaults to 0
};

// The game plus everything a learner run reads but never writes; build once
// and share across concurrent runs.
class GameContext {
 public:
  explicit GameContext(const StochasticGame& game, double tol = kSolverTolerance);

  const StochasticGame& game() const { return *game_; }
  const PolicySpace& space() const { return cache_.space(); }
  const ResponseCache& cache() const { return cache_; }
  bool is_equilibrium(std::int64_t joint) const { return equilibrium_[joint] != 0; }
  bool reachable() const { return reachable_; }

 private:
  const StochasticGame* game_;
  ResponseCache cache_;
  std::vector<char> equilibrium_;
  bool reachable_ = false;
};

RunRecord run_alg1(const GameContext& ctx, const PhaseSchedule& schedule,
                   std::span<const LearnerParams> params, std::int64_t start,
                   std::int64_t num_phases, std::uint64_t seed, const RunOptions& options = {});
RunRecord run_alg2(const GameContext& ctx, const PhaseSchedule& schedule,
                   std::span<const LearnerParams> params, std::int64_t start,
                   std::int64_t num_phases, std::uint64_t seed, const RunOptions& options = {});

// The learner and the exact best reply process with inertia from the same
// start. Each phase draws one UpdateDraws per DM from a dedicated stream and
// both processes consume the same draws.
RunRecord run_coupled(const GameContext& ctx, const PhaseSchedule& schedule,
                      std::span<const LearnerParams> params, std::int64_t start,
                      std::int64_t num_phases, std::uint64_t seed, const RunOptions& options = {});

struct SingleLearnerConfig {
  std::int64_t steps = 0;
  double step_exponent = 0.51;
  double cost_noise = 0.0;  // half-width of additive uniform noise on observed costs
  std::optional<DeterministicPolicy> evaluate;  // learn Q of this policy instead of the optimum
};

// Standard asynchronous Q-learning for a one-DM game under a fixed behavior
// policy; the step size uses the number of visits to (x, u) so far.
QTable single_dm_q_learning(const StochasticGame& game, const RandomizedPolicy& behavior,
                            const SingleLearnerConfig& config, std::uint64_t seed);
QTable policy_eval_q_learning(const StochasticGame& game, const RandomizedPolicy& behavior,
                              const DeterministicPolicy& eval_policy,
                              SingleLearnerConfig config, std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename Draws>
void alg1_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        Draws&& draws) {
  const ActionProduct near = near_best_replies(state, params.delta);
  const bool keep = near.contains(state.baseline);
  const std::int64_t current = -1;
  const auto picked = inertia_update(current, keep, near.size(), params.lambda, draws,
                                     [](std::int64_t k) { return k; });
  if (picked >= 0) state.baseline = near.at(picked);
  apply_reset(state.q, params.reset, q_box);
}

}  // namespace decq

#endif  // DECQ_QLEARNING_HPP_
