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

#include "decq/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace decq {

std::string_view to_string(ResetMode m) {
  switch (m) {
    case ResetMode::kProject: return "project";
    case ResetMode::kKeep: return "keep";
    case ResetMode::kZero: return "zero";
  }
  return "?";
}

ResetMode parse_reset_mode(std::string_view name) {
  for (auto m : {ResetMode::kProject, ResetMode::kKeep, ResetMode::kZero})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown reset mode: " + std::string(name));
}

double default_q_box(const StochasticGame& game, int dm) {
  return 2.0 * game.costs[dm].cwiseAbs().maxCoeff() / (1.0 - game.discounts[dm]);
}

std::vector<std::string> check_learner_params(const StochasticGame& game,
                                              std::span<const LearnerParams> params) {
  if (static_cast<int>(params.size()) != game.num_dms)
    throw std::invalid_argument("expected one learner parameter block per DM");
  std::vector<std::string> warnings;
  for (int i = 0; i < game.num_dms; ++i) {
    const auto& p = params[i];
    const std::string who = "DM " + std::to_string(i) + ": ";
    if (!(p.rho > 0.0 && p.rho < 1.0)) throw std::invalid_argument(who + "rho must lie in (0,1)");
    if (!(p.lambda > 0.0 && p.lambda < 1.0))
      throw std::invalid_argument(who + "lambda must lie in (0,1)");
    if (!(p.delta >= 0.0)) throw std::invalid_argument(who + "delta must be nonnegative");
    if (!(p.step_exponent > 0.5 && p.step_exponent <= 1.0))
      throw std::invalid_argument(who + "step_exponent must lie in (1/2, 1]");
    if (!(p.q_box >= 0.0)) throw std::invalid_argument(who + "q_box must be nonnegative");
    if (p.delta == 0.0)
      warnings.push_back(who + "delta = 0 accepted, but convergence guarantees need delta > 0");
    const double needed = game.costs[i].cwiseAbs().maxCoeff() / (1.0 - game.discounts[i]);
    if (p.q_box > 0.0 && p.q_box < needed)
      warnings.push_back(who + "q_box is smaller than max|c|/(1-beta); fixed points lie outside");
  }
  return warnings;
}

PhaseSchedule PhaseSchedule::constant(std::int64_t length) {
  if (length < 1) throw std::invalid_argument("phase lengths must be at least 1");
  PhaseSchedule s;
  s.kind_ = Kind::kConstant;
  s.base_ = length;
  return s;
}

PhaseSchedule PhaseSchedule::linear(std::int64_t base, std::int64_t slope) {
  if (base < 1 || slope < 0) throw std::invalid_argument("linear schedule needs base >= 1, slope >= 0");
  PhaseSchedule s;
  s.kind_ = Kind::kLinear;
  s.base_ = base;
  s.slope_ = slope;
  return s;
}

PhaseSchedule PhaseSchedule::list(std::vector<std::int64_t> lengths) {
  if (lengths.empty()) throw std::invalid_argument("list schedule needs at least one length");
  for (auto t : lengths)
    if (t < 1) throw std::invalid_argument("phase lengths must be at least 1");
  PhaseSchedule s;
  s.kind_ = Kind::kList;
  s.lengths_ = std::move(lengths);
  return s;
}

std::int64_t PhaseSchedule::length(std::int64_t k) const {
  switch (kind_) {
    case Kind::kConstant: return base_;
    case Kind::kLinear: return base_ + slope_ * k;
    case Kind::kList:
      return lengths_[static_cast<std::size_t>(
          std::min<std::int64_t>(k, static_cast<std::int64_t>(lengths_.size()) - 1))];
  }
  return base_;
}

LearnerState make_learner_state(const StochasticGame& game, const DeterministicPolicy& baseline) {
  const int U = game.action_counts.at(baseline.dm);
  LearnerState s;
  s.dm = baseline.dm;
  s.baseline = baseline;
  s.experimental = baseline;
  s.q = Matrix::Zero(game.num_states, U);
  s.q_hat = Matrix::Zero(game.num_states, U);
  s.visits.assign(static_cast<std::size_t>(game.num_states) * U, 0);
  return s;
}

void StepSizeTable::reserve(std::int64_t n) {
  const auto have = static_cast<std::int64_t>(alpha_.size()) - 1;
  if (n <= have) return;
  const auto want = static_cast<std::size_t>(n + 1);
  if (want > alpha_.capacity()) alpha_.reserve(std::max(want, 2 * alpha_.capacity()));
  for (std::int64_t k = have + 1; k <= n; ++k)
    alpha_.push_back(std::pow(static_cast<double>(k), -exponent_));
}

double StepSizeTable::operator()(std::int64_t n) {
  reserve(n);
  return alpha_[static_cast<std::size_t>(n)];
}

void apply_reset(Matrix& q, ResetMode mode, double q_box) {
  switch (mode) {
    case ResetMode::kKeep: break;
    case ResetMode::kProject: q = q.cwiseMax(-q_box).cwiseMin(q_box); break;
    case ResetMode::kZero: q.setZero(); break;
  }
}

namespace {

// Flat copies of the game tables used by the inner simulation loop.
struct SimTables {
  int X = 0, A = 0, N = 0;
  std::vector<int> U;
  std::vector<int> stride;        // joint-action stride per DM
  std::vector<double> cost;       // [i][x * A + a]
  std::vector<double> cdf;        // [(x * A + a) * X + y]
  std::vector<int> last_positive; // per (x, a)
  std::vector<double> beta;

  explicit SimTables(const StochasticGame& g)
      : X(g.num_states), A(g.num_joint_actions()), N(g.num_dms), U(g.action_counts) {
    stride.assign(N, 1);
    for (int i = N - 2; i >= 0; --i) stride[i] = stride[i + 1] * U[i + 1];
    cost.resize(static_cast<std::size_t>(N) * X * A);
    for (int i = 0; i < N; ++i)
      for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a)
          cost[(static_cast<std::size_t>(i) * X + x) * A + a] = g.costs[i](x, a);
    cdf.resize(static_cast<std::size_t>(X) * A * X);
    last_positive.assign(static_cast<std::size_t>(X) * A, 0);
    for (int r = 0; r < X * A; ++r) {
      double cum = 0.0;
      for (int y = 0; y < X; ++y) {
        const double p = g.kernel(r, y);
        if (p > 0.0) {
          cum += p;
          last_positive[r] = y;
        }
        cdf[static_cast<std::size_t>(r) * X + y] = cum;
      }
    }
    beta.assign(g.discounts.data(), g.discounts.data() + N);
  }

  int next_state(int row, double u) const {
    const double* c = &cdf[static_cast<std::size_t>(row) * X];
    for (int y = 0; y < X; ++y)
      if (u < c[y]) return y;
    return last_positive[row];
  }
  double cost_of(int i, int row) const { return cost[static_cast<std::size_t>(i) * X * A + row]; }
};

double row_minimum(const Matrix& q, int x) {
  double m = q(x, 0);
  for (Eigen::Index u = 1; u < q.cols(); ++u) m = std::min(m, q(x, u));
  return m;
}

enum class Recursion { kOptimal, kTwoTable };

template <Recursion kind>
void simulate_phase(const SimTables& sim, std::span<LearnerState> states,
                    std::span<const LearnerParams> params, std::int64_t T, int& x,
                    RandomStream& rng, std::span<StepSizeTable> steps,
                    ExperimentalContinuation continuation, PhaseTrace* trace) {
  if (T < 1) throw std::invalid_argument("phase length must be at least 1");
  const int N = sim.N;
  if (static_cast<int>(states.size()) != N || static_cast<int>(params.size()) != N ||
      static_cast<int>(steps.size()) != N)
    throw std::invalid_argument("expected one learner per DM");

  std::vector<double> keep(N), rho(N);
  std::vector<const int*> base(N);
  std::vector<int> action(N);
  for (int i = 0; i < N; ++i) {
    keep[i] = 1.0 - params[i].rho;
    rho[i] = params[i].rho;
    base[i] = states[i].baseline.action_of.data();
    std::fill(states[i].visits.begin(), states[i].visits.end(), 0);
    steps[i].reserve(T);
  }
  if (trace) {
    trace->steps = 0;
    trace->action_counts.clear();
    for (int i = 0; i < N; ++i) trace->action_counts.push_back(Matrix::Zero(sim.X, sim.U[i]));
  }

  for (std::int64_t t = 0; t < T; ++t) {
    int joint = 0;
    for (int i = 0; i < N; ++i) {
      const double u = rng.uniform();
      int a;
      if (u < keep[i]) {
        a = base[i][x];
      } else {
        a = static_cast<int>((u - keep[i]) / rho[i] * sim.U[i]);
        if (a >= sim.U[i]) a = sim.U[i] - 1;
      }
      action[i] = a;
      joint += a * sim.stride[i];
    }
    const int row = x * sim.A + joint;
    const int y = sim.next_state(row, rng.uniform());

    for (int i = 0; i < N; ++i) {
      LearnerState& s = states[i];
      const int a = action[i];
      const std::int64_t n = ++s.visits[static_cast<std::size_t>(x) * sim.U[i] + a];
      const double alpha = steps[i](n);
      const double c = sim.cost_of(i, row);
      if constexpr (kind == Recursion::kOptimal) {
        const double target = c + sim.beta[i] * row_minimum(s.q, y);
        s.q(x, a) = (1.0 - alpha) * s.q(x, a) + alpha * target;
      } else {
        const double target = c + sim.beta[i] * s.q(y, s.baseline.action_of[y]);
        const Matrix& cont = continuation == ExperimentalContinuation::kBaselineTable ? s.q : s.q_hat;
        const double target_hat = c + sim.beta[i] * cont(y, s.experimental.action_of[y]);
        s.q(x, a) = (1.0 - alpha) * s.q(x, a) + alpha * target;
        s.q_hat(x, a) = (1.0 - alpha) * s.q_hat(x, a) + alpha * target_hat;
      }
      if (trace) trace->action_counts[i](x, a) += 1.0;
    }
    if (trace) ++trace->steps;
    x = y;
  }
}

}  // namespace

void alg1_phase(const StochasticGame& game, std::span<LearnerState> states,
                std::span<const LearnerParams> params, std::int64_t T, int& state,
                RandomStream& rng, std::span<StepSizeTable> steps, PhaseTrace* trace) {
  const SimTables sim(game);
  simulate_phase<Recursion::kOptimal>(sim, states, params, T, state, rng, steps,
                                      ExperimentalContinuation::kBaselineTable, trace);
}

void alg2_phase(const StochasticGame& game, std::span<LearnerState> states,
                std::span<const LearnerParams> params, std::int64_t T, int& state,
                RandomStream& rng, std::span<StepSizeTable> steps, const TwoTableOptions& options,
                PhaseTrace* trace) {
  const SimTables sim(game);
  simulate_phase<Recursion::kTwoTable>(sim, states, params, T, state, rng, steps,
                                       options.continuation, trace);
}

ActionProduct near_best_replies(const LearnerState& state, double delta) {
  return near_minimizers(state.dm, state.q, delta);
}

void alg1_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        RandomStream& rng) {
  alg1_policy_update(state, params, q_box, LazyDraws(rng));
}

bool alg2_accepts(const Matrix& q, const Matrix& q_hat, const DeterministicPolicy& baseline,
                  const DeterministicPolicy& experimental, double delta) {
  bool somewhere = false;
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    const double mine = q(x, baseline.action_of[x]);
    const double trial = q_hat(x, experimental.action_of[x]);
    if (!(trial <= mine + delta)) return false;
    if (trial <= mine - delta) somewhere = true;
  }
  return somewhere;
}

void alg2_policy_update(LearnerState& state, const LearnerParams& params, double q_box,
                        const PolicySpace& space, RandomStream& rng) {
  if (alg2_accepts(state.q, state.q_hat, state.baseline, state.experimental, params.delta)) {
    if (!(rng.uniform() < params.lambda)) state.baseline = state.experimental;
  }
  const auto count = space.num_own_policies(state.dm);
  if (count > 1) {
    auto k = rng.index(count - 1);
    if (k >= space.own_index(state.baseline)) ++k;
    state.experimental = space.own_policy(state.dm, k);
  } else {
    state.experimental = state.baseline;
  }
  apply_reset(state.q, params.reset, q_box);
  apply_reset(state.q_hat, params.reset, q_box);
}

double RunRecord::fraction_at_equilibrium() const {
  if (phases.empty()) return 0.0;
  std::int64_t hits = 0;
  for (const auto& p : phases) hits += p.at_equilibrium ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(phases.size());
}

double RunRecord::fraction_agreement() const {
  if (phases.empty()) return 0.0;
  std::int64_t hits = 0;
  for (const auto& p : phases) hits += p.agreement.value_or(false) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(phases.size());
}

GameContext::GameContext(const StochasticGame& game, double tol)
    : game_(&game), cache_((require_valid(game), game), tol) {
  cache_.fill();
  const auto n = cache_.space().num_joint_policies();
  equilibrium_.resize(static_cast<std::size_t>(n));
  for (std::int64_t id = 0; id < n; ++id) equilibrium_[id] = cache_.is_equilibrium(id) ? 1 : 0;
  reachable_ = reachability_check(game);
}

namespace {

enum class Learner { kAlg1, kAlg2 };

struct RunSetup {
  std::vector<LearnerState> states;
  std::vector<StepSizeTable> steps;
  std::vector<double> boxes;
};

RunSetup setup_run(const GameContext& ctx, std::span<const LearnerParams> params,
                   std::int64_t start, const RunOptions& options) {
  const auto& game = ctx.game();
  if (!ctx.reachable())
    throw std::invalid_argument("learning runs require every state to be reachable from every state");
  check_learner_params(game, params);
  const auto joint = ctx.space().joint_policy(start);
  RunSetup setup;
  for (int i = 0; i < game.num_dms; ++i) {
    auto s = make_learner_state(game, joint[i]);
    if (options.q_init) {
      s.q.setConstant(*options.q_init);
      s.q_hat.setConstant(*options.q_init);
    }
    setup.states.push_back(std::move(s));
    setup.steps.emplace_back(params[i].step_exponent);
    setup.boxes.push_back(params[i].q_box > 0.0 ? params[i].q_box : default_q_box(game, i));
  }
  return setup;
}

std::int64_t joint_of(const PolicySpace& space, std::span<const LearnerState> states) {
  std::vector<std::int64_t> own;
  for (const auto& s : states) own.push_back(space.own_index(s.baseline));
  return space.combine(own);
}

// Exact targets for the diagnostics, cached per (DM, joint baseline).
class DiagnosticTargets {
 public:
  DiagnosticTargets(const GameContext& ctx, std::span<const LearnerParams> params, Learner learner)
      : ctx_(&ctx), params_(params.begin(), params.end()), learner_(learner) {}

  const Matrix& target(int dm, std::int64_t joint) {
    auto key = std::make_pair(dm, joint);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto& game = ctx_->game();
    const auto policy = ctx_->space().joint_policy(joint);
    std::vector<RandomizedPolicy> perturbed;
    for (int j = 0; j < game.num_dms; ++j) perturbed.push_back(perturb(game, policy[j], params_[j].rho));
    Matrix q = learner_ == Learner::kAlg1
                   ? optimal_q_factors(game, dm, perturbed).q
                   : policy_q_factors(game, dm, policy[dm], perturbed).q;
    return cache_.emplace(key, std::move(q)).first->second;
  }

 private:
  const GameContext* ctx_;
  std::vector<LearnerParams> params_;
  Learner learner_;
  std::map<std::pair<int, std::int64_t>, Matrix> cache_;
};

RunRecord run_learner(const GameContext& ctx, const PhaseSchedule& schedule,
                      std::span<const LearnerParams> params, std::int64_t start,
                      std::int64_t num_phases, std::uint64_t seed, const RunOptions& options,
                      Learner learner, bool coupled) {
  if (num_phases < 0) throw std::invalid_argument("num_phases must be nonnegative");
  const auto& game = ctx.game();
  const auto& space = ctx.space();
  RunSetup setup = setup_run(ctx, params, start, options);
  auto& states = setup.states;

  const RandomStream master(seed);
  RandomStream sim_rng = master.child({1});
  RandomStream update_rng = master.child({2});
  const SimTables sim(game);
  int x = sample_initial_state(game, sim_rng);

  InertiaParams inertia;
  for (const auto& p : params) inertia.lambda.push_back(p.lambda);

  if (learner == Learner::kAlg2) {
    for (auto& s : states) {
      const auto count = space.num_own_policies(s.dm);
      if (count < 2) continue;
      auto k = update_rng.index(count - 1);
      if (k >= space.own_index(s.baseline)) ++k;
      s.experimental = space.own_policy(s.dm, k);
    }
  }

  std::optional<DiagnosticTargets> targets;
  if (options.diagnostics) targets.emplace(ctx, params, learner);

  RunRecord record;
  record.seed = seed;
  record.start = start;
  record.params.assign(params.begin(), params.end());
  record.phases.reserve(static_cast<std::size_t>(num_phases + 1));

  std::int64_t reference = start;
  auto push_record = [&](std::int64_t k) {
    PhaseRecord r;
    r.phase = k;
    r.policy = joint_of(space, states);
    r.at_equilibrium = ctx.is_equilibrium(r.policy);
    if (coupled) {
      r.reference_policy = reference;
      r.agreement = r.policy == reference;
    }
    record.phases.push_back(std::move(r));
  };
  push_record(0);

  std::vector<UpdateDraws> draws(game.num_dms);
  for (std::int64_t k = 0; k < num_phases; ++k) {
    const std::int64_t T = schedule.length(k);
    const std::int64_t played = record.phases.back().policy;
    if (learner == Learner::kAlg1) {
      simulate_phase<Recursion::kOptimal>(sim, states, params, T, x, sim_rng, setup.steps,
                                          options.two_table.continuation, nullptr);
    } else {
      simulate_phase<Recursion::kTwoTable>(sim, states, params, T, x, sim_rng, setup.steps,
                                           options.two_table.continuation, nullptr);
    }
    if (targets) {
      auto& errors = record.phases.back().q_error;
      for (int i = 0; i < game.num_dms; ++i)
        errors.push_back((states[i].q - targets->target(i, played)).cwiseAbs().maxCoeff());
    }

    if (coupled) {
      for (auto& d : draws) d = {update_rng.uniform(), update_rng.uniform()};
      for (int i = 0; i < game.num_dms; ++i)
        alg1_policy_update(states[i], params[i], setup.boxes[i], FixedDraws(draws[i]));
      reference = best_reply_step(ctx.cache(), reference, inertia, draws);
    } else if (learner == Learner::kAlg1) {
      for (int i = 0; i < game.num_dms; ++i)
        alg1_policy_update(states[i], params[i], setup.boxes[i], LazyDraws(update_rng));
    } else {
      for (int i = 0; i < game.num_dms; ++i)
        alg2_policy_update(states[i], params[i], setup.boxes[i], space, update_rng);
    }
    push_record(k + 1);
  }
  return record;
}

}  // namespace

RunRecord run_alg1(const GameContext& ctx, const PhaseSchedule& schedule,
                   std::span<const LearnerParams> params, std::int64_t start,
                   std::int64_t num_phases, std::uint64_t seed, const RunOptions& options) {
  return run_learner(ctx, schedule, params, start, num_phases, seed, options, Learner::kAlg1, false);
}

RunRecord run_alg2(const GameContext& ctx, const PhaseSchedule& schedule,
                   std::span<const LearnerParams> params, std::int64_t start,
                   std::int64_t num_phases, std::uint64_t seed, const RunOptions& options) {
  return run_learner(ctx, schedule, params, start, num_phases, seed, options, Learner::kAlg2, false);
}

RunRecord run_coupled(const GameContext& ctx, const PhaseSchedule& schedule,
                      std::span<const LearnerParams> params, std::int64_t start,
                      std::int64_t num_phases, std::uint64_t seed, const RunOptions& options) {
  return run_learner(ctx, schedule, params, start, num_phases, seed, options, Learner::kAlg1, true);
}

namespace {

QTable learn_single(const StochasticGame& game, const RandomizedPolicy& behavior,
                    const SingleLearnerConfig& config, std::uint64_t seed) {
  if (game.num_dms != 1) throw std::invalid_argument("single-DM Q-learning needs a one-DM game");
  require_valid(game);
  const int X = game.num_states;
  const int U = game.action_counts[0];
  if (behavior.dist.rows() != X || behavior.dist.cols() != U)
    throw std::invalid_argument("behavior policy has wrong dimensions");
  if ((behavior.dist.array() <= 0.0).any())
    throw std::invalid_argument("behavior policy must give every action positive probability");
  if (config.steps < 0) throw std::invalid_argument("steps must be nonnegative");
  if (!(config.step_exponent > 0.5 && config.step_exponent <= 1.0))
    throw std::invalid_argument("step_exponent must lie in (1/2, 1]");
  if (config.evaluate && static_cast<int>(config.evaluate->action_of.size()) != X)
    throw std::invalid_argument("evaluation policy is not total over the state set");

  const SimTables sim(game);
  RandomStream rng(seed);
  StepSizeTable steps(config.step_exponent);
  std::vector<std::int64_t> visits(static_cast<std::size_t>(X) * U, 0);
  std::vector<std::vector<double>> rows(X, std::vector<double>(U));
  for (int x = 0; x < X; ++x)
    for (int u = 0; u < U; ++u) rows[x][u] = behavior.dist(x, u);

  Matrix q = Matrix::Zero(X, U);
  int x = sample_initial_state(game, rng);
  const double beta = game.discounts[0];
  for (std::int64_t t = 0; t < config.steps; ++t) {
    const int a = sample_index(rows[x], rng.uniform());
    const int row = x * sim.A + a;
    const int y = sim.next_state(row, rng.uniform());
    double c = sim.cost_of(0, row);
    if (config.cost_noise > 0.0) c += config.cost_noise * (2.0 * rng.uniform() - 1.0);
    const std::int64_t n = ++visits[static_cast<std::size_t>(x) * U + a];
    const double alpha = steps(n);
    const double cont = config.evaluate ? q(y, config.evaluate->action_of[y]) : row_minimum(q, y);
    q(x, a) = (1.0 - alpha) * q(x, a) + alpha * (c + beta * cont);
    x = y;
  }
  return {0, std::move(q)};
}

}  // namespace

QTable single_dm_q_learning(const StochasticGame& game, const RandomizedPolicy& behavior,
                            const SingleLearnerConfig& config, std::uint64_t seed) {
  return learn_single(game, behavior, config, seed);
}

QTable policy_eval_q_learning(const StochasticGame& game, const RandomizedPolicy& behavior,
                              const DeterministicPolicy& eval_policy, SingleLearnerConfig config,
                              std::uint64_t seed) {
  config.evaluate = eval_policy;
  return learn_single(game, behavior, config, seed);
}

}  // namespace decq
