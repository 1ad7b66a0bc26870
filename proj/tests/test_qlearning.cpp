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

#include <doctest.h>

#include <cmath>

#include "decq/experiments.hpp"
#include "decq/qlearning.hpp"

using namespace decq;

namespace {

StochasticGame bandit(std::vector<double> costs, double beta) {
  StochasticGame g;
  g.num_dms = 1;
  g.num_states = 1;
  g.action_counts = {static_cast<int>(costs.size())};
  g.costs = {Matrix(1, costs.size())};
  for (std::size_t u = 0; u < costs.size(); ++u) g.costs[0](0, u) = costs[u];
  g.kernel = Matrix::Ones(costs.size(), 1);
  g.discounts = Vector::Constant(1, beta);
  g.initial_dist = Vector::Ones(1);
  return g;
}

std::vector<LearnerParams> same(int n, LearnerParams p) { return std::vector<LearnerParams>(n, p); }

}  // namespace

TEST_CASE("step sizes") {
  StepSizeTable steps(0.51);
  CHECK(steps(1) == 1.0);
  CHECK(steps(4) == doctest::Approx(std::pow(4.0, -0.51)));
  CHECK(steps(1000) < steps(999));
  StepSizeTable harmonic(1.0);
  CHECK(harmonic(8) == doctest::Approx(0.125));
}

TEST_CASE("phase schedules") {
  CHECK(PhaseSchedule::constant(50).length(7) == 50);
  const auto lin = PhaseSchedule::linear(10, 5);
  CHECK(lin.length(0) == 10);
  CHECK(lin.length(3) == 25);
  const auto list = PhaseSchedule::list({3, 4, 9});
  CHECK(list.length(1) == 4);
  CHECK(list.length(100) == 9);
  CHECK_THROWS_AS(PhaseSchedule::constant(0), std::invalid_argument);
  CHECK_THROWS_AS(PhaseSchedule::linear(1, -1), std::invalid_argument);
  CHECK_THROWS_AS(PhaseSchedule::list({}), std::invalid_argument);
}

TEST_CASE("reset modes") {
  for (auto m : {ResetMode::kProject, ResetMode::kKeep, ResetMode::kZero})
    CHECK(parse_reset_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_reset_mode("clip"), std::invalid_argument);
  Matrix q(1, 3);
  q << -7.0, 0.5, 9.0;
  Matrix p = q;
  apply_reset(p, ResetMode::kProject, 2.0);
  CHECK(p(0, 0) == -2.0);
  CHECK(p(0, 1) == 0.5);
  CHECK(p(0, 2) == 2.0);
  p = q;
  apply_reset(p, ResetMode::kKeep, 2.0);
  CHECK(p == q);
  apply_reset(p, ResetMode::kZero, 2.0);
  CHECK(p.isZero());
}

TEST_CASE("learner parameter checks") {
  const auto g = build_pd_game({});
  LearnerParams p;
  p.delta = 0.01;
  CHECK(check_learner_params(g, same(2, p)).empty());
  CHECK_THROWS_AS(check_learner_params(g, same(1, p)), std::invalid_argument);
  using Edit = void (*)(LearnerParams&);
  for (Edit bad : std::initializer_list<Edit>{[](LearnerParams& q) { q.rho = 0.0; }, [](LearnerParams& q) { q.lambda = 1.0; },
                   [](LearnerParams& q) { q.delta = -1.0; },
                   [](LearnerParams& q) { q.step_exponent = 0.5; },
                   [](LearnerParams& q) { q.q_box = -1.0; }}) {
    LearnerParams q = p;
    bad(q);
    CHECK_THROWS_AS(check_learner_params(g, same(2, q)), std::invalid_argument);
  }
  p.delta = 0.0;
  CHECK(check_learner_params(g, same(2, p)).size() == 2);
  p.delta = 0.01;
  p.q_box = 0.1;
  CHECK(check_learner_params(g, same(2, p)).size() == 2);
  CHECK(default_q_box(g, 0) == doctest::Approx(2.0 * 2.0 / 0.2));
}

TEST_CASE("a single step updates one entry per DM") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  const auto joint = space.joint_policy(5);
  std::vector<LearnerState> states{make_learner_state(g, joint[0]), make_learner_state(g, joint[1])};
  for (auto& s : states) s.q.setConstant(100.0);
  const auto params = same(2, LearnerParams{});
  std::vector<StepSizeTable> steps(2, StepSizeTable(0.51));
  RandomStream rng(4);
  int x = 0;
  PhaseTrace trace;
  alg1_phase(g, states, params, 1, x, rng, steps, &trace);
  CHECK(trace.steps == 1);
  for (const auto& s : states) {
    CHECK(((s.q.array() != 100.0).count()) == 1);
    std::int64_t total = 0;
    for (auto v : s.visits) total += v;
    CHECK(total == 1);
  }
}

TEST_CASE("experimentation frequency") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  const auto joint = space.joint_policy(0);
  std::vector<LearnerState> states{make_learner_state(g, joint[0]), make_learner_state(g, joint[1])};
  LearnerParams p;
  p.rho = 0.2;
  const auto params = same(2, p);
  std::vector<StepSizeTable> steps(2, StepSizeTable(0.51));
  RandomStream rng(8);
  int x = 0;
  PhaseTrace trace;
  alg1_phase(g, states, params, 100'000, x, rng, steps, &trace);
  // Always-cooperate baseline: defect is played only when experimenting
  // and the uniform draw lands on it.
  for (int i = 0; i < 2; ++i) {
    const double defect = trace.action_counts[i].col(1).sum() / trace.steps;
    CHECK(std::abs(defect - 0.1) < 0.005);
  }
}

TEST_CASE("bandit Q-factors") {
  const auto g = bandit({1.0, 2.0, 0.5}, 0.5);
  const auto q = single_dm_q_learning(g, uniform_policy(g, 0), {.steps = 200'000}, 3);
  const auto exact = optimal_q_factors(g, 0, std::vector<RandomizedPolicy>{uniform_policy(g, 0)});
  CHECK((q.q - exact.q).cwiseAbs().maxCoeff() < 0.02);
  CHECK(exact.q(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("single-DM Q-learning approaches the fixed point") {
  const auto g = random_game(3, 2, 1, 17);
  const std::vector<RandomizedPolicy> none{uniform_policy(g, 0)};
  const auto exact = optimal_q_factors(g, 0, none, 1e-10);
  const auto q = single_dm_q_learning(g, uniform_policy(g, 0), {.steps = 200'000}, 1);
  CHECK((q.q - exact.q).cwiseAbs().maxCoeff() < 0.1);

  const DeterministicPolicy eval{0, {1, 0, 1}};
  const auto exact_eval = policy_q_factors(g, 0, eval, none, 1e-10);
  const auto qe = policy_eval_q_learning(g, uniform_policy(g, 0), eval, {.steps = 200'000}, 1);
  CHECK((qe.q - exact_eval.q).cwiseAbs().maxCoeff() < 0.1);

  const auto noisy =
      single_dm_q_learning(g, uniform_policy(g, 0), {.steps = 200'000, .cost_noise = 0.5}, 1);
  CHECK((noisy.q - exact.q).cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("single-DM Q-learning rejects bad input") {
  const auto g = random_game(2, 2, 1, 1);
  auto behavior = uniform_policy(g, 0);
  behavior.dist(0, 0) = 0.0;
  behavior.dist(0, 1) = 1.0;
  CHECK_THROWS_AS(single_dm_q_learning(g, behavior, {.steps = 10}, 0), std::invalid_argument);
  const auto pd = build_pd_game({});
  CHECK_THROWS_AS(single_dm_q_learning(pd, uniform_policy(pd, 0), {.steps = 10}, 0),
                  std::invalid_argument);
}

TEST_CASE("near best replies and the inertia update") {
  const auto g = build_pd_game({});
  LearnerState s = make_learner_state(g, DeterministicPolicy{0, {0, 0}});
  s.q << 1.0, 1.05, 2.0, 1.0;
  CHECK(near_best_replies(s, 0.0).size() == 1);
  CHECK(near_best_replies(s, 0.1).size() == 2);

  LearnerParams p;
  p.lambda = 0.5;
  p.delta = 0.1;
  // Baseline (0,0) is not near-best at x=1, so the DM may move.
  alg1_policy_update(s, p, 10.0, FixedDraws({0.4, 0.9}));
  CHECK(s.baseline.action_of == std::vector<int>{0, 0});
  alg1_policy_update(s, p, 10.0, FixedDraws({0.6, 0.9}));
  CHECK(s.baseline.action_of == std::vector<int>{1, 1});
  // Now near-best: stays whatever the draws.
  alg1_policy_update(s, p, 10.0, FixedDraws({0.99, 0.0}));
  CHECK(s.baseline.action_of == std::vector<int>{1, 1});
}

TEST_CASE("two-table acceptance") {
  const DeterministicPolicy base{0, {0, 0}};
  const DeterministicPolicy trial{0, {1, 1}};
  Matrix q(2, 2), qh(2, 2);
  q << 1.0, 0.0, 1.0, 0.0;
  qh << 0.0, 0.95, 0.0, 0.5;
  CHECK(alg2_accepts(q, qh, base, trial, 0.1));
  // Worse by more than delta somewhere.
  qh(0, 1) = 1.2;
  CHECK_FALSE(alg2_accepts(q, qh, base, trial, 0.1));
  // Never strictly better by delta.
  qh << 0.0, 0.95, 0.0, 0.95;
  CHECK_FALSE(alg2_accepts(q, qh, base, trial, 0.1));
  // Huge delta: the second condition can never hold.
  qh << 0.0, -5.0, 0.0, -5.0;
  CHECK_FALSE(alg2_accepts(q, qh, base, trial, 1e6));
}

TEST_CASE("exact tables reject every trial at an equilibrium") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  const double delta = separation_constants(g).delta_check / 2.0;
  const auto joint = space.joint_policy(15);
  const auto others = lift(g, joint);
  for (int i = 0; i < 2; ++i) {
    const auto q = policy_q_factors(g, i, joint[i], others);
    for (std::int64_t k = 0; k < 4; ++k) {
      const auto trial = space.own_policy(i, k);
      const auto qh = policy_q_factors(g, i, trial, others);
      CHECK_FALSE(alg2_accepts(q.q, qh.q, joint[i], trial, delta));
    }
  }
}

TEST_CASE("exact tables accept a strict better reply away from equilibrium") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  const double delta = separation_constants(g).delta_check / 2.0;
  const auto joint = space.joint_policy(0);
  const auto others = lift(g, joint);
  const auto defect = space.own_policy(0, 3);
  const auto q = policy_q_factors(g, 0, joint[0], others);
  const auto qh = policy_q_factors(g, 0, defect, others);
  CHECK(alg2_accepts(q.q, qh.q, joint[0], defect, delta));
}

TEST_CASE("two-table policy update draws a fresh trial policy") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  LearnerParams p;
  p.delta = 1e6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LearnerState s = make_learner_state(g, space.own_policy(0, 2));
    RandomStream rng(seed);
    alg2_policy_update(s, p, 10.0, space, rng);
    CHECK(s.baseline == space.own_policy(0, 2));
    CHECK_FALSE(s.experimental == s.baseline);
  }
}

TEST_CASE("exact Q injection follows the exact process") {
  const auto g = build_pd_game({});
  ResponseCache cache(g);
  cache.fill();
  const auto& space = cache.space();
  LearnerParams p;
  p.delta = separation_constants(g).delta_bar / 2.0;
  const auto inertia = InertiaParams::uniform(2, p.lambda);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomStream a(seed), b(seed);
    std::int64_t learner = seed % 16, reference = learner;
    for (int k = 0; k < 30; ++k) {
      const auto joint = space.joint_policy(learner);
      const auto others = lift(g, joint);
      std::vector<DeterministicPolicy> next;
      for (int i = 0; i < 2; ++i) {
        LearnerState s = make_learner_state(g, joint[i]);
        s.q = optimal_q_factors(g, i, others).q;
        alg1_policy_update(s, p, 10.0, LazyDraws(a));
        next.push_back(s.baseline);
      }
      learner = space.joint_id(JointPolicy{next});
      reference = best_reply_step(cache, reference, inertia, b);
      REQUIRE(learner == reference);
    }
  }
}

TEST_CASE("runs are reproducible and records are consistent") {
  const auto g = build_pd_game({.gamma = 0.1});
  const GameContext ctx(g);
  LearnerParams p;
  p.delta = 0.01;
  const auto params = same(2, p);
  const auto schedule = PhaseSchedule::constant(200);
  RunOptions opts;
  opts.diagnostics = true;
  const auto a = run_alg1(ctx, schedule, params, 0, 20, 5, opts);
  const auto b = run_alg1(ctx, schedule, params, 0, 20, 5, opts);
  REQUIRE(a.phases.size() == 21);
  for (std::size_t k = 0; k < a.phases.size(); ++k) {
    CHECK(a.phases[k].policy == b.phases[k].policy);
    CHECK(a.phases[k].at_equilibrium == ctx.is_equilibrium(a.phases[k].policy));
    CHECK(a.phases[k].q_error.size() == (k + 1 < a.phases.size() ? 2u : 0u));
  }
  CHECK(a.phases[0].policy == 0);
  const auto c = run_alg1(ctx, schedule, params, 0, 20, 6, opts);
  bool differs = false;
  for (std::size_t k = 0; k < c.phases.size(); ++k)
    differs = differs || c.phases[k].q_error != a.phases[k].q_error;
  CHECK(differs);
}

TEST_CASE("coupled runs record the reference process") {
  const auto g = build_pd_game({});
  const GameContext ctx(g);
  LearnerParams p;
  p.delta = 0.05;
  const auto rec =
      run_coupled(ctx, PhaseSchedule::constant(2000), same(2, p), 0, 40, 1);
  REQUIRE(rec.phases.size() == 41);
  CHECK(rec.phases[0].agreement == true);
  for (const auto& r : rec.phases) {
    REQUIRE(r.reference_policy.has_value());
    CHECK(*r.agreement == (r.policy == *r.reference_policy));
  }
  CHECK(rec.fraction_agreement() >= 0.0);
  CHECK(rec.fraction_agreement() <= 1.0);
}

TEST_CASE("the two-table learner moves off always-cooperate") {
  const auto g = build_pd_game({});
  const GameContext ctx(g);
  const auto sep = separation_constants(g);
  LearnerParams p;
  p.delta = std::min(sep.delta_bar, sep.delta_check) / 2.0;
  const auto rec = run_alg2(ctx, PhaseSchedule::constant(5000), same(2, p), 0, 100, 7);
  CHECK(rec.phases.back().policy == 15);
  CHECK(rec.fraction_at_equilibrium() > 0.5);
}
