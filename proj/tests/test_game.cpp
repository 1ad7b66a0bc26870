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

#include <algorithm>
#include <cmath>
#include <set>

#include "decq/experiments.hpp"
#include "decq/game.hpp"
#include "decq/io.hpp"

using namespace decq;

namespace {

StochasticGame one_state_game(int actions, double beta = 0.5) {
  StochasticGame g;
  g.num_dms = 1;
  g.num_states = 1;
  g.action_counts = {actions};
  g.costs = {Matrix::Zero(1, actions)};
  g.kernel = Matrix::Ones(actions, 1);
  g.discounts = Vector::Constant(1, beta);
  g.initial_dist = Vector::Ones(1);
  return g;
}

bool mentions(const ValidationReport& r, const std::string& needle) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.what.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("PD game validates") {
  CHECK(validate_game(build_pd_game({})).ok());
}

TEST_CASE("kernel row with mass 0.9 is reported") {
  auto g = build_pd_game({});
  g.kernel(5, 1) -= 0.1;
  const auto r = validate_game(g);
  REQUIRE_FALSE(r.ok());
  CHECK(mentions(r, "(x=1, u=(0,1)) sums to"));
  CHECK_THROWS_AS(require_valid(g), std::invalid_argument);
}

TEST_CASE("discount of one is reported") {
  auto g = build_pd_game({});
  g.discounts[0] = 1.0;
  const auto r = validate_game(g);
  REQUIRE_FALSE(r.ok());
  CHECK(mentions(r, "discount"));
}

TEST_CASE("negative kernel entry, bad initial distribution and NaN cost are reported") {
  auto g = build_pd_game({});
  g.kernel(0, 0) = -0.1;
  g.kernel(0, 1) = 1.1;
  g.initial_dist[0] = 0.7;
  g.costs[1](1, 2) = std::nan("");
  const auto r = validate_game(g);
  CHECK(r.violations.size() >= 3);
  CHECK(mentions(r, "initial"));
}

TEST_CASE("table shapes are checked") {
  auto g = build_pd_game({});
  g.costs[0] = Matrix::Zero(2, 3);
  CHECK_FALSE(validate_game(g).ok());
  g = build_pd_game({});
  g.kernel = Matrix::Zero(7, 2);
  CHECK_FALSE(validate_game(g).ok());
}

TEST_CASE("joint action index round trip, DM 0 most significant") {
  const auto g = build_fig7_game(1.0);
  CHECK(g.num_joint_actions() == 18);
  for (int a = 0; a < 18; ++a) {
    const auto acts = g.joint_action(a);
    CHECK(g.joint_action_index(acts) == a);
  }
  const int acts[] = {1, 2, 1};
  CHECK(g.joint_action_index(acts) == 1 * 6 + 2 * 2 + 1);
}

TEST_CASE("transition sampling follows the inverse CDF") {
  const auto g = build_pd_game({});
  // x=0, both cooperate: P[x'=0] = 0.7
  int below = 0, above = 0;
  for (int seed = 0; seed < 200; ++seed) {
    RandomStream probe(seed);
    const double u = RandomStream(seed).uniform();
    const int y = sample_transition(g, 0, 0, probe);
    if (u < 0.7) below += y == 0;
    else above += y == 1;
    CHECK(y == (u < 0.7 ? 0 : 1));
  }
  CHECK(below + above == 200);
}

TEST_CASE("deterministic kernel row ignores the draw") {
  StochasticGame g = one_state_game(2);
  g.num_states = 3;
  g.costs = {Matrix::Zero(3, 2)};
  g.kernel = Matrix::Zero(6, 3);
  for (int r = 0; r < 6; ++r) g.kernel(r, 2) = 1.0;
  g.initial_dist = Vector::Constant(3, 1.0 / 3.0);
  RandomStream rng(3);
  for (int k = 0; k < 100; ++k) CHECK(sample_transition(g, k % 3, k % 2, rng) == 2);
}

TEST_CASE("transition frequency over a million draws") {
  const auto g = build_pd_game({});
  RandomStream rng(12345);
  const int n = 1'000'000;
  int hits = 0;
  for (int k = 0; k < n; ++k) hits += sample_transition(g, 0, 0, rng) == 0;
  CHECK(std::abs(hits / double(n) - 0.7) < 0.002);
}

TEST_CASE("sampling rejects bad indices") {
  const auto g = build_pd_game({});
  RandomStream rng(1);
  CHECK_THROWS_AS(sample_transition(g, 2, 0, rng), std::out_of_range);
  CHECK_THROWS_AS(sample_transition(g, 0, 4, rng), std::out_of_range);
}

TEST_CASE("sample_index skips zero-mass entries and absorbs rounding slack") {
  const std::vector<double> p{0.0, 0.5, 0.0, 0.5, 0.0};
  CHECK(sample_index(p, 0.0) == 1);
  CHECK(sample_index(p, 0.49) == 1);
  CHECK(sample_index(p, 0.5) == 3);
  CHECK(sample_index(p, 0.9999999999999999) == 3);
}

TEST_CASE("perturbed policy") {
  const auto g = build_pd_game({});
  const DeterministicPolicy pi{0, {0, 1}};
  const auto r = perturb(g, pi, 0.1);
  CHECK(r.dist(0, 0) == doctest::Approx(0.95));
  CHECK(r.dist(0, 1) == doctest::Approx(0.05));
  CHECK(r.dist(1, 1) == doctest::Approx(0.95));
  CHECK_THROWS_AS(perturb(g, pi, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(perturb(g, pi, 1.0), std::invalid_argument);

  const auto f = build_fig7_game(1.0);
  const auto r3 = perturb(f, DeterministicPolicy{0, {1}}, 0.3);
  CHECK(r3.dist(0, 0) == doctest::Approx(0.1));
  CHECK(r3.dist(0, 1) == doctest::Approx(0.8));
  CHECK(r3.dist(0, 2) == doctest::Approx(0.1));
}

TEST_CASE("policy enumeration counts") {
  CHECK(PolicySpace(build_pd_game({})).num_joint_policies() == 16);
  CHECK(PolicySpace(one_state_game(3)).num_joint_policies() == 3);
  // DM 2 has two actions in the three-DM example
  CHECK(PolicySpace(build_fig7_game(1.0)).num_joint_policies() == 18);
}

TEST_CASE("policy IDs are lexicographic and round trip") {
  const auto g = build_pd_game({});
  const PolicySpace space(g);
  const auto all = enumerate_joint_policies(g);
  REQUIRE(all.size() == 16);
  for (std::int64_t id = 0; id < 16; ++id) {
    CHECK(space.joint_id(all[id]) == id);
    CHECK(space.joint_policy(id) == all[id]);
    const auto own = space.split(id);
    CHECK(space.combine(own) == id);
    for (int i = 0; i < 2; ++i)
      CHECK(space.joint_from_opponents(i, space.opponent_index(id, i), own[i]) == id);
  }
  CHECK(space.own_policy(0, 1).action_of == std::vector<int>{0, 1});
  CHECK(space.own_policy(0, 2).action_of == std::vector<int>{1, 0});
  CHECK(space.label(5) == "0,1|0,1");
}

TEST_CASE("enumeration cap") {
  const auto g = random_game(3, 2, 2, 1);
  CHECK_THROWS_AS(PolicySpace(g, 10), EnumerationCapExceeded);
  CHECK_NOTHROW(PolicySpace(g, 64));
}

TEST_CASE("reachability") {
  CHECK(reachability_check(build_pd_game({})));
  CHECK(reachability_check(one_state_game(2)));
  StochasticGame g = one_state_game(1);
  g.num_states = 2;
  g.costs = {Matrix::Zero(2, 1)};
  g.kernel = Matrix::Zero(2, 2);
  g.kernel(0, 0) = 0.5;
  g.kernel(0, 1) = 0.5;
  g.kernel(1, 1) = 1.0;  // absorbing
  g.initial_dist = Vector::Constant(2, 0.5);
  CHECK(validate_game(g).ok());
  CHECK_FALSE(reachability_check(g));
}

TEST_CASE("game JSON round trip is exact") {
  for (const auto& g : {build_pd_game({}), build_fig7_game(2.5), random_game(3, 2, 2, 9)}) {
    const auto back = game_from_json(game_to_json(g));
    CHECK(back.num_dms == g.num_dms);
    CHECK(back.action_counts == g.action_counts);
    for (int i = 0; i < g.num_dms; ++i) CHECK(back.costs[i] == g.costs[i]);
    CHECK(back.kernel == g.kernel);
    CHECK(back.discounts == g.discounts);
    CHECK(back.initial_dist == g.initial_dist);
  }
}

TEST_CASE("malformed game JSON names the field") {
  auto doc = game_to_json(build_pd_game({}));
  doc["kernel"][1][0][1] = "x";
  try {
    game_from_json(doc);
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("kernel") != std::string::npos);
  }
}

TEST_CASE("child streams are distinct and reproducible") {
  const RandomStream master(7);
  auto a = master.child({0});
  auto b = master.child({1});
  auto a2 = master.child({0});
  std::set<double> seen;
  for (int k = 0; k < 5; ++k) {
    const double x = a.uniform();
    CHECK(x == a2.uniform());
    seen.insert(x);
    seen.insert(b.uniform());
  }
  CHECK(seen.size() == 10);
}
