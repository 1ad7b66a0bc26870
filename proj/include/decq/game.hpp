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

#ifndef DECQ_GAME_HPP_
#define DECQ_GAME_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "decq/rng.hpp"

namespace decq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Finite discounted stochastic game with dense tables.
//
// Joint actions are flattened with DM 0 as the most significant digit.
// costs[i] is num_states x num_joint_actions; kernel is
// (num_states * num_joint_actions) x num_states with row x * A + a.
// Every DM minimizes its expected discounted cost.
struct StochasticGame {
  int num_dms = 0;
  int num_states = 0;
  std::vector<int> action_counts;
  std::vector<Matrix> costs;
  Matrix kernel;
  Vector discounts;
  Vector initial_dist;

  int num_joint_actions() const;
  int joint_action_index(std::span<const int> actions) const;
  std::vector<int> joint_action(int index) const;

  double cost(int dm, int state, int joint) const { return costs[dm](state, joint); }
  auto kernel_row(int state, int joint) const {
    return kernel.row(state * num_joint_actions() + joint);
  }
};

struct Violation {
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_game(const StochasticGame& game);

// Throws std::invalid_argument with the first violation when the game is
// malformed.
void require_valid(const StochasticGame& game);

struct DeterministicPolicy {
  int dm = 0;
  std::vector<int> action_of;

  friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

struct RandomizedPolicy {
  int dm = 0;
  Matrix dist;  // num_states x |U^dm|
};

struct JointPolicy {
  std::vector<DeterministicPolicy> policies;

  const DeterministicPolicy& operator[](int i) const { return policies[i]; }
  DeterministicPolicy& operator[](int i) { return policies[i]; }
  int size() const { return static_cast<int>(policies.size()); }

  // Replaces DM i's component, keeping the others.
  JointPolicy with(const DeterministicPolicy& replacement) const;

  friend bool operator==(const JointPolicy&, const JointPolicy&) = default;
};

RandomizedPolicy lift(const StochasticGame& game, const DeterministicPolicy& policy);
RandomizedPolicy uniform_policy(const StochasticGame& game, int dm);
std::vector<RandomizedPolicy> lift(const StochasticGame& game, const JointPolicy& joint);

// (1 - rho) * policy + rho * uniform, per state.
RandomizedPolicy perturb(const StochasticGame& game, const DeterministicPolicy& policy,
                         double rho);

// Inverse-CDF over the fixed state order; consumes exactly one uniform draw.
int sample_transition(const StochasticGame& game, int state, int joint, RandomStream& rng);
int sample_transition(const StochasticGame& game, int state, std::span<const int> actions,
                      RandomStream& rng);
int sample_initial_state(const StochasticGame& game, RandomStream& rng);

// Inverse-CDF sampling from a probability row, with the last positive-mass
// index absorbing rounding slack.
int sample_index(std::span<const double> probs, double u);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

class EnumerationCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integer coordinates for deterministic policies.
//
// A DM's policy index reads the policy as a base-|U^i| number with state 0 as
// the most significant digit; a joint ID reads the per-DM indices with DM 0
// most significant. Both orders are lexicographic, so IDs are stable.
class PolicySpace {
 public:
  explicit PolicySpace(const StochasticGame& game,
                       std::uint64_t cap = kDefaultEnumerationCap);

  int num_dms() const { return static_cast<int>(own_counts_.size()); }
  int num_states() const { return num_states_; }
  std::int64_t num_own_policies(int dm) const { return own_counts_[dm]; }
  std::int64_t num_joint_policies() const { return joint_count_; }

  DeterministicPolicy own_policy(int dm, std::int64_t index) const;
  std::int64_t own_index(const DeterministicPolicy& policy) const;

  JointPolicy joint_policy(std::int64_t id) const;
  std::int64_t joint_id(const JointPolicy& joint) const;

  std::vector<std::int64_t> split(std::int64_t id) const;
  std::int64_t combine(std::span<const std::int64_t> own_indices) const;

  // Index of the opponents' profile (DM dm's digit removed) in [0, prod_{j!=dm} |Pi^j|).
  std::int64_t opponent_index(std::int64_t id, int dm) const;
  std::int64_t num_opponent_profiles(int dm) const { return joint_count_ / own_counts_[dm]; }
  // Joint ID obtained by giving DM dm own index `own` within opponent profile `opp`.
  std::int64_t joint_from_opponents(int dm, std::int64_t opp, std::int64_t own) const;

  // Human-readable label, e.g. "0,1|1,1" (per-DM actions by state).
  std::string label(std::int64_t id) const;

 private:
  int num_states_ = 0;
  std::vector<int> action_counts_;
  std::vector<std::int64_t> own_counts_;
  std::vector<std::int64_t> strides_;
  std::int64_t joint_count_ = 0;
};

std::vector<JointPolicy> enumerate_joint_policies(const StochasticGame& game,
                                                  std::uint64_t cap = kDefaultEnumerationCap);

// Every ordered state pair is connected by some open-loop joint-action sequence.
bool reachability_check(const StochasticGame& game);

}  // namespace decq

#endif  // DECQ_GAME_HPP_
