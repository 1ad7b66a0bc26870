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

#include "decq/game.hpp"

#include <cmath>
#include <deque>
#include <sstream>

namespace decq {

int StochasticGame::num_joint_actions() const {
  int n = 1;
  for (int c : action_counts) n *= c;
  return n;
}

int StochasticGame::joint_action_index(std::span<const int> actions) const {
  if (static_cast<int>(actions.size()) != num_dms)
    throw std::out_of_range("joint action has wrong arity");
  int index = 0;
  for (int i = 0; i < num_dms; ++i) {
    if (actions[i] < 0 || actions[i] >= action_counts[i])
      throw std::out_of_range("action index out of range for DM " + std::to_string(i));
    index = index * action_counts[i] + actions[i];
  }
  return index;
}

std::vector<int> StochasticGame::joint_action(int index) const {
  std::vector<int> out(num_dms);
  for (int i = num_dms - 1; i >= 0; --i) {
    out[i] = index % action_counts[i];
    index /= action_counts[i];
  }
  return out;
}

namespace {

std::string describe_entry(const StochasticGame& game, int x, int joint) {
  std::ostringstream os;
  os << "(x=" << x << ", u=(";
  auto u = game.joint_action(joint);
  for (int i = 0; i < game.num_dms; ++i) os << (i ? "," : "") << u[i];
  os << "))";
  return os.str();
}

}  // namespace

ValidationReport validate_game(const StochasticGame& game) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back({std::move(msg)}); };

  if (game.num_dms <= 0) fail("num_dms must be positive");
  if (game.num_states <= 0) fail("num_states must be positive");
  if (static_cast<int>(game.action_counts.size()) != game.num_dms)
    fail("action_counts must have one entry per DM");
  for (std::size_t i = 0; i < game.action_counts.size(); ++i)
    if (game.action_counts[i] <= 0) fail("DM " + std::to_string(i) + " has no actions");
  if (!report.ok()) return report;

  const int A = game.num_joint_actions();
  const int X = game.num_states;

  if (static_cast<int>(game.costs.size()) != game.num_dms) {
    fail("costs must have one table per DM");
  } else {
    for (int i = 0; i < game.num_dms; ++i) {
      const Matrix& c = game.costs[i];
      if (c.rows() != X || c.cols() != A) {
        fail("cost table of DM " + std::to_string(i) + " is not total over X x U");
        continue;
      }
      for (int x = 0; x < X; ++x)
        for (int a = 0; a < A; ++a)
          if (!std::isfinite(c(x, a)))
            fail("non-finite cost for DM " + std::to_string(i) + " at " +
                 describe_entry(game, x, a));
    }
  }

  if (game.kernel.rows() != static_cast<Eigen::Index>(X) * A || game.kernel.cols() != X) {
    fail("kernel is not total over X x U x X");
  } else {
    for (int x = 0; x < X; ++x) {
      for (int a = 0; a < A; ++a) {
        auto row = game.kernel_row(x, a);
        if ((row.array() < 0.0).any() || !row.allFinite())
          fail("kernel row " + describe_entry(game, x, a) + " has a negative entry");
        double s = row.sum();
        if (std::abs(s - 1.0) > 1e-12)
          fail("kernel row " + describe_entry(game, x, a) + " sums to " + std::to_string(s));
      }
    }
  }

  if (game.discounts.size() != game.num_dms) {
    fail("discounts must have one entry per DM");
  } else {
    for (int i = 0; i < game.num_dms; ++i) {
      double b = game.discounts[i];
      if (!(b > 0.0 && b < 1.0))
        fail("discount of DM " + std::to_string(i) + " = " + std::to_string(b) +
             " is outside (0,1)");
    }
  }

  if (game.initial_dist.size() != X) {
    fail("initial_dist must have num_states entries");
  } else {
    if ((game.initial_dist.array() < 0.0).any()) fail("initial_dist has a negative entry");
    if (std::abs(game.initial_dist.sum() - 1.0) > 1e-12)
      fail("initial_dist sums to " + std::to_string(game.initial_dist.sum()));
  }
  return report;
}

void require_valid(const StochasticGame& game) {
  auto report = validate_game(game);
  if (!report.ok()) throw std::invalid_argument("invalid game: " + report.violations.front().what);
}

JointPolicy JointPolicy::with(const DeterministicPolicy& replacement) const {
  JointPolicy out = *this;
  out.policies.at(replacement.dm) = replacement;
  return out;
}

RandomizedPolicy lift(const StochasticGame& game, const DeterministicPolicy& policy) {
  RandomizedPolicy out{policy.dm, Matrix::Zero(game.num_states, game.action_counts[policy.dm])};
  for (int x = 0; x < game.num_states; ++x) out.dist(x, policy.action_of[x]) = 1.0;
  return out;
}

RandomizedPolicy uniform_policy(const StochasticGame& game, int dm) {
  const int U = game.action_counts[dm];
  return {dm, Matrix::Constant(game.num_states, U, 1.0 / U)};
}

std::vector<RandomizedPolicy> lift(const StochasticGame& game, const JointPolicy& joint) {
  std::vector<RandomizedPolicy> out;
  out.reserve(joint.policies.size());
  for (const auto& p : joint.policies) out.push_back(lift(game, p));
  return out;
}

RandomizedPolicy perturb(const StochasticGame& game, const DeterministicPolicy& policy,
                         double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("perturb: rho must lie in (0,1)");
  const int U = game.action_counts[policy.dm];
  const double off = rho / U;
  RandomizedPolicy out{policy.dm, Matrix::Constant(game.num_states, U, off)};
  for (int x = 0; x < game.num_states; ++x) out.dist(x, policy.action_of[x]) = 1.0 - rho + off;
  return out;
}

int sample_index(std::span<const double> probs, double u) {
  double cum = 0.0;
  int last = -1;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    cum += probs[k];
    last = static_cast<int>(k);
    if (u < cum) return last;
  }
  return last;
}

int sample_transition(const StochasticGame& game, int state, int joint, RandomStream& rng) {
  if (state < 0 || state >= game.num_states) throw std::out_of_range("state index out of range");
  if (joint < 0 || joint >= game.num_joint_actions())
    throw std::out_of_range("joint action index out of range");
  const double u = rng.uniform();
  const Eigen::Index row = static_cast<Eigen::Index>(state) * game.num_joint_actions() + joint;
  double cum = 0.0;
  int last = -1;
  for (int y = 0; y < game.num_states; ++y) {
    const double p = game.kernel(row, y);
    if (p <= 0.0) continue;
    cum += p;
    last = y;
    if (u < cum) return y;
  }
  return last;
}

int sample_transition(const StochasticGame& game, int state, std::span<const int> actions,
                      RandomStream& rng) {
  return sample_transition(game, state, game.joint_action_index(actions), rng);
}

int sample_initial_state(const StochasticGame& game, RandomStream& rng) {
  return sample_index({game.initial_dist.data(), static_cast<std::size_t>(game.initial_dist.size())},
                      rng.uniform());
}

PolicySpace::PolicySpace(const StochasticGame& game, std::uint64_t cap)
    : num_states_(game.num_states), action_counts_(game.action_counts) {
  const long double limit = static_cast<long double>(cap);
  long double total = 1.0L;
  own_counts_.resize(game.num_dms);
  for (int i = 0; i < game.num_dms; ++i) {
    long double own = std::pow(static_cast<long double>(game.action_counts[i]), game.num_states);
    total *= own;
    if (own > limit || total > limit)
      throw EnumerationCapExceeded("joint policy count exceeds enumeration cap " +
                                   std::to_string(cap));
    own_counts_[i] = static_cast<std::int64_t>(own);
  }
  joint_count_ = static_cast<std::int64_t>(total);
  strides_.assign(game.num_dms, 1);
  for (int i = game.num_dms - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * own_counts_[i + 1];
}

DeterministicPolicy PolicySpace::own_policy(int dm, std::int64_t index) const {
  if (index < 0 || index >= own_counts_[dm]) throw std::out_of_range("policy index out of range");
  DeterministicPolicy p{dm, std::vector<int>(num_states_)};
  const int U = action_counts_[dm];
  for (int x = num_states_ - 1; x >= 0; --x) {
    p.action_of[x] = static_cast<int>(index % U);
    index /= U;
  }
  return p;
}

std::int64_t PolicySpace::own_index(const DeterministicPolicy& policy) const {
  const int U = action_counts_.at(policy.dm);
  if (static_cast<int>(policy.action_of.size()) != num_states_)
    throw std::invalid_argument("policy is not total over the state set");
  std::int64_t index = 0;
  for (int a : policy.action_of) {
    if (a < 0 || a >= U) throw std::out_of_range("policy action out of range");
    index = index * U + a;
  }
  return index;
}

JointPolicy PolicySpace::joint_policy(std::int64_t id) const {
  JointPolicy joint;
  auto idx = split(id);
  for (int i = 0; i < num_dms(); ++i) joint.policies.push_back(own_policy(i, idx[i]));
  return joint;
}

std::int64_t PolicySpace::joint_id(const JointPolicy& joint) const {
  if (joint.size() != num_dms()) throw std::invalid_argument("joint policy has wrong arity");
  std::vector<std::int64_t> idx(num_dms());
  for (int i = 0; i < num_dms(); ++i) {
    if (joint[i].dm != i) throw std::invalid_argument("joint policy DM indices are inconsistent");
    idx[i] = own_index(joint[i]);
  }
  return combine(idx);
}

std::vector<std::int64_t> PolicySpace::split(std::int64_t id) const {
  if (id < 0 || id >= joint_count_) throw std::out_of_range("joint policy id out of range");
  std::vector<std::int64_t> out(num_dms());
  for (int i = 0; i < num_dms(); ++i) {
    out[i] = id / strides_[i];
    id %= strides_[i];
  }
  return out;
}

std::int64_t PolicySpace::combine(std::span<const std::int64_t> own_indices) const {
  std::int64_t id = 0;
  for (int i = 0; i < num_dms(); ++i) id += own_indices[i] * strides_[i];
  return id;
}

std::int64_t PolicySpace::opponent_index(std::int64_t id, int dm) const {
  const std::int64_t high = id / (strides_[dm] * own_counts_[dm]);
  const std::int64_t low = id % strides_[dm];
  return high * strides_[dm] + low;
}

std::int64_t PolicySpace::joint_from_opponents(int dm, std::int64_t opp, std::int64_t own) const {
  const std::int64_t high = opp / strides_[dm];
  const std::int64_t low = opp % strides_[dm];
  return high * strides_[dm] * own_counts_[dm] + own * strides_[dm] + low;
}

std::string PolicySpace::label(std::int64_t id) const {
  std::ostringstream os;
  auto idx = split(id);
  for (int i = 0; i < num_dms(); ++i) {
    if (i) os << '|';
    auto p = own_policy(i, idx[i]);
    for (int x = 0; x < num_states_; ++x) os << (x ? "," : "") << p.action_of[x];
  }
  return os.str();
}

std::vector<JointPolicy> enumerate_joint_policies(const StochasticGame& game, std::uint64_t cap) {
  PolicySpace space(game, cap);
  std::vector<JointPolicy> out;
  out.reserve(static_cast<std::size_t>(space.num_joint_policies()));
  for (std::int64_t id = 0; id < space.num_joint_policies(); ++id)
    out.push_back(space.joint_policy(id));
  return out;
}

bool reachability_check(const StochasticGame& game) {
  const int X = game.num_states;
  const int A = game.num_joint_actions();
  std::vector<std::vector<int>> next(X);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < X; ++y)
      for (int a = 0; a < A; ++a)
        if (game.kernel_row(x, a)(y) > 0.0) {
          next[x].push_back(y);
          break;
        }

  // Pairs (x, x) also need a path of length >= 1; BFS seeds from successors.
  for (int src = 0; src < X; ++src) {
    std::vector<char> seen(X, 0);
    std::deque<int> queue;
    for (int y : next[src])
      if (!seen[y]) seen[y] = 1, queue.push_back(y);
    while (!queue.empty()) {
      int x = queue.front();
      queue.pop_front();
      for (int y : next[x])
        if (!seen[y]) seen[y] = 1, queue.push_back(y);
    }
    for (int y = 0; y < X; ++y)
      if (!seen[y]) return false;
  }
  return true;
}

}  // namespace decq
