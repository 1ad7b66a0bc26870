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

#ifndef DECQ_EXACT_SOLVER_HPP_
#define DECQ_EXACT_SOLVER_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "decq/game.hpp"

namespace decq {

// Tie tolerance for argmin sets and strict-improvement tests.
inline constexpr double kTieTolerance = 1e-9;
// Value-iteration accuracy used when a caller does not pass one.
inline constexpr double kSolverTolerance = 1e-11;

struct QTable {
  int dm = 0;
  Matrix q;  // num_states x |U^dm|
};

struct ValueVector {
  int dm = 0;
  Vector j;
};

struct SeparationConstants {
  double delta_bar = std::numeric_limits<double>::infinity();
  double delta_check = std::numeric_limits<double>::infinity();
  std::optional<double> rho_bar;
  std::optional<double> rho_check;
};

// The MDP that DM `dm` faces when every other DM plays a fixed stationary
// randomized policy: expected one-stage cost and expected kernel per own action.
struct InducedMdp {
  int dm = 0;
  double beta = 0.0;
  Matrix cost;    // num_states x |U|
  Matrix kernel;  // (num_states * |U|) x num_states, row x * |U| + u

  int num_states() const { return static_cast<int>(cost.rows()); }
  int num_actions() const { return static_cast<int>(cost.cols()); }
};

// `others` holds one policy per DM; the entry for `dm` is ignored.
InducedMdp induced_mdp(const StochasticGame& game, int dm,
                       std::span<const RandomizedPolicy> others);

// Per-state minimum over actions.
Vector row_min(const Matrix& q);

Matrix apply_optimal_operator(const InducedMdp& mdp, const Matrix& q);
Matrix apply_policy_operator(const InducedMdp& mdp, const DeterministicPolicy& policy,
                             const Matrix& q);

QTable bellman_optimal_operator(const StochasticGame& game, int dm,
                                std::span<const RandomizedPolicy> others, const QTable& q);
QTable bellman_policy_operator(const StochasticGame& game, int dm,
                               const DeterministicPolicy& own,
                               std::span<const RandomizedPolicy> others, const QTable& q);

// Value iteration from q = 0, stopped once the sup-change is at most
// tol * (1 - beta) / (2 * beta), which puts the result within tol of the
// fixed point.
QTable optimal_q_factors(const InducedMdp& mdp, double tol = kSolverTolerance);
QTable optimal_q_factors(const StochasticGame& game, int dm,
                         std::span<const RandomizedPolicy> others,
                         double tol = kSolverTolerance);

// Fixed point of the operator whose continuation is q(x', own(x')).
QTable policy_q_factors(const InducedMdp& mdp, const DeterministicPolicy& own,
                        double tol = kSolverTolerance);
QTable policy_q_factors(const StochasticGame& game, int dm, const DeterministicPolicy& own,
                        std::span<const RandomizedPolicy> others,
                        double tol = kSolverTolerance);

// Exact discounted cost of DM `dm` from every initial state, by a direct
// solve of (I - beta P) J = c.
ValueVector policy_value(const StochasticGame& game, int dm,
                         std::span<const RandomizedPolicy> joint);
ValueVector policy_value(const StochasticGame& game, int dm, const JointPolicy& joint);

// Cartesian product of per-state action sets, iterated lexicographically
// with state 0 as the most significant digit. The order agrees with
// PolicySpace::own_index restricted to the product.
class ActionProduct {
 public:
  ActionProduct() = default;
  ActionProduct(int dm, std::vector<std::vector<int>> choices);

  int dm() const { return dm_; }
  std::int64_t size() const { return size_; }
  DeterministicPolicy at(std::int64_t k) const;
  bool contains(const DeterministicPolicy& policy) const;
  std::vector<DeterministicPolicy> policies() const;
  const std::vector<std::vector<int>>& choices() const { return choices_; }

 private:
  int dm_ = 0;
  std::vector<std::vector<int>> choices_;
  std::int64_t size_ = 0;
};

// Per state, every action within `slack` of the row minimum.
ActionProduct near_minimizers(int dm, const Matrix& q, double slack);

ActionProduct best_reply_product(const StochasticGame& game, int dm,
                                 std::span<const RandomizedPolicy> others,
                                 double tol = kSolverTolerance);
std::vector<DeterministicPolicy> best_reply_set(const StochasticGame& game, int dm,
                                                std::span<const RandomizedPolicy> others,
                                                double tol = kSolverTolerance);

std::vector<DeterministicPolicy> strict_better_reply_set(const StochasticGame& game, int dm,
                                                         const JointPolicy& joint);

bool is_strict_best_reply(const StochasticGame& game, int dm,
                          const DeterministicPolicy& candidate, const JointPolicy& joint);

// Everything DM `dm` can compute about its replies to one deterministic
// opponent profile. Own policies are addressed by PolicySpace own index.
struct ResponseAnalysis {
  int dm = 0;
  QTable q_opt;
  Matrix values;                    // num_states x num_own_policies
  std::vector<std::int64_t> best;   // ascending own indices

  bool is_best(std::int64_t own) const;
  // Strict improvement at some state over `own`, no worse anywhere for better replies.
  bool strictly_improves(std::int64_t candidate, std::int64_t own) const;
  bool weakly_improves(std::int64_t candidate, std::int64_t own) const;
  std::vector<std::int64_t> strict_best_from(std::int64_t own) const;
  std::vector<std::int64_t> strict_better_from(std::int64_t own) const;
};

ResponseAnalysis analyze_response(const StochasticGame& game, const PolicySpace& space, int dm,
                                  std::int64_t opponent_profile,
                                  double tol = kSolverTolerance);

// Lazily filled table of ResponseAnalysis, one per (dm, opponent profile).
class ResponseCache {
 public:
  ResponseCache(const StochasticGame& game, double tol = kSolverTolerance,
                std::uint64_t cap = kDefaultEnumerationCap);

  const StochasticGame& game() const { return *game_; }
  const PolicySpace& space() const { return space_; }
  const ResponseAnalysis& at(int dm, std::int64_t opponent_profile);
  const ResponseAnalysis& for_joint(int dm, std::int64_t joint_id) {
    return at(dm, space_.opponent_index(joint_id, dm));
  }
  bool is_equilibrium(std::int64_t joint_id);
  // Read-only access; throws std::logic_error if the entry was never filled.
  const ResponseAnalysis& get(int dm, std::int64_t opponent_profile) const;
  bool is_equilibrium(std::int64_t joint_id) const;
  // Fills every entry so that later reads are safe from several threads.
  void fill();

 private:
  const StochasticGame* game_;
  PolicySpace space_;
  double tol_;
  std::vector<std::vector<std::optional<ResponseAnalysis>>> table_;
};

// Minimum separations between distinct optimal Q entries (delta_bar) and
// between distinct policy-evaluation entries (delta_check). Pairs closer
// than 10 * tol are treated as ties; +inf when no distinct pair exists.
SeparationConstants separation_constants(const StochasticGame& game,
                                         double tol = kSolverTolerance,
                                         std::uint64_t cap = kDefaultEnumerationCap);

enum class ReplyKind { kBest, kBetter };

// Largest common experimentation rate on the 1e-3 grid (found by bisection)
// for which perturbing every opponent keeps the exact Q-factors within
// min(delta, separation - delta) / 2 for all DMs and deterministic profiles.
// kBest checks optimal Q-factors against delta_bar; kBetter checks
// policy-evaluation Q-factors against delta_check. Returns 0 if no grid
// point passes.
double experimentation_bound(const StochasticGame& game, std::span<const double> deltas,
                             ReplyKind kind, double tol = kSolverTolerance,
                             std::uint64_t cap = kDefaultEnumerationCap);
double experimentation_bound(const StochasticGame& game, std::span<const double> deltas,
                             ReplyKind kind, const SeparationConstants& sep,
                             double tol = kSolverTolerance,
                             std::uint64_t cap = kDefaultEnumerationCap);

// Per DM: sup-distance between exact Q-factors under a deterministic
// opponent profile and under its rho-perturbation, maximised over profiles
// (and over own policies for kBetter).
std::vector<double> perturbation_gaps(const StochasticGame& game, double rho, ReplyKind kind,
                        double tol = kSolverTolerance,
                        std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace decq

#endif  // DECQ_EXACT_SOLVER_HPP_
