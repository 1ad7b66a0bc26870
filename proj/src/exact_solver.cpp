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

#include "decq/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace decq {

namespace {

void check_others(const StochasticGame& game, int dm, std::span<const RandomizedPolicy> others) {
  if (dm < 0 || dm >= game.num_dms) throw std::out_of_range("DM index out of range");
  if (static_cast<int>(others.size()) != game.num_dms)
    throw std::invalid_argument("expected one policy per DM");
  for (int j = 0; j < game.num_dms; ++j) {
    if (j == dm) continue;
    if (others[j].dist.rows() != game.num_states || others[j].dist.cols() != game.action_counts[j])
      throw std::invalid_argument("policy of DM " + std::to_string(j) + " has wrong dimensions");
  }
}

void check_q(const InducedMdp& mdp, const Matrix& q) {
  if (q.rows() != mdp.num_states() || q.cols() != mdp.num_actions())
    throw std::invalid_argument("Q table dimension mismatch");
}

double stopping_change(double beta, double tol) { return tol * (1.0 - beta) / (2.0 * beta); }

}  // namespace

InducedMdp induced_mdp(const StochasticGame& game, int dm,
                       std::span<const RandomizedPolicy> others) {
  check_others(game, dm, others);
  const int X = game.num_states;
  const int U = game.action_counts[dm];
  const int A = game.num_joint_actions();

  InducedMdp mdp{dm, game.discounts[dm], Matrix::Zero(X, U),
                 Matrix::Zero(static_cast<Eigen::Index>(X) * U, X)};
  std::vector<std::vector<int>> decoded(A);
  for (int a = 0; a < A; ++a) decoded[a] = game.joint_action(a);

  for (int x = 0; x < X; ++x) {
    for (int a = 0; a < A; ++a) {
      double p = 1.0;
      for (int j = 0; j < game.num_dms && p > 0.0; ++j)
        if (j != dm) p *= others[j].dist(x, decoded[a][j]);
      if (p == 0.0) continue;
      const int u = decoded[a][dm];
      mdp.cost(x, u) += p * game.cost(dm, x, a);
      mdp.kernel.row(x * U + u) += p * game.kernel_row(x, a);
    }
  }
  return mdp;
}

Vector row_min(const Matrix& q) { return q.rowwise().minCoeff(); }

Matrix apply_optimal_operator(const InducedMdp& mdp, const Matrix& q) {
  check_q(mdp, q);
  const Vector next = mdp.kernel * row_min(q);
  Matrix out(mdp.num_states(), mdp.num_actions());
  for (int x = 0; x < mdp.num_states(); ++x)
    for (int u = 0; u < mdp.num_actions(); ++u)
      out(x, u) = mdp.cost(x, u) + mdp.beta * next(x * mdp.num_actions() + u);
  return out;
}

Matrix apply_policy_operator(const InducedMdp& mdp, const DeterministicPolicy& policy,
                             const Matrix& q) {
  check_q(mdp, q);
  if (static_cast<int>(policy.action_of.size()) != mdp.num_states())
    throw std::invalid_argument("policy is not total over the state set");
  Vector cont(mdp.num_states());
  for (int x = 0; x < mdp.num_states(); ++x) cont(x) = q(x, policy.action_of[x]);
  const Vector next = mdp.kernel * cont;
  Matrix out(mdp.num_states(), mdp.num_actions());
  for (int x = 0; x < mdp.num_states(); ++x)
    for (int u = 0; u < mdp.num_actions(); ++u)
      out(x, u) = mdp.cost(x, u) + mdp.beta * next(x * mdp.num_actions() + u);
  return out;
}

QTable bellman_optimal_operator(const StochasticGame& game, int dm,
                                std::span<const RandomizedPolicy> others, const QTable& q) {
  return {dm, apply_optimal_operator(induced_mdp(game, dm, others), q.q)};
}

QTable bellman_policy_operator(const StochasticGame& game, int dm,
                               const DeterministicPolicy& own,
                               std::span<const RandomizedPolicy> others, const QTable& q) {
  return {dm, apply_policy_operator(induced_mdp(game, dm, others), own, q.q)};
}

QTable optimal_q_factors(const InducedMdp& mdp, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const double stop = stopping_change(mdp.beta, tol);
  Matrix q = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (;;) {
    Matrix next = apply_optimal_operator(mdp, q);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (change <= stop) break;
  }
  return {mdp.dm, std::move(q)};
}

QTable optimal_q_factors(const StochasticGame& game, int dm,
                         std::span<const RandomizedPolicy> others, double tol) {
  return optimal_q_factors(induced_mdp(game, dm, others), tol);
}

QTable policy_q_factors(const InducedMdp& mdp, const DeterministicPolicy& own, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const double stop = stopping_change(mdp.beta, tol);
  Matrix q = Matrix::Zero(mdp.num_states(), mdp.num_actions());
  for (;;) {
    Matrix next = apply_policy_operator(mdp, own, q);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (change <= stop) break;
  }
  return {mdp.dm, std::move(q)};
}

QTable policy_q_factors(const StochasticGame& game, int dm, const DeterministicPolicy& own,
                        std::span<const RandomizedPolicy> others, double tol) {
  return policy_q_factors(induced_mdp(game, dm, others), own, tol);
}

ValueVector policy_value(const StochasticGame& game, int dm,
                         std::span<const RandomizedPolicy> joint) {
  if (static_cast<int>(joint.size()) != game.num_dms)
    throw std::invalid_argument("expected one policy per DM");
  const int X = game.num_states;
  const int A = game.num_joint_actions();
  Vector c = Vector::Zero(X);
  Matrix P = Matrix::Zero(X, X);
  for (int a = 0; a < A; ++a) {
    const auto u = game.joint_action(a);
    for (int x = 0; x < X; ++x) {
      double p = 1.0;
      for (int j = 0; j < game.num_dms && p > 0.0; ++j) p *= joint[j].dist(x, u[j]);
      if (p == 0.0) continue;
      c(x) += p * game.cost(dm, x, a);
      P.row(x) += p * game.kernel_row(x, a);
    }
  }
  const Matrix system = Matrix::Identity(X, X) - game.discounts[dm] * P;
  return {dm, system.partialPivLu().solve(c)};
}

ValueVector policy_value(const StochasticGame& game, int dm, const JointPolicy& joint) {
  const auto lifted = lift(game, joint);
  return policy_value(game, dm, lifted);
}

ActionProduct::ActionProduct(int dm, std::vector<std::vector<int>> choices)
    : dm_(dm), choices_(std::move(choices)), size_(1) {
  for (const auto& c : choices_) size_ *= static_cast<std::int64_t>(c.size());
}

DeterministicPolicy ActionProduct::at(std::int64_t k) const {
  if (k < 0 || k >= size_) throw std::out_of_range("ActionProduct index out of range");
  DeterministicPolicy p{dm_, std::vector<int>(choices_.size())};
  for (int x = static_cast<int>(choices_.size()) - 1; x >= 0; --x) {
    const auto n = static_cast<std::int64_t>(choices_[x].size());
    p.action_of[x] = choices_[x][k % n];
    k /= n;
  }
  return p;
}

bool ActionProduct::contains(const DeterministicPolicy& policy) const {
  if (policy.action_of.size() != choices_.size()) return false;
  for (std::size_t x = 0; x < choices_.size(); ++x)
    if (std::find(choices_[x].begin(), choices_[x].end(), policy.action_of[x]) ==
        choices_[x].end())
      return false;
  return true;
}

std::vector<DeterministicPolicy> ActionProduct::policies() const {
  std::vector<DeterministicPolicy> out;
  out.reserve(static_cast<std::size_t>(size_));
  for (std::int64_t k = 0; k < size_; ++k) out.push_back(at(k));
  return out;
}

ActionProduct near_minimizers(int dm, const Matrix& q, double slack) {
  std::vector<std::vector<int>> choices(q.rows());
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    const double best = q.row(x).minCoeff();
    for (Eigen::Index u = 0; u < q.cols(); ++u)
      if (q(x, u) <= best + slack) choices[x].push_back(static_cast<int>(u));
  }
  return ActionProduct(dm, std::move(choices));
}

ActionProduct best_reply_product(const StochasticGame& game, int dm,
                                 std::span<const RandomizedPolicy> others, double tol) {
  return near_minimizers(dm, optimal_q_factors(game, dm, others, tol).q, kTieTolerance);
}

std::vector<DeterministicPolicy> best_reply_set(const StochasticGame& game, int dm,
                                                std::span<const RandomizedPolicy> others,
                                                double tol) {
  return best_reply_product(game, dm, others, tol).policies();
}

namespace {

bool strictly_better(const Vector& candidate, const Vector& current) {
  return ((current - candidate).array() > kTieTolerance).any();
}

bool weakly_better(const Vector& candidate, const Vector& current) {
  return ((candidate - current).array() <= kTieTolerance).all();
}

}  // namespace

std::vector<DeterministicPolicy> strict_better_reply_set(const StochasticGame& game, int dm,
                                                         const JointPolicy& joint) {
  PolicySpace space(game);
  const Vector current = policy_value(game, dm, joint).j;
  std::vector<DeterministicPolicy> out;
  for (std::int64_t m = 0; m < space.num_own_policies(dm); ++m) {
    auto candidate = space.own_policy(dm, m);
    const Vector v = policy_value(game, dm, joint.with(candidate)).j;
    if (weakly_better(v, current) && strictly_better(v, current)) out.push_back(candidate);
  }
  return out;
}

bool is_strict_best_reply(const StochasticGame& game, int dm,
                          const DeterministicPolicy& candidate, const JointPolicy& joint) {
  const auto others = lift(game, joint);
  if (!best_reply_product(game, dm, others).contains(candidate)) return false;
  const Vector current = policy_value(game, dm, joint).j;
  const Vector improved = policy_value(game, dm, joint.with(candidate)).j;
  return strictly_better(improved, current);
}

bool ResponseAnalysis::is_best(std::int64_t own) const {
  return std::binary_search(best.begin(), best.end(), own);
}

bool ResponseAnalysis::strictly_improves(std::int64_t candidate, std::int64_t own) const {
  return strictly_better(values.col(candidate), values.col(own));
}

bool ResponseAnalysis::weakly_improves(std::int64_t candidate, std::int64_t own) const {
  return weakly_better(values.col(candidate), values.col(own));
}

std::vector<std::int64_t> ResponseAnalysis::strict_best_from(std::int64_t own) const {
  std::vector<std::int64_t> out;
  for (auto m : best)
    if (strictly_improves(m, own)) out.push_back(m);
  return out;
}

std::vector<std::int64_t> ResponseAnalysis::strict_better_from(std::int64_t own) const {
  std::vector<std::int64_t> out;
  for (Eigen::Index m = 0; m < values.cols(); ++m)
    if (m != own && weakly_improves(m, own) && strictly_improves(m, own)) out.push_back(m);
  return out;
}

ResponseAnalysis analyze_response(const StochasticGame& game, const PolicySpace& space, int dm,
                                  std::int64_t opponent_profile, double tol) {
  const auto joint = space.joint_policy(space.joint_from_opponents(dm, opponent_profile, 0));
  const auto others = lift(game, joint);
  const InducedMdp mdp = induced_mdp(game, dm, others);
  const int X = game.num_states;
  const int U = mdp.num_actions();

  ResponseAnalysis out;
  out.dm = dm;
  out.q_opt = optimal_q_factors(mdp, tol);

  const auto own_count = space.num_own_policies(dm);
  out.values.resize(X, own_count);
  Matrix P(X, X);
  Vector c(X);
  for (std::int64_t m = 0; m < own_count; ++m) {
    const auto p = space.own_policy(dm, m);
    for (int x = 0; x < X; ++x) {
      c(x) = mdp.cost(x, p.action_of[x]);
      P.row(x) = mdp.kernel.row(x * U + p.action_of[x]);
    }
    const Matrix system = Matrix::Identity(X, X) - mdp.beta * P;
    out.values.col(m) = system.partialPivLu().solve(c);
  }

  const auto product = near_minimizers(dm, out.q_opt.q, kTieTolerance);
  for (std::int64_t k = 0; k < product.size(); ++k) out.best.push_back(space.own_index(product.at(k)));
  return out;
}

ResponseCache::ResponseCache(const StochasticGame& game, double tol, std::uint64_t cap)
    : game_(&game), space_(game, cap), tol_(tol) {
  table_.resize(game.num_dms);
  for (int i = 0; i < game.num_dms; ++i)
    table_[i].resize(static_cast<std::size_t>(space_.num_opponent_profiles(i)));
}

const ResponseAnalysis& ResponseCache::at(int dm, std::int64_t opponent_profile) {
  auto& slot = table_.at(dm).at(static_cast<std::size_t>(opponent_profile));
  if (!slot) slot = analyze_response(*game_, space_, dm, opponent_profile, tol_);
  return *slot;
}

bool ResponseCache::is_equilibrium(std::int64_t joint_id) {
  const auto own = space_.split(joint_id);
  for (int i = 0; i < game_->num_dms; ++i)
    if (!for_joint(i, joint_id).is_best(own[i])) return false;
  return true;
}

const ResponseAnalysis& ResponseCache::get(int dm, std::int64_t opponent_profile) const {
  const auto& slot = table_.at(dm).at(static_cast<std::size_t>(opponent_profile));
  if (!slot) throw std::logic_error("ResponseCache entry read before fill()");
  return *slot;
}

bool ResponseCache::is_equilibrium(std::int64_t joint_id) const {
  const auto own = space_.split(joint_id);
  for (int i = 0; i < game_->num_dms; ++i)
    if (!get(i, space_.opponent_index(joint_id, i)).is_best(own[i])) return false;
  return true;
}

void ResponseCache::fill() {
  for (int i = 0; i < game_->num_dms; ++i)
    for (std::int64_t opp = 0; opp < space_.num_opponent_profiles(i); ++opp) at(i, opp);
}

namespace {

// Smallest |a - b| over pairs in `values` that exceeds `guard`.
double min_separation(std::vector<double> values, double guard) {
  std::sort(values.begin(), values.end());
  double best = std::numeric_limits<double>::infinity();
  std::size_t j = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    while (j < values.size() && values[j] - values[k] <= guard) ++j;
    if (j < values.size()) best = std::min(best, values[j] - values[k]);
  }
  return best;
}

}  // namespace

SeparationConstants separation_constants(const StochasticGame& game, double tol,
                                         std::uint64_t cap) {
  PolicySpace space(game, cap);
  const double guard = 10.0 * tol;
  SeparationConstants sep;
  for (int i = 0; i < game.num_dms; ++i) {
    for (std::int64_t opp = 0; opp < space.num_opponent_profiles(i); ++opp) {
      const auto joint = space.joint_policy(space.joint_from_opponents(i, opp, 0));
      const InducedMdp mdp = induced_mdp(game, i, lift(game, joint));
      const Matrix q = optimal_q_factors(mdp, tol).q;
      for (int x = 0; x < game.num_states; ++x) {
        std::vector<double> row;
        for (Eigen::Index u = 0; u < q.cols(); ++u) row.push_back(q(x, u));
        sep.delta_bar = std::min(sep.delta_bar, min_separation(row, guard));
      }

      const auto own_count = space.num_own_policies(i);
      Matrix entries(game.num_states, own_count);
      for (std::int64_t m = 0; m < own_count; ++m) {
        const auto p = space.own_policy(i, m);
        const Matrix qp = policy_q_factors(mdp, p, tol).q;
        for (int x = 0; x < game.num_states; ++x) entries(x, m) = qp(x, p.action_of[x]);
      }
      for (int x = 0; x < game.num_states; ++x) {
        std::vector<double> row;
        for (std::int64_t m = 0; m < own_count; ++m) row.push_back(entries(x, m));
        sep.delta_check = std::min(sep.delta_check, min_separation(row, guard));
      }
    }
  }
  return sep;
}

std::vector<double> perturbation_gaps(const StochasticGame& game, double rho, ReplyKind kind,
                                      double tol, std::uint64_t cap) {
  PolicySpace space(game, cap);
  std::vector<double> gaps(game.num_dms, 0.0);
  for (int i = 0; i < game.num_dms; ++i) {
    for (std::int64_t opp = 0; opp < space.num_opponent_profiles(i); ++opp) {
      const auto joint = space.joint_policy(space.joint_from_opponents(i, opp, 0));
      const auto exact = lift(game, joint);
      std::vector<RandomizedPolicy> perturbed;
      for (const auto& p : joint.policies) perturbed.push_back(perturb(game, p, rho));
      const InducedMdp mdp_exact = induced_mdp(game, i, exact);
      const InducedMdp mdp_perturbed = induced_mdp(game, i, perturbed);
      if (kind == ReplyKind::kBest) {
        const Matrix d = optimal_q_factors(mdp_exact, tol).q - optimal_q_factors(mdp_perturbed, tol).q;
        gaps[i] = std::max(gaps[i], d.cwiseAbs().maxCoeff());
      } else {
        for (std::int64_t m = 0; m < space.num_own_policies(i); ++m) {
          const auto p = space.own_policy(i, m);
          const Matrix d =
              policy_q_factors(mdp_exact, p, tol).q - policy_q_factors(mdp_perturbed, p, tol).q;
          gaps[i] = std::max(gaps[i], d.cwiseAbs().maxCoeff());
        }
      }
    }
  }
  return gaps;
}

double experimentation_bound(const StochasticGame& game, std::span<const double> deltas,
                             ReplyKind kind, const SeparationConstants& sep, double tol,
                             std::uint64_t cap) {
  if (static_cast<int>(deltas.size()) != game.num_dms)
    throw std::invalid_argument("expected one tolerance per DM");
  const double separation = kind == ReplyKind::kBest ? sep.delta_bar : sep.delta_check;
  for (double d : deltas)
    if (!(d > 0.0 && d < separation))
      throw std::invalid_argument("experimentation_bound: each delta must lie in (0, separation)");

  auto verified = [&](int grid) {
    const auto gaps = perturbation_gaps(game, grid * 1e-3, kind, tol, cap);
    for (int i = 0; i < game.num_dms; ++i)
      if (!(gaps[i] < 0.5 * std::min(deltas[i], separation - deltas[i]))) return false;
    return true;
  };

  int lo = 0;     // treated as passing
  int hi = 1000;  // rho = 1 is outside the admissible range
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (verified(mid)) lo = mid;
    else hi = mid;
  }
  return lo * 1e-3;
}

double experimentation_bound(const StochasticGame& game, std::span<const double> deltas,
                             ReplyKind kind, double tol, std::uint64_t cap) {
  return experimentation_bound(game, deltas, kind, separation_constants(game, tol, cap), tol, cap);
}

}  // namespace decq
