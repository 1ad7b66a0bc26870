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

#include "decq/dynamics.hpp"

#include <stdexcept>

namespace decq {

void check_inertia(const InertiaParams& params, int num_dms) {
  if (static_cast<int>(params.lambda.size()) != num_dms)
    throw std::invalid_argument("expected one inertia per DM");
  for (double l : params.lambda)
    if (!(l > 0.0 && l < 1.0)) throw std::invalid_argument("inertia must lie in (0,1)");
}

namespace {

template <typename DrawsFor>
std::int64_t step_with(const ResponseCache& cache, std::int64_t joint, const InertiaParams& params,
                       bool best, DrawsFor&& draws_for) {
  const PolicySpace& space = cache.space();
  const auto own = space.split(joint);
  auto next = own;
  for (int i = 0; i < space.num_dms(); ++i) {
    const auto& resp = cache.get(i, space.opponent_index(joint, i));
    if (best) {
      next[i] = inertia_update(own[i], resp.is_best(own[i]),
                               static_cast<std::int64_t>(resp.best.size()), params.lambda[i],
                               draws_for(i), [&](std::int64_t k) { return resp.best[k]; });
    } else {
      const auto better = resp.strict_better_from(own[i]);
      next[i] = inertia_update(own[i], better.empty(), static_cast<std::int64_t>(better.size()),
                               params.lambda[i], draws_for(i),
                               [&](std::int64_t k) { return better[k]; });
    }
  }
  return space.combine(next);
}

ResponseCache filled_cache(const StochasticGame& game) {
  ResponseCache cache(game);
  cache.fill();
  return cache;
}

PolicyTrajectory run_process(const ResponseCache& cache, std::int64_t start, int steps,
                             const InertiaParams& params, std::uint64_t seed, bool best) {
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  check_inertia(params, cache.space().num_dms());
  RandomStream rng(seed);
  PolicyTrajectory traj;
  traj.policies.push_back(start);
  traj.at_equilibrium.push_back(cache.is_equilibrium(start));
  auto current = start;
  const auto& space = cache.space();
  for (int k = 0; k < steps; ++k) {
    const auto next = step_with(cache, current, params, best,
                                [&](int) { return LazyDraws(rng); });
    const auto a = space.split(current);
    const auto b = space.split(next);
    std::uint64_t mask = 0;
    for (int i = 0; i < space.num_dms(); ++i)
      if (a[i] != b[i]) mask |= std::uint64_t{1} << i;
    traj.updated.push_back(mask);
    traj.policies.push_back(next);
    traj.at_equilibrium.push_back(cache.is_equilibrium(next));
    current = next;
  }
  return traj;
}

}  // namespace

std::int64_t best_reply_step(const ResponseCache& cache, std::int64_t joint,
                             const InertiaParams& params, RandomStream& rng) {
  return step_with(cache, joint, params, true, [&](int) { return LazyDraws(rng); });
}

std::int64_t best_reply_step(const ResponseCache& cache, std::int64_t joint,
                             const InertiaParams& params, std::span<const UpdateDraws> draws) {
  return step_with(cache, joint, params, true, [&](int i) { return FixedDraws(draws[i]); });
}

std::int64_t better_reply_step(const ResponseCache& cache, std::int64_t joint,
                               const InertiaParams& params, RandomStream& rng) {
  return step_with(cache, joint, params, false, [&](int) { return LazyDraws(rng); });
}

JointPolicy best_reply_step(const StochasticGame& game, const JointPolicy& joint,
                            const InertiaParams& params, RandomStream& rng) {
  check_inertia(params, game.num_dms);
  const auto cache = filled_cache(game);
  const auto& space = cache.space();
  return space.joint_policy(best_reply_step(cache, space.joint_id(joint), params, rng));
}

JointPolicy better_reply_step(const StochasticGame& game, const JointPolicy& joint,
                              const InertiaParams& params, RandomStream& rng) {
  check_inertia(params, game.num_dms);
  const auto cache = filled_cache(game);
  const auto& space = cache.space();
  return space.joint_policy(better_reply_step(cache, space.joint_id(joint), params, rng));
}

PolicyTrajectory run_best_reply_process(const ResponseCache& cache, std::int64_t start, int steps,
                                        const InertiaParams& params, std::uint64_t seed) {
  return run_process(cache, start, steps, params, seed, true);
}

PolicyTrajectory run_better_reply_process(const ResponseCache& cache, std::int64_t start,
                                          int steps, const InertiaParams& params,
                                          std::uint64_t seed) {
  return run_process(cache, start, steps, params, seed, false);
}

}  // namespace decq
