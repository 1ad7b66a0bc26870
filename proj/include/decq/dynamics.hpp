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

#ifndef DECQ_DYNAMICS_HPP_
#define DECQ_DYNAMICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "decq/exact_solver.hpp"
#include "decq/game.hpp"
#include "decq/rng.hpp"

namespace decq {

struct InertiaParams {
  std::vector<double> lambda;  // per DM, each in (0,1)

  static InertiaParams uniform(int num_dms, double lambda) {
    return {std::vector<double>(num_dms, lambda)};
  }
};

void check_inertia(const InertiaParams& params, int num_dms);

// Draws for one DM's policy update: the inertia coin and the candidate
// selection. LazyDraws pulls them from a stream only when needed; FixedDraws
// replays pre-drawn values so two processes can share them.
class LazyDraws {
 public:
  explicit LazyDraws(RandomStream& rng) : rng_(&rng) {}
  double inertia() { return rng_->uniform(); }
  std::int64_t select(std::int64_t n) { return rng_->index(n); }

 private:
  RandomStream* rng_;
};

struct UpdateDraws {
  double inertia = 0.0;
  double select = 0.0;
};

class FixedDraws {
 public:
  explicit FixedDraws(UpdateDraws d) : d_(d) {}
  double inertia() const { return d_.inertia; }
  std::int64_t select(std::int64_t n) const {
    auto k = static_cast<std::int64_t>(d_.select * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  UpdateDraws d_;
};

// Shared update rule of the inertia processes: keep `current` when
// `current_is_candidate`; otherwise keep with probability `lambda`, else
// jump to candidate `pick(k)` with k uniform in [0, count).
template <typename Draws, typename Pick>
std::int64_t inertia_update(std::int64_t current, bool current_is_candidate,
                            std::int64_t count, double lambda, Draws&& draws, Pick&& pick) {
  if (current_is_candidate || count == 0) return current;
  if (draws.inertia() < lambda) return current;
  return pick(draws.select(count));
}

struct PolicyTrajectory {
  std::vector<std::int64_t> policies;   // joint IDs pi_0 .. pi_K
  std::vector<char> at_equilibrium;     // per entry of `policies`
  std::vector<std::uint64_t> updated;   // bit i: DM i changed between k and k+1
};

// One simultaneous step of the best reply process with inertia. RNG draws
// are consumed in DM order: one inertia draw, then one selection draw when
// the DM moves.
std::int64_t best_reply_step(const ResponseCache& cache, std::int64_t joint,
                             const InertiaParams& params, RandomStream& rng);
JointPolicy best_reply_step(const StochasticGame& game, const JointPolicy& joint,
                            const InertiaParams& params, RandomStream& rng);

// Same step driven by one pre-drawn UpdateDraws per DM.
std::int64_t best_reply_step(const ResponseCache& cache, std::int64_t joint,
                             const InertiaParams& params, std::span<const UpdateDraws> draws);

// Strict-better-reply variant; a DM with no strict better reply keeps its policy.
std::int64_t better_reply_step(const ResponseCache& cache, std::int64_t joint,
                               const InertiaParams& params, RandomStream& rng);
JointPolicy better_reply_step(const StochasticGame& game, const JointPolicy& joint,
                              const InertiaParams& params, RandomStream& rng);

PolicyTrajectory run_best_reply_process(const ResponseCache& cache, std::int64_t start,
                                        int steps, const InertiaParams& params,
                                        std::uint64_t seed);
PolicyTrajectory run_better_reply_process(const ResponseCache& cache, std::int64_t start,
                                          int steps, const InertiaParams& params,
                                          std::uint64_t seed);

}  // namespace decq

#endif  // DECQ_DYNAMICS_HPP_
