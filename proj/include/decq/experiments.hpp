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

#ifndef DECQ_EXPERIMENTS_HPP_
#define DECQ_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "decq/game.hpp"
#include "decq/qlearning.hpp"

namespace decq {

// Two-state Prisoner's Dilemma whose state drifts towards x=0 after mutual
// cooperation and towards x=1 otherwise. Utilities are stored as costs by
// negation. Action 0 is cooperate, 1 is defect.
struct PdParams {
  double a = -1.0;
  double b = 2.0;
  double c = 1.0;
  double gamma = 0.3;
  double beta = 0.8;
};

void check_pd_params(const PdParams& p);
StochasticGame build_pd_game(const PdParams& p);

// Joint IDs of always-defect and of (cooperate in x=0, defect in x=1).
std::vector<std::int64_t> pd_reference_equilibria();

// Empty when the equilibria are exactly the two reference joint policies,
// otherwise a message listing what was found.
std::string pd_equilibrium_mismatch(const StochasticGame& game);

// Single-state three-DM game: DM 0 picks the row, DM 1 the column and
// DM 2 (two actions) the matrix.
StochasticGame build_fig7_game(double a, double beta = 0.9);

// Common-payoff game: one cost table drawn uniformly from [0,1], one
// discount, kernel rows from normalized positive draws.
StochasticGame random_team_game(int num_states, int num_actions, int num_dms, std::uint64_t seed,
                                double beta = 0.9,
                                std::uint64_t cap = kDefaultEnumerationCap);

// Independent cost tables per DM and discounts drawn from [0.5, 0.95].
StochasticGame random_game(int num_states, int num_actions, int num_dms, std::uint64_t seed,
                           std::uint64_t cap = kDefaultEnumerationCap);

struct ExperimentConfig {
  std::string label = "table1";
  PdParams pd;
  std::vector<std::int64_t> phase_lengths{10, 25, 50, 100, 1000, 10000, 50000};
  std::int64_t num_updates = 1000;
  std::vector<std::int64_t> starts;  // empty: every joint policy
  int seeds_per_start = 1;
  LearnerParams learner;
  std::uint64_t master_seed = 0;
  std::string out;
  // Abort instead of warning when the PD equilibria differ from the reference pair.
  bool strict_preflight = false;

  static ExperimentConfig standard();
  // T <= 1000 for quick checks; not the standard protocol.
  static ExperimentConfig reduced();
};

void check_experiment_config(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

struct Table1Row {
  std::int64_t T = 0;
  double frac_eq = 0.0;
  double frac_agree = 0.0;
};

// Cells (T, start, replicate) run in parallel with seeds derived from the
// master seed; the rows do not depend on `threads`.
// Pre-flight messages are appended to `warnings` when given.
std::vector<Table1Row> table1_experiment(const ExperimentConfig& config, int threads = 1,
                                         std::vector<std::string>* warnings = nullptr);

std::string table1_csv(const std::vector<Table1Row>& rows);

// Per-cell seed used by table1_experiment.
std::uint64_t cell_seed(std::uint64_t master_seed, std::int64_t T, std::int64_t start,
                        int replicate);

// Builds a game from a config document: either an inline game definition
// (see io.hpp), or {"builder": "pd" | "fig7" | "team" | "random", ...}.
// A top-level "game" key is followed if present.
StochasticGame game_from_config(const nlohmann::json& doc);

}  // namespace decq

#endif  // DECQ_EXPERIMENTS_HPP_
