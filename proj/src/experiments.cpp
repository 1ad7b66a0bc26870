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

#include "decq/experiments.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "decq/io.hpp"
#include "decq/parallel.hpp"
#include "decq/reply_graph.hpp"

namespace decq {

void check_pd_params(const PdParams& p) {
  if (!(p.b > p.c && p.c > 0.0 && 0.0 > p.a))
    throw std::invalid_argument("PD parameters must satisfy b > c > 0 > a");
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
}

StochasticGame build_pd_game(const PdParams& p) {
  check_pd_params(p);
  // utility[own][other]
  const double utility[2][2] = {{p.c, p.a}, {p.b, 0.0}};
  StochasticGame g;
  g.num_dms = 2;
  g.num_states = 2;
  g.action_counts = {2, 2};
  g.costs.assign(2, Matrix::Zero(2, 4));
  g.kernel = Matrix::Zero(8, 2);
  for (int x = 0; x < 2; ++x) {
    for (int u0 = 0; u0 < 2; ++u0) {
      for (int u1 = 0; u1 < 2; ++u1) {
        const int a = u0 * 2 + u1;
        g.costs[0](x, a) = -utility[u0][u1];
        g.costs[1](x, a) = -utility[u1][u0];
        const bool cooperate = u0 == 0 && u1 == 0;
        g.kernel(x * 4 + a, 0) = cooperate ? 1.0 - p.gamma : p.gamma;
        g.kernel(x * 4 + a, 1) = cooperate ? p.gamma : 1.0 - p.gamma;
      }
    }
  }
  g.discounts = Vector::Constant(2, p.beta);
  g.initial_dist = Vector::Constant(2, 0.5);
  return g;
}

std::vector<std::int64_t> pd_reference_equilibria() {
  // own index 1 = (C, D), own index 3 = (D, D); joint = own0 * 4 + own1
  return {1 * 4 + 1, 3 * 4 + 3};
}

std::string pd_equilibrium_mismatch(const StochasticGame& game) {
  const auto found = equilibria(game);
  if (found == pd_reference_equilibria()) return {};
  const PolicySpace space(game);
  std::string list;
  for (auto id : found) list += " [" + space.label(id) + "]";
  return "PD equilibria differ from {always-defect, cooperate-in-x0}; found:" + list;
}

StochasticGame build_fig7_game(double a, double beta) {
  if (!(a > 0.0)) throw std::invalid_argument("the cost scale a must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
  // [matrix][row][column] -> cost triple in units of a
  const int table[2][3][3][3] = {
      {{{-1, 0, 0}, {0, 1, 0}, {0, -1, -1}},
       {{1, 0, 0}, {-1, -1, 0}, {1, 0, 0}},
       {{0, -1, -1}, {0, 1, 0}, {-1, 0, -1}}},
      {{{0, -1, -1}, {0, 0, 0}, {0, 0, 0}},
       {{1, 0, 0}, {-1, 0, -1}, {-1, -1, -1}},
       {{-1, -1, 0}, {0, 0, 0}, {0, 0, 0}}},
  };
  StochasticGame g;
  g.num_dms = 3;
  g.num_states = 1;
  g.action_counts = {3, 3, 2};
  g.costs.assign(3, Matrix::Zero(1, 18));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int m = 0; m < 2; ++m)
        for (int i = 0; i < 3; ++i) g.costs[i](0, r * 6 + c * 2 + m) = a * table[m][r][c][i];
  g.kernel = Matrix::Ones(18, 1);
  g.discounts = Vector::Constant(3, beta);
  g.initial_dist = Vector::Ones(1);
  return g;
}

namespace {

StochasticGame random_shell(int num_states, int num_actions, int num_dms, RandomStream& rng) {
  if (num_states < 1 || num_actions < 1 || num_dms < 1)
    throw std::invalid_argument("random games need at least one state, action and DM");
  StochasticGame g;
  g.num_dms = num_dms;
  g.num_states = num_states;
  g.action_counts.assign(num_dms, num_actions);
  const int A = g.num_joint_actions();
  g.kernel.resize(static_cast<Eigen::Index>(num_states) * A, num_states);
  for (Eigen::Index r = 0; r < g.kernel.rows(); ++r) {
    for (int y = 0; y < num_states; ++y) g.kernel(r, y) = 1.0 - rng.uniform();
    g.kernel.row(r) /= g.kernel.row(r).sum();
  }
  g.initial_dist = Vector::Constant(num_states, 1.0 / num_states);
  return g;
}

}  // namespace

StochasticGame random_team_game(int num_states, int num_actions, int num_dms, std::uint64_t seed,
                                double beta, std::uint64_t cap) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
  RandomStream rng(seed);
  StochasticGame g = random_shell(num_states, num_actions, num_dms, rng);
  Matrix shared(num_states, g.num_joint_actions());
  for (Eigen::Index k = 0; k < shared.size(); ++k) shared.data()[k] = rng.uniform();
  g.costs.assign(num_dms, shared);
  g.discounts = Vector::Constant(num_dms, beta);
  PolicySpace(g, cap);
  return g;
}

StochasticGame random_game(int num_states, int num_actions, int num_dms, std::uint64_t seed,
                           std::uint64_t cap) {
  RandomStream rng(seed);
  StochasticGame g = random_shell(num_states, num_actions, num_dms, rng);
  for (int i = 0; i < num_dms; ++i) {
    Matrix c(num_states, g.num_joint_actions());
    for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] = rng.uniform();
    g.costs.push_back(std::move(c));
  }
  g.discounts.resize(num_dms);
  for (int i = 0; i < num_dms; ++i) g.discounts[i] = 0.5 + 0.45 * rng.uniform();
  PolicySpace(g, cap);
  return g;
}

ExperimentConfig ExperimentConfig::standard() { return {}; }

ExperimentConfig ExperimentConfig::reduced() {
  ExperimentConfig c;
  c.label = "table1-reduced";
  c.phase_lengths = {10, 25, 50, 100, 1000};
  return c;
}

void check_experiment_config(const ExperimentConfig& config) {
  check_pd_params(config.pd);
  if (config.phase_lengths.empty()) throw std::invalid_argument("the T list must be nonempty");
  for (auto T : config.phase_lengths)
    if (T < 1) throw std::invalid_argument("every T must be at least 1");
  if (config.num_updates < 0) throw std::invalid_argument("num_updates must be nonnegative");
  if (config.seeds_per_start < 1) throw std::invalid_argument("seeds_per_start must be at least 1");
  for (auto s : config.starts)
    if (s < 0 || s >= 16) throw std::invalid_argument("PD start IDs lie in [0, 16)");
}

namespace {

LearnerParams learner_from_json(const nlohmann::json& j, LearnerParams p) {
  p.rho = j.value("rho", p.rho);
  p.lambda = j.value("lambda", p.lambda);
  p.delta = j.value("delta", p.delta);
  p.step_exponent = j.value("step_exponent", p.step_exponent);
  p.q_box = j.value("q_box", p.q_box);
  if (j.contains("reset")) p.reset = parse_reset_mode(j.at("reset").get<std::string>());
  return p;
}

PdParams pd_from_json(const nlohmann::json& j, PdParams p) {
  p.a = j.value("a", p.a);
  p.b = j.value("b", p.b);
  p.c = j.value("c", p.c);
  p.gamma = j.value("gamma", p.gamma);
  p.beta = j.value("beta", p.beta);
  return p;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc) {
  const std::string preset = doc.value("preset", "standard");
  ExperimentConfig c;
  if (preset == "reduced") c = ExperimentConfig::reduced();
  else if (preset != "standard") throw std::invalid_argument("unknown preset: " + preset);
  c.label = doc.value("label", c.label);
  if (doc.contains("pd")) c.pd = pd_from_json(doc.at("pd"), c.pd);
  if (doc.contains("game")) {
    const auto& g = doc.at("game");
    if (g.value("builder", "pd") != "pd")
      throw std::invalid_argument("table1 runs on the PD builder only");
    c.pd = pd_from_json(g.value("params", nlohmann::json::object()), c.pd);
  }
  if (doc.contains("T")) c.phase_lengths = doc.at("T").get<std::vector<std::int64_t>>();
  c.num_updates = doc.value("num_updates", c.num_updates);
  if (doc.contains("starts")) c.starts = doc.at("starts").get<std::vector<std::int64_t>>();
  c.seeds_per_start = doc.value("seeds_per_start", c.seeds_per_start);
  if (doc.contains("learner")) c.learner = learner_from_json(doc.at("learner"), c.learner);
  c.master_seed = doc.value("seed", c.master_seed);
  c.out = doc.value("out", c.out);
  c.strict_preflight = doc.value("strict_preflight", c.strict_preflight);
  check_experiment_config(c);
  return c;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  return {{"label", c.label},
          {"pd", {{"a", c.pd.a}, {"b", c.pd.b}, {"c", c.pd.c}, {"gamma", c.pd.gamma},
                  {"beta", c.pd.beta}}},
          {"T", c.phase_lengths},
          {"num_updates", c.num_updates},
          {"starts", c.starts},
          {"seeds_per_start", c.seeds_per_start},
          {"learner", {{"rho", c.learner.rho}, {"lambda", c.learner.lambda},
                       {"delta", c.learner.delta}, {"step_exponent", c.learner.step_exponent},
                       {"q_box", c.learner.q_box},
                       {"reset", std::string(to_string(c.learner.reset))}}},
          {"seed", c.master_seed},
          {"out", c.out},
          {"strict_preflight", c.strict_preflight}};
}

std::uint64_t cell_seed(std::uint64_t master_seed, std::int64_t T, std::int64_t start,
                        int replicate) {
  return RandomStream(master_seed)
      .child({static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(start),
              static_cast<std::uint64_t>(replicate)})
      .seed();
}

std::vector<Table1Row> table1_experiment(const ExperimentConfig& config, int threads,
                                         std::vector<std::string>* warnings) {
  check_experiment_config(config);
  const StochasticGame game = build_pd_game(config.pd);
  if (auto msg = pd_equilibrium_mismatch(game); !msg.empty()) {
    if (config.strict_preflight) throw std::runtime_error(msg);
    if (warnings) warnings->push_back(msg);
  }
  const GameContext ctx(game);

  std::vector<std::int64_t> starts = config.starts;
  if (starts.empty())
    for (std::int64_t s = 0; s < ctx.space().num_joint_policies(); ++s) starts.push_back(s);
  const std::vector<LearnerParams> params(game.num_dms, config.learner);

  const auto per_T = static_cast<std::int64_t>(starts.size()) * config.seeds_per_start;
  const auto cells = static_cast<std::int64_t>(config.phase_lengths.size()) * per_T;
  std::vector<std::pair<double, double>> result(static_cast<std::size_t>(cells));
  // Longest phases first so the pool drains evenly.
  std::vector<std::int64_t> order(static_cast<std::size_t>(cells));
  for (std::int64_t k = 0; k < cells; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t l, std::int64_t r) {
    return config.phase_lengths[l / per_T] > config.phase_lengths[r / per_T];
  });

  parallel_for(cells, threads, [&](std::int64_t n) {
    const auto k = order[n];
    const auto T = config.phase_lengths[k / per_T];
    const auto rest = k % per_T;
    const auto start = starts[rest / config.seeds_per_start];
    const int rep = static_cast<int>(rest % config.seeds_per_start);
    const auto rec = run_coupled(ctx, PhaseSchedule::constant(T), params, start,
                                 config.num_updates, cell_seed(config.master_seed, T, start, rep));
    result[k] = {rec.fraction_at_equilibrium(), rec.fraction_agreement()};
  });

  std::vector<Table1Row> rows;
  for (std::size_t t = 0; t < config.phase_lengths.size(); ++t) {
    Table1Row row{config.phase_lengths[t], 0.0, 0.0};
    for (std::int64_t j = 0; j < per_T; ++j) {
      row.frac_eq += result[t * per_T + j].first;
      row.frac_agree += result[t * per_T + j].second;
    }
    row.frac_eq /= static_cast<double>(per_T);
    row.frac_agree /= static_cast<double>(per_T);
    rows.push_back(row);
  }
  return rows;
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::ostringstream os;
  os << "T,frac_eq,frac_agree\n" << std::fixed << std::setprecision(6);
  for (const auto& r : rows) os << r.T << ',' << r.frac_eq << ',' << r.frac_agree << '\n';
  return os.str();
}

StochasticGame game_from_config(const nlohmann::json& doc) {
  if (doc.contains("game")) return game_from_config(doc.at("game"));
  if (!doc.contains("builder")) return game_from_json(doc);
  const std::string builder = doc.at("builder").get<std::string>();
  const auto params = doc.value("params", nlohmann::json::object());
  if (builder == "pd") return build_pd_game(pd_from_json(params, {}));
  if (builder == "fig7") return build_fig7_game(params.value("a", 1.0), params.value("beta", 0.9));
  if (builder == "team" || builder == "random") {
    const int X = params.value("num_states", 2);
    const int U = params.value("num_actions", 2);
    const int N = params.value("num_dms", 2);
    const auto seed = params.value("seed", std::uint64_t{0});
    return builder == "team" ? random_team_game(X, U, N, seed, params.value("beta", 0.9))
                             : random_game(X, U, N, seed);
  }
  throw std::invalid_argument("unknown game builder: " + builder);
}

}  // namespace decq
