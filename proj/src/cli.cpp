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

#include "decq/cli.hpp"

#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "decq/dynamics.hpp"
#include "decq/exact_solver.hpp"
#include "decq/experiments.hpp"
#include "decq/io.hpp"
#include "decq/qlearning.hpp"
#include "decq/reply_graph.hpp"

namespace decq {

namespace {

using nlohmann::json;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  std::string format = "csv";
};

class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json load_config(const GlobalOptions& g) {
  if (g.config.empty()) return json::object();
  return read_json_file(g.config);
}

void emit(const GlobalOptions& g, const std::string& text) {
  if (g.out.empty()) std::cout << text;
  else write_text_file(g.out, text);
}

StochasticGame load_game(const GlobalOptions& g) {
  if (g.config.empty()) throw std::invalid_argument("--config is required");
  StochasticGame game = game_from_config(load_config(g));
  const auto report = validate_game(game);
  if (!report.ok()) {
    std::string text = "invalid game:";
    for (const auto& v : report.violations) text += "\n  " + v.what;
    throw ValidationFailure(text);
  }
  return game;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_validate(const GlobalOptions& g) {
  if (g.config.empty()) throw std::invalid_argument("--config is required");
  const StochasticGame game = game_from_config(load_config(g));
  const auto report = validate_game(game);
  std::ostringstream os;
  if (report.ok()) {
    os << "ok\n";
  } else {
    for (const auto& v : report.violations) os << "violation: " << v.what << '\n';
  }
  emit(g, os.str());
  return report.ok() ? kExitOk : kExitValidation;
}

int cmd_solve(const GlobalOptions& g, std::int64_t joint_id) {
  const StochasticGame game = load_game(g);
  const PolicySpace space(game);
  if (joint_id < 0 || joint_id >= space.num_joint_policies())
    throw std::invalid_argument("--policy is out of range");
  const JointPolicy joint = space.joint_policy(joint_id);
  const auto others = lift(game, joint);

  json doc;
  doc["policy"] = joint_id;
  doc["label"] = space.label(joint_id);
  json dms = json::array();
  bool at_equilibrium = true;
  for (int i = 0; i < game.num_dms; ++i) {
    const QTable q = optimal_q_factors(game, i, others);
    const ValueVector v = policy_value(game, i, joint);
    json best = json::array();
    const auto product = best_reply_product(game, i, others);
    for (const auto& p : product.policies()) best.push_back(space.own_index(p));
    const bool is_best = product.contains(joint[i]);
    at_equilibrium = at_equilibrium && is_best;
    dms.push_back({{"dm", i},
                   {"optimal_q", matrix_json(q.q)},
                   {"value", std::vector<double>(v.j.data(), v.j.data() + v.j.size())},
                   {"best_replies", best},
                   {"is_best_reply", is_best}});
  }
  doc["dms"] = std::move(dms);
  doc["at_equilibrium"] = at_equilibrium;
  doc["equilibria"] = equilibria(game);
  const auto sep = separation_constants(game);
  doc["separation"] = {{"delta_bar", finite_or_null(sep.delta_bar)},
                       {"delta_check", finite_or_null(sep.delta_check)}};
  emit(g, doc.dump(2) + "\n");
  return kExitOk;
}

int cmd_graph(const GlobalOptions& g, const std::string& variant_name, bool dot) {
  const StochasticGame game = load_game(g);
  ResponseCache cache(game);
  const auto graph = build_reply_graph(cache, parse_variant(variant_name), g.threads);
  const auto cert = certify_weak_acyclicity(graph);
  if (dot) {
    emit(g, graph_to_dot(graph, cert, cache.space()));
  } else {
    emit(g, graph_to_json(graph, cert, cache.space()).dump(2) + "\n");
  }
  if (!g.out.empty()) {
    std::cout << "variant=" << variant_name << " weakly_acyclic=" << std::boolalpha
              << cert.weakly_acyclic << " equilibria=" << cert.equilibria.size()
              << " L=" << cert.L << " unreachable=" << cert.unreachable.size() << '\n';
  }
  return kExitOk;
}

LearnerParams learner_params(const json& j) {
  LearnerParams p;
  p.rho = j.value("rho", p.rho);
  p.lambda = j.value("lambda", p.lambda);
  p.delta = j.value("delta", p.delta);
  p.step_exponent = j.value("step_exponent", p.step_exponent);
  p.q_box = j.value("q_box", p.q_box);
  if (j.contains("reset")) p.reset = parse_reset_mode(j.at("reset").get<std::string>());
  return p;
}

PhaseSchedule schedule_from(const json& j) {
  const std::string kind = j.value("kind", "constant");
  if (kind == "constant") return PhaseSchedule::constant(j.value("T", std::int64_t{1000}));
  if (kind == "linear")
    return PhaseSchedule::linear(j.value("base", std::int64_t{100}), j.value("slope", std::int64_t{0}));
  if (kind == "list") return PhaseSchedule::list(j.at("T").get<std::vector<std::int64_t>>());
  throw std::invalid_argument("unknown schedule kind: " + kind);
}

std::uint64_t seed_of(const GlobalOptions& g, const json& cfg) {
  return g.seed ? *g.seed : cfg.value("seed", std::uint64_t{0});
}

int cmd_run_baseline(const GlobalOptions& g) {
  const json cfg = load_config(g);
  const StochasticGame game = load_game(g);
  ResponseCache cache(game);
  cache.fill();
  const auto& space = cache.space();
  const auto start = cfg.value("start", std::int64_t{0});
  if (start < 0 || start >= space.num_joint_policies())
    throw std::invalid_argument("start is out of range");
  const auto steps = cfg.value("num_updates", 100);
  const auto params = InertiaParams::uniform(game.num_dms, cfg.value("lambda", 0.5));
  const bool better = cfg.value("process", std::string("best")) == "better";
  const auto seed = seed_of(g, cfg);
  const auto traj = better ? run_better_reply_process(cache, start, steps, params, seed)
                           : run_best_reply_process(cache, start, steps, params, seed);
  std::ostringstream os;
  os << "k,policy,label,at_equilibrium\n";
  for (std::size_t k = 0; k < traj.policies.size(); ++k)
    os << k << ',' << traj.policies[k] << ",\"" << space.label(traj.policies[k]) << "\","
       << (traj.at_equilibrium[k] ? 1 : 0) << '\n';
  emit(g, os.str());
  return kExitOk;
}

enum class RunKind { kAlg1, kAlg2, kCoupled };

int cmd_run_learner(const GlobalOptions& g, RunKind kind) {
  const json cfg = load_config(g);
  const StochasticGame game = load_game(g);
  const GameContext ctx(game);
  const auto& space = ctx.space();

  std::vector<LearnerParams> params(game.num_dms,
                                    learner_params(cfg.value("learner", json::object())));
  for (const auto& w : check_learner_params(game, params)) std::cerr << "warning: " << w << '\n';
  const auto schedule = schedule_from(cfg.value("schedule", json::object()));
  const auto start = cfg.value("start", std::int64_t{0});
  if (start < 0 || start >= space.num_joint_policies())
    throw std::invalid_argument("start is out of range");
  const auto updates = cfg.value("num_updates", std::int64_t{100});
  RunOptions options;
  options.diagnostics = cfg.value("diagnostics", false);
  if (cfg.contains("q_init")) options.q_init = cfg.at("q_init").get<double>();
  const std::string cont = cfg.value("continuation", std::string("baseline"));
  if (cont == "experimental")
    options.two_table.continuation = ExperimentalContinuation::kExperimentalTable;
  else if (cont != "baseline")
    throw std::invalid_argument("continuation must be baseline or experimental");
  const auto seed = seed_of(g, cfg);

  RunRecord rec;
  switch (kind) {
    case RunKind::kAlg1: rec = run_alg1(ctx, schedule, params, start, updates, seed, options); break;
    case RunKind::kAlg2: rec = run_alg2(ctx, schedule, params, start, updates, seed, options); break;
    case RunKind::kCoupled:
      rec = run_coupled(ctx, schedule, params, start, updates, seed, options);
      break;
  }

  std::ostringstream os;
  os << "k,policy,label,at_equilibrium";
  if (kind == RunKind::kCoupled) os << ",reference,agreement";
  if (options.diagnostics)
    for (int i = 0; i < game.num_dms; ++i) os << ",q_error_" << i;
  os << '\n';
  for (const auto& p : rec.phases) {
    os << p.phase << ',' << p.policy << ",\"" << space.label(p.policy) << "\","
       << (p.at_equilibrium ? 1 : 0);
    if (kind == RunKind::kCoupled)
      os << ',' << p.reference_policy.value_or(-1) << ',' << (p.agreement.value_or(false) ? 1 : 0);
    if (options.diagnostics) {
      for (int i = 0; i < game.num_dms; ++i)
        os << ',' << (i < static_cast<int>(p.q_error.size()) ? fmt(p.q_error[i]) : "");
    }
    os << '\n';
  }
  emit(g, os.str());
  std::cerr << "frac_eq=" << rec.fraction_at_equilibrium();
  if (kind == RunKind::kCoupled) std::cerr << " frac_agree=" << rec.fraction_agreement();
  std::cerr << '\n';
  return kExitOk;
}

int cmd_table1(const GlobalOptions& g, const std::string& preset) {
  json cfg = load_config(g);
  if (!preset.empty()) cfg["preset"] = preset;
  ExperimentConfig config = experiment_config_from_json(cfg);
  if (g.seed) config.master_seed = *g.seed;
  std::vector<std::string> warnings;
  const auto rows = table1_experiment(config, g.threads, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  GlobalOptions out = g;
  if (out.out.empty()) out.out = config.out;
  emit(out, table1_csv(rows));
  return kExitOk;
}

int cmd_fig7(const GlobalOptions& g, double a) {
  const StochasticGame game = build_fig7_game(a);
  ResponseCache cache(game);
  json doc = json::array();
  for (auto v : {GraphVariant::kBestSingle, GraphVariant::kBetterSingle, GraphVariant::kBestMulti,
                 GraphVariant::kBetterMulti}) {
    const auto graph = build_reply_graph(cache, v, g.threads);
    const auto cert = certify_weak_acyclicity(graph);
    json unreachable = json::array();
    for (auto id : cert.unreachable) unreachable.push_back(cache.space().label(id));
    json eq = json::array();
    for (auto id : cert.equilibria) eq.push_back(cache.space().label(id));
    doc.push_back({{"variant", std::string(to_string(v))},
                   {"weakly_acyclic", cert.weakly_acyclic},
                   {"L", cert.L},
                   {"equilibria", eq},
                   {"unreachable", unreachable}});
  }
  emit(g, doc.dump(2) + "\n");
  return kExitOk;
}

int cmd_teamgen(const GlobalOptions& g, int states, int actions, int dms, double beta) {
  const auto seed = g.seed.value_or(0);
  emit(g, game_to_json(random_team_game(states, actions, dms, seed, beta)).dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Decentralized Q-learning for weakly acyclic stochastic games"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config or game file");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv"}));

  auto* validate = app.add_subcommand("validate", "check a game definition");
  std::int64_t policy = 0;
  auto* solve = app.add_subcommand("solve", "exact Q-factors and best replies at a joint policy");
  solve->add_option("--policy", policy, "joint policy ID");
  std::string variant = "best-single";
  bool dot = false;
  auto* graph = app.add_subcommand("graph", "reply graph and weak acyclicity certificate");
  graph->add_option("--variant", variant, "best-single | better-single | best-multi | better-multi")
      ->check(CLI::IsMember({"best-single", "better-single", "best-multi", "better-multi"}));
  graph->add_flag("--dot", dot, "emit Graphviz instead of JSON");
  auto* baseline = app.add_subcommand("run-baseline", "exact reply process with inertia");
  auto* alg1 = app.add_subcommand("run-alg1", "decentralized Q-learning");
  auto* alg2 = app.add_subcommand("run-alg2", "two-table decentralized Q-learning");
  auto* coupled = app.add_subcommand("run-coupled", "Q-learning coupled to the exact process");
  std::string preset;
  auto* table1 = app.add_subcommand("table1", "PD benchmark table");
  table1->add_option("--preset", preset, "standard | reduced")
      ->check(CLI::IsMember({"standard", "reduced"}));
  double a = 1.0;
  auto* fig7 = app.add_subcommand("fig7", "certify the three-DM single-stage example");
  fig7->add_option("--a", a, "cost scale")->check(CLI::PositiveNumber);
  int states = 2, actions = 2, dms = 2;
  double beta = 0.9;
  auto* teamgen = app.add_subcommand("teamgen", "random team game as JSON");
  teamgen->add_option("--num-states", states)->check(CLI::PositiveNumber);
  teamgen->add_option("--num-actions", actions)->check(CLI::PositiveNumber);
  teamgen->add_option("--num-dms", dms)->check(CLI::PositiveNumber);
  teamgen->add_option("--beta", beta);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(g);
    if (solve->parsed()) return cmd_solve(g, policy);
    if (graph->parsed()) return cmd_graph(g, variant, dot);
    if (baseline->parsed()) return cmd_run_baseline(g);
    if (alg1->parsed()) return cmd_run_learner(g, RunKind::kAlg1);
    if (alg2->parsed()) return cmd_run_learner(g, RunKind::kAlg2);
    if (coupled->parsed()) return cmd_run_learner(g, RunKind::kCoupled);
    if (table1->parsed()) return cmd_table1(g, preset);
    if (fig7->parsed()) return cmd_fig7(g, a);
    if (teamgen->parsed()) return cmd_teamgen(g, states, actions, dms, beta);
  } catch (const ValidationFailure& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  std::cerr << app.help();
  return kExitUsage;
}

}  // namespace decq
