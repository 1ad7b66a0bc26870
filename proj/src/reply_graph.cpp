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

#include "decq/reply_graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "decq/parallel.hpp"

namespace decq {

std::string_view to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::kBestSingle: return "best-single";
    case GraphVariant::kBetterSingle: return "better-single";
    case GraphVariant::kBestMulti: return "best-multi";
    case GraphVariant::kBetterMulti: return "better-multi";
  }
  return "?";
}

GraphVariant parse_variant(std::string_view name) {
  for (auto v : {GraphVariant::kBestSingle, GraphVariant::kBetterSingle, GraphVariant::kBestMulti,
                 GraphVariant::kBetterMulti})
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown graph variant: " + std::string(name));
}

bool ReplyGraph::has_edge(std::int64_t from, std::int64_t to) const {
  const auto& out = edges.at(from);
  return std::any_of(out.begin(), out.end(), [&](const ReplyEdge& e) { return e.target == to; });
}

std::vector<std::int64_t> ReplyGraph::sinks() const {
  std::vector<std::int64_t> out;
  for (std::int64_t v = 0; v < num_nodes; ++v)
    if (is_sink(v)) out.push_back(v);
  return out;
}

ReplyGraph build_reply_graph(ResponseCache& cache, GraphVariant variant, int threads) {
  const PolicySpace& space = cache.space();
  const int N = space.num_dms();
  if (N > 64) throw std::invalid_argument("reply graphs support at most 64 DMs");
  cache.fill();
  const ResponseCache& shared = cache;

  const bool best = variant == GraphVariant::kBestSingle || variant == GraphVariant::kBestMulti;
  const bool multi = variant == GraphVariant::kBestMulti || variant == GraphVariant::kBetterMulti;

  ReplyGraph graph{variant, space.num_joint_policies(), {}};
  graph.edges.resize(static_cast<std::size_t>(graph.num_nodes));

  parallel_for(graph.num_nodes, threads, [&](std::int64_t node) {
    const auto own = space.split(node);
    std::vector<std::vector<std::int64_t>> options(N);
    for (int i = 0; i < N; ++i) {
      const auto& resp = shared.get(i, space.opponent_index(node, i));
      options[i] = best ? resp.strict_best_from(own[i]) : resp.strict_better_from(own[i]);
    }
    auto& out = graph.edges[node];
    if (!multi) {
      for (int i = 0; i < N; ++i) {
        for (auto m : options[i]) {
          auto target = own;
          target[i] = m;
          out.push_back({space.combine(target), std::uint64_t{1} << i});
        }
      }
    } else {
      // Odometer over (keep | option_0 | option_1 | ...) per DM.
      std::vector<std::size_t> pick(N, 0);
      for (;;) {
        int d = 0;
        while (d < N && ++pick[d] > options[d].size()) pick[d++] = 0;
        if (d == N) break;
        auto target = own;
        std::uint64_t mask = 0;
        for (int i = 0; i < N; ++i) {
          if (pick[i] == 0) continue;
          target[i] = options[i][pick[i] - 1];
          mask |= std::uint64_t{1} << i;
        }
        out.push_back({space.combine(target), mask});
      }
    }
    std::sort(out.begin(), out.end(),
              [](const ReplyEdge& a, const ReplyEdge& b) { return a.target < b.target; });
  });
  return graph;
}

ReplyGraph build_reply_graph(const StochasticGame& game, GraphVariant variant, double tol,
                             int threads) {
  ResponseCache cache(game, tol);
  return build_reply_graph(cache, variant, threads);
}

std::vector<std::int64_t> equilibria(const StochasticGame& game, double tol) {
  ResponseCache cache(game, tol);
  const auto graph = build_reply_graph(cache, GraphVariant::kBestSingle);
  const PolicySpace& space = cache.space();
  auto sinks = graph.sinks();
  for (auto id : sinks) {
    const auto joint = space.joint_policy(id);
    const auto others = lift(game, joint);
    for (int i = 0; i < game.num_dms; ++i) {
      if (!best_reply_product(game, i, others, tol).contains(joint[i]))
        throw std::logic_error("sink " + space.label(id) + " fails the best-reply check for DM " +
                               std::to_string(i));
    }
  }
  return sinks;
}

std::vector<std::int64_t> AcyclicityCertificate::witness_path(std::int64_t node) const {
  std::vector<std::int64_t> path;
  if (distance.at(node) < 0) return path;
  for (auto v = node; v >= 0; v = next_hop[v]) path.push_back(v);
  return path;
}

AcyclicityCertificate certify_weak_acyclicity(const ReplyGraph& graph) {
  const auto n = graph.num_nodes;
  std::vector<std::vector<std::int64_t>> reverse(static_cast<std::size_t>(n));
  for (std::int64_t v = 0; v < n; ++v)
    for (const auto& e : graph.edges[v]) reverse[e.target].push_back(v);

  AcyclicityCertificate cert;
  cert.distance.assign(static_cast<std::size_t>(n), -1);
  cert.next_hop.assign(static_cast<std::size_t>(n), -1);
  std::deque<std::int64_t> queue;
  for (std::int64_t v = 0; v < n; ++v) {
    if (graph.is_sink(v)) {
      cert.equilibria.push_back(v);
      cert.distance[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : reverse[u]) {
      if (cert.distance[v] >= 0) continue;
      cert.distance[v] = cert.distance[u] + 1;
      cert.next_hop[v] = u;
      cert.L = std::max(cert.L, cert.distance[v]);
      queue.push_back(v);
    }
  }
  for (std::int64_t v = 0; v < n; ++v)
    if (cert.distance[v] < 0) cert.unreachable.push_back(v);
  cert.weakly_acyclic = cert.unreachable.empty();
  return cert;
}

namespace {

std::vector<int> mask_to_list(std::uint64_t mask) {
  std::vector<int> out;
  for (int i = 0; i < 64; ++i)
    if (mask >> i & 1U) out.push_back(i);
  return out;
}

}  // namespace

nlohmann::json graph_to_json(const ReplyGraph& graph, const AcyclicityCertificate& cert,
                             const PolicySpace& space) {
  using nlohmann::json;
  json doc;
  doc["variant"] = std::string(to_string(graph.variant));
  doc["num_nodes"] = graph.num_nodes;
  json nodes = json::array();
  for (std::int64_t v = 0; v < graph.num_nodes; ++v)
    nodes.push_back({{"id", v}, {"label", space.label(v)}, {"sink", graph.is_sink(v)}});
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (std::int64_t v = 0; v < graph.num_nodes; ++v)
    for (const auto& e : graph.edges[v])
      edges.push_back({{"from", v}, {"to", e.target}, {"deviators", mask_to_list(e.deviators)}});
  doc["edges"] = std::move(edges);

  json witnesses = json::object();
  for (std::int64_t v = 0; v < graph.num_nodes; ++v)
    if (cert.distance[v] >= 0) witnesses[std::to_string(v)] = cert.witness_path(v);
  doc["certificate"] = {{"weakly_acyclic", cert.weakly_acyclic},
                        {"L", cert.L},
                        {"equilibria", cert.equilibria},
                        {"unreachable", cert.unreachable},
                        {"witness_paths", std::move(witnesses)}};
  return doc;
}

std::string graph_to_dot(const ReplyGraph& graph, const AcyclicityCertificate& cert,
                         const PolicySpace& space) {
  std::ostringstream os;
  os << "digraph \"" << to_string(graph.variant) << "\" {\n";
  for (std::int64_t v = 0; v < graph.num_nodes; ++v) {
    os << "  n" << v << " [label=\"" << space.label(v) << "\"";
    if (graph.is_sink(v)) os << ", shape=doublecircle";
    else if (cert.distance[v] < 0) os << ", style=dashed";
    os << "];\n";
  }
  for (std::int64_t v = 0; v < graph.num_nodes; ++v)
    for (const auto& e : graph.edges[v]) os << "  n" << v << " -> n" << e.target << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace decq
