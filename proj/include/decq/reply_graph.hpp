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

#ifndef DECQ_REPLY_GRAPH_HPP_
#define DECQ_REPLY_GRAPH_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "decq/exact_solver.hpp"
#include "decq/game.hpp"

namespace decq {

enum class GraphVariant { kBestSingle, kBetterSingle, kBestMulti, kBetterMulti };

std::string_view to_string(GraphVariant v);
// Accepts "best-single", "better-single", "best-multi", "better-multi".
GraphVariant parse_variant(std::string_view name);

struct ReplyEdge {
  std::int64_t target = 0;
  std::uint64_t deviators = 0;  // bit i set when DM i changes policy

  friend bool operator==(const ReplyEdge&, const ReplyEdge&) = default;
};

// Directed graph over deterministic joint policies, nodes in PolicySpace
// joint-ID order. Edges of each node are sorted by target.
struct ReplyGraph {
  GraphVariant variant = GraphVariant::kBestSingle;
  std::int64_t num_nodes = 0;
  std::vector<std::vector<ReplyEdge>> edges;

  bool is_sink(std::int64_t node) const { return edges[node].empty(); }
  bool has_edge(std::int64_t from, std::int64_t to) const;
  std::vector<std::int64_t> sinks() const;
};

// Single-DM variants: one DM deviates to a strict best (better) reply.
// Multi-DM variants: a nonempty set of DMs deviates simultaneously, each to a
// strict best (better) reply against the pre-deviation joint policy.
ReplyGraph build_reply_graph(ResponseCache& cache, GraphVariant variant, int threads = 1);
ReplyGraph build_reply_graph(const StochasticGame& game, GraphVariant variant,
                             double tol = kSolverTolerance, int threads = 1);

// Sinks of the best-single graph, each cross-checked against best_reply_set.
std::vector<std::int64_t> equilibria(const StochasticGame& game, double tol = kSolverTolerance);

struct AcyclicityCertificate {
  bool weakly_acyclic = false;
  // Maximum over nodes that reach a sink of the shortest path length.
  int L = 0;
  std::vector<std::int64_t> equilibria;
  std::vector<std::int64_t> unreachable;  // nodes with no path to a sink
  std::vector<int> distance;              // -1 when unreachable
  std::vector<std::int64_t> next_hop;     // -1 at sinks and unreachable nodes

  // Shortest path from `node` to a sink, both endpoints included; empty if
  // the node cannot reach one.
  std::vector<std::int64_t> witness_path(std::int64_t node) const;
};

AcyclicityCertificate certify_weak_acyclicity(const ReplyGraph& graph);

nlohmann::json graph_to_json(const ReplyGraph& graph, const AcyclicityCertificate& cert,
                             const PolicySpace& space);
std::string graph_to_dot(const ReplyGraph& graph, const AcyclicityCertificate& cert,
                         const PolicySpace& space);

}  // namespace decq

#endif  // DECQ_REPLY_GRAPH_HPP_
