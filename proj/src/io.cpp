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

#include "decq/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace decq {

using nlohmann::json;

namespace {

// Walks a nested array along `shape` and calls emit(flat_index, value).
template <typename Emit>
void read_nested(const json& node, std::span<const int> shape, int depth, long flat,
                 const std::string& field, Emit&& emit) {
  if (depth == static_cast<int>(shape.size())) {
    if (!node.is_number()) throw std::invalid_argument(field + ": expected a number");
    emit(flat, node.get<double>());
    return;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != shape[depth])
    throw std::invalid_argument(field + ": expected an array of length " +
                                std::to_string(shape[depth]) + " at depth " +
                                std::to_string(depth));
  for (int k = 0; k < shape[depth]; ++k)
    read_nested(node[k], shape, depth + 1, flat * shape[depth] + k, field, emit);
}

json write_nested(std::span<const int> shape, int depth, long flat,
                  const std::function<double(long)>& value) {
  if (depth == static_cast<int>(shape.size())) return value(flat);
  json arr = json::array();
  for (int k = 0; k < shape[depth]; ++k)
    arr.push_back(write_nested(shape, depth + 1, flat * shape[depth] + k, value));
  return arr;
}

Vector vector_from(const json& node, const std::string& field) {
  if (!node.is_array()) throw std::invalid_argument(field + ": expected an array");
  Vector v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t k = 0; k < node.size(); ++k) {
    if (!node[k].is_number()) throw std::invalid_argument(field + ": expected numbers");
    v[static_cast<Eigen::Index>(k)] = node[k].get<double>();
  }
  return v;
}

}  // namespace

StochasticGame game_from_json(const json& doc) {
  for (const char* key : {"num_dms", "num_states", "action_counts", "costs", "kernel",
                          "discounts", "initial_dist"})
    if (!doc.contains(key)) throw std::invalid_argument(std::string("game: missing field ") + key);

  StochasticGame g;
  g.num_dms = doc.at("num_dms").get<int>();
  g.num_states = doc.at("num_states").get<int>();
  g.action_counts = doc.at("action_counts").get<std::vector<int>>();
  if (g.num_dms <= 0 || g.num_states <= 0 || static_cast<int>(g.action_counts.size()) != g.num_dms)
    throw std::invalid_argument("game: inconsistent num_dms/num_states/action_counts");
  for (int c : g.action_counts)
    if (c <= 0) throw std::invalid_argument("game: action counts must be positive");

  const int X = g.num_states;
  const int A = g.num_joint_actions();

  std::vector<int> cost_shape{g.num_dms, X};
  cost_shape.insert(cost_shape.end(), g.action_counts.begin(), g.action_counts.end());
  g.costs.assign(g.num_dms, Matrix::Zero(X, A));
  const long per_dm = static_cast<long>(X) * A;
  read_nested(doc.at("costs"), cost_shape, 0, 0, "costs", [&](long flat, double v) {
    const long dm = flat / per_dm;
    const long rest = flat % per_dm;
    g.costs[dm](rest / A, rest % A) = v;
  });

  std::vector<int> kernel_shape{X};
  kernel_shape.insert(kernel_shape.end(), g.action_counts.begin(), g.action_counts.end());
  kernel_shape.push_back(X);
  g.kernel = Matrix::Zero(static_cast<Eigen::Index>(X) * A, X);
  read_nested(doc.at("kernel"), kernel_shape, 0, 0, "kernel",
              [&](long flat, double v) { g.kernel(flat / X, flat % X) = v; });

  g.discounts = vector_from(doc.at("discounts"), "discounts");
  g.initial_dist = vector_from(doc.at("initial_dist"), "initial_dist");
  return g;
}

json game_to_json(const StochasticGame& g) {
  const int X = g.num_states;
  const int A = g.num_joint_actions();
  json doc;
  doc["num_dms"] = g.num_dms;
  doc["num_states"] = g.num_states;
  doc["action_counts"] = g.action_counts;

  std::vector<int> cost_shape{g.num_dms, X};
  cost_shape.insert(cost_shape.end(), g.action_counts.begin(), g.action_counts.end());
  const long per_dm = static_cast<long>(X) * A;
  doc["costs"] = write_nested(cost_shape, 0, 0, [&](long flat) {
    const long rest = flat % per_dm;
    return g.costs[flat / per_dm](rest / A, rest % A);
  });

  std::vector<int> kernel_shape{X};
  kernel_shape.insert(kernel_shape.end(), g.action_counts.begin(), g.action_counts.end());
  kernel_shape.push_back(X);
  doc["kernel"] =
      write_nested(kernel_shape, 0, 0, [&](long flat) { return g.kernel(flat / X, flat % X); });

  doc["discounts"] = std::vector<double>(g.discounts.data(), g.discounts.data() + g.discounts.size());
  doc["initial_dist"] =
      std::vector<double>(g.initial_dist.data(), g.initial_dist.data() + g.initial_dist.size());
  return doc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string q_table_csv(const QTable& q) {
  std::ostringstream os;
  os << "x";
  for (Eigen::Index u = 0; u < q.q.cols(); ++u) os << ",u" << u;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index x = 0; x < q.q.rows(); ++x) {
    os << x;
    for (Eigen::Index u = 0; u < q.q.cols(); ++u) os << ',' << q.q(x, u);
    os << '\n';
  }
  return os.str();
}

}  // namespace decq
