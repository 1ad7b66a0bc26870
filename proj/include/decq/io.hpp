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

#ifndef DECQ_IO_HPP_
#define DECQ_IO_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "decq/exact_solver.hpp"
#include "decq/game.hpp"

namespace decq {

// Game definition document:
//   {num_dms, num_states, action_counts,
//    costs:   nested [dm][x][u^1]...[u^N],
//    kernel:  nested [x][u^1]...[u^N][x'],
//    discounts, initial_dist}
// Parsing is shape-checked; semantic checks (row sums, discount range) are
// left to validate_game so that `validate` can report them.
StochasticGame game_from_json(const nlohmann::json& doc);
nlohmann::json game_to_json(const StochasticGame& game);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// CSV with header x,u0,u1,... and one row per state.
std::string q_table_csv(const QTable& q);

}  // namespace decq

#endif  // DECQ_IO_HPP_
