// Copyright 2026 SpikeStream Contributors
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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spikestream {

// Central finite-difference checks (h = 1e-3, relative tolerance 1e-4) for
// every differentiable op and the surrogate-relaxed spike node, on random
// small tensors. The difference quotient runs on a float64 mirror of the
// same forward expression; it never touches the backward path it checks.
struct GradCheckRow {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = false;
};

std::vector<GradCheckRow> run_gradcheck(uint64_t seed, int64_t trials);
bool gradcheck_all_pass(const std::vector<GradCheckRow>& rows);
std::string gradcheck_table(const std::vector<GradCheckRow>& rows);

constexpr double kGradCheckStep = 1e-3;
constexpr double kGradCheckTolerance = 1e-4;

}  // namespace spikestream
