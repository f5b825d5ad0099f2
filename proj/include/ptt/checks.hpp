/******************************************************************************
 * Copyright 2026 The PTTrack Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef PTT_CHECKS_HPP
#define PTT_CHECKS_HPP

#include <string>
#include <vector>

#include "ptt/gradcheck.hpp"

namespace ptt {

/// Named gradient-check targets covering every learnable block: "embed",
/// "posenc", "attention", "vote", "proposal", "loss", plus the supporting
/// "backbone" and "augment" blocks. "all" runs the full list. Instances are
/// small (N <= 16, k <= 8) with fixed seeds.
std::vector<std::string> gradcheck_targets();

struct NamedReport {
  std::string target;
  GradCheckReport report;
};

std::vector<NamedReport> run_gradcheck(const std::string& selector, double tolerance,
                                       double step = 1e-5);

}  // namespace ptt

#endif  // PTT_CHECKS_HPP
