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
#ifndef PTT_GRADCHECK_HPP
#define PTT_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "ptt/autograd.hpp"

namespace ptt {

/// Builds a scalar loss from the (possibly perturbed) parameter store.
using LossFragment = std::function<Value(Graph&, ParamStore&)>;

struct GradCheckItem {
  std::string param;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates too close to a kink
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  bool pass = false;
  double tolerance = 0.0;
  double worst = 0.0;
  std::string worst_param;
  std::string failure;  // non-empty when evaluation itself failed

  std::string summary() const;
};

/// Compares analytic gradients of `fragment` against central finite
/// differences for every trainable parameter in `store`. Coordinates whose
/// perturbed evaluations pass within `kink_skip` of a ReLU / max / smooth-L1
/// kink are skipped. Relative error uses max(|analytic|, |numeric|, 1e-3)
/// as denominator.
GradCheckReport grad_check(const LossFragment& fragment, ParamStore& store,
                           double tolerance, double step = 1e-5,
                           double kink_skip = 1e-7);

}  // namespace ptt

#endif  // PTT_GRADCHECK_HPP
