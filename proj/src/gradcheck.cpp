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
#include "ptt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ptt {

namespace {
constexpr double kDenomFloor = 1e-3;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const GradCheckItem& it : items) {
    os << "  " << it.param << ": max rel err " << it.max_rel_err << " ("
       << it.checked << " checked, " << it.skipped << " skipped)\n";
  }
  if (!failure.empty()) {
    os << "  FAILURE: " << failure << "\n";
  } else {
    os << "  worst " << worst << " at " << worst_param << ", tolerance " << tolerance
       << " -> " << (pass ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

GradCheckReport grad_check(const LossFragment& fragment, ParamStore& store,
                           double tolerance, double step, double kink_skip) {
  GradCheckReport report;
  report.tolerance = tolerance;

  // Analytic pass.
  std::vector<std::pair<std::string, Tensor>> analytic;
  try {
    Graph g;
    Value loss = fragment(g, store);
    if (!std::isfinite(g.value(loss).item())) {
      report.failure = "non-finite loss in analytic pass";
      return report;
    }
    g.backward(loss);
    for (const ParamStore::Entry& e : store.entries()) {
      if (!e.trainable) continue;
      Tensor grad = g.grad_of(e.name);
      if (grad.data.empty()) grad = Tensor::zeros(e.value.shape);  // unused by the fragment
      analytic.emplace_back(e.name, std::move(grad));
    }
  } catch (const std::exception& ex) {
    report.failure = std::string("analytic pass: ") + ex.what();
    return report;
  }

  auto eval_loss = [&](double& kink) -> double {
    Graph g;
    Value loss = fragment(g, store);
    kink = g.min_kink_distance();
    return g.value(loss).item();
  };

  report.pass = true;
  for (const auto& [name, grad] : analytic) {
    GradCheckItem item;
    item.param = name;
    Tensor& value = store.at(name);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double saved = value[i];
      double kink_hi = 0.0, kink_lo = 0.0;
      double f_hi, f_lo;
      try {
        value[i] = saved + step;
        f_hi = eval_loss(kink_hi);
        value[i] = saved - step;
        f_lo = eval_loss(kink_lo);
      } catch (const std::exception& ex) {
        value[i] = saved;
        report.failure = "perturbed pass at " + name + "[" + std::to_string(i) + "]: " + ex.what();
        report.pass = false;
        report.items.push_back(item);
        return report;
      }
      value[i] = saved;
      if (std::min(kink_hi, kink_lo) < kink_skip) {
        ++item.skipped;
        continue;
      }
      const double numeric = (f_hi - f_lo) / (2.0 * step);
      if (!std::isfinite(numeric)) {
        report.failure = "non-finite finite difference at " + name;
        report.pass = false;
        report.items.push_back(item);
        return report;
      }
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), kDenomFloor});
      const double rel = std::abs(grad[i] - numeric) / denom;
      item.max_rel_err = std::max(item.max_rel_err, rel);
      ++item.checked;
    }
    if (item.max_rel_err > report.worst) {
      report.worst = item.max_rel_err;
      report.worst_param = name;
    }
    if (item.max_rel_err > tolerance) report.pass = false;
    report.items.push_back(std::move(item));
  }
  return report;
}

}  // namespace ptt
