// Copyright 2026 The pcfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcfuse/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcfuse::nn {

GradCheckResult grad_check(const std::function<Var()>& loss, std::span<const Var> params, double h, double floor) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check step must be positive");
  if (!(floor > 0.0)) throw std::invalid_argument("grad_check floor must be positive");
  for (auto p : params) p.zero_grad();
  backward(loss());
  std::vector<Mat> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  auto& mon = kink_monitor();
  const KinkMonitor saved = mon;
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];
    for (Eigen::Index j = 0; j < p.value().size(); ++j) {
      double& w = p.mutable_value().data()[j];
      const double orig = w;
      mon.enabled = true;
      mon.trace.clear();
      w = orig + h;
      const double up = loss().scalar();
      const std::vector<std::int64_t> up_trace = std::move(mon.trace);
      mon.trace.clear();
      w = orig - h;
      const double down = loss().scalar();
      w = orig;
      const bool kink = up_trace != mon.trace;
      mon.enabled = false;
      if (kink) {
        ++result.skipped;
        continue;
      }
      const double cd = (up - down) / (2.0 * h);
      const double an = analytic[i].data()[j];
      const double denom = std::max({std::abs(an), std::abs(cd), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(an - cd) / denom);
      ++result.checked;
    }
  }
  mon = saved;
  return result;
}

}  // namespace pcfuse::nn
