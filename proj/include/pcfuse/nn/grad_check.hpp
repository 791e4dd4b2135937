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

#pragma once

#include <functional>
#include <span>

#include "pcfuse/nn/autodiff.hpp"

namespace pcfuse::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation crosses a kink
};

/// Compares analytic gradients with central differences.
///
/// `loss` rebuilds the graph from the current parameter values and returns a
/// 1x1 Var. For each coordinate the error is
/// |analytic - cd| / max(|analytic|, |cd|, floor). The floor keeps
/// roundoff in the central difference (about eps |loss| / h) from counting
/// against gradients that are exactly zero. Coordinates whose two
/// perturbed evaluations take different branches at a kink are skipped.
GradCheckResult grad_check(const std::function<Var()>& loss, std::span<const Var> params, double h = 1e-5,
                           double floor = 1e-6);

}  // namespace pcfuse::nn
