// Copyright 2026 The autodecompose Authors
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

#include <cstdint>
#include <span>
#include <vector>

#include "autodecompose/tensor.hpp"

namespace autodecompose {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments mirror the parameter list they were created for.
template <class T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  static AdamState for_params(std::span<Tensor<T>* const> params, AdamHyper hyper = {});
};

// One bias-corrected Adam update of every parameter.
template <class T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>* const> params,
               std::span<const Tensor<T>* const> grads);

}  // namespace autodecompose
