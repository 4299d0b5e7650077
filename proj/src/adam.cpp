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

#include "autodecompose/adam.hpp"

#include <cmath>

#include "autodecompose/errors.hpp"

namespace autodecompose {

template <class T>
AdamState<T> AdamState<T>::for_params(std::span<Tensor<T>* const> params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Tensor<T>* p : params) {
    s.m.emplace_back(p->shape);
    s.v.emplace_back(p->shape);
  }
  return s;
}

template <class T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>* const> params,
               std::span<const Tensor<T>* const> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractError("adam_step: parameter, gradient and moment counts differ");
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    if (p.shape != g.shape || p.shape != state.m[i].shape)
      throw ContractError("adam_step: shape mismatch at parameter " + std::to_string(i));
    T* m = state.m[i].data.data();
    T* v = state.v[i].data.data();
    const auto n = static_cast<std::ptrdiff_t>(p.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      const T gj = g.data[j];
      m[j] = b1 * m[j] + (T(1) - b1) * gj;
      v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.data[j] -= static_cast<T>(h.lr * mhat / (std::sqrt(vhat) + h.eps));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(AdamState<float>&, std::span<Tensor<float>* const>,
                               std::span<const Tensor<float>* const>);
template void adam_step<double>(AdamState<double>&, std::span<Tensor<double>* const>,
                                std::span<const Tensor<double>* const>);

}  // namespace autodecompose
