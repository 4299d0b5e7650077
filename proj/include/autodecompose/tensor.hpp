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

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace autodecompose {

// Dense row-major array with value semantics. Activations are laid out
// batch x frames x channels.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T(0))
      : shape(std::move(dims)), data(count(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  // Product of all dimensions but the last.
  std::size_t rows() const { return shape.empty() ? 0 : size() / shape.back(); }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  bool all_finite() const;
  std::string shape_string() const;
  bool operator==(const Tensor&) const = default;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace autodecompose
