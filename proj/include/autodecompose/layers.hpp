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
#include <string>
#include <string_view>
#include <vector>

#include "autodecompose/rng.hpp"
#include "autodecompose/tensor.hpp"

namespace autodecompose {

enum class LayerKind { Dense, Conv1d, BatchNormRelu, LinearEmbed, OutputHead };
enum class Activation { Identity, Relu };
enum class Mode { Train, Eval };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);
std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

// One layer of a time-distributed stack over (batch x frames x channels).
// Dense, LinearEmbed and OutputHead are per-frame affine maps; Conv1d is a
// width-3, stride-1, same-padded convolution along frames; BatchNormRelu
// normalizes each channel over batch x frames and applies ReLU.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t width = 0;  // output channels; ignored for BatchNormRelu
  Activation activation = Activation::Identity;
  std::size_t kernel = 3;  // Conv1d only

  bool operator==(const LayerSpec&) const = default;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEpsilon = 1e-5;

// Trainable tensors (weights/bias or gamma/beta) plus non-trainable buffers
// (batchnorm running mean/variance). `version` changes whenever the
// trainable tensors are modified, which lets backward detect stale caches.
template <class T>
struct LayerParams {
  std::vector<Tensor<T>> params;
  std::vector<Tensor<T>> buffers;
  std::uint64_t version = 0;
};

template <class T>
struct LayerCache {
  LayerKind kind = LayerKind::Dense;
  std::vector<std::size_t> input_shape;
  std::uint64_t params_version = 0;
  Mode mode = Mode::Train;
  bool valid = false;
  Tensor<T> input;   // x, or the unfolded columns for Conv1d
  Tensor<T> output;  // post-activation output (ReLU mask)
  Tensor<T> xhat;    // BatchNormRelu normalized input
  std::vector<T> inv_std;
};

// Output width of `spec` applied to `in_channels`.
std::size_t layer_output_width(const LayerSpec& spec, std::size_t in_channels);

// Glorot-uniform weights, zero biases, gamma = 1, beta = 0, running var = 1.
template <class T>
LayerParams<T> init_layer(const LayerSpec& spec, std::size_t in_channels, RngStream& rng);

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, LayerParams<T>& params, const Tensor<T>& input,
                        Mode mode, LayerCache<T>& cache);

// Returns grad wrt the input; writes one gradient per trainable tensor.
template <class T>
Tensor<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& params,
                         const LayerCache<T>& cache, const Tensor<T>& grad_out,
                         std::vector<Tensor<T>>& grad_params);

template <class T>
struct LossResult {
  T loss = T(0);
  Tensor<T> grad;
};

// Mean squared error over all cells; grad = 2 (pred - target) / N.
template <class T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace autodecompose
