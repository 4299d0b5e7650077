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

#include "autodecompose/layers.hpp"

#include <algorithm>
#include <cmath>

#include "autodecompose/errors.hpp"
#include "autodecompose/kernels.hpp"

namespace autodecompose {

namespace k = kernels;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::BatchNormRelu: return "batchnorm_relu";
    case LayerKind::LinearEmbed: return "linear_embed";
    case LayerKind::OutputHead: return "output_head";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto kind : {LayerKind::Dense, LayerKind::Conv1d, LayerKind::BatchNormRelu,
                    LayerKind::LinearEmbed, LayerKind::OutputHead})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown layer kind: " + std::string(name));
}

std::string_view to_string(Activation act) {
  return act == Activation::Relu ? "relu" : "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + std::string(name));
}

std::size_t layer_output_width(const LayerSpec& spec, std::size_t in_channels) {
  return spec.kind == LayerKind::BatchNormRelu ? in_channels : spec.width;
}

namespace {

bool is_affine(LayerKind kind) {
  return kind == LayerKind::Dense || kind == LayerKind::LinearEmbed ||
         kind == LayerKind::OutputHead || kind == LayerKind::Conv1d;
}

template <class T>
void require(bool ok, const LayerSpec& spec, const std::string& what) {
  if (!ok) throw ContractError(std::string(to_string(spec.kind)) + ": " + what);
}

template <class T>
void check_input(const LayerSpec& spec, const LayerParams<T>& p, const Tensor<T>& x) {
  require<T>(x.shape.size() == 3, spec, "input must be batch x frames x channels, got " + x.shape_string());
  const std::size_t c = x.cols();
  if (spec.kind == LayerKind::BatchNormRelu) {
    require<T>(p.params.size() == 2 && p.params[0].size() == c, spec,
               "channel count does not match parameters");
  } else {
    const std::size_t fan_in = spec.kind == LayerKind::Conv1d ? spec.kernel * c : c;
    require<T>(p.params.size() == 2 && p.params[0].shape == std::vector<std::size_t>{fan_in, spec.width},
               spec, "input width does not match weights, got " + x.shape_string());
  }
  require<T>(x.all_finite(), spec, "non-finite input");
}

}  // namespace

template <class T>
LayerParams<T> init_layer(const LayerSpec& spec, std::size_t in_channels, RngStream& rng) {
  LayerParams<T> p;
  if (spec.kind == LayerKind::BatchNormRelu) {
    p.params.emplace_back(std::vector<std::size_t>{in_channels}, T(1));
    p.params.emplace_back(std::vector<std::size_t>{in_channels}, T(0));
    p.buffers.emplace_back(std::vector<std::size_t>{in_channels}, T(0));
    p.buffers.emplace_back(std::vector<std::size_t>{in_channels}, T(1));
    return p;
  }
  if (spec.width == 0) throw ConfigError("layer width must be positive");
  if (spec.kind == LayerKind::Conv1d && spec.kernel != 3)
    throw ConfigError("conv1d supports kernel size 3 only");
  const std::size_t taps = spec.kind == LayerKind::Conv1d ? spec.kernel : 1;
  const std::size_t fan_in = taps * in_channels;
  const std::size_t fan_out = taps * spec.width;
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> w({fan_in, spec.width});
  for (T& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
  p.params.push_back(std::move(w));
  p.params.emplace_back(std::vector<std::size_t>{spec.width}, T(0));
  return p;
}

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, LayerParams<T>& p, const Tensor<T>& x, Mode mode,
                        LayerCache<T>& cache) {
  check_input(spec, p, x);
  const std::size_t batch = x.dim(0), frames = x.dim(1), c = x.dim(2);
  const std::size_t rows = batch * frames;
  cache = {};
  cache.kind = spec.kind;
  cache.input_shape = x.shape;
  cache.params_version = p.version;
  cache.mode = mode;

  Tensor<T> y({batch, frames, layer_output_width(spec, c)});
  if (is_affine(spec.kind)) {
    const Tensor<T>& w = p.params[0];
    if (spec.kind == LayerKind::Conv1d) {
      Tensor<T> cols({rows, 3 * c});
      k::im2col3(batch, frames, c, x.data.data(), cols.data.data());
      k::gemm(k::Op::None, k::Op::None, rows, spec.width, 3 * c, cols.data.data(), w.data.data(),
              T(0), y.data.data());
      cache.input = std::move(cols);
    } else {
      k::gemm(k::Op::None, k::Op::None, rows, spec.width, c, x.data.data(), w.data.data(), T(0),
              y.data.data());
      cache.input = x;
    }
    k::add_row_bias(rows, spec.width, p.params[1].data.data(), y.data.data());
    const bool relu = spec.activation == Activation::Relu && spec.kind != LayerKind::LinearEmbed &&
                      spec.kind != LayerKind::OutputHead;
    if (relu) {
      k::relu_forward<T>(y.span(), y.span());
      cache.output = y;
    }
  } else {
    const T* gamma = p.params[0].data.data();
    const T* beta = p.params[1].data.data();
    std::vector<T> mean(c), inv_std(c);
    if (mode == Mode::Train) {
      require<T>(rows > 1, spec, "train mode needs more than one row per channel");
      k::column_sums(rows, c, x.data.data(), mean.data(), false);
      for (T& m : mean) m /= static_cast<T>(rows);
      Tensor<T> centered = x;
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
        T* row = centered.data.data() + static_cast<std::size_t>(r) * c;
        for (std::size_t j = 0; j < c; ++j) row[j] = (row[j] - mean[j]) * (row[j] - mean[j]);
      }
      std::vector<T> var(c);
      k::column_sums(rows, c, centered.data.data(), var.data(), false);
      T* run_mean = p.buffers[0].data.data();
      T* run_var = p.buffers[1].data.data();
      const T mom = static_cast<T>(kBatchNormMomentum);
      const T unbias = static_cast<T>(rows) / static_cast<T>(rows - 1);
      for (std::size_t j = 0; j < c; ++j) {
        var[j] /= static_cast<T>(rows);
        inv_std[j] = T(1) / std::sqrt(var[j] + static_cast<T>(kBatchNormEpsilon));
        run_mean[j] = mom * run_mean[j] + (T(1) - mom) * mean[j];
        run_var[j] = mom * run_var[j] + (T(1) - mom) * var[j] * unbias;
      }
    } else {
      for (std::size_t j = 0; j < c; ++j) {
        mean[j] = p.buffers[0].data[j];
        inv_std[j] = T(1) / std::sqrt(p.buffers[1].data[j] + static_cast<T>(kBatchNormEpsilon));
      }
    }
    Tensor<T> xhat(x.shape);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * c;
      for (std::size_t j = 0; j < c; ++j) {
        const T h = (x.data[off + j] - mean[j]) * inv_std[j];
        xhat.data[off + j] = h;
        const T v = gamma[j] * h + beta[j];
        y.data[off + j] = v > T(0) ? v : T(0);
      }
    }
    cache.xhat = std::move(xhat);
    cache.inv_std = std::move(inv_std);
    cache.output = y;
  }
  cache.valid = true;
  return y;
}

template <class T>
Tensor<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& p, const LayerCache<T>& cache,
                         const Tensor<T>& grad_out, std::vector<Tensor<T>>& grad_params) {
  require<T>(cache.valid && cache.kind == spec.kind, spec, "backward without a matching forward cache");
  require<T>(cache.params_version == p.version, spec, "stale cache: parameters changed since forward");
  const std::size_t batch = cache.input_shape[0], frames = cache.input_shape[1],
                    c = cache.input_shape[2];
  const std::size_t rows = batch * frames;
  const std::size_t width = layer_output_width(spec, c);
  require<T>(grad_out.shape == std::vector<std::size_t>{batch, frames, width}, spec,
             "grad_out shape mismatch, got " + grad_out.shape_string());

  grad_params.clear();
  Tensor<T> grad_in(cache.input_shape);
  if (is_affine(spec.kind)) {
    Tensor<T> g = grad_out;
    if (!cache.output.data.empty())
      k::relu_backward<T>(cache.output.span(), grad_out.span(), g.span());
    const Tensor<T>& w = p.params[0];
    Tensor<T> dw(w.shape);
    Tensor<T> db(p.params[1].shape);
    const std::size_t fan_in = w.dim(0);
    k::gemm(k::Op::Trans, k::Op::None, fan_in, width, rows, cache.input.data.data(), g.data.data(),
            T(0), dw.data.data());
    k::column_sums(rows, width, g.data.data(), db.data.data(), false);
    if (spec.kind == LayerKind::Conv1d) {
      Tensor<T> dcols({rows, fan_in});
      k::gemm(k::Op::None, k::Op::Trans, rows, fan_in, width, g.data.data(), w.data.data(), T(0),
              dcols.data.data());
      k::col2im3(batch, frames, c, dcols.data.data(), grad_in.data.data());
    } else {
      k::gemm(k::Op::None, k::Op::Trans, rows, fan_in, width, g.data.data(), w.data.data(), T(0),
              grad_in.data.data());
    }
    grad_params.push_back(std::move(dw));
    grad_params.push_back(std::move(db));
  } else {
    const T* gamma = p.params[0].data.data();
    Tensor<T> g(grad_out.shape);
    k::relu_backward<T>(cache.output.span(), grad_out.span(), g.span());
    Tensor<T> gx(g.shape);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] = g.data[i] * cache.xhat.data[i];
    Tensor<T> dgamma({c}), dbeta({c});
    k::column_sums(rows, c, gx.data.data(), dgamma.data.data(), false);
    k::column_sums(rows, c, g.data.data(), dbeta.data.data(), false);
    const T n = static_cast<T>(rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * c;
      for (std::size_t j = 0; j < c; ++j) {
        const T scale = gamma[j] * cache.inv_std[j];
        if (cache.mode == Mode::Train) {
          grad_in.data[off + j] =
              scale / n * (n * g.data[off + j] - dbeta.data[j] - cache.xhat.data[off + j] * dgamma.data[j]);
        } else {
          grad_in.data[off + j] = scale * g.data[off + j];
        }
      }
    }
    grad_params.push_back(std::move(dgamma));
    grad_params.push_back(std::move(dbeta));
  }
  return grad_in;
}

template <class T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape != target.shape)
    throw ContractError("mse_loss: shape mismatch " + pred.shape_string() + " vs " +
                        target.shape_string());
  if (pred.size() == 0) throw ContractError("mse_loss: empty tensors");
  LossResult<T> out;
  out.grad = Tensor<T>(pred.shape);
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    sum += d * d;
    out.grad.data[i] = static_cast<T>(2.0 * d / n);
  }
  out.loss = static_cast<T>(sum / n);
  return out;
}

#define AD_INSTANTIATE(T)                                                                       \
  template LayerParams<T> init_layer<T>(const LayerSpec&, std::size_t, RngStream&);             \
  template Tensor<T> layer_forward<T>(const LayerSpec&, LayerParams<T>&, const Tensor<T>&, Mode, \
                                      LayerCache<T>&);                                          \
  template Tensor<T> layer_backward<T>(const LayerSpec&, const LayerParams<T>&,                 \
                                       const LayerCache<T>&, const Tensor<T>&,                  \
                                       std::vector<Tensor<T>>&);                                \
  template LossResult<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);

AD_INSTANTIATE(float)
AD_INSTANTIATE(double)

#undef AD_INSTANTIATE

}  // namespace autodecompose
