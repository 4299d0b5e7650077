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

#include <doctest.h>

#include "autodecompose/adam.hpp"
#include "autodecompose/errors.hpp"
#include "autodecompose/layers.hpp"
#include "gradcheck.hpp"

using namespace autodecompose;
using testutil::random_tensor;

TEST_SUITE("nn") {

TEST_CASE("every layer kind passes the finite-difference check") {
  RngStream rng(77);
  for (const auto& spec : testutil::gradient_suite_specs()) {
    for (int rep = 0; rep < 5; ++rep) {
      const double err = testutil::layer_gradient_error(spec, 3, 7, 4, rng);
      CAPTURE(to_string(spec.kind));
      CAPTURE(to_string(spec.activation));
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("mse loss values and gradient") {
  Tensor<double> a({2, 3, 4}, 1.5), b({2, 3, 4}, 1.5);
  auto r = mse_loss(a, b);
  CHECK(r.loss == 0.0);
  for (double g : r.grad.data) CHECK(g == 0.0);
  Tensor<double> c({2, 3, 4}, 2.5);
  CHECK(mse_loss(c, a).loss == doctest::Approx(1.0));
  RngStream rng(3);
  CHECK(testutil::mse_gradient_error(2, 5, 3, rng) < 1e-8);
  Tensor<double> d({2, 3, 5});
  CHECK_THROWS_AS(mse_loss(a, d), ContractError);
}

TEST_CASE("dense with identity weights is the identity") {
  RngStream rng(1);
  LayerSpec spec{LayerKind::Dense, 4, Activation::Identity};
  auto p = init_layer<double>(spec, 4, rng);
  std::fill(p.params[0].data.begin(), p.params[0].data.end(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) p.params[0].data[i * 4 + i] = 1.0;
  const auto x = random_tensor({2, 3, 4}, rng);
  LayerCache<double> cache;
  CHECK(layer_forward(spec, p, x, Mode::Eval, cache) == x);
}

TEST_CASE("relu zeroes negative pre-activations") {
  RngStream rng(1);
  LayerSpec spec{LayerKind::Dense, 3, Activation::Relu};
  auto p = init_layer<double>(spec, 2, rng);
  std::fill(p.params[0].data.begin(), p.params[0].data.end(), 0.0);
  std::fill(p.params[1].data.begin(), p.params[1].data.end(), -1.0);
  LayerCache<double> cache;
  const auto y = layer_forward(spec, p, random_tensor({1, 4, 2}, rng), Mode::Train, cache);
  for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("conv1d with a centered delta kernel is the identity") {
  RngStream rng(2);
  LayerSpec spec{LayerKind::Conv1d, 3, Activation::Identity};
  auto p = init_layer<double>(spec, 3, rng);
  std::fill(p.params[0].data.begin(), p.params[0].data.end(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) p.params[0].data[(3 + c) * 3 + c] = 1.0;
  const auto x = random_tensor({2, 6, 3}, rng);
  LayerCache<double> cache;
  CHECK(layer_forward(spec, p, x, Mode::Train, cache) == x);
}

TEST_CASE("backward of a zero upstream gradient is zero") {
  RngStream rng(5);
  for (const auto& spec : testutil::gradient_suite_specs()) {
    auto p = init_layer<double>(spec, 4, rng);
    LayerCache<double> cache;
    const auto x = random_tensor({2, 5, 4}, rng);
    const auto y = layer_forward(spec, p, x, Mode::Train, cache);
    std::vector<Tensor<double>> gp;
    const auto gx = layer_backward(spec, p, cache, Tensor<double>(y.shape), gp);
    for (double v : gx.data) CHECK(v == 0.0);
    for (const auto& t : gp)
      for (double v : t.data) CHECK(v == 0.0);
  }
}

TEST_CASE("shape mismatch and stale cache are contract errors") {
  RngStream rng(6);
  LayerSpec spec{LayerKind::Dense, 3, Activation::Identity};
  auto p = init_layer<double>(spec, 4, rng);
  LayerCache<double> cache;
  CHECK_THROWS_AS(layer_forward(spec, p, random_tensor({2, 5, 3}, rng), Mode::Train, cache), ContractError);
  CHECK_THROWS_AS(layer_forward(spec, p, random_tensor({10, 4}, rng), Mode::Train, cache), ContractError);

  const auto y = layer_forward(spec, p, random_tensor({2, 5, 4}, rng), Mode::Train, cache);
  std::vector<Tensor<double>> gp;
  CHECK_THROWS_AS(layer_backward(spec, p, cache, Tensor<double>({2, 5, 2}), gp), ContractError);
  p.version++;
  CHECK_THROWS_AS(layer_backward(spec, p, cache, Tensor<double>(y.shape), gp), ContractError);
  LayerCache<double> empty;
  CHECK_THROWS_AS(layer_backward(spec, p, empty, Tensor<double>(y.shape), gp), ContractError);

  auto bad = random_tensor({2, 5, 4}, rng);
  bad.data[3] = std::nan("");
  CHECK_THROWS_AS(layer_forward(spec, p, bad, Mode::Train, cache), ContractError);
}

TEST_CASE("batchnorm running statistics and eval determinism") {
  RngStream rng(8);
  LayerSpec spec{LayerKind::BatchNormRelu, 0, Activation::Relu};
  auto p = init_layer<double>(spec, 2, rng);
  Tensor<double> x({1, 4, 2});
  x.data = {1, 10, 2, 20, 3, 30, 4, 40};
  LayerCache<double> cache;
  layer_forward(spec, p, x, Mode::Train, cache);
  // running = 0.9 * running + 0.1 * batch; unbiased variance for the running estimate
  CHECK(p.buffers[0].data[0] == doctest::Approx(0.1 * 2.5));
  CHECK(p.buffers[0].data[1] == doctest::Approx(0.1 * 25.0));
  CHECK(p.buffers[1].data[0] == doctest::Approx(0.9 + 0.1 * (5.0 / 3.0)));
  const auto y = layer_forward(spec, p, x, Mode::Train, cache);
  // Train-mode output is normalized per channel, so after ReLU about half survive.
  double mean0 = 0;
  for (std::size_t t = 0; t < 4; ++t) mean0 += y.data[t * 2];
  CHECK(mean0 > 0);
  const auto buffers = p.buffers;
  LayerCache<double> c1, c2;
  const auto e1 = layer_forward(spec, p, x, Mode::Eval, c1);
  const auto e2 = layer_forward(spec, p, x, Mode::Eval, c2);
  CHECK(e1 == e2);
  CHECK(p.buffers[0] == buffers[0]);
  CHECK(p.buffers[1] == buffers[1]);
}

TEST_CASE("glorot init bounds and zero biases") {
  RngStream rng(9);
  LayerSpec spec{LayerKind::Conv1d, 50, Activation::Relu};
  auto p = init_layer<double>(spec, 20, rng);
  const double limit = std::sqrt(6.0 / (60.0 + 150.0));
  double worst = 0;
  for (double w : p.params[0].data) worst = std::max(worst, std::abs(w));
  CHECK(worst <= limit);
  CHECK(worst > 0.9 * limit);
  for (double b : p.params[1].data) CHECK(b == 0.0);
}

TEST_CASE("adam first step moves by the learning rate") {
  Tensor<double> w({1}, 0.5), g({1}, 1.0);
  std::vector<Tensor<double>*> params = {&w};
  std::vector<const Tensor<double>*> grads = {&g};
  auto state = AdamState<double>::for_params(params);
  adam_step<double>(state, params, grads);
  CHECK(state.step == 1);
  // m_hat = v_hat = 1, so the step is lr * 1 / (1 + eps)
  CHECK(std::abs((0.5 - w.data[0]) - 1e-3) < 1e-9);
}

TEST_CASE("adam: zero gradients leave parameters alone; equal gradients give equal updates") {
  Tensor<double> a({3}, 0.25), b({3}, 0.25), z({3}, 0.0), g({3}, -0.3);
  std::vector<Tensor<double>*> params = {&a, &b};
  auto state = AdamState<double>::for_params(params);
  std::vector<const Tensor<double>*> zero = {&z, &z};
  for (int i = 0; i < 10; ++i) adam_step<double>(state, params, zero);
  for (double v : a.data) CHECK(v == 0.25);
  std::vector<const Tensor<double>*> same = {&g, &g};
  for (int i = 0; i < 10; ++i) adam_step<double>(state, params, same);
  CHECK(a == b);
  CHECK(a.data[0] > 0.25);
}

}  // TEST_SUITE
