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

// Parallel kernels against their serial reference loops, at the shapes the
// conv preset actually runs (batch 32 x 64 frames, 512 filters, width 3).

#include <benchmark/benchmark.h>

#include <vector>

#include "autodecompose/kernels.hpp"
#include "autodecompose/rng.hpp"

namespace k = autodecompose::kernels;

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  autodecompose::RngStream rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Reference>
void BM_ConvForwardGemm(benchmark::State& state) {
  // cols (rows x 3C) times weights^T (3C x F), as in a conv layer forward pass.
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t f = 512, kk = 3 * 512;
  const auto a = random_vector(rows * kk, 1), b = random_vector(f * kk, 2);
  std::vector<float> c(rows * f);
  for (auto _ : state) {
    if constexpr (Reference)
      k::reference::gemm<float>(k::Op::None, k::Op::Trans, rows, f, kk, a.data(), b.data(), 0.0f, c.data());
    else
      k::gemm<float>(k::Op::None, k::Op::Trans, rows, f, kk, a.data(), b.data(), 0.0f, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * rows * f * kk));
}

template <bool Reference>
void BM_WeightGradGemm(benchmark::State& state) {
  // grad_out^T (F x rows) times cols (rows x 3C): the weight gradient.
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t f = 512, kk = 3 * 512;
  const auto g = random_vector(rows * f, 3), a = random_vector(rows * kk, 4);
  std::vector<float> c(f * kk);
  for (auto _ : state) {
    if constexpr (Reference)
      k::reference::gemm<float>(k::Op::Trans, k::Op::None, f, kk, rows, g.data(), a.data(), 0.0f, c.data());
    else
      k::gemm<float>(k::Op::Trans, k::Op::None, f, kk, rows, g.data(), a.data(), 0.0f, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * rows * f * kk));
}

template <bool Reference>
void BM_Im2col(benchmark::State& state) {
  const std::size_t batch = 32, frames = 64, ch = 512;
  const auto x = random_vector(batch * frames * ch, 5);
  std::vector<float> cols(batch * frames * 3 * ch);
  for (auto _ : state) {
    if constexpr (Reference)
      k::reference::im2col3<float>(batch, frames, ch, x.data(), cols.data());
    else
      k::im2col3<float>(batch, frames, ch, x.data(), cols.data());
    benchmark::DoNotOptimize(cols.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(cols.size() * sizeof(float)));
}

template <bool Reference>
void BM_ColumnSums(benchmark::State& state) {
  const std::size_t m = 32 * 64, n = 512;
  const auto x = random_vector(m * n, 6);
  std::vector<float> out(n);
  for (auto _ : state) {
    if constexpr (Reference)
      k::reference::column_sums<float>(m, n, x.data(), out.data(), false);
    else
      k::column_sums<float>(m, n, x.data(), out.data(), false);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForwardGemm<false>)->Name("conv_forward_gemm/parallel")->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardGemm<true>)->Name("conv_forward_gemm/reference")->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WeightGradGemm<false>)->Name("weight_grad_gemm/parallel")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WeightGradGemm<true>)->Name("weight_grad_gemm/reference")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Im2col<false>)->Name("im2col3/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Im2col<true>)->Name("im2col3/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ColumnSums<false>)->Name("column_sums/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ColumnSums<true>)->Name("column_sums/reference")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
