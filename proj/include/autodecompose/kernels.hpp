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
#include <span>

// Dense linear-algebra and elementwise kernels behind the layer engine.
//
// Every kernel has two implementations: the OpenMP-parallel one in
// `kernels::` (used everywhere in the library) and a plain serial loop nest in
// `kernels::reference::` that tests and benchmarks compare against. Parallel
// kernels partition work by output element, so results are bitwise identical
// for any thread count.
//
// Matrices are row-major. `Op::Trans` on an operand means the stored matrix is
// the transpose of the logical one.

namespace autodecompose::kernels {

enum class Op { None, Trans };

// C = A*B + beta*C with logical shapes A: m x k, B: k x n, C: m x n.
// beta must be 0 or 1.
template <class T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T beta, T* c);

// Adds bias[j] to every row of the m x n matrix.
template <class T>
void add_row_bias(std::size_t m, std::size_t n, const T* bias, T* x);

// out[j] (+)= sum_i x[i, j]
template <class T>
void column_sums(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate);

template <class T>
void relu_forward(std::span<const T> x, std::span<T> y);
// grad_in = grad_out where y > 0, else 0
template <class T>
void relu_backward(std::span<const T> y, std::span<const T> grad_out, std::span<T> grad_in);

// Sequence unfolding for a width-3 same-padded 1-D convolution over time.
// x: batch x frames x channels; cols: (batch*frames) x (3*channels), column
// block j holds x[t + j - 1] (zero outside the sequence).
template <class T>
void im2col3(std::size_t batch, std::size_t frames, std::size_t channels, const T* x, T* cols);
// Adjoint of im2col3: accumulates column blocks back onto the sequence.
template <class T>
void col2im3(std::size_t batch, std::size_t frames, std::size_t channels, const T* cols, T* x);

namespace reference {

template <class T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T beta, T* c);
template <class T>
void add_row_bias(std::size_t m, std::size_t n, const T* bias, T* x);
template <class T>
void column_sums(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate);
template <class T>
void relu_forward(std::span<const T> x, std::span<T> y);
template <class T>
void relu_backward(std::span<const T> y, std::span<const T> grad_out, std::span<T> grad_in);
template <class T>
void im2col3(std::size_t batch, std::size_t frames, std::size_t channels, const T* x, T* cols);
template <class T>
void col2im3(std::size_t batch, std::size_t frames, std::size_t channels, const T* cols, T* x);

}  // namespace reference

int max_threads();

}  // namespace autodecompose::kernels
