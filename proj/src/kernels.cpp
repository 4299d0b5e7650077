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

#include "autodecompose/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <vector>

namespace autodecompose::kernels {

namespace {

// Register tile: kMr rows of C by kNr<T> columns (four 512-bit vectors).
constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
template <class T>
constexpr std::size_t kNr = 256 / sizeof(T);

template <class T>
inline void micro_tile(std::size_t kc, const T* __restrict ap, const T* __restrict bp,
                       T* __restrict c, std::size_t ldc, std::size_t rows, std::size_t cols) {
  constexpr std::size_t nr = kNr<T>;
  alignas(64) T acc[kMr][nr] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* bb = bp + p * nr;
    const T* aa = ap + p * kMr;
#pragma GCC unroll 6
    for (std::size_t r = 0; r < kMr; ++r) {
      const T av = aa[r];
#pragma omp simd
      for (std::size_t j = 0; j < nr; ++j) acc[r][j] += av * bb[j];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    T* cr = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) cr[j] += acc[r][j];
  }
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

template <class T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T beta, T* c) {
  constexpr std::size_t nr = kNr<T>;
  const auto mm = static_cast<std::ptrdiff_t>(m);
  if (beta == T(0)) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i) std::fill_n(c + i * n, n, T(0));
  }
  if (m == 0 || n == 0 || k == 0) return;

  const std::size_t n_tiles = (n + nr - 1) / nr;
  const std::size_t m_tiles = (m + kMr - 1) / kMr;
  std::vector<T> bpack(kKc * n_tiles * nr);

  for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
    const std::size_t kc = std::min(kKc, k - p0);
    // Pack B[p0:p0+kc, :] into zero-padded kc x nr panels.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jt = 0; jt < static_cast<std::ptrdiff_t>(n_tiles); ++jt) {
      T* dst = bpack.data() + static_cast<std::size_t>(jt) * kc * nr;
      const std::size_t j0 = static_cast<std::size_t>(jt) * nr;
      const std::size_t cols = std::min(nr, n - j0);
      for (std::size_t p = 0; p < kc; ++p) {
        T* row = dst + p * nr;
        if (op_b == Op::None) {
          const T* src = b + (p0 + p) * n + j0;
          std::copy_n(src, cols, row);
        } else {
          for (std::size_t j = 0; j < cols; ++j) row[j] = b[(j0 + j) * k + p0 + p];
        }
        std::fill(row + cols, row + nr, T(0));
      }
    }

#pragma omp parallel
    {
      std::vector<T> apack(kc * kMr);
#pragma omp for schedule(static)
      for (std::ptrdiff_t it = 0; it < static_cast<std::ptrdiff_t>(m_tiles); ++it) {
        const std::size_t i0 = static_cast<std::size_t>(it) * kMr;
        const std::size_t rows = std::min(kMr, m - i0);
        for (std::size_t p = 0; p < kc; ++p) {
          T* dst = apack.data() + p * kMr;
          for (std::size_t r = 0; r < kMr; ++r) {
            if (r >= rows) {
              dst[r] = T(0);
            } else if (op_a == Op::None) {
              dst[r] = a[(i0 + r) * k + p0 + p];
            } else {
              dst[r] = a[(p0 + p) * m + i0 + r];
            }
          }
        }
        for (std::size_t jt = 0; jt < n_tiles; ++jt) {
          const std::size_t j0 = jt * nr;
          micro_tile<T>(kc, apack.data(), bpack.data() + jt * kc * nr, c + i0 * n + j0, n, rows,
                        std::min(nr, n - j0));
        }
      }
    }
  }
}

template <class T>
void add_row_bias(std::size_t m, std::size_t n, const T* bias, T* x) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    T* row = x + static_cast<std::size_t>(i) * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) row[j] += bias[j];
  }
}

template <class T>
void column_sums(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {
  // Parallel over column blocks; each column is summed in row order.
  constexpr std::size_t block = 64;
  const auto nb = static_cast<std::ptrdiff_t>((n + block - 1) / block);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t jb = 0; jb < nb; ++jb) {
    const std::size_t j0 = static_cast<std::size_t>(jb) * block;
    const std::size_t j1 = std::min(n, j0 + block);
    T acc[block] = {};
    for (std::size_t i = 0; i < m; ++i) {
      const T* row = x + i * n;
      for (std::size_t j = j0; j < j1; ++j) acc[j - j0] += row[j];
    }
    for (std::size_t j = j0; j < j1; ++j) out[j] = accumulate ? out[j] + acc[j - j0] : acc[j - j0];
  }
}

template <class T>
void relu_forward(std::span<const T> x, std::span<T> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(std::span<const T> y, std::span<const T> grad_out, std::span<T> grad_in) {
  const auto n = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) grad_in[i] = y[i] > T(0) ? grad_out[i] : T(0);
}

template <class T>
void im2col3(std::size_t batch, std::size_t frames, std::size_t channels, const T* x, T* cols) {
  const std::size_t width = 3 * channels;
  const auto rows = static_cast<std::ptrdiff_t>(batch * frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t bi = static_cast<std::size_t>(r) / frames;
    const std::size_t t = static_cast<std::size_t>(r) % frames;
    T* dst = cols + static_cast<std::size_t>(r) * width;
    for (std::size_t j = 0; j < 3; ++j) {
      const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - 1;
      if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(frames)) {
        std::fill_n(dst + j * channels, channels, T(0));
      } else {
        std::copy_n(x + (bi * frames + static_cast<std::size_t>(src_t)) * channels, channels,
                    dst + j * channels);
      }
    }
  }
}

template <class T>
void col2im3(std::size_t batch, std::size_t frames, std::size_t channels, const T* cols, T* x) {
  const std::size_t width = 3 * channels;
  const auto rows = static_cast<std::ptrdiff_t>(batch * frames);
  // Output-major: frame t gathers block 2 of row t-1, block 1 of row t, block 0 of row t+1.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t t = static_cast<std::size_t>(r) % frames;
    T* dst = x + static_cast<std::size_t>(r) * channels;
    const T* mid = cols + static_cast<std::size_t>(r) * width + channels;
    for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += mid[ch];
    if (t > 0) {
      const T* prev = cols + static_cast<std::size_t>(r - 1) * width + 2 * channels;
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += prev[ch];
    }
    if (t + 1 < frames) {
      const T* next = cols + static_cast<std::size_t>(r + 1) * width;
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += next[ch];
    }
  }
}

namespace reference {

template <class T>
void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T beta, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = op_a == Op::None ? a[i * k + p] : a[p * m + i];
        const T bv = op_b == Op::None ? b[p * n + j] : b[j * k + p];
        sum += av * bv;
      }
      c[i * n + j] = beta == T(0) ? sum : c[i * n + j] + sum;
    }
  }
}

template <class T>
void add_row_bias(std::size_t m, std::size_t n, const T* bias, T* x) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) x[i * n + j] += bias[j];
}

template <class T>
void column_sums(std::size_t m, std::size_t n, const T* x, T* out, bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    T sum = T(0);
    for (std::size_t i = 0; i < m; ++i) sum += x[i * n + j];
    out[j] = accumulate ? out[j] + sum : sum;
  }
}

template <class T>
void relu_forward(std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], T(0));
}

template <class T>
void relu_backward(std::span<const T> y, std::span<const T> grad_out, std::span<T> grad_in) {
  for (std::size_t i = 0; i < y.size(); ++i) grad_in[i] = y[i] > T(0) ? grad_out[i] : T(0);
}

template <class T>
void im2col3(std::size_t batch, std::size_t frames, std::size_t channels, const T* x, T* cols) {
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t ch = 0; ch < channels; ++ch) {
          const long src_t = static_cast<long>(t) + static_cast<long>(j) - 1;
          const bool inside = src_t >= 0 && src_t < static_cast<long>(frames);
          cols[(bi * frames + t) * 3 * channels + j * channels + ch] =
              inside ? x[(bi * frames + static_cast<std::size_t>(src_t)) * channels + ch] : T(0);
        }
}

template <class T>
void col2im3(std::size_t batch, std::size_t frames, std::size_t channels, const T* cols, T* x) {
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < 3; ++j) {
        const long dst_t = static_cast<long>(t) + static_cast<long>(j) - 1;
        if (dst_t < 0 || dst_t >= static_cast<long>(frames)) continue;
        for (std::size_t ch = 0; ch < channels; ++ch)
          x[(bi * frames + static_cast<std::size_t>(dst_t)) * channels + ch] +=
              cols[(bi * frames + t) * 3 * channels + j * channels + ch];
      }
}

}  // namespace reference

#define AD_INSTANTIATE(T)                                                                      \
  template void gemm<T>(Op, Op, std::size_t, std::size_t, std::size_t, const T*, const T*, T, \
                        T*);                                                                   \
  template void add_row_bias<T>(std::size_t, std::size_t, const T*, T*);                       \
  template void column_sums<T>(std::size_t, std::size_t, const T*, T*, bool);                  \
  template void relu_forward<T>(std::span<const T>, std::span<T>);                             \
  template void relu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);        \
  template void im2col3<T>(std::size_t, std::size_t, std::size_t, const T*, T*);               \
  template void col2im3<T>(std::size_t, std::size_t, std::size_t, const T*, T*);               \
  namespace reference {                                                                        \
  template void gemm<T>(Op, Op, std::size_t, std::size_t, std::size_t, const T*, const T*, T, \
                        T*);                                                                   \
  template void add_row_bias<T>(std::size_t, std::size_t, const T*, T*);                       \
  template void column_sums<T>(std::size_t, std::size_t, const T*, T*, bool);                  \
  template void relu_forward<T>(std::span<const T>, std::span<T>);                             \
  template void relu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);        \
  template void im2col3<T>(std::size_t, std::size_t, std::size_t, const T*, T*);               \
  template void col2im3<T>(std::size_t, std::size_t, std::size_t, const T*, T*);               \
  }

AD_INSTANTIATE(float)
AD_INSTANTIATE(double)

#undef AD_INSTANTIATE

}  // namespace autodecompose::kernels
