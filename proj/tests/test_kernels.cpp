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

#include <vector>

#include "autodecompose/kernels.hpp"
#include "autodecompose/rng.hpp"

namespace k = autodecompose::kernels;
using autodecompose::RngStream;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, RngStream& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

template <class T>
void check_gemm(std::size_t m, std::size_t n, std::size_t kk, k::Op oa, k::Op ob, T beta, RngStream& rng,
                double tol) {
  const auto a = random_vec<T>(m * kk, rng);
  const auto b = random_vec<T>(kk * n, rng);
  auto c1 = random_vec<T>(m * n, rng);
  auto c2 = c1;
  k::gemm<T>(oa, ob, m, n, kk, a.data(), b.data(), beta, c1.data());
  k::reference::gemm<T>(oa, ob, m, n, kk, a.data(), b.data(), beta, c2.data());
  double worst = 0.0;
  for (std::size_t i = 0; i < c1.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(c1[i] - c2[i])));
  CHECK(worst <= tol * static_cast<double>(kk + 1));
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("blocked gemm agrees with the reference for every transpose combination") {
  RngStream rng(3);
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 5, 3}, {64, 80, 256}, {130, 513, 300}, {6, 64, 257}, {33, 1, 17}};
  for (auto s : shapes)
    for (auto oa : {k::Op::None, k::Op::Trans})
      for (auto ob : {k::Op::None, k::Op::Trans}) {
        check_gemm<double>(s[0], s[1], s[2], oa, ob, 0.0, rng, 1e-15);
        check_gemm<double>(s[0], s[1], s[2], oa, ob, 1.0, rng, 1e-15);
        check_gemm<float>(s[0], s[1], s[2], oa, ob, 1.0f, rng, 1e-6);
      }
}

TEST_CASE("im2col3 and col2im3 are adjoint") {
  RngStream rng(11);
  const std::size_t batch = 3, frames = 9, ch = 5;
  const auto x = random_vec<double>(batch * frames * ch, rng);
  const auto y = random_vec<double>(batch * frames * 3 * ch, rng);
  std::vector<double> cols(y.size()), back(x.size(), 0.0);
  k::im2col3<double>(batch, frames, ch, x.data(), cols.data());
  k::col2im3<double>(batch, frames, ch, y.data(), back.data());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * cols[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  std::vector<double> ref_cols(cols.size()), ref_back(x.size(), 0.0);
  k::reference::im2col3<double>(batch, frames, ch, x.data(), ref_cols.data());
  k::reference::col2im3<double>(batch, frames, ch, y.data(), ref_back.data());
  CHECK(cols == ref_cols);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(ref_back[i]).epsilon(1e-14));
}

TEST_CASE("im2col3 pads with zeros at both ends") {
  std::vector<double> x = {1, 2, 3};  // one channel, three frames
  std::vector<double> cols(9);
  k::im2col3<double>(1, 3, 1, x.data(), cols.data());
  CHECK(cols == std::vector<double>{0, 1, 2, 1, 2, 3, 2, 3, 0});
}

TEST_CASE("bias, column sums and relu match the reference") {
  RngStream rng(5);
  const std::size_t m = 77, n = 31;
  auto x = random_vec<double>(m * n, rng);
  const auto bias = random_vec<double>(n, rng);
  auto x2 = x;
  k::add_row_bias<double>(m, n, bias.data(), x.data());
  k::reference::add_row_bias<double>(m, n, bias.data(), x2.data());
  CHECK(x == x2);

  std::vector<double> s1(n, 1.0), s2(n, 1.0);
  k::column_sums<double>(m, n, x.data(), s1.data(), true);
  k::reference::column_sums<double>(m, n, x.data(), s2.data(), true);
  for (std::size_t j = 0; j < n; ++j) CHECK(s1[j] == doctest::Approx(s2[j]).epsilon(1e-13));

  std::vector<double> y(x.size()), y2(x.size()), g(x.size()), g2(x.size());
  k::relu_forward<double>(x, y);
  k::reference::relu_forward<double>(x, y2);
  CHECK(y == y2);
  k::relu_backward<double>(y, x, g);
  k::reference::relu_backward<double>(y, x, g2);
  CHECK(g == g2);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == (x[i] > 0 ? x[i] : 0.0));
}

}  // TEST_SUITE
