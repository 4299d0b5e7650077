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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "autodecompose/errors.hpp"
#include "autodecompose/probe.hpp"
#include "autodecompose/synth.hpp"

using namespace autodecompose;

namespace {

// Per-class F1 from an explicitly tallied confusion matrix.
double brute_force_macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<std::vector<long>> cm(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    long tp = cm[cc][cc], fp = 0, fn = 0;
    for (std::size_t o = 0; o < cm.size(); ++o) {
      if (o == cc) continue;
      fp += cm[o][cc];
      fn += cm[cc][o];
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    total += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return total / k;
}

LabeledEmbeddings blobs(int classes, int per_class, std::size_t dim, double spread, std::uint64_t seed) {
  RngStream rng(seed);
  LabeledEmbeddings d;
  d.dim = dim;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> x(dim);
      for (std::size_t j = 0; j < dim; ++j) x[j] = (j == static_cast<std::size_t>(c) % dim ? 3.0 : 0.0) + spread * rng.normal();
      d.push_back(std::span<const double>(x), c);
    }
  return d;
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("macro F1 hand cases") {
  const std::vector<int> truth{0, 1, 0, 1, 0, 1};
  CHECK(macro_f1(truth, truth, 2) == 1.0);
  const std::vector<int> zeros(6, 0);
  CHECK(macro_f1(zeros, truth, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // A class that is never predicted and never true scores 0.
  CHECK(macro_f1(truth, truth, 3) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("macro F1 matches a brute-force confusion matrix") {
  RngStream rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const int k = static_cast<int>(rng.uniform_int(2, 7));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 300));
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.uniform_int(0, k - 1));
      truth[i] = static_cast<int>(rng.uniform_int(0, k - 1));
    }
    CHECK(std::fabs(macro_f1(pred, truth, k) - brute_force_macro_f1(pred, truth, k)) < 1e-12);
  }
}

TEST_CASE("macro F1 is invariant under consistent relabeling") {
  RngStream rng(5);
  std::vector<int> pred(200), truth(200);
  for (std::size_t i = 0; i < 200; ++i) {
    pred[i] = static_cast<int>(rng.uniform_int(0, 3));
    truth[i] = rng.uniform01() < 0.6 ? pred[i] : static_cast<int>(rng.uniform_int(0, 3));
  }
  const std::vector<int> perm{2, 0, 3, 1};
  std::vector<int> p2(200), t2(200);
  for (std::size_t i = 0; i < 200; ++i) {
    p2[i] = perm[static_cast<std::size_t>(pred[i])];
    t2[i] = perm[static_cast<std::size_t>(truth[i])];
  }
  CHECK(macro_f1(pred, truth, 4) == doctest::Approx(macro_f1(p2, t2, 4)).epsilon(1e-14));
}

TEST_CASE("macro F1 rejects malformed input") {
  const std::vector<int> a{0, 1, 1}, b{0, 1};
  CHECK_THROWS_AS(macro_f1(a, b, 2), ContractError);
  const std::vector<int> c{0, 2};
  CHECK_THROWS_AS(macro_f1(c, b, 2), ContractError);
}

TEST_CASE("ten seconds of pooled chunks is nine rows per class") {
  const auto data = blobs(4, 30, 3, 1.0, 1);
  RngStream rng(8);
  const auto split = split_by_budget(data, 10.0, rng);
  for (int c = 0; c < 4; ++c) {
    CHECK(std::count(split.train.labels.begin(), split.train.labels.end(), c) == 9);
    CHECK(std::count(split.test.labels.begin(), split.test.labels.end(), c) == 21);
  }
  RngStream rng2(8);
  CHECK(split_by_budget(data, 10.24, rng2).train.size() == 40);
}

TEST_CASE("budget split is a partition and depends only on the seed") {
  auto data = blobs(3, 20, 2, 1.0, 3);
  // Tag each row with its index so train and test can be traced back.
  for (std::size_t i = 0; i < data.size(); ++i) data.rows[i * data.dim + 1] = static_cast<double>(i);
  RngStream r1(11), r2(11), r3(12);
  const auto s1 = split_by_budget(data, 5.0, r1);
  const auto s2 = split_by_budget(data, 5.0, r2);
  const auto s3 = split_by_budget(data, 5.0, r3);
  CHECK(s1.train.rows == s2.train.rows);
  CHECK(s1.train.rows != s3.train.rows);
  std::multiset<double> seen;
  for (const auto* part : {&s1.train, &s1.test})
    for (std::size_t i = 0; i < part->size(); ++i) seen.insert(part->row(i)[1]);
  CHECK(seen.size() == data.size());
  CHECK(std::set<double>(seen.begin(), seen.end()).size() == data.size());
}

TEST_CASE("per-frame rows are split by whole chunks") {
  LabeledEmbeddings d;
  d.dim = 1;
  d.seconds_per_row = MelChunk::kHopSeconds;
  for (int chunk = 0; chunk < 24; ++chunk)
    for (int t = 0; t < 64; ++t) d.push_back(std::vector<double>{static_cast<double>(chunk)}, chunk % 2, chunk);
  RngStream rng(4);
  const auto split = split_by_budget(d, 10.24, rng);
  CHECK(split.train.size() == 2 * 10 * 64);
  std::set<int> train_groups(split.train.groups.begin(), split.train.groups.end());
  for (int g : split.test.groups) CHECK(train_groups.count(g) == 0);
}

TEST_CASE("budget protocol errors") {
  auto data = blobs(2, 5, 2, 1.0, 1);
  RngStream rng(1);
  CHECK_THROWS_AS(split_by_budget(data, 0.0, rng), ProtocolError);
  CHECK_THROWS_AS(split_by_budget(data, 0.5, rng), ProtocolError);
  data.class_names = {"alice", "bob"};
  try {
    split_by_budget(data, 10.0, rng);
    FAIL("expected a protocol error");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("class alice") != std::string::npos);
  }
}

TEST_CASE("logistic regression gradient matches finite differences") {
  const auto data = blobs(3, 10, 4, 1.0, 9);
  RngStream rng(10);
  std::vector<double> w(12), b(3);
  for (double& v : w) v = 0.3 * rng.normal();
  for (double& v : b) v = 0.3 * rng.normal();
  for (bool at_zero : {true, false}) {
    std::vector<double> ww = at_zero ? std::vector<double>(12, 0.0) : w;
    std::vector<double> bb = at_zero ? std::vector<double>(3, 0.0) : b;
    std::vector<double> gw, gb;
    logreg_objective(data, 3, ww, bb, 0.1, &gw, &gb);
    const double h = 1e-6;
    for (std::size_t i = 0; i < ww.size(); ++i) {
      auto wp = ww, wm = ww;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (logreg_objective(data, 3, wp, bb, 0.1) - logreg_objective(data, 3, wm, bb, 0.1)) / (2 * h);
      CHECK(std::fabs(fd - gw[i]) < 1e-6);
    }
    for (std::size_t i = 0; i < bb.size(); ++i) {
      auto bp = bb, bm = bb;
      bp[i] += h;
      bm[i] -= h;
      const double fd = (logreg_objective(data, 3, ww, bp, 0.1) - logreg_objective(data, 3, ww, bm, 0.1)) / (2 * h);
      CHECK(std::fabs(fd - gb[i]) < 1e-6);
    }
  }
}

TEST_CASE("separable classes are fit exactly and the objective never rises") {
  const auto data = blobs(2, 40, 2, 0.3, 12);
  const auto model = fit_logreg(data);
  const auto pred = model.predict_all(data);
  CHECK(pred == data.labels);
  REQUIRE(model.loss_history.size() > 1);
  for (std::size_t i = 1; i < model.loss_history.size(); ++i)
    CHECK(model.loss_history[i] <= model.loss_history[i - 1]);
  const auto p = model.predict_proba(data.row(0));
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("heavy regularization collapses to the class priors") {
  LabeledEmbeddings d = blobs(2, 10, 2, 1.0, 2);
  const auto extra = blobs(2, 20, 2, 1.0, 3);
  for (std::size_t i = 0; i < extra.size(); ++i)
    if (extra.labels[i] == 0) d.push_back(extra.row(i), 0);
  // 30 rows of class 0 against 10 of class 1.
  LogRegOptions opts;
  opts.l2 = 1e3;
  opts.iterations = 20000;
  const auto model = fit_logreg(d, opts);
  for (double w : model.weights) CHECK(std::fabs(w) < 1e-3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto p = model.predict_proba(d.row(i));
    CHECK(std::fabs(p[0] - 0.75) < 2e-3);
    CHECK(std::fabs(p[1] - 0.25) < 2e-3);
  }
}

TEST_CASE("pca of points on a line puts everything on the first axis") {
  LabeledEmbeddings d;
  d.dim = 3;
  for (int i = 0; i < 20; ++i) {
    const double t = i - 9.5;
    d.push_back(std::vector<double>{t, 2 * t, -t}, i % 2);
  }
  const auto pts = pca_2d(d);
  REQUIRE(pts.size() == 20);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].row_id == i);
    CHECK(std::fabs(pts[i].y) < 1e-9);
    CHECK(std::fabs(pts[i].x) == doctest::Approx(std::fabs(i - 9.5) * std::sqrt(6.0)));
  }
}

TEST_CASE("decomposition report layout and determinism") {
  const auto corpus = make_corpus(2, 3, 11, 3);
  auto cfg = preset_config("dense");
  const Autodecompose model(cfg);
  const std::vector<double> budgets{5.0};
  const auto r1 = decomposition_report(model, corpus.data, budgets, 7);
  const auto r2 = decomposition_report(model, corpus.data, budgets, 7);
  CHECK(r1.to_csv() == r2.to_csv());
  std::istringstream csv(r1.to_csv());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "encoder,label_kind,budget_seconds,macro_f1,n_train,n_test,seed");
  CHECK(r1.rows.size() == 4);
  CHECK(r1.f1(Encoder::Source, LabelKind::Source, 5.0) >= 0.0);
  CHECK_THROWS(r1.f1(Encoder::Source, LabelKind::Source, 60.0));
  CHECK(r1.pca_source.size() == corpus.data.chunks.size());
  CHECK(DecompositionReport::pca_csv(r1.pca_source).rfind("row_id,label,x,y\n", 0) == 0);
}

}  // TEST_SUITE
