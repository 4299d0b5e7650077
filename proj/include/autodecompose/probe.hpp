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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autodecompose/model.hpp"
#include "autodecompose/rng.hpp"

namespace autodecompose {

// Probe input: N rows of d-dimensional embeddings with dense class ids.
// Per-frame rows carry the id of the chunk they came from in `groups`, so
// that budget splits move whole chunks between train and test.
struct LabeledEmbeddings {
  std::size_t dim = 0;
  std::vector<double> rows;  // N x dim, row-major
  std::vector<int> labels;
  std::vector<int> groups;  // empty, or one group id per row
  double seconds_per_row = MelChunk::kFrames * MelChunk::kHopSeconds;
  std::vector<std::string> class_names;  // optional, used in error messages

  std::size_t size() const { return labels.size(); }
  int num_classes() const;
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
  void push_back(std::span<const double> x, int label, int group = -1);
  void push_back(std::span<const float> x, int label, int group = -1);
};

struct ProbeSplit {
  LabeledEmbeddings train;
  LabeledEmbeddings test;
};

// Per class, draws floor(seconds / seconds_per_row) training rows (or the
// equivalent number of whole groups) uniformly; the rest is test data.
ProbeSplit split_by_budget(const LabeledEmbeddings& data, double seconds, RngStream& rng);

// Multinomial logistic regression on standardized features.
struct LogRegModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim
  std::vector<double> biases;   // classes
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<double> loss_history;

  std::vector<double> predict_proba(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
  std::vector<int> predict_all(const LabeledEmbeddings& data) const;
};

struct LogRegOptions {
  double l2 = 1e-3;
  int iterations = 500;
  double learning_rate = 1.0;  // initial and maximum step of the line search
  bool standardize = true;
};

// Minimizes mean cross-entropy + l2/2 |W|^2 (biases unpenalized) by full-batch
// gradient descent with Armijo backtracking; the objective never increases.
LogRegModel fit_logreg(const LabeledEmbeddings& train, const LogRegOptions& opts = {});

// Objective and gradient at (W, b) on already-standardized rows; exposed for
// finite-difference tests. grad_w is classes x dim, grad_b is classes.
double logreg_objective(const LabeledEmbeddings& data, std::size_t classes,
                        std::span<const double> weights, std::span<const double> biases,
                        double l2, std::vector<double>* grad_w = nullptr,
                        std::vector<double>* grad_b = nullptr);

// Unweighted mean over classes of per-class F1; F1 is 0 when P + R = 0.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int classes);

// Split, fit and score one probe cell.
struct ProbeScore {
  double macro_f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};
ProbeScore run_probe(const LabeledEmbeddings& data, double budget_seconds, std::uint64_t seed,
                     const LogRegOptions& opts = {});

// Chunks with ground-truth source and content labels.
struct LabeledCorpus {
  std::vector<MelChunk> chunks;
  std::vector<int> source_ids;
  std::vector<int> content_ids;
  std::vector<std::uint64_t> seeds;  // per-utterance synthesis seed (0 if unknown)
  // Optional display names for the dense ids above.
  std::vector<std::string> source_names;
  std::vector<std::string> content_names;
};

enum class LabelKind { Source, Content };
std::string_view to_string(LabelKind kind);
std::string_view to_string(Encoder which);

// Source probes use mean-pooled chunk embeddings; content probes use
// per-frame embeddings grouped by chunk.
LabeledEmbeddings probe_dataset(const Autodecompose& model, const LabeledCorpus& corpus,
                                Encoder which, LabelKind kind);
// Same layout built straight from the log-mel input (no model).
LabeledEmbeddings raw_dataset(const LabeledCorpus& corpus, LabelKind kind);

struct ReportRow {
  std::string encoder;
  std::string label_kind;
  double budget_seconds = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

struct PcaPoint {
  std::size_t row_id = 0;
  int label = 0;
  double x = 0.0;
  double y = 0.0;
};

struct DecompositionReport {
  std::vector<ReportRow> rows;
  std::vector<PcaPoint> pca_source;   // pooled E_s embeddings, labeled by source
  std::vector<PcaPoint> pca_content;  // pooled E_c embeddings, labeled by source

  // Macro-F1 of the first matching row; throws if absent.
  double f1(Encoder which, LabelKind kind, double budget_seconds) const;
  std::string to_csv() const;
  static std::string pca_csv(const std::vector<PcaPoint>& points);
};

DecompositionReport decomposition_report(const Autodecompose& model, const LabeledCorpus& corpus,
                                         std::span<const double> budgets, std::uint64_t seed,
                                         const LogRegOptions& opts = {});

// Projection of row vectors onto their top two principal components.
std::vector<PcaPoint> pca_2d(const LabeledEmbeddings& data);

}  // namespace autodecompose
