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

#include "autodecompose/probe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "autodecompose/errors.hpp"
#include "autodecompose/kernels.hpp"

namespace autodecompose {

namespace k = kernels;

int LabeledEmbeddings::num_classes() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

void LabeledEmbeddings::push_back(std::span<const double> x, int label, int group) {
  if (dim == 0) dim = x.size();
  if (x.size() != dim) throw ContractError("LabeledEmbeddings: row width mismatch");
  rows.insert(rows.end(), x.begin(), x.end());
  labels.push_back(label);
  if (group >= 0) groups.push_back(group);
}

void LabeledEmbeddings::push_back(std::span<const float> x, int label, int group) {
  std::vector<double> tmp(x.begin(), x.end());
  push_back(std::span<const double>(tmp), label, group);
}

namespace {

// Floor with slack for budgets that are exact multiples (10.24 s / 1.024 s).
std::size_t budget_units(double seconds, double unit) {
  return static_cast<std::size_t>(std::floor(seconds / unit + 1e-9));
}

void take_rows(const LabeledEmbeddings& src, const std::vector<std::size_t>& idx,
               LabeledEmbeddings& dst) {
  dst.dim = src.dim;
  dst.seconds_per_row = src.seconds_per_row;
  dst.class_names = src.class_names;
  for (std::size_t i : idx) {
    dst.rows.insert(dst.rows.end(), src.rows.begin() + static_cast<std::ptrdiff_t>(i * src.dim),
                    src.rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * src.dim));
    dst.labels.push_back(src.labels[i]);
    if (!src.groups.empty()) dst.groups.push_back(src.groups[i]);
  }
}

// k distinct positions out of n, via a partial Fisher-Yates shuffle.
std::vector<std::size_t> sample_positions(std::size_t n, std::size_t count, RngStream& rng) {
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
    std::swap(pos[i], pos[j]);
  }
  pos.resize(count);
  return pos;
}

}  // namespace

ProbeSplit split_by_budget(const LabeledEmbeddings& data, double seconds, RngStream& rng) {
  if (!(seconds > 0.0)) throw ProtocolError("probe budget must be positive");
  if (!data.groups.empty() && data.groups.size() != data.size())
    throw ContractError("split_by_budget: group ids must cover every row");
  const int classes = data.num_classes();
  auto name = [&](int c) {
    return "class " + (static_cast<std::size_t>(c) < data.class_names.size()
                           ? data.class_names[static_cast<std::size_t>(c)]
                           : std::to_string(c));
  };
  std::vector<char> in_train(data.size(), 0);

  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.labels[i] == c) members.push_back(i);
    if (data.groups.empty()) {
      const std::size_t want = budget_units(seconds, data.seconds_per_row);
      if (want == 0) throw ProtocolError("probe budget is shorter than one row");
      if (members.size() <= want)
        throw ProtocolError(name(c) + " has " + std::to_string(members.size()) +
                            " rows, needs more than " + std::to_string(want));
      for (std::size_t p : sample_positions(members.size(), want, rng)) in_train[members[p]] = 1;
    } else {
      std::vector<int> group_ids;
      std::map<int, std::size_t> group_rows;
      for (std::size_t i : members) {
        if (group_rows[data.groups[i]]++ == 0) group_ids.push_back(data.groups[i]);
      }
      const std::size_t per_group = group_ids.empty() ? 1 : group_rows[group_ids.front()];
      const std::size_t want =
          budget_units(seconds, data.seconds_per_row * static_cast<double>(per_group));
      if (want == 0) throw ProtocolError("probe budget is shorter than one chunk");
      if (group_ids.size() <= want)
        throw ProtocolError(name(c) + " has " + std::to_string(group_ids.size()) +
                            " chunks, needs more than " + std::to_string(want));
      std::map<int, bool> chosen;
      for (std::size_t p : sample_positions(group_ids.size(), want, rng)) chosen[group_ids[p]] = true;
      for (std::size_t i : members)
        if (chosen.count(data.groups[i])) in_train[i] = 1;
    }
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < data.size(); ++i) (in_train[i] ? train_idx : test_idx).push_back(i);
  ProbeSplit split;
  take_rows(data, train_idx, split.train);
  take_rows(data, test_idx, split.test);
  return split;
}

double logreg_objective(const LabeledEmbeddings& data, std::size_t classes,
                        std::span<const double> weights, std::span<const double> biases, double l2,
                        std::vector<double>* grad_w, std::vector<double>* grad_b) {
  const std::size_t n = data.size(), d = data.dim;
  std::vector<double> logits(n * classes);
  k::gemm<double>(k::Op::None, k::Op::Trans, n, classes, d, data.rows.data(), weights.data(), 0.0,
                  logits.data());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double* z = logits.data() + i * classes;
    double zmax = -INFINITY;
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] += biases[c];
      zmax = std::max(zmax, z[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
    const double log_norm = zmax + std::log(sum);
    loss += log_norm - z[static_cast<std::size_t>(data.labels[i])];
    // Reuse the buffer for (softmax - onehot) / n.
    for (std::size_t c = 0; c < classes; ++c) z[c] = std::exp(z[c] - log_norm);
    z[static_cast<std::size_t>(data.labels[i])] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) z[c] /= static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  double wsq = 0.0;
  for (double w : weights) wsq += w * w;
  loss += 0.5 * l2 * wsq;

  if (grad_w) {
    grad_w->assign(classes * d, 0.0);
    k::gemm<double>(k::Op::Trans, k::Op::None, classes, d, n, logits.data(), data.rows.data(), 0.0,
                    grad_w->data());
    for (std::size_t i = 0; i < grad_w->size(); ++i) (*grad_w)[i] += l2 * weights[i];
  }
  if (grad_b) {
    grad_b->assign(classes, 0.0);
    k::column_sums<double>(n, classes, logits.data(), grad_b->data(), false);
  }
  return loss;
}

std::vector<double> LogRegModel::predict_proba(std::span<const double> x) const {
  std::vector<double> z(classes);
  double zmax = -INFINITY;
  for (std::size_t c = 0; c < classes; ++c) {
    double s = biases[c];
    for (std::size_t j = 0; j < dim; ++j)
      s += weights[c * dim + j] * (x[j] - feature_mean[j]) * feature_scale[j];
    z[c] = s;
    zmax = std::max(zmax, s);
  }
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - zmax));
  for (double& v : z) v /= sum;
  return z;
}

int LogRegModel::predict(std::span<const double> x) const {
  const auto p = predict_proba(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> LogRegModel::predict_all(const LabeledEmbeddings& data) const {
  std::vector<int> out(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i)
    out[static_cast<std::size_t>(i)] = predict(data.row(static_cast<std::size_t>(i)));
  return out;
}

LogRegModel fit_logreg(const LabeledEmbeddings& train, const LogRegOptions& opts) {
  if (train.size() == 0 || train.dim == 0) throw ProtocolError("fit_logreg: empty training set");
  LogRegModel m;
  m.classes = static_cast<std::size_t>(train.num_classes());
  m.dim = train.dim;
  m.feature_mean.assign(m.dim, 0.0);
  m.feature_scale.assign(m.dim, 1.0);
  const std::size_t n = train.size();
  if (opts.standardize) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m.dim; ++j) m.feature_mean[j] += train.rows[i * m.dim + j];
    for (double& v : m.feature_mean) v /= static_cast<double>(n);
    std::vector<double> var(m.dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m.dim; ++j) {
        const double dv = train.rows[i * m.dim + j] - m.feature_mean[j];
        var[j] += dv * dv;
      }
    for (std::size_t j = 0; j < m.dim; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      m.feature_scale[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
  }
  LabeledEmbeddings z = train;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.dim; ++j)
      z.rows[i * m.dim + j] = (z.rows[i * m.dim + j] - m.feature_mean[j]) * m.feature_scale[j];

  m.weights.assign(m.classes * m.dim, 0.0);
  m.biases.assign(m.classes, 0.0);
  std::vector<double> gw, gb, w_new, b_new, gw_new, gb_new;
  double obj = logreg_objective(z, m.classes, m.weights, m.biases, opts.l2, &gw, &gb);
  m.loss_history.push_back(obj);
  double step = opts.learning_rate;
  for (int it = 0; it < opts.iterations; ++it) {
    double g2 = 0.0;
    for (double g : gw) g2 += g * g;
    for (double g : gb) g2 += g * g;
    if (g2 < 1e-24) break;
    bool accepted = false;
    while (step > 1e-12) {
      w_new = m.weights;
      b_new = m.biases;
      for (std::size_t i = 0; i < w_new.size(); ++i) w_new[i] -= step * gw[i];
      for (std::size_t i = 0; i < b_new.size(); ++i) b_new[i] -= step * gb[i];
      const double cand = logreg_objective(z, m.classes, w_new, b_new, opts.l2, &gw_new, &gb_new);
      if (cand <= obj - 0.5 * step * g2) {
        m.weights.swap(w_new);
        m.biases.swap(b_new);
        gw.swap(gw_new);
        gb.swap(gb_new);
        obj = cand;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    m.loss_history.push_back(obj);
    step = std::min(2.0 * step, opts.learning_rate);
  }
  return m;
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int classes) {
  if (pred.size() != truth.size()) throw ContractError("macro_f1: length mismatch");
  if (classes <= 0) throw ContractError("macro_f1: need at least one class");
  std::vector<double> tp(static_cast<std::size_t>(classes)), fp(tp.size()), fn(tp.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= classes || truth[i] < 0 || truth[i] >= classes)
      throw ContractError("macro_f1: label out of range");
    const auto p = static_cast<std::size_t>(pred[i]), t = static_cast<std::size_t>(truth[i]);
    if (p == t) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    const double precision = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    total += precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return total / classes;
}

ProbeScore run_probe(const LabeledEmbeddings& data, double budget_seconds, std::uint64_t seed,
                     const LogRegOptions& opts) {
  RngStream rng(seed);
  const ProbeSplit split = split_by_budget(data, budget_seconds, rng);
  const LogRegModel model = fit_logreg(split.train, opts);
  const auto pred = model.predict_all(split.test);
  ProbeScore s;
  s.macro_f1 = macro_f1(pred, split.test.labels, data.num_classes());
  s.n_train = split.train.size();
  s.n_test = split.test.size();
  return s;
}

std::string_view to_string(LabelKind kind) { return kind == LabelKind::Source ? "source" : "content"; }
std::string_view to_string(Encoder which) { return which == Encoder::Source ? "E_s" : "E_c"; }

LabeledEmbeddings probe_dataset(const Autodecompose& model, const LabeledCorpus& corpus,
                                Encoder which, LabelKind kind) {
  const Pooling pooling = kind == LabelKind::Source ? Pooling::Mean : Pooling::None;
  const auto emb = model.embed_many(corpus.chunks, which, pooling);
  LabeledEmbeddings out;
  out.seconds_per_row = kind == LabelKind::Source ? MelChunk::kFrames * MelChunk::kHopSeconds
                                                  : MelChunk::kHopSeconds;
  out.class_names = kind == LabelKind::Source ? corpus.source_names : corpus.content_names;
  for (std::size_t c = 0; c < emb.size(); ++c) {
    const int label = kind == LabelKind::Source ? corpus.source_ids[c] : corpus.content_ids[c];
    for (std::size_t r = 0; r < emb[c].rows; ++r)
      out.push_back(emb[c].row(r), label, kind == LabelKind::Source ? -1 : static_cast<int>(c));
  }
  return out;
}

LabeledEmbeddings raw_dataset(const LabeledCorpus& corpus, LabelKind kind) {
  LabeledEmbeddings out;
  out.seconds_per_row = kind == LabelKind::Source ? MelChunk::kFrames * MelChunk::kHopSeconds
                                                  : MelChunk::kHopSeconds;
  out.class_names = kind == LabelKind::Source ? corpus.source_names : corpus.content_names;
  for (std::size_t c = 0; c < corpus.chunks.size(); ++c) {
    const MelChunk& ch = corpus.chunks[c];
    if (kind == LabelKind::Source) {
      std::vector<double> mean(MelChunk::kBins, 0.0);
      for (std::size_t t = 0; t < MelChunk::kFrames; ++t)
        for (std::size_t m = 0; m < MelChunk::kBins; ++m) mean[m] += ch.at(t, m) / MelChunk::kFrames;
      out.push_back(std::span<const double>(mean), corpus.source_ids[c]);
    } else {
      for (std::size_t t = 0; t < MelChunk::kFrames; ++t)
        out.push_back(ch.frame(t), corpus.content_ids[c], static_cast<int>(c));
    }
  }
  return out;
}

std::vector<PcaPoint> pca_2d(const LabeledEmbeddings& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.dim);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      data.rows.data(), n, d);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; take the last two and fix each sign by its largest entry.
  Eigen::MatrixXd basis(d, 2);
  for (int k2 = 0; k2 < 2; ++k2) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - std::min<Eigen::Index>(k2, d - 1));
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k2) = v;
  }
  const Eigen::MatrixXd proj = centered * basis;
  std::vector<PcaPoint> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i),
                                        data.labels[static_cast<std::size_t>(i)], proj(i, 0),
                                        proj(i, 1)};
  return out;
}

double DecompositionReport::f1(Encoder which, LabelKind kind, double budget_seconds) const {
  for (const auto& r : rows)
    if (r.encoder == to_string(which) && r.label_kind == to_string(kind) &&
        std::fabs(r.budget_seconds - budget_seconds) < 1e-9)
      return r.macro_f1;
  throw ContractError("report has no row for the requested cell");
}

std::string DecompositionReport::to_csv() const {
  std::ostringstream out;
  out << "encoder,label_kind,budget_seconds,macro_f1,n_train,n_test,seed\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.encoder << ',' << r.label_kind << ',' << r.budget_seconds << ',' << r.macro_f1 << ','
        << r.n_train << ',' << r.n_test << ',' << r.seed << '\n';
  return out.str();
}

std::string DecompositionReport::pca_csv(const std::vector<PcaPoint>& points) {
  std::ostringstream out;
  out << "row_id,label,x,y\n" << std::setprecision(10);
  for (const auto& p : points) out << p.row_id << ',' << p.label << ',' << p.x << ',' << p.y << '\n';
  return out.str();
}

DecompositionReport decomposition_report(const Autodecompose& model, const LabeledCorpus& corpus,
                                         std::span<const double> budgets, std::uint64_t seed,
                                         const LogRegOptions& opts) {
  DecompositionReport report;
  for (Encoder which : {Encoder::Source, Encoder::Content}) {
    for (LabelKind kind : {LabelKind::Source, LabelKind::Content}) {
      const LabeledEmbeddings data = probe_dataset(model, corpus, which, kind);
      if (kind == LabelKind::Source)
        (which == Encoder::Source ? report.pca_source : report.pca_content) = pca_2d(data);
      for (double budget : budgets) {
        const ProbeScore s = run_probe(data, budget, seed, opts);
        report.rows.push_back({std::string(to_string(which)), std::string(to_string(kind)), budget,
                               s.macro_f1, s.n_train, s.n_test, seed});
      }
    }
  }
  return report;
}

}  // namespace autodecompose
