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

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "autodecompose/audio.hpp"
#include "autodecompose/augment.hpp"
#include "autodecompose/config_json.hpp"
#include "autodecompose/dsp.hpp"
#include "autodecompose/errors.hpp"
#include "autodecompose/model.hpp"
#include "autodecompose/probe.hpp"
#include "autodecompose/spec_io.hpp"
#include "autodecompose/synth.hpp"

namespace autodecompose::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kAugmentTag = 0x4155470001ULL;
constexpr const char* kChunkExt = ".adspec";

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config_path, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "Seed for every random stream of the run");
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
  cmd->add_option("--set", c.overrides, "Override a config key: section.key=value")->allow_extra_args(false);
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw ConfigError("unknown config key: " + (where.empty() ? key : where + "." + key));
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + where + "." + key + " is missing or has the wrong type");
  }
}

// Merges b into a; objects merge recursively, everything else is replaced.
void merge(json& a, const json& b) {
  if (!a.is_object() || !b.is_object()) {
    a = b;
    return;
  }
  for (const auto& [k, v] : b.items()) {
    if (a.contains(k) && a[k].is_object() && v.is_object())
      merge(a[k], v);
    else
      a[k] = v;
  }
}

struct RunConfig {
  json user;       // the merged document before expansion
  json requested;  // only what the config file and overrides supplied
  std::uint64_t seed = 1;
  AutodecomposeConfig model;
  std::vector<double> budgets;
  LogRegOptions probe;
  std::size_t sources = 5, contents = 10, per_cell = 4;
  double noise_db = 30.0;
  DecompositionThresholds thresholds;

  json effective() const {
    return {{"seed", seed},
            {"model", to_json(model)},
            {"probe",
             {{"budgets", budgets},
              {"l2", probe.l2},
              {"iterations", probe.iterations},
              {"learning_rate", probe.learning_rate},
              {"standardize", probe.standardize},
              {"f1_average", "macro"}}},
            {"synth", {{"sources", sources}, {"contents", contents}, {"per_cell", per_cell}, {"noise_db", noise_db}}},
            {"checks",
             {{"budget_seconds", thresholds.budget_seconds},
              {"source_by_source_min", thresholds.source_by_source_min},
              {"source_by_content_max", thresholds.source_by_content_max},
              {"content_by_content_margin", thresholds.content_by_content_margin},
              {"content_by_source_margin", thresholds.content_by_source_margin}}}};
  }
};

RunConfig resolve(const Common& c) {
  json requested = json::object();
  if (!c.config_path.empty()) merge(requested, load_json(c.config_path));
  apply_overrides(requested, c.overrides);
  json doc = default_run_config();
  merge(doc, requested);
  if (c.seed) doc["seed"] = *c.seed;
  reject_unknown(doc, "", {"seed", "model", "probe", "synth", "checks"});

  RunConfig r;
  r.user = doc;
  r.requested = requested;
  r.seed = get<std::uint64_t>(doc, "seed", "run");
  json model = doc["model"];
  if (model.contains("seed")) throw ConfigError("set the run seed with --seed or the top-level seed key, not model.seed");
  model["seed"] = r.seed;
  r.model = autodecompose_config_from_json(model);

  const json& p = doc["probe"];
  reject_unknown(p, "probe", {"budgets", "l2", "iterations", "learning_rate", "standardize", "f1_average"});
  r.budgets = get<std::vector<double>>(p, "budgets", "probe");
  r.probe.l2 = get<double>(p, "l2", "probe");
  r.probe.iterations = get<int>(p, "iterations", "probe");
  r.probe.learning_rate = get<double>(p, "learning_rate", "probe");
  r.probe.standardize = get<bool>(p, "standardize", "probe");
  if (p.contains("f1_average") && p["f1_average"] != "macro") throw ConfigError("probe.f1_average must be \"macro\"");
  if (r.budgets.empty()) throw ConfigError("probe.budgets must list at least one budget");

  const json& s = doc["synth"];
  reject_unknown(s, "synth", {"sources", "contents", "per_cell", "noise_db"});
  r.sources = get<std::size_t>(s, "sources", "synth");
  r.contents = get<std::size_t>(s, "contents", "synth");
  r.per_cell = get<std::size_t>(s, "per_cell", "synth");
  r.noise_db = get<double>(s, "noise_db", "synth");
  if (r.sources < 2 || r.contents < 2 || r.per_cell < 1)
    throw ConfigError("synth needs sources >= 2, contents >= 2 and per_cell >= 1");

  const json& t = doc["checks"];
  reject_unknown(t, "checks",
                 {"budget_seconds", "source_by_source_min", "source_by_content_max",
                  "content_by_content_margin", "content_by_source_margin"});
  r.thresholds.budget_seconds = get<double>(t, "budget_seconds", "checks");
  r.thresholds.source_by_source_min = get<double>(t, "source_by_source_min", "checks");
  r.thresholds.source_by_content_max = get<double>(t, "source_by_content_max", "checks");
  r.thresholds.content_by_content_margin = get<double>(t, "content_by_content_margin", "checks");
  r.thresholds.content_by_source_margin = get<double>(t, "content_by_source_margin", "checks");
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_run_manifest(const fs::path& dir, const std::string& subcommand, const RunConfig& cfg,
                        const json& inputs, const json& outputs) {
  json m = {{"tool", "autodecompose"},
            {"subcommand", subcommand},
            {"seed", cfg.seed},
            {"config", cfg.effective()},
            {"inputs", inputs},
            {"outputs", outputs}};
  write_text(dir / "run.json", m.dump(2) + "\n");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out)
    if (!c.empty() && c.back() == '\r') c.pop_back();
  return out;
}

struct LoadedChunks {
  std::vector<MelChunk> chunks;
  std::vector<ManifestRow> rows;
};

// A directory of .adspec files (sorted by name) or a manifest CSV.
LoadedChunks load_chunks(const fs::path& data, const std::vector<std::string>& required) {
  LoadedChunks out;
  if (fs::is_directory(data)) {
    if (!required.empty() && required != std::vector<std::string>{"chunk_path"})
      throw ConfigError("labeled input must be a manifest CSV, not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(data))
      if (e.is_regular_file() && e.path().extension() == kChunkExt) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) out.rows.push_back({f, "", "", 0});
  } else {
    out.rows = read_manifest(data, required);
  }
  if (out.rows.empty()) throw ConfigError("no chunks found in " + data.string());
  for (const auto& r : out.rows) out.chunks.push_back(read_chunk(r.chunk_path));
  return out;
}

// Maps arbitrary label strings onto dense ids in sorted order.
std::vector<int> densify(const std::vector<std::string>& labels, std::vector<std::string>& names) {
  std::set<std::string> uniq(labels.begin(), labels.end());
  names.assign(uniq.begin(), uniq.end());
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    char* ea = nullptr;
    char* eb = nullptr;
    const long ia = std::strtol(a.c_str(), &ea, 10), ib = std::strtol(b.c_str(), &eb, 10);
    if (*ea == '\0' && *eb == '\0' && !a.empty() && !b.empty()) return ia < ib;
    return a < b;
  });
  std::map<std::string, int> id;
  for (std::size_t i = 0; i < names.size(); ++i) id[names[i]] = static_cast<int>(i);
  std::vector<int> out;
  for (const auto& l : labels) out.push_back(id[l]);
  return out;
}

LabeledCorpus labeled_corpus(const fs::path& manifest) {
  LoadedChunks loaded = load_chunks(manifest, {"chunk_path", "source_id", "content_id"});
  LabeledCorpus c;
  c.chunks = std::move(loaded.chunks);
  std::vector<std::string> src, con;
  for (const auto& r : loaded.rows) {
    src.push_back(r.source_id);
    con.push_back(r.content_id);
    c.seeds.push_back(r.seed);
  }
  c.source_ids = densify(src, c.source_names);
  c.content_ids = densify(con, c.content_names);
  return c;
}

class LossLog {
 public:
  explicit LossLog(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "epoch,mean_loss,wall_seconds\n";
  }
  void operator()(const EpochRecord& r) {
    out_ << r.epoch << ',' << std::setprecision(17) << r.mean_loss << ',' << std::setprecision(6)
         << r.wall_seconds << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

json checks_json(const TheoremResult& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound},
                      {"relation", c.upper ? "<=" : ">="}, {"pass", c.pass}});
  return {{"pass", r.pass}, {"checks", checks}, {"diagnostics", r.diagnostics}};
}

// ---- subcommands ----

int cmd_preprocess(const Common& c, const std::string& input, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(c);
  std::vector<std::pair<fs::path, std::vector<std::string>>> wavs;  // path, label cells
  std::vector<std::string> label_cols;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && (e.path().extension() == ".wav" || e.path().extension() == ".WAV"))
        wavs.push_back({e.path(), {}});
    std::sort(wavs.begin(), wavs.end());
  } else {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open input " + input);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    const auto wav_col = std::find(header.begin(), header.end(), "wav_path");
    if (wav_col == header.end()) throw ConfigError("manifest " + input + " is missing column 'wav_path'");
    for (const auto& h : header)
      if (h == "source_id" || h == "content_id") label_cols.push_back(h);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) throw ConfigError("ragged row in " + input + ": " + line);
      std::vector<std::string> labels;
      for (const auto& l : label_cols)
        labels.push_back(cells[static_cast<std::size_t>(std::find(header.begin(), header.end(), l) - header.begin())]);
      fs::path p = cells[static_cast<std::size_t>(wav_col - header.begin())];
      if (p.is_relative()) p = fs::path(input).parent_path() / p;
      wavs.push_back({p, labels});
    }
  }
  if (wavs.empty()) throw ConfigError("no WAV files found in " + input);

  const fs::path dir = c.out;
  fs::create_directories(dir / "chunks");
  std::ostringstream manifest;
  manifest << "chunk_path,source_id,content_id,seed,wav_path,chunk_index\n";
  std::size_t ok = 0, written = 0;
  for (const auto& [path, labels] : wavs) {
    try {
      const auto chunks = preprocess(read_wav(path));
      if (chunks.empty()) throw InvalidInput("shorter than one 1.024 s chunk");
      for (std::size_t k = 0; k < chunks.size(); ++k) {
        std::ostringstream name;
        name << path.stem().string() << '_' << std::setw(4) << std::setfill('0') << k << kChunkExt;
        write_chunk(dir / "chunks" / name.str(), chunks[k]);
        std::string src, con;
        for (std::size_t i = 0; i < label_cols.size(); ++i) (label_cols[i] == "source_id" ? src : con) = labels[i];
        manifest << "chunks/" << name.str() << ',' << src << ',' << con << ",0," << path.string() << ',' << k << '\n';
        ++written;
      }
      ++ok;
    } catch (const std::exception& e) {
      err << "skipped " << path.string() << ": " << e.what() << '\n';
    }
  }
  if (ok == 0) {
    err << "error: none of the " << wavs.size() << " input files could be processed\n";
    return kRuntimeError;
  }
  write_text(dir / "manifest.csv", manifest.str());
  write_run_manifest(dir, "preprocess", cfg, {{"input", input}},
                     {{"manifest", "manifest.csv"}, {"chunks", written}, {"files_ok", ok},
                      {"files_failed", wavs.size() - ok}});
  out << "wrote " << written << " chunks from " << ok << " of " << wavs.size() << " files\n";
  return kOk;
}

json draws_json(const AugmentDraws& d) {
  json masks = json::array();
  for (auto [s, l] : d.freq_masks) masks.push_back({{"start", s}, {"length", l}});
  return {{"scramble_pivots", d.scramble_pivots},
          {"time_mask_starts", d.time_mask_starts},
          {"stretch_ratio", d.stretch_ratio},
          {"freq_masks", masks}};
}

int cmd_augment(const Common& c, const std::string& input, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input))
      if (e.is_regular_file() && e.path().extension() == kChunkExt) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  if (files.empty()) throw ConfigError("no " + std::string(kChunkExt) + " files in " + input);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  json outputs = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const MelChunk chunk = read_chunk(files[i]);
    const std::uint64_t seed = derive_seed(cfg.seed, kAugmentTag, i);
    RngStream base(seed);
    RngStream rs = base.split(1), rc = base.split(2);
    AugmentDraws ds, dc;
    const MelChunk a = augment_source_preserving(chunk, rs, cfg.model.augment, &ds);
    const MelChunk b = augment_content_preserving(chunk, rc, cfg.model.augment, &dc);
    const std::string stem = files[i].stem().string();
    write_chunk(dir / (stem + ".source_view" + kChunkExt), a);
    write_chunk(dir / (stem + ".content_view" + kChunkExt), b);
    const json sidecar = {{"input", files[i].string()},
                          {"run_seed", cfg.seed},
                          {"seed", seed},
                          {"source_view", draws_json(ds)},
                          {"content_view", draws_json(dc)},
                          {"augment", to_json(cfg.model.augment)}};
    write_text(dir / (stem + ".augment.json"), sidecar.dump(2) + "\n");
    outputs.push_back(stem);
  }
  write_run_manifest(dir, "augment", cfg, {{"input", input}}, {{"stems", outputs}});
  out << "augmented " << files.size() << " chunks\n";
  return kOk;
}

json source_json(const SourceSpec& s) {
  json f = json::array();
  for (const auto& fm : s.formants) f.push_back({{"center_hz", fm.center_hz}, {"width_hz", fm.width_hz}, {"gain", fm.gain}});
  return {{"source_id", s.source_id}, {"f0", s.f0}, {"rolloff", s.rolloff}, {"formants", f}};
}

void write_corpus(const fs::path& dir, const SyntheticCorpus& corpus) {
  fs::create_directories(dir / "chunks");
  std::ostringstream manifest;
  manifest << "chunk_path,source_id,content_id,seed\n";
  const auto& d = corpus.data;
  for (std::size_t i = 0; i < d.chunks.size(); ++i) {
    std::ostringstream name;
    name << "chunks/s" << d.source_ids[i] << "_c" << d.content_ids[i] << '_' << std::setw(5)
         << std::setfill('0') << i << kChunkExt;
    write_chunk(dir / name.str(), d.chunks[i]);
    manifest << name.str() << ',' << d.source_ids[i] << ',' << d.content_ids[i] << ',' << d.seeds[i] << '\n';
  }
  write_text(dir / "manifest.csv", manifest.str());
  json sources = json::array(), scripts = json::array();
  for (const auto& s : corpus.sources) sources.push_back(source_json(s));
  for (const auto& s : corpus.scripts) scripts.push_back({{"content_id", s.content_id}, {"symbols", s.symbols}});
  write_text(dir / "factors.json",
             json{{"sources", sources}, {"scripts", scripts}, {"noise_db", corpus.noise_db}}.dump(2) + "\n");
}

int cmd_synth_gen(const Common& c, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const auto corpus = make_corpus(cfg.sources, cfg.contents, cfg.per_cell, cfg.seed, cfg.noise_db);
  write_corpus(c.out, corpus);
  write_run_manifest(c.out, "synth-gen", cfg, json::object(),
                     {{"manifest", "manifest.csv"}, {"factors", "factors.json"}, {"chunks", corpus.data.chunks.size()}});
  out << "wrote " << corpus.data.chunks.size() << " chunks (" << cfg.sources << " sources x " << cfg.contents
      << " contents x " << cfg.per_cell << ")\n";
  return kOk;
}

int cmd_train(const Common& c, const std::string& data, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const LoadedChunks loaded = load_chunks(data, {"chunk_path"});
  const fs::path dir = c.out;
  fs::create_directories(dir);
  Autodecompose model(cfg.model);
  LossLog log(dir / "loss.csv");
  model.fit(loaded.chunks, cfg.model.epochs, [&](const EpochRecord& r) {
    log(r);
    out << "epoch " << r.epoch << " loss " << r.mean_loss << '\n';
  });
  model.save(dir / "checkpoint.adckpt");
  write_run_manifest(dir, "train", cfg, {{"data", data}, {"chunks", loaded.chunks.size()}},
                     {{"checkpoint", "checkpoint.adckpt"}, {"loss", "loss.csv"}});
  return kOk;
}

int cmd_finetune(const Common& c, const std::string& checkpoint, const std::string& data, std::ostream& out) {
  RunConfig cfg = resolve(c);
  const json user_model = cfg.requested.value("model", json::object());
  for (const auto& [key, value] : user_model.items())
    if (key != "epochs")
      throw ConfigError("finetune takes the architecture from the checkpoint; only model.epochs may be set (got model." +
                        key + ")");
  Autodecompose model = Autodecompose::load(checkpoint);
  const std::size_t epochs = user_model.contains("epochs") ? user_model["epochs"].get<std::size_t>() : model.config().epochs;
  cfg.model = model.config();
  cfg.model.epochs = epochs;
  const LoadedChunks loaded = load_chunks(data, {"chunk_path"});
  const fs::path dir = c.out;
  fs::create_directories(dir);
  LossLog log(dir / "loss.csv");
  model.fit(loaded.chunks, epochs, [&](const EpochRecord& r) {
    log(r);
    out << "epoch " << r.epoch << " loss " << r.mean_loss << '\n';
  });
  model.save(dir / "checkpoint.adckpt");
  write_run_manifest(dir, "finetune", cfg, {{"checkpoint", checkpoint}, {"data", data}, {"chunks", loaded.chunks.size()}},
                     {{"checkpoint", "checkpoint.adckpt"}, {"loss", "loss.csv"}});
  return kOk;
}

int cmd_embed(const Common& c, const std::string& checkpoint, const std::string& data, const std::string& encoder,
              const std::string& pooling, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  if (encoder != "source" && encoder != "content") throw ConfigError("--encoder must be source or content");
  if (pooling != "mean" && pooling != "none") throw ConfigError("--pooling must be mean or none");
  const Autodecompose model = Autodecompose::load(checkpoint);
  const LoadedChunks loaded = load_chunks(data, {"chunk_path"});
  const auto emb = model.embed_many(loaded.chunks, encoder == "source" ? Encoder::Source : Encoder::Content,
                                    pooling == "mean" ? Pooling::Mean : Pooling::None);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "chunk_path,frame";
  for (std::size_t j = 0; j < model.config().embed_dim; ++j) csv << ",e" << j;
  csv << '\n' << std::setprecision(9);
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t r = 0; r < emb[i].rows; ++r) {
      csv << loaded.rows[i].chunk_path.string() << ',';
      if (pooling == "mean") csv << "mean"; else csv << r;
      for (float v : emb[i].row(r)) csv << ',' << v;
      csv << '\n';
    }
  write_text(dir / "embeddings.csv", csv.str());
  write_run_manifest(dir, "embed", cfg,
                     {{"checkpoint", checkpoint}, {"data", data}, {"encoder", encoder}, {"pooling", pooling}},
                     {{"embeddings", "embeddings.csv"}});
  out << "embedded " << emb.size() << " chunks\n";
  return kOk;
}

int cmd_probe(const Common& c, const std::string& checkpoint, const std::string& manifest, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const Autodecompose model = Autodecompose::load(checkpoint);
  const LabeledCorpus corpus = labeled_corpus(manifest);
  const auto report = decomposition_report(model, corpus, cfg.budgets, cfg.seed, cfg.probe);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  write_text(dir / "report.csv", report.to_csv());
  write_text(dir / "pca_source_encoder.csv", DecompositionReport::pca_csv(report.pca_source));
  write_text(dir / "pca_content_encoder.csv", DecompositionReport::pca_csv(report.pca_content));
  write_run_manifest(dir, "probe", cfg, {{"checkpoint", checkpoint}, {"manifest", manifest}},
                     {{"report", "report.csv"}, {"pca", {"pca_source_encoder.csv", "pca_content_encoder.csv"}}});
  out << report.to_csv();
  return kOk;
}

int cmd_theorem_check(const Common& c, const std::string& manifest, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(c);
  SyntheticCorpus corpus;
  if (manifest.empty()) {
    corpus = make_corpus(cfg.sources, cfg.contents, cfg.per_cell, cfg.seed, cfg.noise_db);
  } else {
    corpus.data = labeled_corpus(manifest);
    corpus.sources.resize(corpus.data.source_names.size());
    corpus.scripts.resize(corpus.data.content_names.size());
  }
  const fs::path dir = c.out;
  fs::create_directories(dir);
  Autodecompose model(cfg.model);
  TheoremResult result;
  {
    LossLog log(dir / "loss.csv");
    try {
      result.log = model.fit(corpus.data.chunks, cfg.model.epochs, [&](const EpochRecord& r) {
        log(r);
        out << "epoch " << r.epoch << " loss " << r.mean_loss << '\n';
      });
    } catch (const DivergenceError& e) {
      result.diagnostics = e.what();
    }
  }
  if (result.diagnostics.empty()) {
    TrainingLog log = std::move(result.log);
    result = theorem_check(model, corpus, cfg.seed, cfg.thresholds);
    result.log = std::move(log);
    model.save(dir / "checkpoint.adckpt");
    write_text(dir / "report.csv", result.report.to_csv());
    write_text(dir / "pca_source_encoder.csv", DecompositionReport::pca_csv(result.report.pca_source));
    write_text(dir / "pca_content_encoder.csv", DecompositionReport::pca_csv(result.report.pca_content));
  }
  write_text(dir / "checks.json", checks_json(result).dump(2) + "\n");
  write_run_manifest(dir, "theorem-check", cfg, {{"manifest", manifest}},
                     {{"report", "report.csv"}, {"checks", "checks.json"}, {"loss", "loss.csv"}});
  for (const auto& ch : result.checks)
    out << (ch.pass ? "PASS " : "FAIL ") << ch.name << " = " << ch.value << " (" << (ch.upper ? "<= " : ">= ")
        << ch.bound << ")\n";
  if (!result.diagnostics.empty()) err << "training diverged: " << result.diagnostics << '\n';
  out << (result.pass ? "decomposition check passed\n" : "decomposition check failed\n");
  return result.pass ? kOk : kChecksFailed;
}

int cmd_reconstruct(const Common& c, const std::string& checkpoint, const std::string& source_chunk,
                    const std::string& content_chunk, std::ostream& out) {
  const RunConfig cfg = resolve(c);
  const Autodecompose model = Autodecompose::load(checkpoint);
  const MelChunk mixed = model.reconstruct(read_chunk(source_chunk), read_chunk(content_chunk));
  fs::create_directories(c.out);
  write_chunk(fs::path(c.out) / "reconstruction.adspec", mixed);
  write_run_manifest(c.out, "reconstruct", cfg,
                     {{"checkpoint", checkpoint}, {"source_chunk", source_chunk}, {"content_chunk", content_chunk}},
                     {{"reconstruction", "reconstruction.adspec"}});
  out << "wrote reconstruction.adspec\n";
  return kOk;
}

}  // namespace

json default_run_config() {
  return {{"seed", 1},
          {"model", {{"preset", "conv"}}},
          {"probe", {{"budgets", {10.24}}, {"l2", 1e-3}, {"iterations", 500}, {"learning_rate", 1.0}, {"standardize", true}}},
          {"synth", {{"sources", 5}, {"contents", 10}, {"per_cell", 4}, {"noise_db", 30.0}}},
          {"checks",
           {{"budget_seconds", 10.24},
            {"source_by_source_min", 0.90},
            {"source_by_content_max", 0.60},
            {"content_by_content_margin", 0.25},
            {"content_by_source_margin", 0.15}}}};
}

std::vector<ManifestRow> read_manifest(const fs::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("manifest " + path.string() + " is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const auto& r : required)
    if (!column(r)) throw ConfigError("manifest " + path.string() + " is missing column '" + r + "'");
  const auto chunk_col = column("chunk_path");
  if (!chunk_col) throw ConfigError("manifest " + path.string() + " is missing column 'chunk_path'");
  const auto src_col = column("source_id"), con_col = column("content_id"), seed_col = column("seed");
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError("manifest " + path.string() + " line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    ManifestRow r;
    r.chunk_path = cells[*chunk_col];
    if (r.chunk_path.is_relative()) r.chunk_path = path.parent_path() / r.chunk_path;
    if (src_col) r.source_id = cells[*src_col];
    if (con_col) r.content_id = cells[*con_col];
    if (seed_col && !cells[*seed_col].empty()) r.seed = std::stoull(cells[*seed_col]);
    for (const auto& req : required)
      if (cells[*column(req)].empty())
        throw ConfigError("manifest " + path.string() + " line " + std::to_string(line_no) + " has an empty '" +
                          req + "' cell");
    rows.push_back(std::move(r));
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Autodecompose: self-supervised source/content decomposition of audio"};
  app.require_subcommand(1);
  Common common;
  std::string input, data, checkpoint, manifest, encoder = "source", pooling = "mean", source_chunk, content_chunk;

  auto* pre = app.add_subcommand("preprocess", "WAV directory or wav_path manifest -> 64x80 log-mel chunk files");
  add_common(pre, common);
  pre->add_option("--input", input, "Directory of WAV files or a CSV with a wav_path column")->required();

  auto* aug = app.add_subcommand("augment", "Write both augmented views of chunk files plus JSON sidecars");
  add_common(aug, common);
  aug->add_option("--input", input, "Chunk file or directory of chunk files")->required();

  auto* syn = app.add_subcommand("synth-gen", "Generate the labeled synthetic corpus");
  add_common(syn, common);

  auto* train = app.add_subcommand("train", "Train a model from scratch on unlabeled chunks");
  add_common(train, common);
  train->add_option("--data", data, "Chunk directory or manifest CSV")->required();

  auto* fine = app.add_subcommand("finetune", "Continue training a checkpoint on new unlabeled chunks");
  add_common(fine, common);
  fine->add_option("--checkpoint", checkpoint, "Model checkpoint (.adckpt)")->required();
  fine->add_option("--data", data, "Chunk directory or manifest CSV")->required();

  auto* emb = app.add_subcommand("embed", "Write encoder embeddings as CSV");
  add_common(emb, common);
  emb->add_option("--checkpoint", checkpoint, "Model checkpoint (.adckpt)")->required();
  emb->add_option("--data", data, "Chunk directory or manifest CSV")->required();
  emb->add_option("--encoder", encoder, "source or content");
  emb->add_option("--pooling", pooling, "mean or none");

  auto* probe = app.add_subcommand("probe", "Linear-probe report for a checkpoint on a labeled manifest");
  add_common(probe, common);
  probe->add_option("--checkpoint", checkpoint, "Model checkpoint (.adckpt)")->required();
  probe->add_option("--manifest", manifest, "CSV with chunk_path, source_id, content_id")->required();

  auto* theorem = app.add_subcommand("theorem-check", "Train on a synthetic corpus and test the decomposition");
  add_common(theorem, common);
  theorem->add_option("--manifest", manifest, "Labeled manifest (default: generate from the synth section)");

  auto* rec = app.add_subcommand("reconstruct", "Debug: decode one chunk's source with another chunk's content");
  add_common(rec, common);
  rec->add_option("--checkpoint", checkpoint, "Model checkpoint (.adckpt)")->required();
  rec->add_option("--source-chunk", source_chunk)->required();
  rec->add_option("--content-chunk", content_chunk)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return kConfigError;
  }

  try {
    if (pre->parsed()) return cmd_preprocess(common, input, out, err);
    if (aug->parsed()) return cmd_augment(common, input, out);
    if (syn->parsed()) return cmd_synth_gen(common, out);
    if (train->parsed()) return cmd_train(common, data, out);
    if (fine->parsed()) return cmd_finetune(common, checkpoint, data, out);
    if (emb->parsed()) return cmd_embed(common, checkpoint, data, encoder, pooling, out);
    if (probe->parsed()) return cmd_probe(common, checkpoint, manifest, out);
    if (theorem->parsed()) return cmd_theorem_check(common, manifest, out, err);
    if (rec->parsed()) return cmd_reconstruct(common, checkpoint, source_chunk, content_chunk, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ProtocolError& e) {
    err << "probe protocol error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace autodecompose::cli
