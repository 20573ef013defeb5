// Copyright 2026 The structsum Authors. All Rights Reserved.
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

#include "structsum/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "structsum/beam.hpp"
#include "structsum/checkpoint.hpp"
#include "structsum/config.hpp"
#include "structsum/dataset.hpp"
#include "structsum/digest.hpp"
#include "structsum/errors.hpp"
#include "structsum/metrics.hpp"
#include "structsum/minilang.hpp"
#include "structsum/struct_encode.hpp"
#include "structsum/train.hpp"

#ifndef STRUCTSUM_GIT_DESCRIBE
#define STRUCTSUM_GIT_DESCRIBE "unknown"
#endif

namespace structsum {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const NumericsError&) {
    return kExitNumeric;
  } catch (const MismatchError&) {
    return kExitMismatch;
  } catch (const StateError&) {
    return kExitFailure;
  } catch (const Error&) {
    return kExitInput;
  } catch (const json::exception&) {
    return kExitInput;
  } catch (const fs::filesystem_error&) {
    return kExitInput;
  } catch (...) {
    return kExitFailure;
  }
}

std::vector<CodeChunk> split_code_file(const std::string& text) {
  std::vector<CodeChunk> chunks;
  std::istringstream in(text);
  CodeChunk cur;
  std::size_t line_no = 0;
  auto flush = [&]() {
    if (cur.source.find_first_not_of(" \t\r\n") != std::string::npos) chunks.push_back(cur);
    cur = CodeChunk{};
    cur.first_line = line_no + 1;
  };
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::string t = line;
    if (!t.empty() && t.back() == '\r') t.pop_back();
    if (t == "---") {
      flush();
      continue;
    }
    cur.source += line;
    cur.source += '\n';
  }
  flush();
  return chunks;
}

std::vector<CodeChunk> read_code_examples(const std::string& path) {
  const std::string text = read_file(path);
  if (fs::path(path).extension() != ".jsonl") return split_code_file(text);
  std::vector<CodeChunk> chunks;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      chunks.push_back({line_no, doc.at("code").get<std::string>()});
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return chunks;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {
    doc_["command"] = command_;
    doc_["git_describe"] = STRUCTSUM_GIT_DESCRIBE;
    doc_["start_time"] = utc_now();
    doc_["inputs"] = json::object();
  }
  void input(const std::string& path) { doc_["inputs"][path] = file_digest(path); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void write(const std::string& dir) {
    doc_["end_time"] = utc_now();
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw FormatError("cannot write manifest into " + dir);
    out << doc_.dump(2) << '\n';
  }

 private:
  std::string command_;
  json doc_;
};

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Model, vocabularies and config of a finished training run.
struct LoadedRun {
  RunConfig cfg;
  Vocabularies vocab;
  std::optional<ScriptModel> model;
};

LoadedRun load_run(const std::string& run_dir, const std::string& checkpoint, Manifest* manifest) {
  const fs::path dir(run_dir);
  LoadedRun run;
  const fs::path cfg_path = dir / "config.json";
  try {
    run.cfg = RunConfig::from_json(json::parse(read_file(cfg_path.string())));
  } catch (const json::exception& e) {
    throw FormatError(cfg_path.string() + ": " + e.what());
  }
  run.vocab.source = Vocabulary::load((dir / "src.vocab").string());
  run.vocab.target = Vocabulary::load((dir / "tgt.vocab").string());
  const std::string ckpt_path = checkpoint.empty() ? (dir / "best.ckpt").string() : checkpoint;
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  run.model.emplace(model_from_checkpoint(ckpt, &run.vocab.source, &run.vocab.target));
  if (run.model->config().to_json() != [&] {
        ModelConfig m = run.cfg.model;
        m.layer_plan = m.effective_plan();
        return m.to_json();
      }())
    throw MismatchError("checkpoint model config differs from " + cfg_path.string());
  if (manifest) {
    manifest->input(cfg_path.string());
    manifest->input((dir / "src.vocab").string());
    manifest->input((dir / "tgt.vocab").string());
    manifest->input(ckpt_path);
  }
  return run;
}

std::vector<std::string> decode_summary(const ScriptModel& model, const Example& ex, const Vocabularies& vocab,
                                        const RunConfig& cfg, std::size_t beam, bool greedy) {
  const EncoderInput in = source_input(ex, vocab.source, model.config().l);
  const Tensor memory = model.encode(in);
  StepFn step = [&](std::span<const int> prefix) {
    std::vector<double> p = model.decoder_step(prefix, memory, in.length);
    for (auto& x : p) x = std::log(x);
    return p;
  };
  BeamOptions bo;
  bo.beam_size = beam;
  bo.max_len = cfg.train.decode_max_len;
  bo.length_penalty = cfg.length_penalty;
  bo.bos = Vocabulary::kBos;
  bo.eos = Vocabulary::kEos;
  const Hypothesis h = greedy ? greedy_decode(step, bo) : beam_search(step, bo);
  return vocab.target.decode(strip_eos(h, Vocabulary::kEos));
}

std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) s += (i ? " " : "") + tokens[i];
  return s;
}

// ---- parse -------------------------------------------------------------------

int cmd_parse(const std::string& input, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  Manifest manifest("parse");
  manifest.input(input);
  const std::vector<CodeChunk> chunks = read_code_examples(input);
  fs::create_directories(out_dir);
  std::size_t failures = 0;
  json report = json::array();
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const CodeChunk& c = chunks[i];
    char name[32];
    std::snprintf(name, sizeof name, "example_%04zu.json", i);
    try {
      const Ast ast = parse_minilang(c.source);
      save_ast_json(ast, (fs::path(out_dir) / name).string());
      out << "ok    example " << i << " (line " << c.first_line << ") -> " << name << '\n';
      report.push_back({{"example", i}, {"line", c.first_line}, {"ok", true}, {"output", name}});
    } catch (const SyntaxError& e) {
      ++failures;
      const bool jsonl = fs::path(input).extension() == ".jsonl";
      const std::size_t line = jsonl ? c.first_line : c.first_line + e.line() - 1;
      err << input << ":" << line << ": example " << i << ": " << e.what() << '\n';
      out << "error example " << i << " (line " << line << "): " << e.what() << '\n';
      report.push_back({{"example", i}, {"line", line}, {"ok", false}, {"error", e.what()}});
    }
  }
  manifest.set("report", report);
  manifest.set("examples", chunks.size());
  manifest.set("failures", failures);
  manifest.write(out_dir);
  return failures ? kExitInput : kExitOk;
}

// ---- encode ------------------------------------------------------------------

void check_bundle(const StructuralEncoding& enc, std::size_t index) {
  const std::size_t n = enc.size();
  auto fail = [&](const std::string& what) {
    throw ValueError("example " + std::to_string(index) + ": " + what);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (enc.m(i, i) != 0) fail("distance diagonal is not zero");
    double row = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (enc.m(i, j) != enc.m(j, i) || enc.m(i, j) < 0) fail("distance matrix is not symmetric non-negative");
      row += enc.m_bar(i, j);
      any = any || enc.m(i, j) > 0;
    }
    if (any && std::abs(row - 1.0) > 1e-9) fail("normalized row does not sum to 1");
  }
}

int cmd_encode(const std::string& input, const std::string& out_dir, const RunConfig& cfg, std::optional<int> k,
               std::ostream& out) {
  Manifest manifest("encode");
  manifest.input(input);
  cfg.validate();
  EncodeOptions eo;
  eo.clip = cfg.model.l;
  eo.weights = cfg.weights;
  eo.max_tokens = cfg.max_source_len;
  if (eo.clip < 1) throw ConfigError("l must be at least 1");

  std::vector<Ast> asts;
  if (fs::path(input).extension() == ".jsonl") {
    std::istringstream in(read_file(input));
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json doc = json::parse(line);
        asts.push_back(doc.contains("ast") ? ast_from_json(doc["ast"])
                                           : parse_minilang(doc.at("code").get<std::string>()));
      } catch (const std::exception& e) {
        throw FormatError(input + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  } else {
    for (const auto& c : split_code_file(read_file(input))) {
      try {
        asts.push_back(parse_minilang(c.source));
      } catch (const SyntaxError& e) {
        throw FormatError(input + ":" + std::to_string(c.first_line + e.line() - 1) + ": " + e.what());
      }
    }
  }

  fs::create_directories(out_dir);
  int max_distance = 0;
  double entropy_sum = 0.0;
  for (std::size_t i = 0; i < asts.size(); ++i) {
    const LeafTokens lt = leaf_tokens(asts[i]);
    const StructuralEncoding enc = encode_structure(asts[i], lt.alignment, eo);
    check_bundle(enc, i);
    json doc = bundle_to_json(enc);
    std::vector<std::string> toks(lt.tokens.begin(), lt.tokens.begin() + static_cast<std::ptrdiff_t>(enc.size()));
    doc["tokens"] = toks;
    if (k) {
      if (*k < 1) throw ConfigError("k must be at least 1");
      const IntMatrix seq = sequential_relpos(enc.size(), *k);
      json rows = json::array();
      for (std::size_t r = 0; r < seq.n(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < seq.n(); ++c) row.push_back(seq(r, c));
        rows.push_back(row);
      }
      doc["seq_relpos"] = rows;
      doc["k"] = *k;
    }
    for (int d : enc.m.data()) max_distance = std::max(max_distance, d);
    const double h = mean_row_entropy(enc.m_bar);
    entropy_sum += h;
    char name[32];
    std::snprintf(name, sizeof name, "bundle_%04zu.json", i);
    write_json(fs::path(out_dir) / name, doc);
  }
  const double mean_entropy = asts.empty() ? 0.0 : entropy_sum / static_cast<double>(asts.size());
  const json stats = {{"examples", asts.size()}, {"max_distance", max_distance}, {"mean_m_bar_entropy", mean_entropy}};
  write_json(fs::path(out_dir) / "stats.json", stats);
  out << "examples " << asts.size() << "\nmax_distance " << max_distance << "\nmean_m_bar_entropy "
      << num(mean_entropy) << '\n';
  manifest.set("config", {{"l", eo.clip}, {"alpha", eo.weights.alpha}, {"beta", eo.weights.beta},
                          {"gamma", eo.weights.gamma}, {"k", k ? json(*k) : json(nullptr)}});
  manifest.set("stats", stats);
  manifest.write(out_dir);
  return kExitOk;
}

// ---- train -------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const RunConfig& cfg, const std::string& out_dir, bool resume,
              std::ostream& out) {
  Manifest manifest("train");
  cfg.validate();
  const fs::path dd(data_dir);
  const std::string train_path = (dd / "train.jsonl").string();
  const std::string valid_path = (dd / "valid.jsonl").string();
  const DatasetOptions dopts = cfg.dataset_options();
  const std::vector<Example> train_split = load_dataset(train_path, dopts);
  manifest.input(train_path);
  std::vector<Example> valid_split;
  if (fs::exists(valid_path)) {
    valid_split = load_dataset(valid_path, dopts);
    manifest.input(valid_path);
  }
  const Vocabularies vocab = build_vocab(train_split, cfg.min_freq, cfg.max_vocab);

  fs::create_directories(out_dir);
  const fs::path od(out_dir);
  TrainOutput to;
  to.out_dir = out_dir;
  if (resume) {
    to.resume_from = (od / "last.ckpt").string();
    if (!fs::exists(to.resume_from)) throw FormatError("nothing to resume: " + to.resume_from + " is missing");
    if (Vocabulary::load((od / "src.vocab").string()) != vocab.source ||
        Vocabulary::load((od / "tgt.vocab").string()) != vocab.target)
      throw MismatchError("vocabularies in " + out_dir + " differ from the ones built from " + data_dir);
  }
  write_json(od / "config.json", cfg.to_json());
  vocab.source.save((od / "src.vocab").string());
  vocab.target.save((od / "tgt.vocab").string());

  ScriptModel model(cfg.model, vocab.source.size(), vocab.target.size(), cfg.train.seed);
  out << "parameters " << model.parameter_count() << ", train " << train_split.size() << ", valid "
      << valid_split.size() << '\n';
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " train_loss " << num(r.train_loss) << " valid_loss " << num(r.valid_loss)
        << " valid_bleu " << num(r.valid_bleu) << '\n';
  };
  const TrainResult res = train(model, train_split, valid_split, vocab, cfg.train, to, hooks);
  out << "steps " << res.steps << ", best epoch " << res.best_epoch << (res.stopped_early ? " (early stop)" : "")
      << '\n';

  manifest.set("config", cfg.to_json());
  manifest.set("seed", cfg.train.seed);
  manifest.set("steps", res.steps);
  manifest.set("best_epoch", res.best_epoch);
  manifest.set("outputs", {"config.json", "src.vocab", "tgt.vocab", "best.ckpt", "last.ckpt", "history.csv"});
  manifest.write(out_dir);
  return kExitOk;
}

// ---- eval --------------------------------------------------------------------

int cmd_eval(const std::string& data, const std::string& run_dir, const std::string& checkpoint,
             const std::string& predictions, const std::string& out_dir, const std::string& bucket_by,
             const std::vector<std::size_t>& edges, std::size_t beam, bool greedy, std::ostream& out) {
  Manifest manifest("eval");
  BucketSpec spec;
  if (bucket_by == "code")
    spec.key = BucketKey::CodeLength;
  else if (bucket_by == "summary")
    spec.key = BucketKey::SummaryLength;
  else
    throw BucketError("bucket key must be code or summary");
  spec.edges = edges;

  RunConfig cfg;
  std::optional<LoadedRun> run;
  if (!run_dir.empty()) {
    run.emplace(load_run(run_dir, checkpoint, &manifest));
    cfg = run->cfg;
  }
  const std::vector<Example> split = load_dataset(data, cfg.dataset_options());
  manifest.input(data);

  std::vector<std::vector<std::string>> candidates;
  if (!predictions.empty()) {
    manifest.input(predictions);
    std::istringstream in(read_file(predictions));
    for (std::string line; std::getline(in, line);) candidates.push_back(normalize_text(line));
    if (candidates.size() != split.size())
      throw FormatError(predictions + " has " + std::to_string(candidates.size()) + " lines, dataset has " +
                        std::to_string(split.size()) + " examples");
  } else if (run) {
    for (const auto& ex : split)
      candidates.push_back(decode_summary(*run->model, ex, run->vocab, cfg, beam ? beam : cfg.beam_size, greedy));
  } else {
    throw ConfigError("eval needs --run or --predictions");
  }

  std::vector<EvalPair> pairs;
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < split.size(); ++i) {
    pairs.push_back({candidates[i], {split[i].summary_tokens}});
    lengths.push_back(spec.key == BucketKey::CodeLength ? split[i].code_tokens.size()
                                                        : split[i].summary_tokens.size());
  }
  const CorpusReport report = corpus_report(pairs, lengths, spec);

  fs::create_directories(out_dir);
  write_json(fs::path(out_dir) / "report.json", report_to_json(report, spec));
  std::ofstream csv(fs::path(out_dir) / "scores.csv");
  csv << "index,bleu4,rouge_l,meteor,code_length,summary_length,candidate\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& s = report.per_pair[i];
    csv << i << ',' << num(s.bleu4) << ',' << num(s.rouge_l) << ',' << num(s.meteor) << ','
        << split[i].code_tokens.size() << ',' << split[i].summary_tokens.size() << ','
        << csv_field(join(candidates[i])) << '\n';
  }
  out << "bleu4 " << num(report.overall.bleu4) << "\nrouge_l " << num(report.overall.rouge_l) << "\nmeteor "
      << num(report.overall.meteor) << '\n';
  manifest.set("config", cfg.to_json());
  manifest.set("overall", report_to_json(report, spec)["overall"]);
  manifest.write(out_dir);
  return kExitOk;
}

// ---- summarize ---------------------------------------------------------------

int cmd_summarize(const std::string& run_dir, const std::string& checkpoint, const std::string& code,
                  std::size_t beam, bool greedy, std::ostream& out, std::ostream& err) {
  LoadedRun run = load_run(run_dir, checkpoint, nullptr);
  const DatasetOptions dopts = run.cfg.dataset_options();
  int status = kExitOk;
  const std::vector<CodeChunk> chunks = read_code_examples(code);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    Ast ast;
    try {
      ast = parse_minilang(chunks[i].source);
    } catch (const SyntaxError& e) {
      err << code << ": example " << i << ": " << e.what() << '\n';
      out << '\n';
      status = kExitInput;
      continue;
    }
    const Example ex = make_example(std::move(ast), "", dopts);
    out << join(decode_summary(*run.model, ex, run.vocab, run.cfg, beam ? beam : run.cfg.beam_size, greedy)) << '\n';
  }
  return status;
}

// ---- export-attention --------------------------------------------------------

int cmd_export_attention(const std::string& run_dir, const std::string& checkpoint, const std::string& code,
                         std::size_t example, int layer, int head, const std::string& out_path, std::ostream& out) {
  LoadedRun run = load_run(run_dir, checkpoint, nullptr);
  const ScriptModel& model = *run.model;
  if (layer < 0 || static_cast<std::size_t>(layer) >= model.n_encoder_layers())
    throw ValueError("layer " + std::to_string(layer) + " out of range (encoder has " +
                     std::to_string(model.n_encoder_layers()) + " layers)");
  if (head < 0 || head >= model.config().n_heads)
    throw ValueError("head " + std::to_string(head) + " out of range (" + std::to_string(model.config().n_heads) +
                     " heads)");
  const std::vector<CodeChunk> chunks = read_code_examples(code);
  if (example >= chunks.size())
    throw ValueError("example " + std::to_string(example) + " out of range (" + std::to_string(chunks.size()) +
                     " examples)");
  const Example ex = make_example(parse_minilang(chunks[example].source), "", run.cfg.dataset_options());
  AttentionTrace trace;
  ForwardOptions fo;
  fo.trace = &trace;
  model.encode(source_input(ex, run.vocab.source, model.config().l), fo);
  const Matrix* probs = nullptr;
  for (const auto& e : trace.entries)
    if (e.site == "encoder" && e.layer == layer && e.head == head) probs = &e.probs;
  if (probs == nullptr) throw ValueError("no attention recorded for that layer and head");

  std::ofstream csv(out_path);
  if (!csv) throw FormatError("cannot write " + out_path);
  csv << "token";
  for (const auto& t : ex.code_tokens) csv << ',' << csv_field(t);
  csv << '\n';
  for (std::size_t i = 0; i < probs->rows(); ++i) {
    csv << csv_field(ex.code_tokens[i]);
    for (std::size_t j = 0; j < probs->cols(); ++j) csv << ',' << num((*probs)(i, j));
    csv << '\n';
  }
  out << "wrote " << probs->rows() << "x" << probs->cols() << " attention of layer " << layer << " head " << head
      << " to " << out_path << '\n';
  return kExitOk;
}

std::vector<std::size_t> parse_edges(const std::string& s) {
  std::vector<std::size_t> edges;
  if (s.empty()) return edges;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v < 0) throw std::invalid_argument(item);
      edges.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw BucketError("bad bucket edge '" + item + "'");
    }
  }
  return edges;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"structure-aware code summarization toolkit", "structsum"};
  app.require_subcommand(1);

  std::string input, out_dir, data, run_dir, checkpoint, config_path, ablation, placement, predictions, code;
  std::string bucket_by = "code", edges;
  std::vector<std::string> sets;
  std::optional<int> k_opt;
  std::optional<int> l_opt;
  std::optional<double> alpha, beta, gamma;
  bool resume = false, greedy = false;
  std::size_t beam = 0, example = 0;
  int layer = 0, head = 0;

  auto* parse = app.add_subcommand("parse", "MiniLang source to AST interchange JSON");
  parse->add_option("input", input, "JSON Lines or ---separated MiniLang file")->required();
  parse->add_option("-o,--out", out_dir, "output directory")->required();

  auto* encode = app.add_subcommand("encode", "structural bundles for every example");
  encode->add_option("input", input, "JSON Lines dataset or ---separated MiniLang file")->required();
  encode->add_option("-o,--out", out_dir, "output directory")->required();
  encode->add_option("--l", l_opt, "structural clip");
  encode->add_option("--k", k_opt, "sequential clip; adds clipped relative positions");
  encode->add_option("--alpha", alpha, "weight of the abstract-syntax view");
  encode->add_option("--beta", beta, "weight of the control-flow view");
  encode->add_option("--gamma", gamma, "weight of the data-dependency view");
  encode->add_option("-c,--config", config_path, "key=value config file");

  auto* trn = app.add_subcommand("train", "train a model on <data>/train.jsonl");
  trn->add_option("data", data, "dataset directory with train.jsonl and optional valid.jsonl")->required();
  trn->add_option("-c,--config", config_path, "key=value config file");
  trn->add_option("-o,--out", out_dir, "run directory")->required();
  trn->add_option("--set", sets, "override a config key (key=value)");
  trn->add_option("--ablation", ablation, "no-rdw or no-srpei");
  trn->add_option("--srpe-placement", placement, "SRPEi_only, RDW_only or all");
  trn->add_flag("--resume", resume, "continue from <out>/last.ckpt");

  auto* ev = app.add_subcommand("eval", "score summaries against references");
  ev->add_option("data", data, "JSON Lines dataset with reference summaries")->required();
  ev->add_option("--run", run_dir, "run directory to decode with");
  ev->add_option("--checkpoint", checkpoint, "checkpoint inside the run (default best.ckpt)");
  ev->add_option("--predictions", predictions, "one candidate summary per line instead of decoding");
  ev->add_option("-o,--out", out_dir, "output directory")->required();
  ev->add_option("--bucket-by", bucket_by, "code or summary")->check(CLI::IsMember({"code", "summary"}));
  ev->add_option("--edges", edges, "comma-separated bucket edges, e.g. 10,20,40");
  ev->add_option("--beam", beam, "beam size (default from config)");
  ev->add_flag("--greedy", greedy, "greedy decoding");

  auto* sum = app.add_subcommand("summarize", "print one summary per input example");
  sum->add_option("--run", run_dir, "run directory")->required();
  sum->add_option("--checkpoint", checkpoint, "checkpoint inside the run (default best.ckpt)");
  sum->add_option("code", code, "JSON Lines or ---separated MiniLang file")->required();
  sum->add_option("--beam", beam, "beam size (default from config)");
  sum->add_flag("--greedy", greedy, "greedy decoding");

  auto* att = app.add_subcommand("export-attention", "encoder attention of one head as CSV");
  att->add_option("--run", run_dir, "run directory")->required();
  att->add_option("--checkpoint", checkpoint, "checkpoint inside the run (default best.ckpt)");
  att->add_option("code", code, "JSON Lines or ---separated MiniLang file")->required();
  att->add_option("--example", example, "example index in the file");
  att->add_option("--layer", layer, "encoder layer index");
  att->add_option("--head", head, "head index");
  att->add_option("-o,--out", out_dir, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*parse) return cmd_parse(input, out_dir, out, err);
    if (*encode) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      if (l_opt) cfg.model.l = *l_opt;
      if (alpha) cfg.weights.alpha = *alpha;
      if (beta) cfg.weights.beta = *beta;
      if (gamma) cfg.weights.gamma = *gamma;
      return cmd_encode(input, out_dir, cfg, k_opt, out);
    }
    if (*trn) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      for (const auto& s : sets) cfg.apply(s);
      if (!placement.empty()) cfg.model.srpe_placement = parse_srpe_placement(placement);
      apply_ablation(cfg.model, ablation);
      return cmd_train(data, cfg, out_dir, resume, out);
    }
    if (*ev)
      return cmd_eval(data, run_dir, checkpoint, predictions, out_dir, bucket_by, parse_edges(edges), beam, greedy,
                      out);
    if (*sum) return cmd_summarize(run_dir, checkpoint, code, beam, greedy, out, err);
    if (*att) return cmd_export_attention(run_dir, checkpoint, code, example, layer, head, out_dir, out);
  } catch (...) {
    const int rc = exit_code_for_current_exception();
    try {
      throw;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
    } catch (...) {
      err << "error: unknown failure\n";
    }
    return rc;
  }
  return kExitFailure;
}

}  // namespace structsum
