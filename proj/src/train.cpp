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

#include "structsum/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "structsum/beam.hpp"
#include "structsum/checkpoint.hpp"
#include "structsum/errors.hpp"
#include "structsum/metrics.hpp"

namespace structsum {

std::string to_string(StopMetric m) { return m == StopMetric::ValidLoss ? "loss" : "bleu"; }

StopMetric parse_stop_metric(const std::string& s) {
  if (s == "loss") return StopMetric::ValidLoss;
  if (s == "bleu") return StopMetric::ValidBleu;
  throw ConfigError("unknown early-stop metric '" + s + "' (loss, bleu)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw ConfigError("warmup_ratio must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (decode_max_len == 0) throw ConfigError("decode_max_len must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"lr", lr},
          {"warmup_ratio", warmup_ratio},
          {"weight_decay", weight_decay},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"max_epochs", max_epochs},
          {"max_steps", max_steps},
          {"early_stop_patience", early_stop_patience},
          {"stop_metric", to_string(stop_metric)},
          {"track_bleu", track_bleu},
          {"decode_max_len", decode_max_len},
          {"sort_by_length", sort_by_length},
          {"seed", seed},
          {"deterministic", deterministic}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.stop_metric = parse_stop_metric(j.value("stop_metric", to_string(c.stop_metric)));
  c.track_bleu = j.value("track_bleu", c.track_bleu);
  c.decode_max_len = j.value("decode_max_len", c.decode_max_len);
  c.sort_by_length = j.value("sort_by_length", c.sort_by_length);
  c.seed = j.value("seed", c.seed);
  c.deterministic = j.value("deterministic", c.deterministic);
  return c;
}

double scheduled_lr(double base_lr, std::size_t step, std::size_t total, double warmup_ratio) {
  if (total == 0) return base_lr;
  const auto warm = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total)));
  const double s = static_cast<double>(step);
  if (warm > 0 && step <= warm) return base_lr * s / static_cast<double>(warm);
  if (step >= total) return 0.0;
  return base_lr * static_cast<double>(total - step) / static_cast<double>(total - warm);
}

// ---- Adam --------------------------------------------------------------------

Adam::Adam(const ParamList& params, double beta1, double beta2, double eps, double weight_decay)
    : params_(params), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.rows(), t.cols());
    v_.emplace_back(t.rows(), t.cols());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor t = params_[p].second;
    const Matrix g = t.grad();
    Matrix& w = t.mutable_value();
    auto& m = m_[p].values();
    auto& v = v_[p].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.values()[i] + wd_ * w.values()[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
      v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
      w.values()[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::vector<NamedArray> Adam::state() const {
  std::vector<NamedArray> out;
  for (std::size_t p = 0; p < params_.size(); ++p) {
    out.push_back({"adam.m/" + params_[p].first, m_[p]});
    out.push_back({"adam.v/" + params_[p].first, v_[p]});
  }
  return out;
}

void Adam::load_state(const std::vector<NamedArray>& arrays, std::size_t t) {
  auto find = [&](const std::string& name) -> const Matrix& {
    for (const auto& a : arrays)
      if (a.name == name) return a.value;
    throw MismatchError("optimiser state lacks " + name);
  };
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const Matrix& m = find("adam.m/" + params_[p].first);
    const Matrix& v = find("adam.v/" + params_[p].first);
    if (!m.same_shape(m_[p]) || !v.same_shape(v_[p])) throw MismatchError("optimiser state shape mismatch");
    m_[p] = m;
    v_[p] = v;
  }
  t_ = t;
}

// ---- history -----------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json record_to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},         {"train_loss", r.train_loss}, {"valid_loss", r.valid_loss},
          {"valid_bleu", r.valid_bleu}, {"lr", r.lr},                 {"wall_seconds", r.wall_seconds}};
}

EpochRecord record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.valid_loss = j.at("valid_loss").get<double>();
  r.valid_bleu = j.at("valid_bleu").get<double>();
  r.lr = j.at("lr").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

}  // namespace

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,valid_loss,valid_bleu,lr,wall_seconds\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.valid_loss) + "," + fmt(r.valid_bleu) +
           "," + fmt(r.lr) + "," + fmt(r.wall_seconds) + "\n";
  }
  return out;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << history_csv(history);
}

// ---- evaluation --------------------------------------------------------------

Tensor batch_loss(const ScriptModel& model, const Batch& batch, const ForwardOptions& opt) {
  const std::size_t tokens = batch.target_tokens();
  if (tokens == 0) throw ShapeError("batch has no target tokens");
  Tensor total;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    ForwardOptions item = opt;
    item.dropout_seed = mix_seed(opt.dropout_seed, batch.indices[k]);
    const Tensor l =
        model.loss(batch.sources[k], batch.target_in[k], batch.target_out[k], Vocabulary::kPad, item);
    total = total.defined() ? add(total, l) : l;
  }
  return scale(total, 1.0 / static_cast<double>(tokens));
}

TokenStats evaluate_tokens(const ScriptModel& model, const std::vector<Example>& split, const Vocabularies& vocab,
                           std::size_t batch_size) {
  TokenStats stats;
  if (split.empty()) return stats;
  BatchOptions bo;
  bo.batch_size = batch_size;
  bo.shuffle = false;
  bo.clip = model.config().l;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const Batch& b : make_batches(split, vocab, bo)) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      const Tensor memory = model.encode(b.sources[k]);
      const Tensor logits = model.decode(b.target_in[k], memory, b.sources[k].length);
      loss_sum += cross_entropy(logits, b.target_out[k], Vocabulary::kPad).item();
      const Matrix& lv = logits.value();
      for (std::size_t r = 0; r < lv.rows(); ++r) {
        const int target = b.target_out[k][r];
        if (target == Vocabulary::kPad) continue;
        ++stats.tokens;
        std::size_t best = 0;
        for (std::size_t c = 1; c < lv.cols(); ++c)
          if (lv(r, c) > lv(r, best)) best = c;
        correct += static_cast<int>(best) == target;
      }
    }
  }
  if (stats.tokens > 0) {
    stats.loss = loss_sum / static_cast<double>(stats.tokens);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(stats.tokens);
  }
  return stats;
}

std::vector<std::vector<std::string>> greedy_summaries(const ScriptModel& model, const std::vector<Example>& split,
                                                       const Vocabulary& src, const Vocabulary& tgt,
                                                       std::size_t max_len) {
  std::vector<std::vector<std::string>> out;
  out.reserve(split.size());
  BeamOptions bo;
  bo.max_len = max_len;
  bo.bos = Vocabulary::kBos;
  bo.eos = Vocabulary::kEos;
  for (const auto& ex : split) {
    const EncoderInput in = source_input(ex, src, model.config().l);
    const Tensor memory = model.encode(in);
    StepFn step = [&](std::span<const int> prefix) {
      std::vector<double> p = model.decoder_step(prefix, memory, in.length);
      for (auto& x : p) x = std::log(x);
      return p;
    };
    const Hypothesis h = greedy_decode(step, bo);
    out.push_back(tgt.decode(strip_eos(h, Vocabulary::kEos)));
  }
  return out;
}

double corpus_bleu(const ScriptModel& model, const std::vector<Example>& split, const Vocabularies& vocab,
                   std::size_t max_len) {
  if (split.empty()) return 0.0;
  const auto hyps = greedy_summaries(model, split, vocab.source, vocab.target, max_len);
  double total = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) total += bleu4(hyps[i], split[i].summary_tokens);
  return total / static_cast<double>(split.size());
}

// ---- training loop -----------------------------------------------------------

namespace {

struct LoopState {
  std::size_t step = 0;
  std::size_t epoch = 0;  // completed epochs
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::size_t epochs_since_best = 0;
  std::vector<EpochRecord> history;
};

nlohmann::json state_meta(const LoopState& s, const TrainConfig& cfg, const Vocabularies& vocab) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : s.history) hist.push_back(record_to_json(r));
  return {{"format", "structsum-checkpoint-v1"},
          {"train", cfg.to_json()},
          {"src_vocab_digest", vocab.source.digest()},
          {"tgt_vocab_digest", vocab.target.digest()},
          {"step", s.step},
          {"epoch", s.epoch},
          {"best_epoch", s.best_epoch},
          {"best_metric", s.best_metric},
          {"epochs_since_best", s.epochs_since_best},
          {"history", hist}};
}

bool improves(StopMetric metric, double value, double best, bool first) {
  if (first) return true;
  return metric == StopMetric::ValidLoss ? value < best : value > best;
}

}  // namespace

TrainResult train(ScriptModel& model, const std::vector<Example>& train_split, const std::vector<Example>& valid_split,
                  const Vocabularies& vocab, const TrainConfig& cfg, const TrainOutput& out, const TrainHooks& hooks) {
  cfg.validate();
  if (train_split.empty()) throw EmptyCorpusError("training split is empty");
  if (model.src_vocab() != vocab.source.size() || model.tgt_vocab() != vocab.target.size())
    throw MismatchError("model vocabulary sizes do not match the vocabularies");

  const std::size_t per_epoch = (train_split.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.max_steps != 0 ? cfg.max_steps : cfg.max_epochs * per_epoch;
  const bool want_bleu = cfg.track_bleu || cfg.stop_metric == StopMetric::ValidBleu;
  const auto& eval_split = valid_split.empty() ? train_split : valid_split;

  Adam adam(model.parameters(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay);
  LoopState st;

  if (!out.resume_from.empty()) {
    const Checkpoint ckpt = load_checkpoint(out.resume_from);
    restore_parameters(model, ckpt);
    const auto& m = ckpt.meta;
    if (m.value("src_vocab_digest", std::string()) != vocab.source.digest() ||
        m.value("tgt_vocab_digest", std::string()) != vocab.target.digest())
      throw MismatchError("resume checkpoint was trained with different vocabularies");
    st.step = m.at("step").get<std::size_t>();
    st.epoch = m.at("epoch").get<std::size_t>();
    st.best_epoch = m.at("best_epoch").get<std::size_t>();
    st.best_metric = m.at("best_metric").get<double>();
    st.epochs_since_best = m.at("epochs_since_best").get<std::size_t>();
    for (const auto& r : m.at("history")) st.history.push_back(record_from_json(r));
    adam.load_state(ckpt.arrays, st.step);
  }

  namespace fs = std::filesystem;
  const bool write = !out.out_dir.empty();
  if (write) fs::create_directories(out.out_dir);
  auto path = [&](const char* name) { return (fs::path(out.out_dir) / name).string(); };

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  bool stop = st.step >= total_steps || st.epoch >= cfg.max_epochs ||
              (st.epoch > 0 && st.epochs_since_best >= cfg.early_stop_patience);
  if (stop) result.stopped_early = st.epoch > 0 && st.epochs_since_best >= cfg.early_stop_patience;
  while (!stop) {
    BatchOptions bo;
    bo.batch_size = cfg.batch_size;
    bo.sort_by_length = cfg.sort_by_length;
    bo.shuffle = true;
    bo.seed = cfg.seed;
    bo.epoch = st.epoch;
    bo.clip = model.config().l;
    const std::vector<Batch> batches = make_batches(train_split, vocab, bo);

    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    double lr = 0.0;
    for (const Batch& batch : batches) {
      if (st.step >= total_steps) break;
      ++st.step;
      lr = scheduled_lr(cfg.lr, st.step, total_steps, cfg.warmup_ratio);
      for (const auto& [name, t] : model.parameters()) {
        Tensor h = t;
        h.zero_grad();
      }
      Tape tape;
      double value;
      {
        TapeScope scope(tape);
        ForwardOptions fo;
        fo.training = true;
        fo.dropout_seed = mix_seed(cfg.seed, st.step);
        const Tensor loss = batch_loss(model, batch, fo);
        value = loss.item();
        if (!std::isfinite(value))
          throw NumericsError("non-finite training loss at epoch " + std::to_string(st.epoch + 1) + ", step " +
                              std::to_string(st.step));
        tape.backward(loss);
      }
      adam.step(lr);
      loss_sum += value * static_cast<double>(batch.target_tokens());
      token_sum += batch.target_tokens();
      if (hooks.on_step) hooks.on_step(st.step, value);
    }
    ++st.epoch;

    EpochRecord rec;
    rec.epoch = st.epoch;
    rec.train_loss = token_sum > 0 ? loss_sum / static_cast<double>(token_sum) : 0.0;
    rec.valid_loss = evaluate_tokens(model, eval_split, vocab, cfg.batch_size).loss;
    if (!std::isfinite(rec.valid_loss))
      throw NumericsError("non-finite validation loss at epoch " + std::to_string(st.epoch));
    rec.valid_bleu = want_bleu ? corpus_bleu(model, eval_split, vocab, cfg.decode_max_len) : 0.0;
    rec.lr = lr;
    rec.wall_seconds =
        cfg.deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.history.push_back(rec);

    const double metric = cfg.stop_metric == StopMetric::ValidLoss ? rec.valid_loss : rec.valid_bleu;
    const bool best = improves(cfg.stop_metric, metric, st.best_metric, st.best_epoch == 0);
    if (best) {
      st.best_metric = metric;
      st.best_epoch = st.epoch;
      st.epochs_since_best = 0;
    } else {
      ++st.epochs_since_best;
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);

    // patience 0 therefore ends training after the first epoch.
    const bool patience_out = st.epochs_since_best >= cfg.early_stop_patience;
    const bool budget_out = st.step >= total_steps || st.epoch >= cfg.max_epochs;
    stop = budget_out || patience_out;
    result.stopped_early = patience_out && !budget_out;

    if (write) {
      const nlohmann::json meta = state_meta(st, cfg, vocab);
      if (best) {
        nlohmann::json bm = meta;
        bm["kind"] = "best";
        save_checkpoint(path("best.ckpt"), model, bm);
      }
      nlohmann::json lm = meta;
      lm["kind"] = "last";
      save_checkpoint(path("last.ckpt"), model, lm, adam.state());
      write_history_csv(path("history.csv"), st.history);
    }
  }

  result.history = st.history;
  result.steps = st.step;
  result.best_epoch = st.best_epoch;
  result.best_metric = st.best_metric;
  return result;
}

}  // namespace structsum
