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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "model_fixtures.hpp"
#include "structsum/checkpoint.hpp"
#include "structsum/config.hpp"
#include "structsum/errors.hpp"
#include "structsum/train.hpp"

using namespace structsum;
using namespace structsum::testing;

namespace {

const std::string kData = STRUCTSUM_DATA_DIR;

struct Toy {
  std::vector<Example> train;
  std::vector<Example> valid;
  Vocabularies vocab;

  Toy() {
    train = load_dataset(kData + "/toy/train.jsonl");
    valid = load_dataset(kData + "/toy/valid.jsonl");
    vocab = build_vocab(train);
  }
};

const Toy& toy() {
  static const Toy t;
  return t;
}

ModelConfig small_model() {
  ModelConfig cfg = tiny_config(1, 1);
  cfg.dropout_p = 0.1;
  return cfg;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  cfg.max_epochs = epochs;
  cfg.early_stop_patience = 100;
  cfg.track_bleu = false;
  cfg.deterministic = true;
  cfg.seed = 3;
  return cfg;
}

std::vector<Matrix> snapshot(const ScriptModel& m) {
  std::vector<Matrix> out;
  for (const auto& [n, t] : m.parameters()) out.push_back(t.value());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  // total 100, warmup ceil(6) steps.
  CHECK(scheduled_lr(1.0, 3, 100, 0.06) == 0.5);
  CHECK(scheduled_lr(1.0, 6, 100, 0.06) == 1.0);
  CHECK(scheduled_lr(1.0, 53, 100, 0.06) == doctest::Approx(47.0 / 94.0).epsilon(1e-15));
  CHECK(scheduled_lr(1.0, 100, 100, 0.06) == 0.0);
  CHECK(scheduled_lr(2.0, 1, 10, 0.0) == 2.0 * 9.0 / 10.0);
}

TEST_CASE("Adam first step moves by lr against the gradient sign") {
  Tensor w(Matrix(1, 2, {1.0, -2.0}), true);
  ParamList params{{"w", w}};
  Adam adam(params, 0.9, 0.999, 1e-8, 0.0);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(mul(w, w));
  }
  tape.backward(loss);
  adam.step(0.1);
  CHECK(w.value()(0, 0) == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(w.value()(0, 1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(adam.steps() == 1);
  CHECK(adam.state().size() == 2);
}

TEST_CASE("weight decay pulls parameters without a gradient towards zero") {
  Tensor w(Matrix(1, 1, 3.0), true);
  Adam adam({{"w", w}}, 0.9, 0.999, 1e-8, 0.01);
  adam.step(0.1);
  CHECK(w.value()(0, 0) < 3.0);
}

TEST_CASE("train config validation and JSON round trip") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_stop_metric("bleu") == StopMetric::ValidBleu);
  CHECK(to_string(StopMetric::ValidLoss) == "loss");
  CHECK_THROWS_AS(parse_stop_metric("accuracy"), ConfigError);
}

TEST_CASE("history CSV") {
  const std::vector<EpochRecord> h{{1, 2.5, 2.25, 0.125, 1e-4, 0.0}};
  const std::string csv = history_csv(h);
  CHECK(csv.rfind("epoch,train_loss,valid_loss,valid_bleu,lr,wall_seconds\n", 0) == 0);
  CHECK(csv.find("1,2.5,2.25,0.125,0.0001") != std::string::npos);
}

TEST_CASE("lr zero leaves parameters bit-identical") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 1);
  const auto before = snapshot(model);
  TrainConfig cfg = quick(1);
  cfg.lr = 0.0;
  const TrainResult r = train(model, t.train, t.valid, t.vocab, cfg);
  CHECK(r.history.size() == 1);
  CHECK(r.steps == 4);
  CHECK(snapshot(model) == before);
}

TEST_CASE("patience zero runs exactly one epoch") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 1);
  TrainConfig cfg = quick(10);
  cfg.early_stop_patience = 0;
  const TrainResult r = train(model, t.train, t.valid, t.vocab, cfg);
  CHECK(r.history.size() == 1);
  CHECK(r.best_epoch == 1);
  CHECK(r.stopped_early);
}

TEST_CASE("best checkpoint tracks the minimum validation loss") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 2);
  const auto dir = scratch_dir("train-best");
  const TrainResult r = train(model, t.train, t.valid, t.vocab, quick(6), {dir.string(), ""});
  REQUIRE(r.history.size() == 6);
  for (const auto& rec : r.history) CHECK(r.best_metric <= rec.valid_loss);
  CHECK(r.history[r.best_epoch - 1].valid_loss == r.best_metric);
  CHECK(std::filesystem::exists(dir / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "last.ckpt"));
  CHECK(slurp(dir / "history.csv") == history_csv(r.history));

  const Checkpoint best = load_checkpoint((dir / "best.ckpt").string());
  CHECK(best.meta["kind"] == "best");
  CHECK(best.meta["epoch"].get<std::size_t>() == r.best_epoch);
  const ScriptModel restored = model_from_checkpoint(best, &t.vocab.source, &t.vocab.target);
  CHECK(evaluate_tokens(restored, t.valid, t.vocab).loss == doctest::Approx(r.best_metric).epsilon(1e-12));

  const Vocabulary other = Vocabulary::build({{"zzz"}});
  CHECK_THROWS_AS(model_from_checkpoint(best, &other, &t.vocab.target), MismatchError);
}

TEST_CASE("bleu stop metric maximises") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 2);
  TrainConfig cfg = quick(3);
  cfg.stop_metric = StopMetric::ValidBleu;
  cfg.decode_max_len = 8;
  const TrainResult r = train(model, t.train, t.valid, t.vocab, cfg);
  for (const auto& rec : r.history) CHECK(r.best_metric >= rec.valid_bleu);
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  const Toy& t = toy();
  TrainConfig cfg = quick(4);
  cfg.max_steps = 16;  // fixes the schedule for both runs
  const auto straight_dir = scratch_dir("train-straight");
  ScriptModel a(small_model(), t.vocab.source.size(), t.vocab.target.size(), 5);
  const TrainResult ra = train(a, t.train, t.valid, t.vocab, cfg, {straight_dir.string(), ""});

  const auto split_dir = scratch_dir("train-split");
  ScriptModel b(small_model(), t.vocab.source.size(), t.vocab.target.size(), 5);
  TrainConfig first = cfg;
  first.max_epochs = 2;
  train(b, t.train, t.valid, t.vocab, first, {split_dir.string(), ""});
  ScriptModel c(small_model(), t.vocab.source.size(), t.vocab.target.size(), 99);
  const TrainResult rc =
      train(c, t.train, t.valid, t.vocab, cfg, {split_dir.string(), (split_dir / "last.ckpt").string()});
  CHECK(rc.history == ra.history);
  CHECK(snapshot(c) == snapshot(a));
  CHECK(slurp(split_dir / "last.ckpt") == slurp(straight_dir / "last.ckpt"));
}

TEST_CASE("padding never changes the batch loss") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 6);
  BatchOptions bo;
  bo.batch_size = 8;
  bo.clip = model.config().l;
  const auto plain = make_batches(t.train, t.vocab, bo);
  bo.extra_padding = 5;
  const auto padded = make_batches(t.train, t.vocab, bo);
  REQUIRE(plain.size() == padded.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK(padded[i].source_len == plain[i].source_len + 5);
    const double a = batch_loss(model, plain[i], {}).item();
    const double b = batch_loss(model, padded[i], {}).item();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("non-finite loss raises NumericsError") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size(), t.vocab.target.size(), 7);
  Tensor e = model.parameter("src_embed");
  e.mutable_value()(6, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(model, t.train, t.valid, t.vocab, quick(1)), NumericsError);
}

TEST_CASE("mismatched vocabularies are rejected") {
  const Toy& t = toy();
  ScriptModel model(small_model(), t.vocab.source.size() + 1, t.vocab.target.size(), 7);
  CHECK_THROWS_AS(train(model, t.train, t.valid, t.vocab, quick(1)), MismatchError);
}

TEST_CASE("toy configuration lowers the training loss at every early step") {
  const Toy& t = toy();
  RunConfig run = load_run_config(std::string(STRUCTSUM_CONFIG_DIR) + "/toy.cfg");
  for (double lr : {TrainConfig{}.lr, run.train.lr}) {
    CAPTURE(lr);
    TrainConfig cfg = run.train;
    cfg.lr = lr;
    cfg.max_epochs = 20;  // one full-corpus batch per epoch; schedule still spans max_steps
    ScriptModel model(run.model, t.vocab.source.size(), t.vocab.target.size(), cfg.seed);
    std::vector<double> losses{evaluate_tokens(model, t.train, t.vocab).loss};
    TrainHooks hooks;
    hooks.on_step = [&](std::size_t, double) { losses.push_back(evaluate_tokens(model, t.train, t.vocab).loss); };
    train(model, t.train, t.valid, t.vocab, cfg, {}, hooks);
    REQUIRE(losses.size() == 21);
    for (std::size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
  }
}
