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
#include <random>

#include "doctest.h"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "structsum/beam.hpp"
#include "structsum/errors.hpp"

using namespace structsum;
using namespace structsum::testing;

TEST_CASE("beam of one is greedy") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const StepFn step = random_step_fn(seed, 7);
    BeamOptions opt;
    opt.beam_size = 1;
    opt.max_len = 6;
    const Hypothesis b = beam_search(step, opt);
    const Hypothesis g = greedy_decode(step, opt);
    CHECK(b.tokens == g.tokens);
    CHECK(b.log_prob == g.log_prob);
  }
}

TEST_CASE("wide beam equals exhaustive search on a 3-token vocabulary") {
  for (double lp : {0.0, 0.6, 1.0}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const StepFn step = random_step_fn(seed, 3);
      BeamOptions opt;
      opt.beam_size = 27;
      opt.max_len = 3;
      opt.length_penalty = lp;
      opt.bos = 0;
      opt.eos = 2;
      const Hypothesis b = beam_search(step, opt);
      const Hypothesis e = exhaustive_decode(step, opt, 3);
      CHECK(b.tokens == e.tokens);
      CHECK(b.score == doctest::Approx(e.score).epsilon(1e-14));
    }
  }
}

TEST_CASE("length penalty zero scores by raw log-probability") {
  const StepFn step = random_step_fn(3, 5);
  BeamOptions opt;
  opt.length_penalty = 0.0;
  opt.max_len = 5;
  const Hypothesis h = beam_search(step, opt);
  CHECK(h.score == h.log_prob);
  double total = 0.0;
  std::vector<int> prefix{opt.bos};
  for (int t : h.tokens) {
    total += step(prefix)[static_cast<std::size_t>(t)];
    prefix.push_back(t);
  }
  CHECK(h.log_prob == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("normalised score") {
  CHECK(normalized_score(-4.0, 2, 1.0) == -2.0);
  CHECK(normalized_score(-4.0, 4, 0.5) == -2.0);
  CHECK(normalized_score(-4.0, 4, 0.0) == -4.0);
}

TEST_CASE("ties break towards smaller token ids") {
  const StepFn flat = [](std::span<const int>) { return std::vector<double>(4, std::log(0.25)); };
  BeamOptions opt;
  opt.max_len = 3;
  opt.eos = 3;
  CHECK(greedy_decode(flat, opt).tokens == std::vector<int>{0, 0, 0});
  opt.length_penalty = 0.0;
  CHECK(beam_search(flat, opt).tokens == std::vector<int>{3});
  opt.beam_size = 1;
  CHECK(beam_search(flat, opt).tokens == std::vector<int>{0, 0, 0});
}

TEST_CASE("hypothesis cut at max_len keeps no EOS") {
  const StepFn never_eos = [](std::span<const int>) { return std::vector<double>{std::log(0.9), std::log(0.05), -1e9}; };
  BeamOptions opt;
  opt.max_len = 4;
  opt.eos = 2;
  const Hypothesis h = beam_search(never_eos, opt);
  CHECK(h.tokens == std::vector<int>{0, 0, 0, 0});
  CHECK_FALSE(h.ended(opt.eos));
  CHECK(strip_eos(h, opt.eos) == h.tokens);
  CHECK(strip_eos(Hypothesis{{4, 2}, 0, 0}, 2) == std::vector<int>{4});
}

TEST_CASE("beam_size zero is a ConfigError") {
  BeamOptions opt;
  opt.beam_size = 0;
  CHECK_THROWS_AS(beam_search(random_step_fn(1, 3), opt), ConfigError);
}

TEST_CASE("beam search over a real model") {
  std::mt19937_64 rng(4);
  ScriptModel model(tiny_config(), 12, 3, 5);
  const StructuredInput s = random_structured_input(rng, 4, 12, 3);
  const Tensor memory = model.encode(s.input);
  const StepFn step = [&](std::span<const int> prefix) {
    std::vector<double> p = model.decoder_step(prefix, memory, s.input.length);
    for (auto& v : p) v = std::log(v);
    return p;
  };
  BeamOptions opt;
  opt.bos = 1;
  opt.eos = 2;
  opt.max_len = 3;
  opt.beam_size = 27;
  CHECK(beam_search(step, opt).tokens == exhaustive_decode(step, opt, 3).tokens);
  opt.beam_size = 1;
  CHECK(beam_search(step, opt).tokens == greedy_decode(step, opt).tokens);
}
