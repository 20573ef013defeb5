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

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "structsum/model.hpp"
#include "structsum/struct_encode.hpp"
#include "structsum/tensor.hpp"

namespace structsum::testing {

inline ModelConfig tiny_config(int modules = 1, int decoder_layers = 1) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_script_modules = modules;
  cfg.n_decoder_layers = decoder_layers;
  cfg.ffn_dim = 16;
  cfg.dropout_p = 0.0;
  cfg.l = 3;
  cfg.k = 2;
  return cfg;
}

struct StructuredInput {
  Ast ast;
  TokenAlignment alignment;
  StructuralEncoding enc;
  std::vector<int> ids;
  EncoderInput input;
};

// Random tree with exactly `tokens` leaves, random source ids in
// [6, vocab), and its structural bundle.
inline StructuredInput random_structured_input(std::mt19937_64& rng, std::size_t tokens, std::size_t vocab, int clip,
                                               std::size_t padded_len = 0, MultiViewWeights weights = {}) {
  StructuredInput s;
  for (;;) {
    std::uniform_int_distribution<std::size_t> size(tokens, 3 * tokens + 1);
    Ast ast = random_tree(rng, tokens == 1 ? 1 : size(rng));
    if (ast.leaf_order().size() != tokens) continue;
    s.ast = std::move(ast);
    break;
  }
  s.alignment.token_to_node = s.ast.leaf_order();
  EncodeOptions opts;
  opts.clip = clip;
  opts.weights = weights;
  s.enc = encode_structure(s.ast, s.alignment, opts);
  std::uniform_int_distribution<int> id(6, static_cast<int>(vocab) - 1);
  for (std::size_t i = 0; i < tokens; ++i) s.ids.push_back(id(rng));
  s.input = make_encoder_input(s.ids, s.enc, std::max(padded_len, tokens), 0, clip);
  return s;
}

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, bool grad = true, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.values()) v = u(rng);
  return Tensor(std::move(m), grad);
}

inline Tensor readout(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

// Everything an EncoderLayer call needs, owned in one place.
struct LayerContext {
  Tensor m_bar;
  Tensor a_mv;
  IndexGrid seq_idx;
  IndexGrid str_idx;
  Mask mask;
  EncoderContext ctx;

  LayerContext(const EncoderInput& in, int k) {
    const std::size_t n = in.ids.size();
    m_bar = Tensor(Matrix(n, n, in.m_bar.data()));
    a_mv = Tensor(Matrix(n, n, in.a_mv.data()));
    seq_idx = relative_index(n, k);
    str_idx = IndexGrid{n, n, in.buckets.data()};
    mask = encoder_mask(n, in.length);
    ctx = EncoderContext{in.length, &m_bar, &seq_idx, &str_idx, &a_mv, &mask};
  }
  LayerContext(const LayerContext&) = delete;
};

inline std::vector<Tensor> tensors_of(const ParamList& list) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : list) out.push_back(t);
  return out;
}

inline void merge(GradCheckReport& into, const GradCheckReport& r) {
  const bool first = into.checked == 0;
  into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
  into.max_abs_error = std::max(into.max_abs_error, r.max_abs_error);
  into.checked += r.checked;
  into.passed = (first || into.passed) && r.passed;
  into.kink_margin = std::min(into.kink_margin, r.kink_margin);
}

// Finite-difference checks shared by the unit tests and the acceptance run.
// All use eps = 1e-5.
namespace gradsuite {

// Points redrawn because a relu input sat within 10 eps of its kink.
inline std::size_t& redraws() {
  static std::size_t n = 0;
  return n;
}

template <typename Check>
GradCheckReport away_from_kinks(std::uint64_t seed, Check&& check) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const GradCheckReport r = check(attempt == 0 ? seed : mix_seed(seed, attempt));
    if (r.kink_margin > 1e-4) return r;
    ++redraws();
  }
}

inline GradCheckReport primitives(std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  GradCheckReport rep;
  const Tensor w34 = random_tensor(rng, 3, 4, false);
  for (Trans ta : {Trans::No, Trans::Yes})
    for (Trans tb : {Trans::No, Trans::Yes}) {
      Tensor a = ta == Trans::No ? random_tensor(rng, 3, 5) : random_tensor(rng, 5, 3);
      Tensor b = tb == Trans::No ? random_tensor(rng, 5, 4) : random_tensor(rng, 4, 5);
      merge(rep, grad_check([&] { return readout(matmul(a, b, ta, tb), w34); }, {a, b}, tol));
    }
  {
    Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 3, 4), row = random_tensor(rng, 1, 4);
    merge(rep, grad_check([&] { return readout(add(a, b), w34); }, {a, b}, tol));
    merge(rep, grad_check([&] { return readout(add(a, row), w34); }, {a, row}, tol));
    merge(rep, grad_check([&] { return readout(mul(a, b), w34); }, {a, b}, tol));
    merge(rep, grad_check([&] { return readout(scale(a, -1.7), w34); }, {a}, tol));
    merge(rep, grad_check([&] { return readout(sigmoid(a), w34); }, {a}, tol));
  }
  {
    // Keep relu inputs away from the kink.
    Tensor x = random_tensor(rng, 3, 4, true, 0.1, 1.0);
    for (std::size_t i = 0; i < x.value().size(); i += 2) x.mutable_value().values()[i] *= -1.0;
    merge(rep, grad_check([&] { return readout(relu(x), w34); }, {x}, tol));
  }
  {
    Tensor x = random_tensor(rng, 3, 4);
    Mask m = Mask::all(3, 4);
    m.allowed[0] = m.allowed[6] = 0;
    merge(rep, grad_check([&] { return readout(softmax_masked(x), w34); }, {x}, tol));
    merge(rep, grad_check([&] { return readout(softmax_masked(x, &m), w34); }, {x}, tol));
    merge(rep, grad_check([&] { return readout(dropout(x, 0.3, seed + 99, true), w34); }, {x}, tol));
  }
  {
    Tensor x = random_tensor(rng, 3, 8), g = random_tensor(rng, 1, 8), b = random_tensor(rng, 1, 8);
    const Tensor w = random_tensor(rng, 3, 8, false);
    merge(rep, grad_check([&] { return readout(layernorm(x, g, b), w); }, {x, g, b}, tol));
  }
  {
    Tensor table = random_tensor(rng, 6, 4);
    const std::vector<int> ids{2, 0, 2};
    merge(rep, grad_check([&] { return readout(embed(table, ids, 1.5), w34); }, {table}, tol));
    const IndexGrid g{3, 4, {0, 1, 2, 2, 1, 1, 0, 2, 2, 0, 0, 1}};
    Tensor a = random_tensor(rng, 3, 3);
    merge(rep, grad_check([&] { return readout(gather(a, g), w34); }, {a}, tol));
    Tensor s = random_tensor(rng, 3, 4);
    const Tensor w33 = random_tensor(rng, 3, 3, false);
    merge(rep, grad_check([&] { return readout(scatter(s, g, 3), w33); }, {s}, tol));
  }
  {
    Tensor logits = random_tensor(rng, 4, 5);
    const std::vector<int> t{1, 0, 4, 0};
    merge(rep, grad_check([&] { return cross_entropy(logits, t, 0); }, {logits}, tol));
    merge(rep, grad_check([&] { return cross_entropy(logits, t, -1, 0.1); }, {logits}, tol));
  }
  return rep;
}

// One encoder layer of the given kind, 5 or 6 tokens, all parameters plus the
// layer input. Dropout runs in training mode under a fixed seed.
inline GradCheckReport encoder_layer_at(std::uint64_t seed, LayerKind kind, MaskMode mode, double tol) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg = tiny_config();
  cfg.mask_mode = mode;
  cfg.dropout_p = 0.1;
  Initializer init(seed + 1);
  EncoderLayer layer(init, cfg, kind, 0);
  const std::size_t n = kind == LayerKind::RDW ? 5 : 6;
  const StructuredInput s = random_structured_input(rng, n, 20, cfg.l);
  const LayerContext lc(s.input, cfg.k);
  Tensor h = random_tensor(rng, n, 8);
  const Tensor w = random_tensor(rng, n, 8, false);
  ForwardOptions opt;
  opt.training = true;
  opt.dropout_seed = seed;
  ParamList params;
  layer.collect(params, "layer");
  std::vector<Tensor> ts = tensors_of(params);
  ts.push_back(h);
  return grad_check([&] { return readout(layer(h, lc.ctx, opt), w); }, ts, tol);
}

inline GradCheckReport encoder_layer(std::uint64_t seed, LayerKind kind, MaskMode mode, double tol) {
  return away_from_kinks(seed, [&](std::uint64_t s) { return encoder_layer_at(s, kind, mode, tol); });
}

inline GradCheckReport decoder_layer_at(std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg = tiny_config();
  cfg.dropout_p = 0.1;
  Initializer init(seed + 1);
  DecoderLayer layer(init, cfg, 0);
  const std::size_t t = 4, mem = 5, mem_len = 4;
  Tensor x = random_tensor(rng, t, 8);
  Tensor memory = random_tensor(rng, mem, 8);
  const Tensor w = random_tensor(rng, t, 8, false);
  const IndexGrid seq = relative_index(t, cfg.k);
  const Mask self_mask = causal_mask(t);
  const Mask cross_mask = memory_mask(t, mem, mem_len);
  ForwardOptions opt;
  opt.training = true;
  opt.dropout_seed = seed;
  ParamList params;
  layer.collect(params, "layer");
  std::vector<Tensor> ts = tensors_of(params);
  ts.push_back(x);
  ts.push_back(memory);
  return grad_check([&] { return readout(layer(x, memory, seq, self_mask, cross_mask, opt), w); }, ts, tol);
}

inline GradCheckReport decoder_layer(std::uint64_t seed, double tol) {
  return away_from_kinks(seed, [&](std::uint64_t s) { return decoder_layer_at(s, tol); });
}

// Token cross entropy of a 1-module model on a 5-token input, every
// parameter checked.
inline GradCheckReport end_to_end_at(std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg = tiny_config(1, 1);
  cfg.dropout_p = 0.1;
  ScriptModel model(cfg, 12, 9, seed + 1);
  const StructuredInput s = random_structured_input(rng, 5, 12, cfg.l, 6);
  const std::vector<int> tgt_in{1, 6, 7, 8};
  const std::vector<int> tgt_out{6, 7, 8, 2};
  ForwardOptions opt;
  opt.training = true;
  opt.dropout_seed = seed;
  return grad_check([&] { return model.loss(s.input, tgt_in, tgt_out, 0, opt); }, tensors_of(model.parameters()),
                    tol);
}

inline GradCheckReport end_to_end(std::uint64_t seed, double tol) {
  return away_from_kinks(seed, [&](std::uint64_t s) { return end_to_end_at(s, tol); });
}

}  // namespace gradsuite
}  // namespace structsum::testing
