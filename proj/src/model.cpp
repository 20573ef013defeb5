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

#include "structsum/model.hpp"

#include <algorithm>
#include <cmath>

#include "structsum/errors.hpp"

namespace structsum {

// ---- config ----------------------------------------------------------------

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::RDW: return "RDW";
    case LayerKind::SRPEi: return "SRPEi";
    case LayerKind::PLAIN: return "PLAIN";
  }
  return "?";
}

std::string to_string(MaskMode m) { return m == MaskMode::Multiply ? "multiply" : "neg_inf"; }

std::string to_string(SrpePlacement p) {
  switch (p) {
    case SrpePlacement::SRPEiOnly: return "SRPEi_only";
    case SrpePlacement::RDWOnly: return "RDW_only";
    case SrpePlacement::All: return "all";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "RDW") return LayerKind::RDW;
  if (s == "SRPEi") return LayerKind::SRPEi;
  if (s == "PLAIN") return LayerKind::PLAIN;
  throw ConfigError("unknown layer kind '" + s + "' (RDW, SRPEi, PLAIN)");
}

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "multiply") return MaskMode::Multiply;
  if (s == "neg_inf") return MaskMode::NegInf;
  throw ConfigError("unknown mask_mode '" + s + "' (multiply, neg_inf)");
}

SrpePlacement parse_srpe_placement(const std::string& s) {
  if (s == "SRPEi_only") return SrpePlacement::SRPEiOnly;
  if (s == "RDW_only") return SrpePlacement::RDWOnly;
  if (s == "all") return SrpePlacement::All;
  throw ConfigError("unknown srpe_placement '" + s + "' (SRPEi_only, RDW_only, all)");
}

std::vector<LayerKind> ModelConfig::effective_plan() const {
  if (!layer_plan.empty()) return layer_plan;
  std::vector<LayerKind> plan;
  for (int m = 0; m < n_script_modules; ++m) {
    plan.push_back(LayerKind::RDW);
    plan.push_back(LayerKind::SRPEi);
  }
  return plan;
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0) throw ConfigError("d_model and n_heads must be positive");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (n_script_modules <= 0) throw ConfigError("n_script_modules must be positive");
  if (n_decoder_layers <= 0) throw ConfigError("n_decoder_layers must be positive");
  if (ffn_dim <= 0) throw ConfigError("ffn_dim must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must lie in [0, 1)");
  if (l < 1) throw ConfigError("structural clip l must be >= 1");
  if (k < 1) throw ConfigError("sequential clip k must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw ConfigError("label_smoothing must lie in [0, 1)");
  if (!layer_plan.empty() && layer_plan.size() != static_cast<std::size_t>(2 * n_script_modules))
    throw ConfigError("layer_plan has " + std::to_string(layer_plan.size()) + " entries, expected " +
                      std::to_string(2 * n_script_modules));
}

bool ModelConfig::uses_structural_rpe(LayerKind kind) const {
  switch (kind) {
    case LayerKind::PLAIN: return false;
    case LayerKind::RDW: return srpe_placement != SrpePlacement::SRPEiOnly;
    case LayerKind::SRPEi: return srpe_placement != SrpePlacement::RDWOnly;
  }
  return false;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json plan = nlohmann::json::array();
  for (auto k : effective_plan()) plan.push_back(to_string(k));
  return {{"d_model", d_model},       {"n_heads", n_heads},
          {"n_script_modules", n_script_modules},
          {"n_decoder_layers", n_decoder_layers},
          {"ffn_dim", ffn_dim},       {"dropout_p", dropout_p},
          {"l", l},                   {"k", k},
          {"mask_mode", to_string(mask_mode)},
          {"layer_plan", plan},       {"srpe_placement", to_string(srpe_placement)},
          {"label_smoothing", label_smoothing}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_script_modules = j.at("n_script_modules").get<int>();
    c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.l = j.at("l").get<int>();
    c.k = j.at("k").get<int>();
    c.mask_mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
    for (const auto& s : j.at("layer_plan")) c.layer_plan.push_back(parse_layer_kind(s.get<std::string>()));
    c.srpe_placement = parse_srpe_placement(j.at("srpe_placement").get<std::string>());
    c.label_smoothing = j.value("label_smoothing", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- building blocks -------------------------------------------------------

double Initializer::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

Tensor Initializer::xavier(std::size_t rows, std::size_t cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = (2.0 * uniform() - 1.0) * limit;
  return Tensor(std::move(m), true);
}

Tensor Initializer::normal(std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform(), u2 = uniform();
    v = stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  return Tensor(std::move(m), true);
}

Tensor Initializer::constant(std::size_t rows, std::size_t cols, double v) { return Tensor(Matrix(rows, cols, v), true); }

Linear::Linear(Initializer& init, std::size_t in, std::size_t out)
    : w(init.xavier(in, out)), b(init.constant(1, out, 0.0)) {}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

LayerNorm::LayerNorm(Initializer& init, std::size_t dim) : gain(init.constant(1, dim, 1.0)), bias(init.constant(1, dim, 0.0)) {}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

RelTables::RelTables(Initializer& init, std::size_t labels, std::size_t d_head)
    : key(init.xavier(labels, d_head)), value(init.xavier(labels, d_head)) {}

void RelTables::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".key", key);
  out.emplace_back(prefix + ".value", value);
}

MultiHeadAttention::MultiHeadAttention(Initializer& init, std::size_t d_model, std::size_t n_heads,
                                       std::size_t seq_labels, std::size_t str_labels) {
  const std::size_t dh = d_model / n_heads;
  for (std::size_t h = 0; h < n_heads; ++h) {
    wq_.push_back(init.xavier(d_model, dh));
    wk_.push_back(init.xavier(d_model, dh));
    wv_.push_back(init.xavier(d_model, dh));
    wo_.push_back(init.xavier(dh, d_model));
  }
  bo_ = init.constant(1, d_model, 0.0);
  if (seq_labels) seq_.emplace(init, seq_labels, dh);
  if (str_labels) str_.emplace(init, str_labels, dh);
}

Tensor MultiHeadAttention::operator()(const Tensor& query_in, const Tensor& kv_in, const AttentionInputs& in,
                                      AttentionTrace* trace, const std::string& site, int layer) const {
  const std::size_t nq = query_in.rows(), nk = kv_in.rows();
  const bool use_seq = seq_ && in.seq_idx;
  const bool use_str = str_ && in.str_idx;
  if (use_seq && (in.seq_idx->rows != nq || in.seq_idx->cols != nk)) throw ShapeError("sequential index grid shape");
  if (use_str && (in.str_idx->rows != nq || in.str_idx->cols != nk)) throw ShapeError("structural index grid shape");
  if (in.a_mv && (in.a_mv->rows() != nq || in.a_mv->cols() != nk)) throw ShapeError("A_mv shape does not match attention");
  if (in.mask && (in.mask->rows != nq || in.mask->cols != nk)) throw ShapeError("attention mask shape");

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(wq_.front().cols()));

  // With neg_inf the multi-view matrix only selects which logits survive.
  Mask combined;
  const Mask* mask = in.mask;
  if (in.a_mv && in.mask_mode == MaskMode::NegInf) {
    combined = in.mask ? *in.mask : Mask::all(nq, nk);
    for (std::size_t i = 0; i < nq * nk; ++i)
      if (!(in.a_mv->value().data()[i] > 0.0)) combined.allowed[i] = 0;
    mask = &combined;
  }

  Tensor out;
  for (std::size_t h = 0; h < wq_.size(); ++h) {
    const Tensor q = matmul(query_in, wq_[h]);
    const Tensor k = matmul(kv_in, wk_[h]);
    const Tensor v = matmul(kv_in, wv_[h]);
    Tensor logits = matmul(q, k, Trans::No, Trans::Yes);
    if (use_seq) logits = add(logits, gather(matmul(q, seq_->key, Trans::No, Trans::Yes), *in.seq_idx));
    if (use_str) logits = add(logits, gather(matmul(q, str_->key, Trans::No, Trans::Yes), *in.str_idx));
    logits = scale(logits, inv_sqrt);
    if (in.a_mv && in.mask_mode == MaskMode::Multiply) logits = mul(logits, *in.a_mv);
    const Tensor probs = softmax_masked(logits, mask);
    if (trace) trace->entries.push_back({site, layer, static_cast<int>(h), probs.value()});

    Tensor z = matmul(probs, v);
    if (use_seq) z = add(z, matmul(scatter(probs, *in.seq_idx, seq_->labels()), seq_->value));
    if (use_str) z = add(z, matmul(scatter(probs, *in.str_idx, str_->labels()), str_->value));
    const Tensor head_out = matmul(z, wo_[h]);
    out = out.defined() ? add(out, head_out) : head_out;
  }
  return add(out, bo_);
}

void MultiHeadAttention::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t h = 0; h < wq_.size(); ++h) {
    const std::string p = prefix + ".head" + std::to_string(h);
    out.emplace_back(p + ".wq", wq_[h]);
    out.emplace_back(p + ".wk", wk_[h]);
    out.emplace_back(p + ".wv", wv_[h]);
    out.emplace_back(p + ".wo", wo_[h]);
  }
  out.emplace_back(prefix + ".bo", bo_);
  if (seq_) seq_->collect(out, prefix + ".seq");
  if (str_) str_->collect(out, prefix + ".str");
}

FeedForward::FeedForward(Initializer& init, std::size_t d_model, std::size_t ffn_dim)
    : in(init, d_model, ffn_dim), out(init, ffn_dim, d_model) {}

Tensor FeedForward::operator()(const Tensor& x, double p_drop, std::uint64_t seed, bool training) const {
  return out(dropout(relu(in(x)), p_drop, seed, training));
}

void FeedForward::collect(ParamList& list, const std::string& prefix) const {
  in.collect(list, prefix + ".in");
  out.collect(list, prefix + ".out");
}

// ---- encoder / decoder layers ---------------------------------------------------

EncoderLayer::EncoderLayer(Initializer& init, const ModelConfig& cfg, LayerKind kind, int index)
    : kind_(kind),
      structural_(cfg.uses_structural_rpe(kind)),
      index_(index),
      dropout_p_(cfg.dropout_p),
      mask_mode_(cfg.mask_mode) {
  const auto d = static_cast<std::size_t>(cfg.d_model);
  ln_attn_ = LayerNorm(init, d);
  ln_ffn_ = LayerNorm(init, d);
  attn_ = MultiHeadAttention(init, d, static_cast<std::size_t>(cfg.n_heads), static_cast<std::size_t>(2 * cfg.k + 1),
                             structural_ ? static_cast<std::size_t>(cfg.l + 1) : 0);
  ffn_ = FeedForward(init, d, static_cast<std::size_t>(cfg.ffn_dim));
  if (kind_ == LayerKind::RDW) {
    fc1_ = Linear(init, d, d);
    fc2_ = Linear(init, d, d);
  }
}

Tensor EncoderLayer::distance_weighted(const Tensor& h, const Tensor& m_bar) const {
  if (kind_ != LayerKind::RDW) throw StateError("distance_weighted() on a non-RDW layer");
  if (m_bar.rows() != h.rows() || m_bar.cols() != h.rows())
    throw ShapeError("m_bar is " + std::to_string(m_bar.rows()) + "x" + std::to_string(m_bar.cols()) +
                     " but the layer input has " + std::to_string(h.rows()) + " positions");
  return sigmoid(add(fc1_(h), fc2_(matmul(m_bar, h))));
}

Tensor EncoderLayer::operator()(const Tensor& h, const EncoderContext& ctx, const ForwardOptions& opt) const {
  Tensor x = h;
  if (kind_ == LayerKind::RDW) {
    if (!ctx.m_bar) throw ShapeError("RDW layer needs m_bar");
    x = add(h, distance_weighted(h, *ctx.m_bar));
  }
  AttentionInputs ai;
  ai.seq_idx = ctx.seq_idx;
  ai.str_idx = structural_ ? ctx.str_idx : nullptr;
  ai.a_mv = kind_ == LayerKind::SRPEi ? ctx.a_mv : nullptr;
  ai.mask_mode = mask_mode_;
  ai.mask = ctx.mask;
  if (structural_ && !ctx.str_idx) throw ShapeError("structural layer needs bucket indices");
  if (kind_ == LayerKind::SRPEi && !ctx.a_mv) throw ShapeError("SRPEi layer needs A_mv");

  const std::uint64_t seed = mix_seed(opt.dropout_seed, static_cast<std::uint64_t>(index_) * 8);
  const Tensor normed = ln_attn_(x);
  const Tensor a = attn_(normed, normed, ai, opt.trace, "encoder", index_);
  x = add(x, dropout(a, dropout_p_, seed + 1, opt.training));
  const Tensor f = ffn_(ln_ffn_(x), dropout_p_, seed + 2, opt.training);
  return add(x, dropout(f, dropout_p_, seed + 3, opt.training));
}

void EncoderLayer::collect(ParamList& out, const std::string& prefix) const {
  ln_attn_.collect(out, prefix + ".ln_attn");
  attn_.collect(out, prefix + ".attn");
  ln_ffn_.collect(out, prefix + ".ln_ffn");
  ffn_.collect(out, prefix + ".ffn");
  if (kind_ == LayerKind::RDW) {
    fc1_.collect(out, prefix + ".fc1");
    fc2_.collect(out, prefix + ".fc2");
  }
}

DecoderLayer::DecoderLayer(Initializer& init, const ModelConfig& cfg, int index)
    : index_(index), dropout_p_(cfg.dropout_p) {
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.n_heads);
  ln_self_ = LayerNorm(init, d);
  self_attn_ = MultiHeadAttention(init, d, heads, static_cast<std::size_t>(2 * cfg.k + 1), 0);
  ln_cross_ = LayerNorm(init, d);
  cross_attn_ = MultiHeadAttention(init, d, heads, 0, 0);
  ln_ffn_ = LayerNorm(init, d);
  ffn_ = FeedForward(init, d, static_cast<std::size_t>(cfg.ffn_dim));
}

Tensor DecoderLayer::operator()(const Tensor& x_in, const Tensor& memory, const IndexGrid& seq_idx,
                                const Mask& self_mask, const Mask& cross_mask, const ForwardOptions& opt) const {
  const std::uint64_t seed = mix_seed(opt.dropout_seed, 0x10000 + static_cast<std::uint64_t>(index_) * 8);
  AttentionInputs self_in;
  self_in.seq_idx = &seq_idx;
  self_in.mask = &self_mask;
  const Tensor n1 = ln_self_(x_in);
  Tensor x = add(x_in, dropout(self_attn_(n1, n1, self_in, opt.trace, "decoder_self", index_), dropout_p_, seed + 1,
                               opt.training));
  AttentionInputs cross_in;
  cross_in.mask = &cross_mask;
  x = add(x, dropout(cross_attn_(ln_cross_(x), memory, cross_in, opt.trace, "decoder_cross", index_), dropout_p_,
                     seed + 2, opt.training));
  const Tensor f = ffn_(ln_ffn_(x), dropout_p_, seed + 3, opt.training);
  return add(x, dropout(f, dropout_p_, seed + 4, opt.training));
}

void DecoderLayer::collect(ParamList& out, const std::string& prefix) const {
  ln_self_.collect(out, prefix + ".ln_self");
  self_attn_.collect(out, prefix + ".self_attn");
  ln_cross_.collect(out, prefix + ".ln_cross");
  cross_attn_.collect(out, prefix + ".cross_attn");
  ln_ffn_.collect(out, prefix + ".ln_ffn");
  ffn_.collect(out, prefix + ".ffn");
}

// ---- inputs ------------------------------------------------------------------------

IndexGrid relative_index(std::size_t n, int k) {
  IndexGrid g{n, n, std::vector<int>(n * n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.idx[i * n + j] = std::clamp(static_cast<int>(j) - static_cast<int>(i), -k, k) + k;
  return g;
}

Mask encoder_mask(std::size_t padded_len, std::size_t length) {
  Mask m{padded_len, padded_len, std::vector<std::uint8_t>(padded_len * padded_len, 0)};
  for (std::size_t i = 0; i < padded_len; ++i)
    for (std::size_t j = 0; j < padded_len; ++j)
      m.allowed[i * padded_len + j] = ((i < length && j < length) || i == j) ? 1 : 0;
  return m;
}

Mask causal_mask(std::size_t n) {
  Mask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.allowed[i * n + j] = 1;
  return m;
}

Mask memory_mask(std::size_t queries, std::size_t padded_len, std::size_t length) {
  Mask m{queries, padded_len, std::vector<std::uint8_t>(queries * padded_len, 0)};
  for (std::size_t i = 0; i < queries; ++i)
    for (std::size_t j = 0; j < length; ++j) m.allowed[i * padded_len + j] = 1;
  return m;
}

EncoderInput make_encoder_input(std::span<const int> ids, const StructuralEncoding& enc, std::size_t padded_len,
                                int pad_id, int clip) {
  const std::size_t n = ids.size();
  if (enc.size() != n)
    throw ShapeError("structural bundle covers " + std::to_string(enc.size()) + " tokens but the input has " +
                     std::to_string(n));
  if (padded_len < n) throw ShapeError("padded length shorter than the input");
  const BucketMatrix buckets = bucketize(enc.m, clip);
  EncoderInput in;
  in.length = n;
  in.ids.assign(ids.begin(), ids.end());
  in.ids.resize(padded_len, pad_id);
  in.m_bar = RealMatrix(padded_len, 0.0);
  in.buckets = IntMatrix(padded_len, 0);
  in.a_mv = RealMatrix(padded_len, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      in.m_bar(i, j) = enc.m_bar(i, j);
      in.buckets(i, j) = buckets.b(i, j);
      in.a_mv(i, j) = enc.views.a_mv(i, j);
    }
  }
  // Padded rows attend only to themselves; keep that entry alive under neg_inf.
  for (std::size_t i = n; i < padded_len; ++i) in.a_mv(i, i) = 1.0;
  return in;
}

// ---- model -------------------------------------------------------------------------

ScriptModel::ScriptModel(const ModelConfig& cfg, std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed)
    : cfg_(cfg), src_vocab_(src_vocab), tgt_vocab_(tgt_vocab) {
  cfg_.validate();
  cfg_.layer_plan = cfg_.effective_plan();
  Initializer init(seed);
  const auto d = static_cast<std::size_t>(cfg_.d_model);
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  src_embed_ = init.normal(src_vocab, d, emb_std);
  tgt_embed_ = init.normal(tgt_vocab, d, emb_std);
  for (std::size_t i = 0; i < cfg_.layer_plan.size(); ++i)
    encoder_.emplace_back(init, cfg_, cfg_.layer_plan[i], static_cast<int>(i));
  enc_norm_ = LayerNorm(init, d);
  for (int i = 0; i < cfg_.n_decoder_layers; ++i) decoder_.emplace_back(init, cfg_, i);
  dec_norm_ = LayerNorm(init, d);

  params_.emplace_back("src_embed", src_embed_);
  params_.emplace_back("tgt_embed", tgt_embed_);
  for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect(params_, "encoder." + std::to_string(i));
  enc_norm_.collect(params_, "encoder.norm");
  for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect(params_, "decoder." + std::to_string(i));
  dec_norm_.collect(params_, "decoder.norm");
}

Tensor ScriptModel::parameter(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw ConfigError("no parameter named " + name);
}

std::size_t ScriptModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [n, t] : params_) total += t.value().size();
  return total;
}

namespace {

Tensor constant(const RealMatrix& m) { return Tensor(Matrix(m.n(), m.n(), m.data())); }

}  // namespace

Tensor ScriptModel::encode(const EncoderInput& in, const ForwardOptions& opt) const {
  const std::size_t len = in.ids.size();
  if (in.length == 0 || in.length > len) throw ShapeError("encoder input length out of range");
  if (in.m_bar.n() != len || in.buckets.n() != len || in.a_mv.n() != len)
    throw ShapeError("encoder structure matrices must be " + std::to_string(len) + "x" + std::to_string(len));
  IndexGrid str_idx{len, len, in.buckets.data()};
  for (int b : str_idx.idx)
    if (b < 0 || b > cfg_.l) throw ShapeError("bucket label " + std::to_string(b) + " outside [0, l]");

  const Tensor m_bar = constant(in.m_bar);
  const Tensor a_mv = constant(in.a_mv);
  const IndexGrid seq_idx = relative_index(len, cfg_.k);
  const Mask mask = encoder_mask(len, in.length);
  EncoderContext ctx{in.length, &m_bar, &seq_idx, &str_idx, &a_mv, &mask};

  const double emb_scale = std::sqrt(static_cast<double>(cfg_.d_model));
  Tensor x = dropout(embed(src_embed_, in.ids, emb_scale), cfg_.dropout_p, mix_seed(opt.dropout_seed, 0xE0),
                     opt.training);
  for (std::size_t m = 0; m + 1 < encoder_.size(); m += 2) {
    const Tensor h = encoder_[m](x, ctx, opt);
    if (opt.zero_srpei_output) {
      x = h;
      continue;
    }
    const Tensor h2 = encoder_[m + 1](h, ctx, opt);
    x = add(h, h2);
  }
  return enc_norm_(x);
}

Tensor ScriptModel::decode(std::span<const int> tgt_in, const Tensor& memory, std::size_t memory_len,
                           const ForwardOptions& opt) const {
  const std::size_t t = tgt_in.size();
  if (t == 0) throw ShapeError("decoder input is empty");
  if (memory.cols() != static_cast<std::size_t>(cfg_.d_model)) throw ShapeError("memory width != d_model");
  if (memory_len == 0 || memory_len > memory.rows()) throw ShapeError("memory length out of range");
  const IndexGrid seq_idx = relative_index(t, cfg_.k);
  const Mask self_mask = causal_mask(t);
  const Mask cross_mask = memory_mask(t, memory.rows(), memory_len);
  const double emb_scale = std::sqrt(static_cast<double>(cfg_.d_model));
  Tensor y = dropout(embed(tgt_embed_, tgt_in, emb_scale), cfg_.dropout_p, mix_seed(opt.dropout_seed, 0xD0),
                     opt.training);
  for (const auto& layer : decoder_) y = layer(y, memory, seq_idx, self_mask, cross_mask, opt);
  return matmul(dec_norm_(y), tgt_embed_, Trans::No, Trans::Yes);
}

std::vector<double> ScriptModel::decoder_step(std::span<const int> prefix, const Tensor& memory,
                                              std::size_t memory_len) const {
  if (prefix.empty()) throw ShapeError("decoder_step needs a non-empty prefix");
  const Tensor logits = decode(prefix, memory, memory_len);
  const std::size_t last = logits.rows() - 1;
  std::vector<double> probs(logits.cols());
  double mx = -1e300;
  for (std::size_t c = 0; c < probs.size(); ++c) mx = std::max(mx, logits.value()(last, c));
  double total = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) total += probs[c] = std::exp(logits.value()(last, c) - mx);
  for (auto& p : probs) p /= total;
  return probs;
}

Tensor ScriptModel::loss(const EncoderInput& in, std::span<const int> tgt_in, std::span<const int> targets, int pad_id,
                         const ForwardOptions& opt) const {
  const Tensor memory = encode(in, opt);
  const Tensor logits = decode(tgt_in, memory, in.length, opt);
  return cross_entropy(logits, targets, pad_id, cfg_.label_smoothing);
}

}  // namespace structsum
