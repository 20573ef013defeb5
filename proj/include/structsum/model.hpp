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

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "structsum/struct_encode.hpp"
#include "structsum/tensor.hpp"

namespace structsum {

enum class LayerKind { RDW, SRPEi, PLAIN };
// multiply: logits are scaled elementwise by A_mv; neg_inf: logits where
// A_mv == 0 are excluded from the softmax.
enum class MaskMode { Multiply, NegInf };
// Which encoder layer kinds receive structural relative positions.
enum class SrpePlacement { SRPEiOnly, RDWOnly, All };

std::string to_string(LayerKind k);
std::string to_string(MaskMode m);
std::string to_string(SrpePlacement p);
LayerKind parse_layer_kind(const std::string& s);
MaskMode parse_mask_mode(const std::string& s);
SrpePlacement parse_srpe_placement(const std::string& s);

struct ModelConfig {
  int d_model = 512;
  int n_heads = 8;
  int n_script_modules = 3;
  int n_decoder_layers = 6;
  int ffn_dim = 2048;
  double dropout_p = 0.2;
  int l = 8;   // structural clip
  int k = 32;  // sequential clip
  MaskMode mask_mode = MaskMode::Multiply;
  // Empty means the default RDW, SRPEi, RDW, SRPEi, ... pairing.
  std::vector<LayerKind> layer_plan;
  SrpePlacement srpe_placement = SrpePlacement::SRPEiOnly;
  double label_smoothing = 0.0;

  int d_head() const { return d_model / n_heads; }
  std::vector<LayerKind> effective_plan() const;
  // Throws ConfigError.
  void validate() const;
  bool uses_structural_rpe(LayerKind kind) const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// ---- building blocks -------------------------------------------------------

// Deterministic parameter initialisation.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Tensor xavier(std::size_t rows, std::size_t cols);
  Tensor normal(std::size_t rows, std::size_t cols, double stddev);
  Tensor constant(std::size_t rows, std::size_t cols, double v);

 private:
  double uniform();
  std::mt19937_64 rng_;
};

using ParamList = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  Linear() = default;
  Linear(Initializer& init, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return add(matmul(x, w), b); }
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(Initializer& init, std::size_t dim);
  Tensor operator()(const Tensor& x) const { return layernorm(x, gain, bias); }
  void collect(ParamList& out, const std::string& prefix) const;
};

// Relative-position embedding tables (one row per clipped label) added to
// keys and values.
struct RelTables {
  Tensor key;
  Tensor value;

  RelTables() = default;
  RelTables(Initializer& init, std::size_t labels, std::size_t d_head);
  std::size_t labels() const { return key.rows(); }
  void collect(ParamList& out, const std::string& prefix) const;
};

// Per-call hooks and recording.
struct AttentionTrace {
  struct Entry {
    std::string site;  // "encoder", "decoder_self", "decoder_cross"
    int layer = 0;
    int head = 0;
    Matrix probs;
  };
  std::vector<Entry> entries;
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  AttentionTrace* trace = nullptr;
  // Test hook: replace each SRPEi layer output inside a module by zeros.
  bool zero_srpei_output = false;
};

struct AttentionInputs {
  const IndexGrid* seq_idx = nullptr;  // labels into seq tables
  const IndexGrid* str_idx = nullptr;  // labels into structural tables
  const Tensor* a_mv = nullptr;        // constant multi-view matrix
  MaskMode mask_mode = MaskMode::Multiply;
  const Mask* mask = nullptr;          // padding / causal mask
};

// Multi-head attention with optional Shaw-style relative terms. Per head:
//   e_ij = q_i . (k_j + aK_ij + bK_ij) / sqrt(d_head), modulated by A_mv,
//   z_i  = sum_j alpha_ij (v_j + aV_ij + bV_ij).
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(Initializer& init, std::size_t d_model, std::size_t n_heads, std::size_t seq_labels,
                     std::size_t str_labels);

  Tensor operator()(const Tensor& query_in, const Tensor& kv_in, const AttentionInputs& in,
                    AttentionTrace* trace = nullptr, const std::string& site = {}, int layer = 0) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t n_heads() const { return wq_.size(); }
  std::optional<RelTables>& seq_tables() { return seq_; }
  std::optional<RelTables>& str_tables() { return str_; }

 private:
  std::vector<Tensor> wq_, wk_, wv_, wo_;
  Tensor bo_;
  std::optional<RelTables> seq_;
  std::optional<RelTables> str_;
};

struct FeedForward {
  Linear in;
  Linear out;

  FeedForward() = default;
  FeedForward(Initializer& init, std::size_t d_model, std::size_t ffn_dim);
  Tensor operator()(const Tensor& x, double p_drop, std::uint64_t seed, bool training) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

// Per-example structure handed to every encoder layer; matrices are L x L
// where L is the padded length.
struct EncoderContext {
  std::size_t length = 0;  // real tokens
  const Tensor* m_bar = nullptr;
  const IndexGrid* seq_idx = nullptr;
  const IndexGrid* str_idx = nullptr;
  const Tensor* a_mv = nullptr;
  const Mask* mask = nullptr;
};

class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(Initializer& init, const ModelConfig& cfg, LayerKind kind, int index);

  LayerKind kind() const { return kind_; }
  bool structural() const { return structural_; }
  Tensor operator()(const Tensor& h, const EncoderContext& ctx, const ForwardOptions& opt) const;
  void collect(ParamList& out, const std::string& prefix) const;

  // sigmoid(FC1(h) + FC2(m_bar h)); RDW layers only.
  Tensor distance_weighted(const Tensor& h, const Tensor& m_bar) const;
  MultiHeadAttention& attention() { return attn_; }
  Linear& fc1() { return fc1_; }
  Linear& fc2() { return fc2_; }

 private:
  LayerKind kind_ = LayerKind::PLAIN;
  bool structural_ = false;
  int index_ = 0;
  double dropout_p_ = 0.0;
  MaskMode mask_mode_ = MaskMode::Multiply;
  LayerNorm ln_attn_, ln_ffn_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
  Linear fc1_, fc2_;
};

class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(Initializer& init, const ModelConfig& cfg, int index);

  Tensor operator()(const Tensor& x, const Tensor& memory, const IndexGrid& seq_idx, const Mask& self_mask,
                    const Mask& cross_mask, const ForwardOptions& opt) const;
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  int index_ = 0;
  double dropout_p_ = 0.0;
  LayerNorm ln_self_, ln_cross_, ln_ffn_;
  MultiHeadAttention self_attn_, cross_attn_;
  FeedForward ffn_;
};

// ---- the model ---------------------------------------------------------------

struct EncoderInput {
  std::vector<int> ids;  // padded to L
  std::size_t length = 0;
  RealMatrix m_bar;      // L x L, zero outside the real block
  IntMatrix buckets;     // L x L, labels in [0, l]
  RealMatrix a_mv;       // L x L
};

// Pads or truncates a structural bundle to an encoder input of length L.
EncoderInput make_encoder_input(std::span<const int> ids, const StructuralEncoding& enc, std::size_t padded_len,
                                int pad_id, int clip);

IndexGrid relative_index(std::size_t n, int k);
Mask encoder_mask(std::size_t padded_len, std::size_t length);
Mask causal_mask(std::size_t n);
Mask memory_mask(std::size_t queries, std::size_t padded_len, std::size_t length);

class ScriptModel {
 public:
  ScriptModel(const ModelConfig& cfg, std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::size_t src_vocab() const { return src_vocab_; }
  std::size_t tgt_vocab() const { return tgt_vocab_; }

  // Memory, L x d_model.
  Tensor encode(const EncoderInput& in, const ForwardOptions& opt = {}) const;
  // Logits over the target vocabulary for every position of tgt_in.
  Tensor decode(std::span<const int> tgt_in, const Tensor& memory, std::size_t memory_len,
                const ForwardOptions& opt = {}) const;
  // Next-token probability distribution after prefix (starts with BOS).
  std::vector<double> decoder_step(std::span<const int> prefix, const Tensor& memory, std::size_t memory_len) const;
  // Summed token cross entropy of targets given tgt_in (pads ignored).
  Tensor loss(const EncoderInput& in, std::span<const int> tgt_in, std::span<const int> targets, int pad_id,
              const ForwardOptions& opt = {}) const;

  const ParamList& parameters() const { return params_; }
  Tensor parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  std::vector<EncoderLayer>& encoder_layers() { return encoder_; }
  std::size_t n_encoder_layers() const { return encoder_.size(); }

 private:
  ModelConfig cfg_;
  std::size_t src_vocab_;
  std::size_t tgt_vocab_;
  Tensor src_embed_;
  Tensor tgt_embed_;
  std::vector<EncoderLayer> encoder_;
  LayerNorm enc_norm_;
  std::vector<DecoderLayer> decoder_;
  LayerNorm dec_norm_;
  ParamList params_;
};

}  // namespace structsum
