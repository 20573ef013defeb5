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

#include "structsum/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "structsum/digest.hpp"
#include "structsum/errors.hpp"
#include "structsum/metrics.hpp"
#include "structsum/minilang.hpp"

namespace structsum {

std::vector<std::string> tokenize_summary(const std::string& text) { return normalize_text(text); }

Example make_example(Ast ast, const std::string& summary, const DatasetOptions& opts) {
  Example ex;
  LeafTokens lt = leaf_tokens(ast, opts.subtokens);
  if (lt.tokens.empty()) throw FormatError("example has no code tokens");
  // The alignment must cover every leaf; encode_structure does the cut.
  EncodeOptions enc = opts.encode;
  enc.max_tokens = opts.max_source_len;
  ex.bundle = encode_structure(ast, lt.alignment, enc);
  if (opts.max_source_len != 0 && lt.tokens.size() > opts.max_source_len) lt.tokens.resize(opts.max_source_len);
  ex.code_tokens = std::move(lt.tokens);
  ex.summary_tokens = tokenize_summary(summary);
  if (opts.max_target_len != 0 && ex.summary_tokens.size() > opts.max_target_len)
    ex.summary_tokens.resize(opts.max_target_len);
  ex.ast = std::move(ast);
  return ex;
}

std::vector<Example> parse_dataset(const std::string& text, const DatasetOptions& opts, const std::string& origin) {
  std::vector<Example> out;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    try {
      const auto doc = nlohmann::json::parse(line);
      if (!doc.is_object() || !doc.contains("summary") || !doc["summary"].is_string())
        throw FormatError("expected an object with a string \"summary\"");
      Ast ast;
      if (doc.contains("code") && doc["code"].is_string()) {
        ast = parse_minilang(doc["code"].get<std::string>());
      } else if (doc.contains("ast")) {
        ast = ast_from_json(doc["ast"]);
      } else {
        throw FormatError("expected \"code\" (string) or \"ast\" (object)");
      }
      out.push_back(make_example(std::move(ast), doc["summary"].get<std::string>(), opts));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    } catch (const SyntaxError& e) {
      throw FormatError(where + "code " + e.what());
    } catch (const Error& e) {
      throw FormatError(where + e.what());
    }
  }
  return out;
}

std::vector<Example> load_dataset(const std::string& path, const DatasetOptions& opts) {
  return parse_dataset(read_file(path), opts, path);
}

Vocabularies build_vocab(const std::vector<Example>& train, std::size_t min_freq, std::size_t max_size) {
  if (train.empty()) throw EmptyCorpusError("training split is empty");
  std::vector<std::vector<std::string>> src, tgt;
  src.reserve(train.size());
  tgt.reserve(train.size());
  for (const auto& ex : train) {
    src.push_back(ex.code_tokens);
    tgt.push_back(ex.summary_tokens);
  }
  return {Vocabulary::build(src, min_freq, max_size), Vocabulary::build(tgt, min_freq, max_size)};
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (const auto& t : target_out)
    for (int id : t) n += id != Vocabulary::kPad;
  return n;
}

EncoderInput source_input(const Example& ex, const Vocabulary& src, int clip, std::size_t padded_len) {
  const std::vector<int> ids = src.encode(ex.code_tokens);
  return make_encoder_input(ids, ex.bundle, std::max(padded_len, ids.size()), Vocabulary::kPad, clip);
}

std::vector<int> target_ids(const Example& ex, const Vocabulary& tgt) {
  std::vector<int> ids{Vocabulary::kBos};
  for (int id : tgt.encode(ex.summary_tokens)) ids.push_back(id);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

namespace {

Batch assemble(const std::vector<Example>& split, const Vocabularies& vocab, std::vector<std::size_t> members,
               const BatchOptions& opts) {
  Batch b;
  b.indices = std::move(members);
  std::vector<std::vector<int>> targets;
  for (std::size_t i : b.indices) {
    b.source_len = std::max(b.source_len, split[i].code_tokens.size());
    targets.push_back(target_ids(split[i], vocab.target));
    b.target_len = std::max(b.target_len, targets.back().size() - 1);
  }
  b.source_len += opts.extra_padding;
  for (std::size_t k = 0; k < b.indices.size(); ++k) {
    const Example& ex = split[b.indices[k]];
    b.sources.push_back(source_input(ex, vocab.source, opts.clip, b.source_len));
    std::vector<std::uint8_t> pad(b.source_len, 0);
    std::fill(pad.begin() + static_cast<std::ptrdiff_t>(ex.code_tokens.size()), pad.end(), 1);
    b.source_padding.push_back(std::move(pad));
    const auto& t = targets[k];
    std::vector<int> in(t.begin(), t.end() - 1), out(t.begin() + 1, t.end());
    in.resize(b.target_len, Vocabulary::kPad);
    out.resize(b.target_len, Vocabulary::kPad);
    b.target_in.push_back(std::move(in));
    b.target_out.push_back(std::move(out));
  }
  return b;
}

}  // namespace

std::vector<Batch> make_batches(const std::vector<Example>& split, const Vocabularies& vocab,
                                const BatchOptions& opts) {
  if (opts.batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(opts.seed, opts.epoch));
  auto shuffle = [&rng](auto& v) {
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(v[i - 1], v[j]);
    }
  };
  if (opts.sort_by_length) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return split[a].code_tokens.size() < split[b].code_tokens.size();
    });
  } else if (opts.shuffle) {
    shuffle(order);
  }
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < order.size(); s += opts.batch_size) {
    const std::size_t e = std::min(order.size(), s + opts.batch_size);
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  if (opts.sort_by_length && opts.shuffle) shuffle(groups);
  std::vector<Batch> batches;
  batches.reserve(groups.size());
  for (auto& g : groups) batches.push_back(assemble(split, vocab, std::move(g), opts));
  return batches;
}

}  // namespace structsum
