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
#include <string>
#include <vector>

#include "structsum/ast.hpp"
#include "structsum/model.hpp"
#include "structsum/struct_encode.hpp"
#include "structsum/vocab.hpp"

namespace structsum {

struct Example {
  std::vector<std::string> code_tokens;
  std::vector<std::string> summary_tokens;  // without <s> / </s>
  Ast ast;
  StructuralEncoding bundle;  // n x n, n = code_tokens.size()
};

struct DatasetOptions {
  SubtokenRule subtokens;
  EncodeOptions encode;  // encode.max_tokens is overridden by max_source_len
  std::size_t max_source_len = 400;
  std::size_t max_target_len = 50;  // summary tokens, before <s> / </s>
};

// Lowercased, whitespace-split summary.
std::vector<std::string> tokenize_summary(const std::string& text);

Example make_example(Ast ast, const std::string& summary, const DatasetOptions& opts = {});

// JSON Lines: {"code": str} or {"ast": interchange object}, plus
// {"summary": str}. Blank lines are skipped. Errors name the line.
std::vector<Example> load_dataset(const std::string& path, const DatasetOptions& opts = {});
std::vector<Example> parse_dataset(const std::string& text, const DatasetOptions& opts = {},
                                   const std::string& origin = "<input>");

struct Vocabularies {
  Vocabulary source;
  Vocabulary target;
};

// Built from the training split only. Throws EmptyCorpusError.
Vocabularies build_vocab(const std::vector<Example>& train, std::size_t min_freq = 1, std::size_t max_size = 0);

struct Batch {
  std::vector<std::size_t> indices;  // positions in the split
  std::size_t source_len = 0;        // padded encoder length
  std::size_t target_len = 0;        // padded decoder length
  std::vector<EncoderInput> sources;
  std::vector<std::vector<int>> target_in;   // <s> y1 .. yn, PAD-padded
  std::vector<std::vector<int>> target_out;  // y1 .. yn </s>, PAD-padded
  // 1 marks a padded source position.
  std::vector<std::vector<std::uint8_t>> source_padding;

  std::size_t size() const { return indices.size(); }
  std::size_t target_tokens() const;
};

struct BatchOptions {
  std::size_t batch_size = 32;
  bool sort_by_length = false;
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  int clip = 8;                    // structural clip l of the model
  std::size_t extra_padding = 0;   // added to every padded source length
};

// Deterministic for fixed (seed, epoch). Shuffling permutes examples, or
// with sort_by_length permutes the batches of length-sorted examples.
std::vector<Batch> make_batches(const std::vector<Example>& split, const Vocabularies& vocab,
                                const BatchOptions& opts);

// Encoder input and teacher-forcing pair for a single example.
EncoderInput source_input(const Example& ex, const Vocabulary& src, int clip, std::size_t padded_len = 0);
std::vector<int> target_ids(const Example& ex, const Vocabulary& tgt);  // <s> .. </s>

}  // namespace structsum
