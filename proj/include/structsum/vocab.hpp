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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace structsum {

// Token <-> id map. Ids 0..5 are reserved and identical in every vocabulary:
//   0 <pad>, 1 <s>, 2 </s>, 3 <unk>, 4 STR, 5 NUM
// STR and NUM are the sentinels produced for string and number literals.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kStr = 4;
  static constexpr int kNum = 5;
  static constexpr int kReserved = 6;

  Vocabulary();

  // Tokens ranked by frequency (ties lexicographic); tokens seen fewer than
  // min_freq times are dropped; max_size caps the non-reserved entries
  // (0 = no cap). Throws EmptyCorpusError when sentences is empty.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences, std::size_t min_freq = 1,
                          std::size_t max_size = 0);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Reserved control ids (<pad>, <s>, </s>) are skipped.
  std::vector<std::string> decode(std::span<const int> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  // FNV-1a over the newline-joined token list.
  std::string digest() const;

  // One token per line, in id order.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace structsum
