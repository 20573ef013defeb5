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

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "structsum/ast.hpp"

namespace structsum {

// Dense row-major n x n grid.
template <typename T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{}) : n_(n), data_(n * n, fill) {}

  std::size_t n() const { return n_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

using IntMatrix = SquareMatrix<int>;
using RealMatrix = SquareMatrix<double>;

// Hop counts; symmetric, zero diagonal.
using DistanceMatrix = IntMatrix;
// Row-normalised reciprocal distances.
using NormalizedPositionMatrix = RealMatrix;

struct BucketMatrix {
  int clip = 1;
  IntMatrix b;
};

struct MultiViewWeights {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;
};

struct MultiViewMatrix {
  IntMatrix a_ast;
  IntMatrix a_fl;
  IntMatrix a_dp;
  MultiViewWeights weights;
  RealMatrix a_mv;
};

struct StructuralEncoding {
  DistanceMatrix m;
  NormalizedPositionMatrix m_bar;
  BucketMatrix buckets;
  MultiViewMatrix views;

  std::size_t size() const { return m.n(); }
};

// All-pairs hop counts over the AST nodes, tree taken as undirected.
// Floyd-Warshall, O(n^3).
DistanceMatrix floyd_apsp(const Ast& ast);

// M(i, j) = node_d(align(i), align(j)).
DistanceMatrix token_distance_matrix(const DistanceMatrix& node_d, const TokenAlignment& align);

// Reciprocal of every non-zero entry, normalised per row. Rows without a
// non-zero entry (single token, or all tokens on one leaf) stay all-zero.
NormalizedPositionMatrix normalize(const DistanceMatrix& m);

// Elementwise min(d, clip). Throws ConfigError when clip < 1.
BucketMatrix bucketize(const DistanceMatrix& m, int clip);

// Abstract-syntax, control-flow and data-dependency views over tokens and
// their weighted sum. Throws ConfigError on negative or all-zero weights.
MultiViewMatrix multiview(const Ast& ast, const TokenAlignment& align, const MultiViewWeights& weights);

// Entry (i, j) = clamp(j - i, -k, k).
IntMatrix sequential_relpos(std::size_t n, int k);

// Statement-level unit each leaf's tokens belong to for the control-flow
// view: the nearest enclosing statement, or the condition of an if/loop.
std::vector<NodeId> flow_units(const Ast& ast);

struct EncodeOptions {
  int clip = 8;
  MultiViewWeights weights;
  // Tokens beyond this are dropped before any matrix is derived.
  std::size_t max_tokens = 0;  // 0 = unlimited
};

StructuralEncoding encode_structure(const Ast& ast, const TokenAlignment& align, const EncodeOptions& opts = {});

// Leading n x n block; used to truncate long inputs consistently.
template <typename T>
SquareMatrix<T> leading_block(const SquareMatrix<T>& m, std::size_t n) {
  SquareMatrix<T> out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = m(i, j);
  return out;
}

// {"m": [[int]], "m_bar": [[float]], "buckets": [[int]], "a_mv": [[float]], "l": int}
nlohmann::json bundle_to_json(const StructuralEncoding& enc);
StructuralEncoding bundle_from_json(const nlohmann::json& doc);

// Mean Shannon entropy (nats) of the non-degenerate rows of m_bar.
double mean_row_entropy(const NormalizedPositionMatrix& m_bar);

}  // namespace structsum
