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
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace structsum {

// Row-major dense matrix of doubles. Everything the model touches is 2-D;
// scalars are 1 x 1.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Integer lookup table used by gather/scatter (e.g. clipped relative
// positions, structural buckets).
struct IndexGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> idx;

  int operator()(std::size_t r, std::size_t c) const { return idx[r * cols + c]; }
};

// allowed[r * cols + c] != 0 marks a logit that takes part in the softmax.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  static Mask all(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<std::uint8_t>(rows * cols, 1)}; }
  bool operator()(std::size_t r, std::size_t c) const { return allowed[r * cols + c] != 0; }
};

struct TensorImpl {
  Matrix value;
  Matrix grad;  // allocated on first accumulation
  bool requires_grad = false;

  Matrix& grad_buffer();
};

// Shared handle to a value on (or off) the tape. Copies alias.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  std::size_t rows() const { return impl_->value.rows(); }
  std::size_t cols() const { return impl_->value.cols(); }
  std::vector<std::size_t> shape() const { return {rows(), cols()}; }
  const Matrix& value() const { return impl_->value; }
  // Direct write access for optimisers and tests; never call while a tape
  // that references this tensor is live.
  Matrix& mutable_value() { return impl_->value; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zero-filled when nothing has been accumulated yet.
  Matrix grad() const;
  void zero_grad() { impl_->grad = Matrix(); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of the operations executed while the tape is active.
// backward() replays the record in reverse creation order, which is a valid
// reverse topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_fn) { records_.push_back(std::move(backward_fn)); }
  // Seeds d(loss)/d(loss) = 1 and propagates. Throws StateError when called
  // twice without reset(), ShapeError for a non-scalar loss.
  void backward(const Tensor& loss);
  void reset();
  std::size_t size() const { return records_.size(); }

  // Tape receiving new operations on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
};

// Makes a tape active on the current thread for the scope's lifetime.
// Without an active tape operations run untracked (inference mode).
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

enum class Trans { No, Yes };

// ---- primitives --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, Trans ta = Trans::No, Trans tb = Trans::No);
// Same shape, or b a 1 x cols row broadcast over the rows of a.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
// Row-wise softmax restricted to allowed entries; disallowed outputs are 0.
// Throws NumericsError when a row has no allowed entry.
Tensor softmax_masked(const Tensor& logits, const Mask* mask = nullptr);
// Row-wise normalisation with learned gain and bias (both 1 x cols).
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6);
// Inverted dropout; identity when !training or p_drop == 0. The mask is a
// pure function of seed, so equal seeds give equal masks.
Tensor dropout(const Tensor& x, double p_drop, std::uint64_t seed, bool training);
// Rows of table selected by ids, multiplied by scale.
Tensor embed(const Tensor& table, std::span<const int> ids, double scale = 1.0);
// out(i, j) = a(i, idx(i, j)).
Tensor gather(const Tensor& a, const IndexGrid& idx);
// out(i, c) = sum over j with idx(i, j) == c of a(i, j); the adjoint of gather.
Tensor scatter(const Tensor& a, const IndexGrid& idx, std::size_t width);
// Sum over rows with targets[r] != ignore of the token cross entropy. With
// smoothing s the target distribution is (1 - s) one-hot + s uniform.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore = -1, double smoothing = 0.0);
Tensor sum(const Tensor& a);

// Counter-based uniform in [0, 1) for (seed, counter); splitmix64 finaliser.
double counter_uniform(std::uint64_t seed, std::uint64_t counter);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// ---- gradient checking -----------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  // Smallest |input| of any relu at the base point (infinity without relu).
  // Below eps the central difference straddles the kink and means nothing.
  double kink_margin = std::numeric_limits<double>::infinity();
};

// Compares autodiff gradients of the scalar f() with respect to every tensor
// in params against central differences. Relative error per entry is
// |a - n| / max(|a|, |n|, floor). The default floor sits above the rounding
// noise of a central difference on an O(10) loss at eps = 1e-5 (about
// 1e-10 absolute), so entries below it are effectively compared absolutely.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double tolerance,
                           double eps = 1e-5, double floor = 1e-5);

// Single-input form: f is evaluated at (a copy of) point.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double tolerance,
                           double eps = 1e-5, double floor = 1e-5);

// ---- checkpoint files ------------------------------------------------------

struct NamedArray {
  std::string name;
  Matrix value;
};

// Layout: 8-byte magic "STSMCKPT", little-endian u64 header length, JSON
// header {"tensors":[{name, shape, dtype, offset, nbytes}], "meta":{...}},
// then the float64 little-endian payload; offsets are relative to the
// payload start.
void save_arrays(const std::string& path, const std::vector<NamedArray>& arrays, const std::string& meta_json);

struct ArrayFile {
  std::vector<NamedArray> arrays;
  std::string meta_json;
};

ArrayFile load_arrays(const std::string& path);

}  // namespace structsum
