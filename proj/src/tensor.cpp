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

#include "structsum/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "structsum/errors.hpp"

namespace structsum {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Matrix& m) { return MapC(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())); }
Map view(Matrix& m) { return Map(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())); }

thread_local Tape* g_active_tape = nullptr;

std::string shape_str(const Matrix& m) { return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")"; }

bool tracked(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

using ImplPtr = std::shared_ptr<TensorImpl>;

Tensor result(Matrix value, bool track) { return Tensor(std::move(value), track); }

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& TensorImpl::grad_buffer() {
  if (grad.empty()) grad = Matrix(value.rows(), value.cols());
  return grad;
}

Tensor::Tensor(Matrix value, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
  impl_->value = std::move(value);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(Matrix(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor(Matrix(1, 1, v)); }

double Tensor::item() const {
  if (value().size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(value()));
  return value().values()[0];
}

Matrix Tensor::grad() const {
  if (impl_->grad.empty()) return Matrix(rows(), cols());
  return impl_->grad;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw StateError("backward() called twice on the same tape without reset()");
  if (loss.value().size() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.value()));
  if (!loss.requires_grad()) throw StateError("loss is not connected to any parameter through the tape");
  consumed_ = true;
  loss.impl()->grad_buffer().values()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void Tape::reset() {
  records_.clear();
  consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

// ---- primitives --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, Trans ta, Trans tb) {
  const bool at = ta == Trans::Yes, bt = tb == Trans::Yes;
  const std::size_t m = at ? a.cols() : a.rows();
  const std::size_t ka = at ? a.rows() : a.cols();
  const std::size_t kb = bt ? b.cols() : b.rows();
  const std::size_t n = bt ? b.rows() : b.cols();
  if (ka != kb)
    throw ShapeError("matmul inner dimensions differ: " + shape_str(a.value()) + (at ? "^T" : "") + " * " +
                     shape_str(b.value()) + (bt ? "^T" : ""));
  Matrix out(m, n);
  {
    auto A = view(a.value());
    auto B = view(b.value());
    auto C = view(out);
    if (!at && !bt) C.noalias() = A * B;
    else if (at && !bt) C.noalias() = A.transpose() * B;
    else if (!at && bt) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  }
  const bool track = tracked({&a, &b});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), py = y.impl();
    Tape::active()->record([pa, pb, py, at, bt] {
      if (py->grad.empty()) return;
      auto dC = view(py->grad);
      auto A = view(pa->value);
      auto B = view(pb->value);
      if (pa->requires_grad) {
        auto dA = view(pa->grad_buffer());
        if (!at && !bt) dA.noalias() += dC * B.transpose();
        else if (!at && bt) dA.noalias() += dC * B;
        else if (at && !bt) dA.noalias() += B * dC.transpose();
        else dA.noalias() += B.transpose() * dC.transpose();
      }
      if (pb->requires_grad) {
        auto dB = view(pb->grad_buffer());
        if (!at && !bt) dB.noalias() += A.transpose() * dC;
        else if (at && !bt) dB.noalias() += A * dC;
        else if (!at && bt) dB.noalias() += dC.transpose() * A;
        else dB.noalias() += dC.transpose() * A.transpose();
      }
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols();
  if (!broadcast && !a.value().same_shape(b.value()))
    throw ShapeError("add shape mismatch " + shape_str(a.value()) + " + " + shape_str(b.value()));
  Matrix out = a.value();
  const std::size_t rows = out.rows(), cols = out.cols();
  const double* bv = b.value().data();
  double* o = out.data();
  if (broadcast) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] += bv[c];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) o[i] += bv[i];
  }
  const bool track = tracked({&a, &b});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), py = y.impl();
    Tape::active()->record([pa, pb, py, broadcast, rows, cols] {
      if (py->grad.empty()) return;
      const double* g = py->grad.data();
      if (pa->requires_grad) {
        double* ga = pa->grad_buffer().data();
        for (std::size_t i = 0; i < rows * cols; ++i) ga[i] += g[i];
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_buffer().data();
        if (broadcast) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
        } else {
          for (std::size_t i = 0; i < rows * cols; ++i) gb[i] += g[i];
        }
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError("mul shape mismatch " + shape_str(a.value()) + " * " + shape_str(b.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  const bool track = tracked({&a, &b});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), py = y.impl();
    Tape::active()->record([pa, pb, py] {
      if (py->grad.empty()) return;
      const double* g = py->grad.data();
      const std::size_t n = py->grad.size();
      if (pa->requires_grad) {
        double* ga = pa->grad_buffer().data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb->value.data()[i];
      }
      if (pb->requires_grad) {
        double* gb = pb->grad_buffer().data();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa->value.data()[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value();
  for (auto& v : out.values()) v *= s;
  const bool track = tracked({&a});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py, s] {
      if (py->grad.empty()) return;
      double* ga = pa->grad_buffer().data();
      for (std::size_t i = 0; i < py->grad.size(); ++i) ga[i] += s * py->grad.data()[i];
    });
  }
  return y;
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value();
  for (auto& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  const bool track = tracked({&a});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py] {
      if (py->grad.empty()) return;
      double* ga = pa->grad_buffer().data();
      const double* s = py->value.data();
      for (std::size_t i = 0; i < py->grad.size(); ++i) ga[i] += py->grad.data()[i] * s[i] * (1.0 - s[i]);
    });
  }
  return y;
}

namespace {

// Set by grad_check while it evaluates the base point.
thread_local double* relu_margin_probe = nullptr;

}  // namespace

Tensor relu(const Tensor& a) {
  Matrix out = a.value();
  if (relu_margin_probe)
    for (double v : out.values()) *relu_margin_probe = std::min(*relu_margin_probe, std::abs(v));
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  const bool track = tracked({&a});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py] {
      if (py->grad.empty()) return;
      double* ga = pa->grad_buffer().data();
      const double* x = pa->value.data();
      for (std::size_t i = 0; i < py->grad.size(); ++i)
        if (x[i] > 0.0) ga[i] += py->grad.data()[i];
    });
  }
  return y;
}

Tensor softmax_masked(const Tensor& logits, const Mask* mask) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (mask && (mask->rows != rows || mask->cols != cols))
    throw ShapeError("softmax mask shape does not match logits " + shape_str(logits.value()));
  Matrix out(rows, cols);
  const Matrix& x = logits.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && !(*mask)(r, c)) continue;
      mx = std::max(mx, x(r, c));
      any = true;
    }
    if (!any) throw NumericsError("softmax row " + std::to_string(r) + " is fully masked");
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask && !(*mask)(r, c)) continue;
      const double e = std::exp(x(r, c) - mx);
      out(r, c) = e;
      total += e;
    }
    if (!std::isfinite(total) || total <= 0.0) throw NumericsError("softmax row " + std::to_string(r) + " is not finite");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= total;
  }
  const bool track = tracked({&logits});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = logits.impl(), py = y.impl();
    Tape::active()->record([pa, py, rows, cols] {
      if (py->grad.empty()) return;
      Matrix& ga = pa->grad_buffer();
      const Matrix& s = py->value;
      const Matrix& g = py->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += s(r, c) * g(r, c);
        for (std::size_t c = 0; c < cols; ++c) ga(r, c) += s(r, c) * (g(r, c) - dot);
      }
    });
  }
  return y;
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || !gain.value().same_shape(bias.value()))
    throw ShapeError("layernorm gain/bias must be 1x" + std::to_string(cols));
  Matrix xhat(rows, cols), out(rows, cols);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x.value()(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x.value()(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      xhat(r, c) = (x.value()(r, c) - mean) * inv_std[r];
      out(r, c) = xhat(r, c) * gain.value()(0, c) + bias.value()(0, c);
    }
  }
  const bool track = tracked({&x, &gain, &bias});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr px = x.impl(), pg = gain.impl(), pb = bias.impl(), py = y.impl();
    Tape::active()->record([px, pg, pb, py, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, cols] {
      if (py->grad.empty()) return;
      const Matrix& g = py->grad;
      if (pg->requires_grad) {
        Matrix& gg = pg->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gg(0, c) += g(r, c) * xhat(r, c);
      }
      if (pb->requires_grad) {
        Matrix& gb = pb->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gb(0, c) += g(r, c);
      }
      if (px->requires_grad) {
        Matrix& gx = px->grad_buffer();
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * pg->value(0, c);
            mean_d += d;
            mean_dx += d * xhat(r, c);
          }
          mean_d /= n;
          mean_dx /= n;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * pg->value(0, c);
            gx(r, c) += inv_std[r] * (d - mean_d - xhat(r, c) * mean_dx);
          }
        }
      }
    });
  }
  return y;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + (counter + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

Tensor dropout(const Tensor& x, double p_drop, std::uint64_t seed, bool training) {
  if (p_drop < 0.0 || p_drop >= 1.0) throw ConfigError("dropout probability must lie in [0, 1)");
  if (!training || p_drop == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p_drop);
  std::vector<double> factor(x.value().size());
  for (std::size_t i = 0; i < factor.size(); ++i) factor[i] = counter_uniform(seed, i) < p_drop ? 0.0 : keep_scale;
  Matrix out = x.value();
  for (std::size_t i = 0; i < factor.size(); ++i) out.data()[i] *= factor[i];
  const bool track = tracked({&x});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr px = x.impl(), py = y.impl();
    Tape::active()->record([px, py, factor = std::move(factor)] {
      if (py->grad.empty()) return;
      double* gx = px->grad_buffer().data();
      for (std::size_t i = 0; i < factor.size(); ++i) gx[i] += py->grad.data()[i] * factor[i];
    });
  }
  return y;
}

Tensor embed(const Tensor& table, std::span<const int> ids, double s) {
  const std::size_t vocab = table.rows(), dim = table.cols();
  Matrix out(ids.size(), dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw ShapeError("embedding id " + std::to_string(ids[r]) + " outside table of " + std::to_string(vocab));
    const double* src = table.value().data() + static_cast<std::size_t>(ids[r]) * dim;
    for (std::size_t c = 0; c < dim; ++c) out(r, c) = src[c] * s;
  }
  const bool track = tracked({&table});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pt = table.impl(), py = y.impl();
    std::vector<int> id_copy(ids.begin(), ids.end());
    Tape::active()->record([pt, py, id_copy = std::move(id_copy), s, dim] {
      if (py->grad.empty()) return;
      Matrix& gt = pt->grad_buffer();
      for (std::size_t r = 0; r < id_copy.size(); ++r) {
        double* dst = gt.data() + static_cast<std::size_t>(id_copy[r]) * dim;
        for (std::size_t c = 0; c < dim; ++c) dst[c] += s * py->grad(r, c);
      }
    });
  }
  return y;
}

Tensor gather(const Tensor& a, const IndexGrid& idx) {
  if (idx.rows != a.rows()) throw ShapeError("gather index rows do not match input " + shape_str(a.value()));
  Matrix out(idx.rows, idx.cols);
  for (std::size_t r = 0; r < idx.rows; ++r) {
    for (std::size_t c = 0; c < idx.cols; ++c) {
      const int k = idx(r, c);
      if (k < 0 || static_cast<std::size_t>(k) >= a.cols())
        throw ShapeError("gather index " + std::to_string(k) + " outside width " + std::to_string(a.cols()));
      out(r, c) = a.value()(r, static_cast<std::size_t>(k));
    }
  }
  const bool track = tracked({&a});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py, idx] {
      if (py->grad.empty()) return;
      Matrix& ga = pa->grad_buffer();
      for (std::size_t r = 0; r < idx.rows; ++r)
        for (std::size_t c = 0; c < idx.cols; ++c) ga(r, static_cast<std::size_t>(idx(r, c))) += py->grad(r, c);
    });
  }
  return y;
}

Tensor scatter(const Tensor& a, const IndexGrid& idx, std::size_t width) {
  if (idx.rows != a.rows() || idx.cols != a.cols())
    throw ShapeError("scatter index grid does not match input " + shape_str(a.value()));
  Matrix out(a.rows(), width);
  for (std::size_t r = 0; r < idx.rows; ++r) {
    for (std::size_t c = 0; c < idx.cols; ++c) {
      const int k = idx(r, c);
      if (k < 0 || static_cast<std::size_t>(k) >= width)
        throw ShapeError("scatter index " + std::to_string(k) + " outside width " + std::to_string(width));
      out(r, static_cast<std::size_t>(k)) += a.value()(r, c);
    }
  }
  const bool track = tracked({&a});
  Tensor y = result(std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py, idx] {
      if (py->grad.empty()) return;
      Matrix& ga = pa->grad_buffer();
      for (std::size_t r = 0; r < idx.rows; ++r)
        for (std::size_t c = 0; c < idx.cols; ++c) ga(r, c) += py->grad(r, static_cast<std::size_t>(idx(r, c)));
    });
  }
  return y;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore, double smoothing) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (targets.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) + " rows");
  Matrix probs(rows, cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols)
      throw ShapeError("cross_entropy target " + std::to_string(targets[r]) + " outside " + std::to_string(cols) + " classes");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, logits.value()(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      probs(r, c) = std::exp(logits.value()(r, c) - mx);
      total += probs(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) probs(r, c) /= total;
    const double log_total = std::log(total);
    loss -= (1.0 - smoothing) * (logits.value()(r, static_cast<std::size_t>(targets[r])) - mx - log_total);
    if (smoothing > 0.0) {
      double mean_logp = 0.0;
      for (std::size_t c = 0; c < cols; ++c) mean_logp += logits.value()(r, c) - mx - log_total;
      loss -= smoothing * mean_logp / static_cast<double>(cols);
    }
  }
  if (!std::isfinite(loss)) throw NumericsError("cross entropy is not finite");
  const bool track = tracked({&logits});
  Tensor y = result(Matrix(1, 1, loss), track);
  if (track) {
    ImplPtr pl = logits.impl(), py = y.impl();
    std::vector<int> tgt(targets.begin(), targets.end());
    Tape::active()->record([pl, py, probs = std::move(probs), tgt = std::move(tgt), ignore, smoothing, rows, cols] {
      if (py->grad.empty()) return;
      const double g = py->grad(0, 0);
      Matrix& gl = pl->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        if (tgt[r] == ignore) continue;
        for (std::size_t c = 0; c < cols; ++c) gl(r, c) += g * (probs(r, c) - smoothing / static_cast<double>(cols));
        gl(r, static_cast<std::size_t>(tgt[r])) -= g * (1.0 - smoothing);
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const bool track = tracked({&a});
  Tensor y = result(Matrix(1, 1, total), track);
  if (track) {
    ImplPtr pa = a.impl(), py = y.impl();
    Tape::active()->record([pa, py] {
      if (py->grad.empty()) return;
      const double g = py->grad(0, 0);
      for (auto& v : pa->grad_buffer().values()) v += g;
    });
  }
  return y;
}

// ---- gradient checking -----------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double tolerance, double eps,
                           double floor) {
  for (auto& p : params) {
    if (!p.requires_grad()) throw StateError("grad_check parameter does not require grad");
    p.zero_grad();
  }
  std::vector<Matrix> analytic;
  GradCheckReport rep;
  {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      relu_margin_probe = &rep.kink_margin;
      try {
        loss = f();
      } catch (...) {
        relu_margin_probe = nullptr;
        throw;
      }
      relu_margin_probe = nullptr;
    }
    tape.backward(loss);
    for (auto& p : params) analytic.push_back(p.grad());
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& values = params[k].mutable_value().values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = f().item();
      values[i] = orig - eps;
      const double down = f().item();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k].values()[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      ++rep.checked;
    }
  }
  for (auto& p : params) p.zero_grad();
  rep.passed = rep.max_rel_error <= tolerance;
  return rep;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double tolerance,
                           double eps, double floor) {
  Tensor x(point.value(), true);
  return grad_check([&] { return f(x); }, {x}, tolerance, eps, floor);
}

}  // namespace structsum
