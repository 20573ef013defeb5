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
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "structsum/errors.hpp"
#include "structsum/tensor.hpp"

using namespace structsum;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, bool grad = true, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.values()) v = u(rng);
  return Tensor(std::move(m), grad);
}

// Random linear read-out so that every output entry carries a distinct weight.
Tensor readout(const Tensor& y, const Tensor& w) { return sum(mul(y, w)); }

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("forward examples") {
  const Tensor z(Matrix(1, 4, 0.0));
  const Tensor s = softmax_masked(z);
  for (std::size_t c = 0; c < 4; ++c) CHECK(s.value()(0, c) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  std::mt19937_64 rng(3);
  const Tensor a = random_tensor(rng, 3, 4, false);
  const Tensor i3(Matrix::identity(3));
  CHECK(matmul(i3, a).value() == a.value());
  CHECK(matmul(a, i3, Trans::Yes).value() == matmul(a, i3, Trans::Yes).value());
  const Tensor at = matmul(a, Tensor(Matrix::identity(3)), Trans::Yes);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(at.value()(r, c) == a.value()(c, r));
}

TEST_CASE("matmul and sigmoid gradients by hand") {
  // d/dW sum(W x) = 1 x^T.
  Tensor w(Matrix(2, 2, {1.0, 2.0, 3.0, 4.0}), true);
  const Tensor x(Matrix(2, 1, {5.0, 7.0}));
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(matmul(w, x));
  }
  CHECK(loss.item() == 1 * 5 + 2 * 7 + 3 * 5 + 4 * 7);
  tape.backward(loss);
  CHECK(w.grad() == Matrix(2, 2, {5.0, 7.0, 5.0, 7.0}));

  Tensor s(Matrix(1, 1, 0.0), true);
  Tape t2;
  Tensor l2;
  {
    TapeScope scope(t2);
    l2 = sum(sigmoid(s));
  }
  t2.backward(l2);
  CHECK(s.grad()(0, 0) == 0.25);
}

TEST_CASE("untracked operations do not need a tape") {
  Tensor w(Matrix(1, 1, 2.0), true);
  const Tensor y = scale(w, 3.0);
  CHECK(y.item() == 6.0);
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("second backward on the same tape is a StateError") {
  Tensor w(Matrix(1, 1, 2.0), true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = sum(mul(w, w));
  }
  tape.backward(loss);
  CHECK(w.grad()(0, 0) == 4.0);
  CHECK_THROWS_AS(tape.backward(loss), StateError);
  tape.reset();
  CHECK(tape.size() == 0);
}

TEST_CASE("non-scalar loss is a ShapeError") {
  Tensor w(Matrix(2, 1, 1.0), true);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = scale(w, 2.0);
  }
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("shape errors") {
  const Tensor a(Matrix(2, 3)), b(Matrix(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, Tensor(Matrix(3, 2))), ShapeError);
  CHECK_THROWS_AS(mul(a, Tensor(Matrix(1, 3))), ShapeError);
}

TEST_CASE("fully masked softmax row is a NumericsError") {
  const Tensor z(Matrix(2, 2, 0.0));
  Mask m = Mask::all(2, 2);
  m.allowed[2] = m.allowed[3] = 0;
  CHECK_THROWS_AS(softmax_masked(z, &m), NumericsError);
}

TEST_CASE("masked softmax gives masked entries zero probability and zero gradient") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(rng, 3, 5);
  const Tensor w = random_tensor(rng, 3, 5, false);
  Mask m = Mask::all(3, 5);
  m.allowed[1] = m.allowed[7] = m.allowed[14] = 0;
  Tape tape;
  Tensor loss, p;
  {
    TapeScope scope(tape);
    p = softmax_masked(x, &m);
    loss = readout(p, w);
  }
  tape.backward(loss);
  for (std::size_t i : {1u, 7u, 14u}) {
    CHECK(p.value().values()[i] == 0.0);
    CHECK(x.grad().values()[i] == 0.0);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0.0;
    for (double v : p.value().row(r)) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("gradient check of every primitive") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    const Tensor w34 = random_tensor(rng, 3, 4, false);

    SUBCASE("matmul") {
      for (Trans ta : {Trans::No, Trans::Yes})
        for (Trans tb : {Trans::No, Trans::Yes}) {
          Tensor a = ta == Trans::No ? random_tensor(rng, 3, 5) : random_tensor(rng, 5, 3);
          Tensor b = tb == Trans::No ? random_tensor(rng, 5, 4) : random_tensor(rng, 4, 5);
          auto r = grad_check([&] { return readout(matmul(a, b, ta, tb), w34); }, {a, b}, kTol);
          CHECK(r.passed);
        }
    }
    SUBCASE("add with broadcast") {
      Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 3, 4), row = random_tensor(rng, 1, 4);
      CHECK(grad_check([&] { return readout(add(a, b), w34); }, {a, b}, kTol).passed);
      CHECK(grad_check([&] { return readout(add(a, row), w34); }, {a, row}, kTol).passed);
    }
    SUBCASE("mul and scale") {
      Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 3, 4);
      CHECK(grad_check([&] { return readout(mul(a, b), w34); }, {a, b}, kTol).passed);
      CHECK(grad_check([&](const Tensor& x) { return readout(scale(x, -1.7), w34); }, a, kTol).passed);
    }
    SUBCASE("sigmoid and relu") {
      CHECK(grad_check([&](const Tensor& x) { return readout(sigmoid(x), w34); }, random_tensor(rng, 3, 4), kTol)
                .passed);
      // Keep relu inputs away from the kink.
      Tensor x = random_tensor(rng, 3, 4, true, 0.1, 1.0);
      for (std::size_t i = 0; i < x.value().size(); i += 2) x.mutable_value().values()[i] *= -1.0;
      CHECK(grad_check([&](const Tensor& t) { return readout(relu(t), w34); }, x, kTol).passed);
    }
    SUBCASE("softmax masked and unmasked") {
      Mask m = Mask::all(3, 4);
      m.allowed[0] = m.allowed[6] = 0;
      CHECK(grad_check([&](const Tensor& x) { return readout(softmax_masked(x), w34); }, random_tensor(rng, 3, 4),
                       kTol)
                .passed);
      CHECK(grad_check([&](const Tensor& x) { return readout(softmax_masked(x, &m), w34); },
                       random_tensor(rng, 3, 4), kTol)
                .passed);
    }
    SUBCASE("layernorm") {
      Tensor x = random_tensor(rng, 3, 8), g = random_tensor(rng, 1, 8), b = random_tensor(rng, 1, 8);
      const Tensor w = random_tensor(rng, 3, 8, false);
      CHECK(grad_check([&] { return readout(layernorm(x, g, b), w); }, {x, g, b}, kTol).passed);
    }
    SUBCASE("dropout with a fixed seed") {
      Tensor x = random_tensor(rng, 3, 4);
      CHECK(grad_check([&] { return readout(dropout(x, 0.3, 99 + seed, true), w34); }, {x}, kTol).passed);
    }
    SUBCASE("embed, gather, scatter") {
      Tensor table = random_tensor(rng, 6, 4);
      const std::vector<int> ids{2, 0, 2};
      CHECK(grad_check([&] { return readout(embed(table, ids, 1.5), w34); }, {table}, kTol).passed);
      IndexGrid g{3, 4, {0, 1, 2, 2, 1, 1, 0, 2, 2, 0, 0, 1}};
      Tensor a = random_tensor(rng, 3, 3);
      CHECK(grad_check([&] { return readout(gather(a, g), w34); }, {a}, kTol).passed);
      Tensor s = random_tensor(rng, 3, 4);
      const Tensor w33 = random_tensor(rng, 3, 3, false);
      CHECK(grad_check([&] { return readout(scatter(s, g, 3), w33); }, {s}, kTol).passed);
    }
    SUBCASE("cross entropy with ignore and smoothing") {
      Tensor logits = random_tensor(rng, 4, 5);
      const std::vector<int> t{1, 0, 4, 0};
      CHECK(grad_check([&] { return cross_entropy(logits, t, 0); }, {logits}, kTol).passed);
      CHECK(grad_check([&] { return cross_entropy(logits, t, -1, 0.1); }, {logits}, kTol).passed);
    }
  }
}

TEST_CASE("gather and scatter are adjoint") {
  std::mt19937_64 rng(5);
  const Tensor a = random_tensor(rng, 3, 3, false), b = random_tensor(rng, 3, 4, false);
  IndexGrid g{3, 4, {0, 1, 2, 2, 1, 1, 0, 2, 2, 0, 0, 1}};
  const double lhs = sum(mul(gather(a, g), b)).item();
  const double rhs = sum(mul(a, scatter(b, g, 3))).item();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
}

TEST_CASE("cross entropy ignores the ignore label") {
  const Tensor logits(Matrix(2, 3, {0.0, 0.0, 0.0, 5.0, 1.0, 1.0}));
  const std::vector<int> t{2, 0};
  CHECK(cross_entropy(logits, t, 0).item() == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("dropout is a pure function of the seed") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, 8, 8, false);
  CHECK(dropout(x, 0.5, 42, true).value() == dropout(x, 0.5, 42, true).value());
  CHECK_FALSE(dropout(x, 0.5, 42, true).value() == dropout(x, 0.5, 43, true).value());
  CHECK(dropout(x, 0.5, 42, false).value() == x.value());
  CHECK(dropout(x, 0.0, 42, true).value() == x.value());
}

TEST_CASE("array file round trip") {
  const auto dir = testing::scratch_dir("tensor_io");
  const std::string path = (dir / "a.ckpt").string();
  std::vector<NamedArray> arrays{{"x", Matrix(2, 3, {1, 2, 3, 4, 5, 6.5})}, {"y", Matrix(1, 1, -0.125)}};
  save_arrays(path, arrays, R"({"k":1})");
  const ArrayFile f = load_arrays(path);
  REQUIRE(f.arrays.size() == 2);
  CHECK(f.arrays[0].name == "x");
  CHECK(f.arrays[0].value == arrays[0].value);
  CHECK(f.arrays[1].value == arrays[1].value);
  CHECK(f.meta_json.find("\"k\"") != std::string::npos);

  CHECK_THROWS_AS(load_arrays((dir / "missing.ckpt").string()), FormatError);
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_arrays((dir / "bad.ckpt").string()), FormatError);
}
