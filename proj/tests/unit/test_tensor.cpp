#include <doctest.h>

#include <cmath>
#include <functional>

#include "qgnn/errors.hpp"
#include "qgnn/kernels.hpp"
#include "qgnn/rng.hpp"
#include "qgnn/tape.hpp"

using namespace qgnn;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Entries bounded away from zero, for kinked primitives.
Tensor away_from_zero(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (auto& v : t.data()) v = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// sum(op(x) * seed) for a fixed random upstream seed.
double check_unary(const Tensor& x, const std::function<Var(Tape&, Var)>& op, std::uint64_t seed = 1) {
  Rng rng(seed);
  Tape probe;
  const auto shape = probe.value(op(probe, probe.constant(x)));
  const Tensor up = random_tensor(rng, shape.rows(), shape.cols());
  const Tensor xs[] = {x};
  return finite_diff_check(
      [&](Tape& t, std::span<const Var> p) { return t.sum_all(t.mul(op(t, p[0]), t.constant(up))); }, xs, 1e-5);
}

}  // namespace

TEST_CASE("segment_sum of identity rows") {
  Tape t;
  const Var x = t.constant(Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  const auto& y = t.value(t.segment_sum(x, {0, 0, 1}, 3));
  CHECK(y == Tensor::from_rows({{1, 1, 0}, {0, 0, 1}, {0, 0, 0}}));
  CHECK_THROWS_AS(t.segment_sum(x, {0, 0, 3}, 3), DimensionError);
}

TEST_CASE("segment_sum is permutation equivariant") {
  Rng rng(4);
  const Tensor x = random_tensor(rng, 7, 3);
  std::vector<int> ids{0, 2, 1, 2, 0, 0, 1};
  const auto perm = rng.permutation(7);
  Tensor xp(7, 3);
  std::vector<int> idp(7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t c = 0; c < 3; ++c) xp(perm[i], c) = x(i, c);
    idp[perm[i]] = ids[i];
  }
  Tape t;
  const auto& a = t.value(t.segment_sum(t.constant(x), ids, 3));
  const auto& b = t.value(t.segment_sum(t.constant(xp), idp, 3));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("matmul shapes and mismatch") {
  Tape t;
  const Var a = t.constant(Tensor(2, 3, 1.0));
  const Var b = t.constant(Tensor(3, 4, 1.0));
  const auto& c = t.value(t.matmul(a, b));
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 4);
  CHECK(c(1, 2) == 3.0);
  CHECK_THROWS_AS(t.matmul(a, a), DimensionError);
  CHECK_THROWS_AS(t.add(a, b), DimensionError);
  CHECK_THROWS_AS(t.add_bias_rowwise(a, t.constant(Tensor(1, 2))), DimensionError);
}

TEST_CASE("simple gradients") {
  SUBCASE("sum(W) gives ones") {
    Tape t;
    const Var w = t.parameter(Tensor(2, 3, 0.7), 0);
    const auto g = t.backward(t.sum_all(w));
    CHECK(g.param(0) == Tensor(2, 3, 1.0));
  }
  SUBCASE("sigmoid at 0") {
    Tape t;
    const Var w = t.parameter(Tensor::scalar(0.0), 0);
    CHECK(t.backward(t.sigmoid(w)).param(0)[0] == 0.25);
  }
  SUBCASE("relu and abs at exactly 0") {
    Tape t;
    const Var w = t.parameter(Tensor::row({0.0, 2.0, -1.0}), 0);
    CHECK(t.backward(t.sum_all(t.relu(w))).param(0) == Tensor::row({0.0, 1.0, 0.0}));
    CHECK(t.backward(t.sum_all(t.abs(w))).param(0) == Tensor::row({0.0, 1.0, -1.0}));
  }
  SUBCASE("non-scalar loss") {
    Tape t;
    const Var w = t.parameter(Tensor(2, 1), 0);
    CHECK_THROWS_AS(t.backward(w), ContractError);
  }
  SUBCASE("unused parameter gets a zero gradient") {
    Tape t;
    const Var a = t.parameter(Tensor::scalar(1.0), 0);
    t.parameter(Tensor(2, 2, 5.0), 3);
    const auto g = t.backward(t.scale(a, 2.0));
    CHECK(g.param(3) == Tensor(2, 2));
    CHECK_FALSE(g.has_param(1));
    CHECK_THROWS_AS(g.param(1), ContractError);
  }
}

TEST_CASE("finite-difference checker") {
  const Tensor w[] = {Tensor::scalar(3.0)};
  CHECK(finite_diff_check([](Tape& t, std::span<const Var> p) { return t.mul(p[0], p[0]); }, w, 1e-5) <= 1e-8);
  CHECK(finite_diff_check([](Tape& t, std::span<const Var>) { return t.constant(Tensor::scalar(4.0)); }, w, 1e-5) == 0.0);
  CHECK_THROWS_AS(finite_diff_check([](Tape& t, std::span<const Var> p) { return p[0]; }, w, 0.0), ParameterError);
}

TEST_CASE("every primitive matches finite differences under a random upstream seed") {
  Rng rng(17);
  const Tensor x = random_tensor(rng, 4, 3);
  const Tensor other = random_tensor(rng, 4, 3);
  const Tensor right = random_tensor(rng, 3, 5);
  const Tensor bias = random_tensor(rng, 1, 3);
  const Tensor positive = random_tensor(rng, 4, 3, 0.2, 2.0);
  const double tol = 1e-4;

  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.matmul(v, t.constant(right)); }) <= tol);
  CHECK(check_unary(right, [&](Tape& t, Var v) { return t.matmul(t.constant(x), v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.add(v, t.constant(other)); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.sub(t.constant(other), v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.mul(v, v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.scale(v, -2.5); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.add_scalar(v, 0.3); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.add_bias_rowwise(v, t.constant(bias)); }) <= tol);
  CHECK(check_unary(bias, [&](Tape& t, Var v) { return t.add_bias_rowwise(t.constant(x), v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.scale_rows(v, {0.5, 2.0, -1.0, 3.0}); }) <= tol);
  CHECK(check_unary(away_from_zero(rng, 4, 3), [&](Tape& t, Var v) { return t.relu(v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.sigmoid(v); }) <= tol);
  CHECK(check_unary(away_from_zero(rng, 4, 3), [&](Tape& t, Var v) { return t.abs(v); }) <= tol);
  CHECK(check_unary(positive, [&](Tape& t, Var v) { return t.log(v); }) <= tol);
  CHECK(check_unary(Tensor::row({-0.9, -0.2, 0.3, 0.95}), [&](Tape& t, Var v) { return t.clamp(v, -0.5, 0.5); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.softmax_rowwise(v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.log_softmax_rowwise(v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) {
          const Var parts[] = {v, t.constant(other), t.scale(v, 2.0)};
          return t.concat_cols(parts);
        }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.segment_sum(v, {1, 0, 1, 1}, 3); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.gather_rows(v, {3, 0, 0, 2, 3}); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.sum_all(v); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.mean_all(v); }) <= tol);

  Tensor targets(4, 3), mask(4, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    targets[i] = static_cast<double>(rng.below(2));
    mask[i] = i % 5 == 0 ? 0.0 : 1.0;
  }
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.bce_with_logits_masked(v, targets, mask); }) <= tol);
  CHECK(check_unary(x, [&](Tape& t, Var v) { return t.nll_mean(t.log_softmax_rowwise(v), {0, 2, 1, 2}); }) <= tol);
}

TEST_CASE("concat splits gradients exactly") {
  Tape t;
  const Var a = t.parameter(Tensor(2, 1), 0);
  const Var b = t.parameter(Tensor(2, 3), 1);
  const Var parts[] = {a, b};
  const Var c = t.concat_cols(parts);
  const auto g = t.backward(t.sum_all(t.mul(c, t.constant(Tensor::from_rows({{1, 2, 3, 4}, {5, 6, 7, 8}})))));
  CHECK(g.param(0) == Tensor::from_rows({{1}, {5}}));
  CHECK(g.param(1) == Tensor::from_rows({{2, 3, 4}, {6, 7, 8}}));
  CHECK(g.param(0).cols() + g.param(1).cols() == t.value(c).cols());
}

TEST_CASE("losses on the tape") {
  Tape t;
  const Var z = t.constant(Tensor(3, 2, 0.0));
  Tensor y = Tensor::from_rows({{1, 0}, {0, 1}, {1, 1}});
  CHECK(t.value(t.bce_with_logits_masked(z, y, Tensor(3, 2, 1.0)))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(t.bce_with_logits_masked(z, y, Tensor(3, 2, 0.0)), ContractError);
  const Var big = t.constant(Tensor::row({800.0, -800.0}));
  CHECK(std::isfinite(t.value(t.bce_with_logits_masked(big, Tensor::row({0.0, 1.0}), Tensor::row({1.0, 1.0})))[0]));
  CHECK_THROWS_AS(t.log(t.constant(Tensor::scalar(0.0))), ContractError);
  CHECK_THROWS_AS(t.nll_mean(t.log_softmax_rowwise(z), {0, 2, 1}), DimensionError);
}

TEST_CASE("random two-layer MLP gradient") {
  Rng rng(23);
  const Tensor x = random_tensor(rng, 6, 4);
  const Tensor params[] = {random_tensor(rng, 4, 5), random_tensor(rng, 1, 5), random_tensor(rng, 5, 2),
                           random_tensor(rng, 1, 2)};
  auto f = [&](Tape& t, std::span<const Var> p) {
    Var h = t.relu(t.add_bias_rowwise(t.matmul(t.constant(x), p[0]), p[1]));
    Var o = t.add_bias_rowwise(t.matmul(h, p[2]), p[3]);
    return t.nll_mean(t.log_softmax_rowwise(o), {0, 1, 1, 0, 1, 0});
  };
  CHECK(finite_diff_check(f, params, 1e-5) <= 1e-4);
}

TEST_CASE("parallel kernels are bit-identical to the serial references") {
  Rng rng(9);
  const Tensor a = random_tensor(rng, 257, 64);
  const Tensor b = random_tensor(rng, 64, 96);
  const Tensor c = random_tensor(rng, 257, 96);
  Tensor p, s;
  kernels::matmul(a, b, p);
  kernels::matmul_serial(a, b, s);
  CHECK(p == s);
  kernels::matmul_tn(a, c, p);
  kernels::matmul_tn_serial(a, c, s);
  CHECK(p == s);
  kernels::matmul_nt(c, b, p);
  kernels::matmul_nt_serial(c, b, s);
  CHECK(p == s);

  const Tensor x = random_tensor(rng, 5000, 16);
  std::vector<int> ids(5000);
  for (auto& i : ids) i = static_cast<int>(rng.below(300));
  Tensor sp(300, 16), ss(300, 16);
  kernels::segment_sum(x, ids, sp);
  kernels::segment_sum_serial(x, ids, ss);
  CHECK(sp == ss);
}
