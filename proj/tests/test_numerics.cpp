#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deepvar/errors.hpp"
#include "deepvar/optimizer.hpp"
#include "deepvar/rng.hpp"
#include "deepvar/tape.hpp"
#include "deepvar/tensor.hpp"
#include "support/grad_check.hpp"

using namespace deepvar;
using deepvar::testing::check_gradients;

TEST_CASE("tensor basics and shape errors") {
  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6);
  CHECK(Tensor::scalar(4.5).scalar_value() == 4.5);
  CHECK(shape_size({}) == 1);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), NumericError);
  CHECK_THROWS_AS(m.scalar_value(), NumericError);
}

TEST_CASE("matmul identity and shape mismatch message") {
  Tape t;
  Var eye = t.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var v = t.constant(Tensor::vector({2.5, -1.0, 3.0}));
  Var out = t.matmul(eye, v);
  CHECK(t.value(out).values() == std::vector<double>{2.5, -1.0, 3.0});

  Var bad = t.constant(Tensor::vector({1.0, 2.0}));
  try {
    t.matmul(eye, bad);
    FAIL("expected shape error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("(3, 3)") != std::string::npos);
    CHECK(std::string(e.what()).find("(2)") != std::string::npos);
  }
}

TEST_CASE("sigmoid and tanh at zero") {
  Tape t;
  Var z = t.constant(Tensor::vector({0.0}));
  CHECK(t.value(t.sigmoid(z))[0] == 0.5);
  CHECK(t.value(t.tanh(z))[0] == 0.0);
}

TEST_CASE("concat shapes") {
  Tape t;
  Var a = t.constant(Tensor::vector({1, 2}));
  Var b = t.constant(Tensor::vector({3, 4, 5}));
  Var c = t.concat({a, b});
  CHECK(t.value(c).shape() == std::vector<std::size_t>{5});
  CHECK(t.value(c).values() == std::vector<double>{1, 2, 3, 4, 5});
}

TEST_CASE("log_sum_exp trivials") {
  Tape t;
  CHECK(t.value(t.log_sum_exp(t.constant(Tensor::vector({0.0, 0.0}))))[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // big inputs must not overflow
  CHECK(t.value(t.log_sum_exp(t.constant(Tensor::vector({1000.0, 1000.0}))))[0] ==
        doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  CHECK(t.value(t.log_sum_exp(t.constant(Tensor::vector({-3.25}))))[0] ==
        doctest::Approx(-3.25).epsilon(1e-15));
  CHECK_THROWS_AS(log_sum_exp(std::span<const double>{}), NumericError);
}

TEST_CASE("log_sum_exp shift invariance") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(1 + rng.below(8));
    for (double& x : xs) x = rng.uniform(-5, 5);
    const double c = rng.uniform(-100, 100);
    std::vector<double> shifted = xs;
    for (double& x : shifted) x += c;
    CHECK(log_sum_exp(shifted) ==
          doctest::Approx(log_sum_exp(xs) + c).epsilon(1e-12));
  }
}

TEST_CASE("max_pool_over_time values and tie gradient") {
  Tape t;
  Var m = t.constant(Tensor::matrix(2, 2, {1, 5, 3, 2}));
  Var pooled = t.max_pool_over_time(m);
  CHECK(t.value(pooled).values() == std::vector<double>{3, 5});

  // ties route the gradient to the first row
  Tape t2;
  Var tie = t2.constant(Tensor::matrix(2, 2, {1, 1, 1, 1}));
  Var p2 = t2.max_pool_over_time(tie);
  Var loss = t2.sum(p2);
  t2.backward(loss);
  CHECK(t2.grad(tie).at(0, 0) == 1.0);
  CHECK(t2.grad(tie).at(0, 1) == 1.0);
  CHECK(t2.grad(tie).at(1, 0) == 0.0);
  CHECK(t2.grad(tie).at(1, 1) == 0.0);

  Tape t3;
  Var single = t3.constant(Tensor::matrix(1, 3, {7, 8, 9}));
  CHECK(t3.value(t3.max_pool_over_time(single)).values() == std::vector<double>{7, 8, 9});
}

TEST_CASE("dropout contracts") {
  Rng rng(3);
  Tape t;
  Var x = t.constant(Tensor::vector({1, 2, 3, 4}));
  CHECK(t.value(t.dropout(x, 0.0, true, rng)).values() ==
        std::vector<double>{1, 2, 3, 4});
  CHECK(t.value(t.dropout(x, 0.9, false, rng)).values() ==
        std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(t.dropout(x, 1.0, true, rng), NumericError);
  CHECK_THROWS_AS(t.dropout(x, -0.1, true, rng), NumericError);

  // deterministic mask under a fixed seed
  const auto run = [&](std::uint64_t seed) {
    Rng r(seed);
    Tape tt;
    Var xx = tt.constant(Tensor::vector(std::vector<double>(64, 1.0)));
    return tt.value(tt.dropout(xx, 0.5, true, r)).values();
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
  // inverted scaling: kept entries become 1/(1-rate)
  for (double v : run(7)) CHECK((v == 0.0 || v == doctest::Approx(2.0)));
}

TEST_CASE("backward trivials") {
  // loss = sum(p) -> all-ones gradient
  Parameter p("p", Tensor::vector({1, 2, 3}));
  {
    Tape t;
    Var loss = t.sum(t.param(p));
    t.backward(loss);
    CHECK(p.grad.values() == std::vector<double>{1, 1, 1});
  }
  // loss = 0 * p -> zero gradient
  p.zero_grad();
  {
    Tape t;
    Var loss = t.sum(t.scale(t.param(p), 0.0));
    t.backward(loss);
    CHECK(p.grad.values() == std::vector<double>{0, 0, 0});
  }
  // non-scalar loss rejected
  {
    Tape t;
    Var v = t.param(p);
    CHECK_THROWS_AS(t.backward(v), NumericError);
  }
}

TEST_CASE("gradient check: every primitive") {
  Rng rng(42);
  const auto randomize = [&](Parameter& p) {
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-1, 1);
  };

  Parameter a("a", Tensor::matrix(3, 4, std::vector<double>(12)));
  Parameter b("b", Tensor::matrix(4, 2, std::vector<double>(8)));
  Parameter v("v", Tensor::vector(std::vector<double>(4)));
  Parameter w("w", Tensor::vector(std::vector<double>(4)));
  for (Parameter* p : {&a, &b, &v, &w}) randomize(*p);

  Parameter bias2("bias2", Tensor::vector({0.3, -0.7}));

  const auto run = [&](const char* name, const std::vector<Parameter*>& params,
                       const std::function<Var(Tape&)>& build) {
    INFO(name);
    const auto result = check_gradients(params, build);
    INFO("worst: " << result.worst);
    CHECK(result.max_rel_error <= 1e-4);
  };

  run("add", {&v, &w}, [&](Tape& t) { return t.sum(t.add(t.param(v), t.param(w))); });
  run("sub", {&v, &w}, [&](Tape& t) { return t.sum(t.sub(t.param(v), t.param(w))); });
  run("mul", {&v, &w}, [&](Tape& t) { return t.sum(t.mul(t.param(v), t.param(w))); });
  run("scale", {&v}, [&](Tape& t) { return t.sum(t.scale(t.param(v), -2.5)); });
  run("matmul_mm", {&a, &b},
      [&](Tape& t) { return t.sum(t.matmul(t.param(a), t.param(b))); });
  run("matmul_mv", {&a, &v},
      [&](Tape& t) { return t.sum(t.matmul(t.param(a), t.param(v))); });
  run("concat", {&v, &w},
      [&](Tape& t) { return t.sum(t.concat({t.param(v), t.param(w)})); });
  run("sigmoid", {&v}, [&](Tape& t) { return t.sum(t.sigmoid(t.param(v))); });
  run("tanh", {&v}, [&](Tape& t) { return t.sum(t.tanh(t.param(v))); });
  run("log_sum_exp", {&v}, [&](Tape& t) { return t.log_sum_exp(t.param(v)); });
  run("max_pool", {&a},
      [&](Tape& t) { return t.sum(t.max_pool_over_time(t.param(a))); });
  run("dropout", {&v}, [&](Tape& t) {
    Rng fixed(99);
    return t.sum(t.dropout(t.param(v), 0.5, true, fixed));
  });
  run("stack_rows", {&v, &w},
      [&](Tape& t) { return t.sum(t.stack_rows({t.param(v), t.param(w)})); });
  run("row", {&a}, [&](Tape& t) { return t.sum(t.row(t.param(a), 1)); });
  run("reshape", {&a}, [&](Tape& t) { return t.sum(t.reshape(t.param(a), {4, 3})); });
  run("transpose", {&a}, [&](Tape& t) { return t.sum(t.transpose(t.param(a))); });
  run("add_to_rows", {&b, &bias2},
      [&](Tape& t) { return t.sum(t.add_to_rows(t.param(b), t.param(bias2))); });
}

TEST_CASE("gradient check: random composite graphs") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Parameter a("a", Tensor::matrix(3, 3, std::vector<double>(9)));
    Parameter x("x", Tensor::vector(std::vector<double>(3)));
    for (std::size_t i = 0; i < a.value.size(); ++i) a.value[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < x.value.size(); ++i) x.value[i] = rng.uniform(-1, 1);

    const auto build = [&](Tape& t) {
      Var av = t.param(a);
      Var xv = t.param(x);
      Var h = t.tanh(t.matmul(av, xv));
      Var g = t.sigmoid(t.matmul(av, h));
      Var mixed = t.mul(h, g);
      return t.add(t.log_sum_exp(mixed), t.sum(t.mul(mixed, mixed)));
    };
    const auto result = check_gradients({&a, &x}, build);
    INFO("worst: " << result.worst);
    CHECK(result.max_rel_error <= 1e-4);
  }
}

TEST_CASE("clip_global_norm") {
  // single gradient (2, 0) at threshold 1 -> (1, 0)
  Tensor g1 = Tensor::vector({2, 0});
  CHECK(clip_global_norm(std::vector<Tensor*>{&g1}, 1.0) == doctest::Approx(2.0));
  CHECK(g1.values() == std::vector<double>{1, 0});

  // under the threshold: unchanged
  Tensor g2 = Tensor::vector({0.3, 0.4});
  clip_global_norm(std::vector<Tensor*>{&g2}, 1.0);
  CHECK(g2.values() == std::vector<double>{0.3, 0.4});

  // global across tensors: joint norm 2 halves both
  Tensor g3 = Tensor::vector({std::sqrt(2.0), 0});
  Tensor g4 = Tensor::vector({0, std::sqrt(2.0)});
  clip_global_norm(std::vector<Tensor*>{&g3, &g4}, 1.0);
  CHECK(g3[0] == doctest::Approx(std::sqrt(2.0) / 2.0));
  CHECK(g4[1] == doctest::Approx(std::sqrt(2.0) / 2.0));

  CHECK_THROWS_AS(clip_global_norm(std::vector<Tensor*>{&g1}, 0.0), NumericError);
}

TEST_CASE("clip_global_norm output norm property") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> tensors;
    for (int k = 0; k < 3; ++k) {
      Tensor t({1 + rng.below(5)});
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-10, 10);
      tensors.push_back(std::move(t));
    }
    std::vector<Tensor*> ptrs{&tensors[0], &tensors[1], &tensors[2]};
    const double threshold = rng.uniform(0.1, 3.0);
    clip_global_norm(ptrs, threshold);
    double sq = 0.0;
    for (const Tensor* t : ptrs) {
      for (std::size_t i = 0; i < t->size(); ++i) sq += (*t)[i] * (*t)[i];
    }
    CHECK(std::sqrt(sq) <= threshold + 1e-12);
  }
}

TEST_CASE("rng determinism and splitting") {
  Rng a(123);
  Rng b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(9);
  CHECK(base.split("x").next_u64() == base.split("x").next_u64());
  CHECK(base.split("x").next_u64() != base.split("y").next_u64());

  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng s1(77), s2(77);
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);

  // normals look sane
  Rng n(4);
  double mean = 0;
  for (int i = 0; i < 10000; ++i) mean += n.normal();
  mean /= 10000;
  CHECK(std::fabs(mean) < 0.05);
}
