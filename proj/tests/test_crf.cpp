#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "deepvar/crf.hpp"
#include "deepvar/errors.hpp"
#include "deepvar/rng.hpp"
#include "support/crf_oracle.hpp"
#include "support/grad_check.hpp"

using namespace deepvar;
using deepvar::testing::check_gradients;
using deepvar::testing::oracle_log_partition;
using deepvar::testing::oracle_path_score;
using deepvar::testing::oracle_viterbi;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("path_score") {
  SUBCASE("N=1 has no transition terms") {
    Rng rng(1);
    const Tensor trans = random_matrix(6, 6, rng);
    Tensor emit({1, 6});
    emit.at(0, 4) = 2.5;
    CHECK(crf_path_score(trans, emit, {4}) == 2.5);
  }
  SUBCASE("zero transitions reduce to selected emissions") {
    Rng rng(2);
    const Tensor trans({6, 6});
    const Tensor emit = random_matrix(4, 6, rng);
    const std::vector<int> z = {0, 3, 5, 1};
    double expect = 0.0;
    for (std::size_t t = 0; t < 4; ++t) expect += emit.at(t, z[t]);
    CHECK(crf_path_score(trans, emit, z) == doctest::Approx(expect).epsilon(1e-15));
  }
  SUBCASE("random instance matches direct re-summation") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor trans = random_matrix(6, 6, rng);
      const Tensor emit = random_matrix(4, 6, rng);
      std::vector<int> z(4);
      for (int& v : z) v = static_cast<int>(rng.below(6));
      CHECK(crf_path_score(trans, emit, z) ==
            doctest::Approx(oracle_path_score(trans, emit, z)).epsilon(1e-12));
    }
  }
  SUBCASE("length mismatch and bad indices rejected") {
    const Tensor trans({6, 6});
    const Tensor emit({2, 6});
    CHECK_THROWS_AS(crf_path_score(trans, emit, {0}), NumericError);
    CHECK_THROWS_AS(crf_path_score(trans, emit, {0, 6}), NumericError);
  }
}

TEST_CASE("log_partition") {
  SUBCASE("N=1 is the log-sum-exp of the emission row") {
    Tensor emit({1, 3});
    emit.at(0, 0) = 1;
    emit.at(0, 1) = 2;
    emit.at(0, 2) = 3;
    const Tensor trans({3, 3});
    const double expect =
        std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    CHECK(crf_log_partition(trans, emit) == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("matches exhaustive enumeration, N=5 K=6") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor trans = random_matrix(6, 6, rng);
      const Tensor emit = random_matrix(5, 6, rng);
      CHECK(std::fabs(crf_log_partition(trans, emit) -
                      oracle_log_partition(trans, emit)) <= 1e-8);
    }
  }
  SUBCASE("row shift additivity") {
    Rng rng(5);
    const Tensor trans = random_matrix(6, 6, rng);
    const Tensor emit = random_matrix(4, 6, rng);
    Tensor shifted = emit;
    std::vector<double> cs = {0.5, -2.0, 1.25, 3.5};
    double total = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t q = 0; q < 6; ++q) shifted.at(t, q) += cs[t];
      total += cs[t];
    }
    CHECK(crf_log_partition(trans, shifted) ==
          doctest::Approx(crf_log_partition(trans, emit) + total).epsilon(1e-12));
  }
}

TEST_CASE("nll_loss") {
  SUBCASE("huge margin drives loss to zero") {
    Tensor emit({3, 6});
    const std::vector<int> gold = {1, 2, 0};
    for (std::size_t t = 0; t < 3; ++t) emit.at(t, gold[t]) = 100.0;
    const Tensor trans({6, 6});
    Tape tape;
    Var loss = crf_nll(tape, tape.constant(trans), tape.constant(emit), gold);
    CHECK(tape.value(loss).scalar_value() >= 0.0);
    CHECK(tape.value(loss).scalar_value() < 1e-6);
  }
  SUBCASE("uniform scores: loss = N * ln K") {
    const Tensor trans({6, 6});
    const Tensor emit({2, 6});
    Tape tape;
    Var loss = crf_nll(tape, tape.constant(trans), tape.constant(emit), {0, 0});
    CHECK(tape.value(loss).scalar_value() ==
          doctest::Approx(2.0 * std::log(6.0)).epsilon(1e-12));
  }
  SUBCASE("invalid gold index rejected") {
    const Tensor trans({6, 6});
    const Tensor emit({2, 6});
    Tape tape;
    CHECK_THROWS_AS(crf_nll(tape, tape.constant(trans), tape.constant(emit), {0, 7}),
                    NumericError);
  }
  SUBCASE("loss is never negative") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const Tensor trans = random_matrix(6, 6, rng);
      const Tensor emit = random_matrix(3, 6, rng);
      std::vector<int> gold(3);
      for (int& v : gold) v = static_cast<int>(rng.below(6));
      Tape tape;
      Var loss = crf_nll(tape, tape.constant(trans), tape.constant(emit), gold);
      CHECK(tape.value(loss).scalar_value() >= 0.0);
    }
  }
}

TEST_CASE("nll gradients match finite differences") {
  Rng rng(7);
  Parameter trans("transitions", random_matrix(6, 6, rng));
  Parameter emit("emissions", random_matrix(4, 6, rng));
  const std::vector<int> gold = {0, 2, 5, 1};
  const auto result = check_gradients({&trans, &emit}, [&](Tape& t) {
    return crf_nll(t, t.param(trans), t.param(emit), gold);
  });
  INFO("worst: " << result.worst);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("log_partition gradients match finite differences") {
  Rng rng(8);
  Parameter trans("transitions", random_matrix(6, 6, rng));
  Parameter emit("emissions", random_matrix(5, 6, rng));
  const auto result = check_gradients({&trans, &emit}, [&](Tape& t) {
    return crf_log_partition(t, t.param(trans), t.param(emit));
  });
  INFO("worst: " << result.worst);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("viterbi") {
  SUBCASE("N=1 argmax with lowest-index ties") {
    const Tensor trans({6, 6});
    Tensor emit({1, 6});
    emit.at(0, 2) = 7;
    emit.at(0, 4) = 7;  // tie: pick 2
    CHECK(crf_viterbi(trans, emit) == std::vector<int>{2});
  }
  SUBCASE("zero transitions: per-position argmax") {
    const Tensor trans({6, 6});
    Tensor emit({3, 6});
    emit.at(0, 1) = 5;
    emit.at(1, 5) = 3;
    emit.at(2, 0) = 1;
    CHECK(crf_viterbi(trans, emit) == std::vector<int>{1, 5, 0});
  }
  SUBCASE("all-equal scores pick the all-zeros path") {
    const Tensor trans({6, 6});
    const Tensor emit({4, 6});
    CHECK(crf_viterbi(trans, emit) == std::vector<int>{0, 0, 0, 0});
  }
  SUBCASE("constructed integer tie follows the backtrack rule") {
    // exactly two max paths, (0,1) and (1,0), tied at score 2 with integer
    // arithmetic; lowest-index backtracking minimizes the LAST tag first, so
    // the winner is (1,0), not the forward-lexicographic (0,1)
    Tensor emit({2, 3});
    emit.at(0, 0) = 1;
    emit.at(0, 2) = -5;
    emit.at(1, 1) = 1;
    emit.at(1, 2) = -5;
    Tensor trans({3, 3});
    trans.at(1, 0) = 2;
    CHECK(crf_path_score(trans, emit, {0, 1}) == 2.0);
    CHECK(crf_path_score(trans, emit, {1, 0}) == 2.0);
    CHECK(crf_viterbi(trans, emit) == std::vector<int>{1, 0});
    CHECK(oracle_viterbi(trans, emit) == std::vector<int>{1, 0});
  }
  SUBCASE("matches exhaustive argmax, N=5 K=6") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor trans = random_matrix(6, 6, rng);
      const Tensor emit = random_matrix(5, 6, rng);
      CHECK(crf_viterbi(trans, emit) == oracle_viterbi(trans, emit));
    }
  }
}

TEST_CASE("normalization: path probabilities sum to one") {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    const Tensor trans = random_matrix(6, 6, rng);
    const Tensor emit = random_matrix(n, 6, rng);
    const double log_z = crf_log_partition(trans, emit);
    std::vector<int> path(n, 0);
    double total = 0.0;
    do {
      total += std::exp(crf_path_score(trans, emit, path) - log_z);
    } while (deepvar::testing::next_path(path, 6));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("dominance: viterbi beats 1000 random paths") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor trans = random_matrix(6, 6, rng);
    const Tensor emit = random_matrix(7, 6, rng);
    const std::vector<int> best = crf_viterbi(trans, emit);
    const double best_score = crf_path_score(trans, emit, best);
    for (int k = 0; k < 1000; ++k) {
      std::vector<int> z(7);
      for (int& v : z) v = static_cast<int>(rng.below(6));
      CHECK(crf_path_score(trans, emit, z) <= best_score + 1e-12);
    }
  }
}

TEST_CASE("optional start/stop scores") {
  Rng rng(12);
  Tensor start({6}), stop({6});
  for (std::size_t i = 0; i < 6; ++i) {
    start[i] = rng.normal();
    stop[i] = rng.normal();
  }
  const Tensor trans = random_matrix(6, 6, rng);
  const Tensor emit = random_matrix(4, 6, rng);

  SUBCASE("partition matches enumeration with bonuses") {
    CHECK(std::fabs(crf_log_partition(trans, emit, &start, &stop) -
                    oracle_log_partition(trans, emit, &start, &stop)) <= 1e-8);
  }
  SUBCASE("viterbi matches enumeration with bonuses") {
    CHECK(crf_viterbi(trans, emit, &start, &stop) ==
          oracle_viterbi(trans, emit, &start, &stop));
  }
  SUBCASE("gradients flow into start/stop") {
    Parameter ptrans("t", trans);
    Parameter pemit("e", emit);
    Parameter pstart("s", start);
    Parameter pstop("p", stop);
    const std::vector<int> gold = {5, 0, 1, 3};
    const auto result =
        check_gradients({&ptrans, &pemit, &pstart, &pstop}, [&](Tape& t) {
          return crf_nll(t, t.param(ptrans), t.param(pemit), gold, t.param(pstart),
                         t.param(pstop));
        });
    INFO("worst: " << result.worst);
    CHECK(result.max_rel_error <= 1e-4);
  }
}
