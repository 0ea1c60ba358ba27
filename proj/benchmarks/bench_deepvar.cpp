#include <benchmark/benchmark.h>

#include "deepvar/crf.hpp"
#include "deepvar/embeddings.hpp"
#include "deepvar/network.hpp"
#include "deepvar/rng.hpp"
#include "deepvar/tokenizer.hpp"

namespace {

using namespace deepvar;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

void BM_tokenize(benchmark::State& state) {
  const TokenizerConfig config = TokenizerConfig::standard();
  const std::string sentence =
      "We identified T10191C(P.S45P) and c.399_402del AGAG in ND3, plus rs2234671.";
  for (auto _ : state) {
    benchmark::DoNotOptimize(tokenize(sentence, config));
  }
}
BENCHMARK(BM_tokenize);

void BM_viterbi(benchmark::State& state) {
  Rng rng(1);
  const Tensor trans = random_matrix(6, 6, rng);
  const Tensor emit = random_matrix(static_cast<std::size_t>(state.range(0)), 6, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crf_viterbi(trans, emit));
  }
}
BENCHMARK(BM_viterbi)->Arg(10)->Arg(40)->Arg(115);

void BM_log_partition(benchmark::State& state) {
  Rng rng(2);
  const Tensor trans = random_matrix(6, 6, rng);
  const Tensor emit = random_matrix(static_cast<std::size_t>(state.range(0)), 6, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crf_log_partition(trans, emit));
  }
}
BENCHMARK(BM_log_partition)->Arg(10)->Arg(40)->Arg(115);

void BM_forward_sentence(benchmark::State& state) {
  ModelConfig config;
  config.char_encoder =
      state.range(0) == 0 ? CharEncoderKind::kCnn : CharEncoderKind::kBilstm;
  config.max_char_length = 15;
  config.cnn_filters = 30;
  config.cnn_window = 3;
  config.char_lstm_states = 25;
  config.word_lstm_states = 50;
  config.units = 1;
  config.hidden_states = 50;
  DeepVarModel model(config, CharAlphabet::standard(),
                     random_embeddings({"We", "identified", "in", "ND3", "."}, 50, Rng(3)),
                     Rng(4));
  const std::vector<std::string> sentence = {"We", "identified", "rs2234671",
                                             "in",  "ND3",       "."};
  Rng rng(5);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(model.forward_sentence(tape, sentence, false, rng));
  }
}
BENCHMARK(BM_forward_sentence)->Arg(0)->Arg(1);

void BM_train_step(benchmark::State& state) {
  ModelConfig config;
  config.max_char_length = 15;
  config.cnn_filters = 30;
  config.cnn_window = 3;
  config.word_lstm_states = 25;
  config.units = 1;
  config.hidden_states = 50;
  DeepVarModel model(config, CharAlphabet::standard(),
                     random_embeddings({"We", "identified", "in", "ND3", "."}, 25, Rng(3)),
                     Rng(4));
  const std::vector<std::string> sentence = {"We", "identified", "rs2234671",
                                             "in",  "ND3",       "."};
  const std::vector<int> gold = {0, 0, 5, 0, 0, 0};
  Rng rng(6);
  for (auto _ : state) {
    model.zero_grads();
    Tape tape;
    Var em = model.forward_sentence(tape, sentence, true, rng);
    Var loss = crf_nll(tape, tape.param(model.transitions()), em, gold);
    tape.backward(loss);
    benchmark::DoNotOptimize(model.transitions().grad);
  }
}
BENCHMARK(BM_train_step);

}  // namespace

BENCHMARK_MAIN();
