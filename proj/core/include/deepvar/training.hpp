#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "deepvar/corpus.hpp"
#include "deepvar/evaluation.hpp"
#include "deepvar/network.hpp"
#include "deepvar/optimizer.hpp"

namespace deepvar {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  bool early_stopping = true;
  std::size_t patience = 10;  // epochs without validation improvement

  void validate() const;
};

// Sentences padded to the batch-wide length; the mask marks real positions.
// Padding tokens are "" with tag O and never reach the loss or the metrics.
struct Batch {
  std::size_t max_len = 0;
  std::vector<std::size_t> lengths;
  std::vector<std::vector<std::string>> padded_tokens;
  std::vector<std::vector<int>> padded_tags;
  std::vector<std::vector<bool>> mask;
};

// Splits sentences longer than max_word_length at the last position that
// does not cut through an entity, then shuffles deterministically under the
// seed and packs consecutive groups.
struct BatchSet {
  std::vector<Batch> batches;
  std::size_t long_sentences_split = 0;
};

std::vector<AnnotatedSentence> split_long_sentences(
    const std::vector<AnnotatedSentence>& sentences, std::size_t max_len,
    std::size_t* num_split);

BatchSet make_batches(const std::vector<AnnotatedSentence>& sentences,
                      std::size_t batch_size, std::uint64_t seed,
                      std::size_t max_word_length);

// Mean of the per-sentence CRF losses over the batch's real positions.
Var batch_nll(Tape& tape, const DeepVarModel& model, const Batch& batch, bool training,
              Rng& dropout_rng);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double validation_macro_f1 = 0.0;
  double validation_micro_f1 = 0.0;
  bool improved = false;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_validation_f1 = 0.0;
  std::optional<EvalReport> validation_report;  // at the restored best weights
  std::optional<EvalReport> test_report;
  std::size_t long_sentences_split = 0;
  std::size_t train_sentences = 0;
  std::size_t validation_sentences = 0;
  std::size_t test_sentences = 0;
  std::uint64_t seed = 0;
  std::string status = "completed";  // or "aborted: <reason>"
  double wall_clock_seconds = 0.0;   // recorded in the log, not the canonical report
};

// Full mini-batch training: shuffle, forward, mean CRF loss, backward,
// global-norm clip at 1.0, optimizer step; early stopping on validation
// exact-match macro-F1 with best-weight restore. Loss divergence aborts with
// the report filled in.
TrainReport train(DeepVarModel& model, const DatasetSplit& split,
                  const TrainConfig& train_config, const OptimizerConfig& optimizer_config,
                  std::uint64_t seed);

// Decode every sentence and score exact-match against the gold tags.
EvalReport evaluate_model(const DeepVarModel& model,
                          const std::vector<AnnotatedSentence>& sentences);

// Hyperparameter grid: named axes, each applied as a config override.
using AxisValue = std::variant<bool, std::int64_t, double, std::string>;

struct GridAxis {
  std::string path;  // config key path, e.g. "model.cnn_window"
  std::vector<AxisValue> values;
};

struct GridSpec {
  std::vector<GridAxis> axes;

  std::size_t total() const;
};

// Row-major enumeration: first axis slowest. Returns value indices per axis.
std::vector<std::vector<std::size_t>> enumerate_grid(const GridSpec& spec);

// Deterministic subsample of [0, total) when budget < total: shuffle under
// the seed, keep the first `budget`, then restore ascending enumeration order.
std::vector<std::size_t> select_trials(std::size_t total, std::size_t budget,
                                       std::uint64_t seed);

}  // namespace deepvar
