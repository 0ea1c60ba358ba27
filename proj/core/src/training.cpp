#include "deepvar/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "deepvar/crf.hpp"
#include "deepvar/errors.hpp"

namespace deepvar {

void TrainConfig::validate() const {
  check_config(batch_size >= 1, "train: batch_size must be >= 1");
  check_config(patience >= 1 || !early_stopping, "train: patience must be >= 1");
}

std::vector<AnnotatedSentence> split_long_sentences(
    const std::vector<AnnotatedSentence>& sentences, std::size_t max_len,
    std::size_t* num_split) {
  std::vector<AnnotatedSentence> out;
  std::size_t splits = 0;
  for (const AnnotatedSentence& s : sentences) {
    if (s.tokens.size() <= max_len) {
      out.push_back(s);
      continue;
    }
    ++splits;
    std::size_t begin = 0;
    while (begin < s.tokens.size()) {
      std::size_t end = std::min(begin + max_len, s.tokens.size());
      if (end < s.tokens.size()) {
        // Back off to a cut that does not land inside an entity span.
        std::size_t cut = end;
        while (cut > begin + 1 && TagSet::is_inside(s.tags[cut])) --cut;
        if (cut > begin) end = cut;
      }
      AnnotatedSentence piece;
      piece.doc_id = s.doc_id;
      piece.text = s.text;
      piece.tokens.assign(s.tokens.begin() + begin, s.tokens.begin() + end);
      piece.tags.assign(s.tags.begin() + begin, s.tags.begin() + end);
      // An orphan I- at a forced cut becomes a begin tag to stay BIO-valid.
      if (!piece.tags.empty() && TagSet::is_inside(piece.tags[0])) {
        piece.tags[0] = TagSet::begin_tag(*TagSet::entity_type_of(piece.tags[0]));
      }
      out.push_back(std::move(piece));
      begin = end;
    }
  }
  if (num_split != nullptr) *num_split = splits;
  return out;
}

BatchSet make_batches(const std::vector<AnnotatedSentence>& sentences,
                      std::size_t batch_size, std::uint64_t seed,
                      std::size_t max_word_length) {
  check_config(batch_size >= 1, "make_batches: batch_size must be >= 1");
  BatchSet set;
  const std::vector<AnnotatedSentence> prepared =
      split_long_sentences(sentences, max_word_length, &set.long_sentences_split);

  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(seed).split("batch-shuffle");
  rng.shuffle(order);

  for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - pos);
    Batch batch;
    for (std::size_t b = 0; b < count; ++b) {
      batch.max_len = std::max(batch.max_len, prepared[order[pos + b]].tokens.size());
    }
    for (std::size_t b = 0; b < count; ++b) {
      const AnnotatedSentence& s = prepared[order[pos + b]];
      batch.lengths.push_back(s.tokens.size());
      std::vector<std::string> tokens(batch.max_len);
      std::vector<int> tags(batch.max_len, TagSet::kOutside);
      std::vector<bool> mask(batch.max_len, false);
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        tokens[t] = s.tokens[t].text;
        tags[t] = s.tags[t];
        mask[t] = true;
      }
      batch.padded_tokens.push_back(std::move(tokens));
      batch.padded_tags.push_back(std::move(tags));
      batch.mask.push_back(std::move(mask));
    }
    set.batches.push_back(std::move(batch));
  }
  return set;
}

Var batch_nll(Tape& tape, const DeepVarModel& model, const Batch& batch, bool training,
              Rng& dropout_rng) {
  check_numeric(!batch.lengths.empty(), "batch_nll: empty batch");
  Var transitions = tape.param(const_cast<DeepVarModel&>(model).transitions());
  Var start{}, stop{};
  auto& m = const_cast<DeepVarModel&>(model);
  if (m.start_scores() != nullptr) start = tape.param(*m.start_scores());
  if (m.stop_scores() != nullptr) stop = tape.param(*m.stop_scores());

  Var total{};
  for (std::size_t b = 0; b < batch.lengths.size(); ++b) {
    const std::size_t len = batch.lengths[b];
    std::vector<std::string> tokens(batch.padded_tokens[b].begin(),
                                    batch.padded_tokens[b].begin() + len);
    std::vector<int> gold(batch.padded_tags[b].begin(), batch.padded_tags[b].begin() + len);
    Var emissions = model.forward_sentence(tape, tokens, training, dropout_rng);
    Var loss = crf_nll(tape, transitions, emissions, gold, start, stop);
    total = b == 0 ? loss : tape.add(total, loss);
  }
  return tape.scale(total, 1.0 / static_cast<double>(batch.lengths.size()));
}

EvalReport evaluate_model(const DeepVarModel& model,
                          const std::vector<AnnotatedSentence>& sentences) {
  std::vector<std::vector<int>> gold, predicted;
  gold.reserve(sentences.size());
  predicted.reserve(sentences.size());
  const std::size_t max_len = model.config().max_word_length;
  std::size_t ignored = 0;
  const std::vector<AnnotatedSentence> prepared =
      split_long_sentences(sentences, max_len, &ignored);
  for (const AnnotatedSentence& s : prepared) {
    std::vector<std::string> texts;
    texts.reserve(s.tokens.size());
    for (const Token& t : s.tokens) texts.push_back(t.text);
    gold.push_back(s.tags);
    predicted.push_back(model.predict_tags(texts));
  }
  return score_tag_output(gold, predicted);
}

TrainReport train(DeepVarModel& model, const DatasetSplit& split,
                  const TrainConfig& train_config, const OptimizerConfig& optimizer_config,
                  std::uint64_t seed) {
  train_config.validate();
  optimizer_config.validate();
  check_data(!split.train.empty(), "train: empty training split");

  const auto start_time = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = seed;
  report.train_sentences = split.train.size();
  report.validation_sentences = split.validation.size();
  report.test_sentences = split.test.size();
  report.best_validation_f1 = -1.0;

  Optimizer optimizer(optimizer_config, model.parameters().all());
  Rng master(seed);
  Rng dropout_rng = master.split("dropout");

  // Best-weight tracking only makes sense when a validation set is monitored;
  // without one the final weights are kept.
  const bool monitored = !split.validation.empty();
  std::vector<Tensor> best_values = model.snapshot_values();
  std::size_t step_index = 0;
  std::size_t stale_epochs = 0;

  for (std::size_t epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    const BatchSet batches =
        make_batches(split.train, train_config.batch_size,
                     master.split("epoch").split(epoch).next_u64(),
                     model.config().max_word_length);
    report.long_sentences_split = batches.long_sentences_split;

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool aborted = false;
    for (const Batch& batch : batches.batches) {
      model.zero_grads();
      Tape tape;
      Var loss = batch_nll(tape, model, batch, /*training=*/true, dropout_rng);
      const double loss_value = tape.value(loss).scalar_value();
      if (!std::isfinite(loss_value)) {
        report.status = "aborted: non-finite loss at epoch " + std::to_string(epoch) +
                        ", step " + std::to_string(step_index);
        aborted = true;
        break;
      }
      tape.backward(loss);
      clip_global_norm(model.parameters().all(), 1.0);
      try {
        optimizer.step(step_index);
      } catch (const NumericError& e) {
        report.status = std::string("aborted: ") + e.what();
        aborted = true;
        break;
      }
      ++step_index;
      loss_sum += loss_value;
      ++loss_count;
    }
    if (aborted) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count);
    if (monitored) {
      const EvalReport val = evaluate_model(model, split.validation);
      stats.validation_macro_f1 = val.macro_f1;
      stats.validation_micro_f1 = val.micro.f1();
      if (stats.validation_macro_f1 > report.best_validation_f1) {
        report.best_validation_f1 = stats.validation_macro_f1;
        report.best_epoch = epoch;
        best_values = model.snapshot_values();
        stats.improved = true;
        stale_epochs = 0;
      } else {
        ++stale_epochs;
      }
    } else {
      report.best_epoch = epoch;
    }
    report.epochs.push_back(stats);

    if (train_config.early_stopping && monitored && stale_epochs >= train_config.patience) {
      break;
    }
  }

  const bool aborted = report.status != "completed";
  if (aborted || (monitored && !report.epochs.empty())) {
    model.restore_values(best_values);  // last known-good weights
  }
  if (!monitored) report.best_validation_f1 = 0.0;
  if (!split.validation.empty() && !report.epochs.empty()) {
    report.validation_report = evaluate_model(model, split.validation);
  }
  if (!split.test.empty() && !report.epochs.empty()) {
    report.test_report = evaluate_model(model, split.test);
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

std::size_t GridSpec::total() const {
  std::size_t n = 1;
  for (const GridAxis& axis : axes) n *= axis.values.size();
  return n;
}

std::vector<std::vector<std::size_t>> enumerate_grid(const GridSpec& spec) {
  for (const GridAxis& axis : spec.axes) {
    check_config(!axis.values.empty(), "grid axis '" + axis.path + "' has no values");
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current(spec.axes.size(), 0);
  const std::size_t total = spec.total();
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    out.push_back(current);
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      if (++current[a] < spec.axes[a].values.size()) break;
      current[a] = 0;
    }
  }
  return out;
}

std::vector<std::size_t> select_trials(std::size_t total, std::size_t budget,
                                       std::uint64_t seed) {
  check_config(budget >= 1, "grid budget must be >= 1");
  std::vector<std::size_t> all(total);
  for (std::size_t i = 0; i < total; ++i) all[i] = i;
  if (budget >= total) return all;
  Rng rng = Rng(seed).split("grid-subsample");
  rng.shuffle(all);
  all.resize(budget);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace deepvar
