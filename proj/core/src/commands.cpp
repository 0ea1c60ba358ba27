#include "deepvar/commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "deepvar/checkpoint.hpp"
#include "deepvar/crf.hpp"
#include "deepvar/errors.hpp"
#include "json_util.hpp"

namespace deepvar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  check_data(!ec, "cannot create directory: " + dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json eval_report_json(const EvalReport& r) { return json::parse(r.to_json()); }

json train_report_to_json(const TrainReport& r, const RunConfig& config) {
  json j;
  j["config"] = run_config_to_json(config);
  j["status"] = r.status;
  j["best_epoch"] = r.best_epoch;
  j["best_validation_f1"] = r.best_validation_f1;
  j["train_sentences"] = r.train_sentences;
  j["validation_sentences"] = r.validation_sentences;
  j["test_sentences"] = r.test_sentences;
  j["long_sentences_split"] = r.long_sentences_split;
  j["seed"] = r.seed;
  json epochs = json::array();
  for (const EpochStats& e : r.epochs) {
    epochs.push_back(json{{"epoch", e.epoch},
                          {"mean_loss", e.mean_loss},
                          {"validation_macro_f1", e.validation_macro_f1},
                          {"validation_micro_f1", e.validation_micro_f1},
                          {"improved", e.improved}});
  }
  j["epochs"] = epochs;
  if (r.validation_report) j["validation"] = eval_report_json(*r.validation_report);
  if (r.test_report) j["test"] = eval_report_json(*r.test_report);
  return j;
}

TrainReport train_report_from_json(const json& j) {
  TrainReport r;
  r.status = j.at("status").get<std::string>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_validation_f1 = j.at("best_validation_f1").get<double>();
  r.train_sentences = j.at("train_sentences").get<std::size_t>();
  r.validation_sentences = j.at("validation_sentences").get<std::size_t>();
  r.test_sentences = j.at("test_sentences").get<std::size_t>();
  r.long_sentences_split = j.at("long_sentences_split").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("epochs")) {
    EpochStats stats;
    stats.epoch = e.at("epoch").get<std::size_t>();
    stats.mean_loss = e.at("mean_loss").get<double>();
    stats.validation_macro_f1 = e.at("validation_macro_f1").get<double>();
    stats.validation_micro_f1 = e.at("validation_micro_f1").get<double>();
    stats.improved = e.at("improved").get<bool>();
    r.epochs.push_back(stats);
  }
  if (j.contains("validation")) {
    r.validation_report = parse_eval_report(j.at("validation").dump());
  }
  if (j.contains("test")) r.test_report = parse_eval_report(j.at("test").dump());
  return r;
}

// Wall clock lives only in the log so reports stay byte-identical across runs.
std::string train_log_text(const TrainReport& r) {
  std::string out;
  for (const EpochStats& e : r.epochs) {
    json line{{"event", "epoch"},
              {"epoch", e.epoch},
              {"mean_loss", e.mean_loss},
              {"validation_macro_f1", e.validation_macro_f1},
              {"improved", e.improved}};
    out += line.dump() + "\n";
  }
  json done{{"event", "done"},
            {"status", r.status},
            {"best_epoch", r.best_epoch},
            {"wall_clock_seconds", r.wall_clock_seconds}};
  out += done.dump() + "\n";
  return out;
}

std::vector<std::string> collect_vocab(const std::vector<AnnotatedSentence>& sentences) {
  std::set<std::string> words;
  for (const AnnotatedSentence& s : sentences) {
    for (const Token& t : s.tokens) words.insert(t.text);
  }
  return {words.begin(), words.end()};
}

EmbeddingTable resolve_embeddings(const EmbeddingsConfig& cfg,
                                  const std::vector<AnnotatedSentence>& train_sentences) {
  if (!cfg.path.empty()) {
    if (fs::exists(cfg.path)) return load_word_vectors(cfg.path);
    check_data(cfg.fallback_to_random && cfg.random_dimension >= 1,
               "embedding file not found: " + cfg.path +
                   " (random-init fallback is disabled)");
  } else {
    check_config(cfg.random_dimension >= 1,
                 "embeddings: set either 'path' or 'random_dimension'");
  }
  return random_embeddings(collect_vocab(train_sentences), cfg.random_dimension,
                           Rng(cfg.random_seed).split("embeddings"));
}

}  // namespace

PrepareResult cmd_prepare(const std::string& config_path, const std::string& out_dir_override) {
  const json j = load_json_file(config_path);
  require_keys(j, {"text", "annotations", "output_bio", "alignment_report", "tokenizer", "out_dir"},
               "prepare config " + config_path);
  const auto need = [&](const char* key) {
    check_config(j.contains(key), "prepare config: missing required key '" + std::string(key) + "'");
    return j.at(key).get<std::string>();
  };
  const std::string text_path = need("text");
  const std::string ann_path = need("annotations");
  std::string out_dir = out_dir_override.empty()
                            ? (j.contains("out_dir") ? j.at("out_dir").get<std::string>() : ".")
                            : out_dir_override;
  ensure_dir(out_dir);
  const std::string bio_path =
      join_path(out_dir, j.contains("output_bio") ? j.at("output_bio").get<std::string>()
                                                  : "corpus.bio");
  const std::string report_path = join_path(
      out_dir, j.contains("alignment_report") ? j.at("alignment_report").get<std::string>()
                                              : "alignment.txt");

  TokenizerConfig tokenizer;
  if (j.contains("tokenizer")) {
    const RunConfig probe =
        run_config_from_json(json{{"tokenizer", j.at("tokenizer")}}, "prepare config");
    tokenizer = probe.tokenizer;
  }

  const OffsetCorpus corpus = load_offset_annotations(text_path, ann_path, tokenizer);
  write_bio_file(bio_path, corpus.sentences);
  write_text_file(report_path, corpus.report.to_text());

  PrepareResult result;
  result.sentences = corpus.sentences.size();
  result.aligned = corpus.report.aligned;
  result.misaligned = corpus.report.misaligned();
  result.bio_path = bio_path;
  result.report_path = report_path;
  return result;
}

TrainResult run_training(const RunConfig& config) {
  check_config(!config.data.train_path.empty(), "data.train is required");
  DatasetSplit split;
  split.train = load_bio_file(config.data.train_path);
  if (!config.data.validation_path.empty()) {
    split.validation = load_bio_file(config.data.validation_path);
  } else if (config.data.holdout_fraction > 0.0) {
    auto [train, validation] =
        split_holdout(split.train, config.data.holdout_fraction, config.data.holdout_seed);
    split.train = std::move(train);
    split.validation = std::move(validation);
  }
  if (!config.data.test_path.empty()) split.test = load_bio_file(config.data.test_path);

  const EmbeddingTable table = resolve_embeddings(config.embeddings, split.train);
  DeepVarModel model(config.model, CharAlphabet::standard(), table,
                     Rng(config.seed).split("init"));

  TrainResult result;
  result.config = config;
  result.report = train(model, split, config.train, config.optimizer, config.seed);

  ensure_dir(config.out_dir);
  result.checkpoint_path = join_path(config.out_dir, "checkpoint.dvar");
  result.report_path = join_path(config.out_dir, "report.json");
  result.log_path = join_path(config.out_dir, "train.log");
  save_checkpoint(result.checkpoint_path, model, config.tokenizer);
  write_text_file(result.report_path,
                  train_report_to_json(result.report, config).dump(2) + "\n");
  write_text_file(result.log_path, train_log_text(result.report));
  return result;
}

TrainResult cmd_train(const std::string& config_path,
                      std::optional<std::uint64_t> seed_override,
                      const std::string& out_dir_override) {
  RunConfig config = load_run_config(config_path);
  if (seed_override) config.seed = *seed_override;
  if (!out_dir_override.empty()) config.out_dir = out_dir_override;
  return run_training(config);
}

TrainReport load_train_report(const std::string& path) {
  try {
    return train_report_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw DataError("train report " + path + ": " + e.what());
  }
}

TagResult cmd_tag(const std::string& checkpoint_path, const std::string& input_path,
                  const std::string& output_path, const std::string& input_format) {
  check_config(input_format == "text" || input_format == "bio",
               "tag: input_format must be 'text' or 'bio', got '" + input_format + "'");
  LoadedModel loaded = load_checkpoint(checkpoint_path);

  std::vector<std::vector<Token>> sentences;
  if (input_format == "bio") {
    // tags in the input are ignored, so BIO validity is not required
    for (const AnnotatedSentence& s : load_bio_file(input_path, /*validate_bio=*/false)) {
      sentences.push_back(s.tokens);
    }
  } else {
    const std::string text = read_text_file(input_path);
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      const std::string line =
          text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
      if (!line.empty()) sentences.push_back(tokenize(line, loaded.tokenizer));
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
  }

  TagResult result;
  std::string out;
  const std::size_t max_len = loaded.model->config().max_word_length;
  for (const std::vector<Token>& tokens : sentences) {
    if (tokens.empty()) continue;
    std::vector<std::string> texts;
    texts.reserve(tokens.size());
    for (const Token& t : tokens) texts.push_back(t.text);

    // Long sentences are decoded in chunks, mirroring training.
    std::vector<int> tags;
    for (std::size_t begin = 0; begin < texts.size(); begin += max_len) {
      const std::size_t end = std::min(begin + max_len, texts.size());
      std::vector<std::string> piece(texts.begin() + begin, texts.begin() + end);
      const std::vector<int> piece_tags = loaded.model->predict_tags(piece);
      tags.insert(tags.end(), piece_tags.begin(), piece_tags.end());
    }

    for (std::size_t i = 0; i < tokens.size(); ++i) {
      out += tokens[i].text;
      out += '\t';
      out += TagSet::name(tags[i]);
      out += '\n';
    }
    for (const EntitySpan& span : bio_to_spans(tags, tokens)) {
      std::string surface;
      for (std::size_t t = span.token_start; t <= span.token_end; ++t) {
        if (t > span.token_start) surface += ' ';
        surface += tokens[t].text;
      }
      out += "# span\t" + std::string(entity_type_name(span.type)) + "\t" +
             std::to_string(span.token_start) + "\t" + std::to_string(span.token_end) +
             "\t" + surface + "\n";
      ++result.entities;
    }
    out += '\n';
    ++result.sentences;
  }
  write_text_file(output_path, out);
  return result;
}

EvalReport cmd_evaluate(const std::string& gold_path, const std::string& predicted_path,
                        const std::string& out_dir) {
  const std::vector<AnnotatedSentence> gold = load_bio_file(gold_path);
  // decoder output may contain orphan I- tags; scoring recovers those spans
  const std::vector<AnnotatedSentence> predicted =
      load_bio_file(predicted_path, /*validate_bio=*/false);
  check_data(gold.size() == predicted.size(),
             "evaluate: gold has " + std::to_string(gold.size()) +
                 " sentences, predicted has " + std::to_string(predicted.size()));
  std::vector<std::vector<int>> gold_tags, predicted_tags;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    check_data(gold[i].tokens.size() == predicted[i].tokens.size(),
               "evaluate: token count mismatch in sentence " + std::to_string(i));
    for (std::size_t t = 0; t < gold[i].tokens.size(); ++t) {
      check_data(gold[i].tokens[t].text == predicted[i].tokens[t].text,
                 "evaluate: token text mismatch in sentence " + std::to_string(i) +
                     ": '" + gold[i].tokens[t].text + "' vs '" +
                     predicted[i].tokens[t].text + "'");
    }
    gold_tags.push_back(gold[i].tags);
    predicted_tags.push_back(predicted[i].tags);
  }
  const EvalReport report = score_tag_output(gold_tags, predicted_tags);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text_file(join_path(out_dir, "eval.txt"), report.to_text());
    write_text_file(join_path(out_dir, "eval.json"), report.to_json());
  }
  return report;
}

namespace {

json axis_value_to_json(const AxisValue& v) {
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  return std::get<std::string>(v);
}

AxisValue axis_value_from_json(const json& j, const std::string& axis) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw ConfigError("grid axis '" + axis + "': values must be scalars");
}

json apply_axes(const json& base, const GridSpec& spec,
                const std::vector<std::size_t>& value_indices) {
  json trial = base;
  for (std::size_t a = 0; a < spec.axes.size(); ++a) {
    std::string pointer = "/" + spec.axes[a].path;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    trial[json::json_pointer(pointer)] =
        axis_value_to_json(spec.axes[a].values[value_indices[a]]);
  }
  return trial;
}

}  // namespace

GridResult cmd_grid(const std::string& config_path, std::size_t jobs, bool resume,
                    std::optional<std::uint64_t> seed_override,
                    const std::string& out_dir_override) {
  const json j = load_json_file(config_path);
  require_keys(j, {"base", "grid", "out_dir"}, "grid config " + config_path);
  check_config(j.contains("base") && j.contains("grid"),
               "grid config needs 'base' and 'grid' sections");
  json base = j.at("base");
  const json& grid = j.at("grid");
  require_keys(grid, {"axes", "budget", "seed"}, "grid config .grid");

  std::string out_dir = out_dir_override;
  if (out_dir.empty()) {
    out_dir = j.contains("out_dir") ? j.at("out_dir").get<std::string>() : "grid-out";
  }
  if (seed_override) base["seed"] = *seed_override;

  GridSpec spec;
  check_config(grid.contains("axes") && grid.at("axes").is_array() && !grid.at("axes").empty(),
               "grid config: 'axes' must be a non-empty array");
  for (const auto& axis_json : grid.at("axes")) {
    require_keys(axis_json, {"path", "values"}, "grid axis");
    GridAxis axis;
    axis.path = axis_json.at("path").get<std::string>();
    const std::string section = axis.path.substr(0, axis.path.find('.'));
    check_config(section == "model" || section == "train" || section == "optimizer" ||
                     section == "embeddings" || section == "data" || section == "seed",
                 "grid axis '" + axis.path + "': unknown config section '" + section + "'");
    check_config(axis_json.at("values").is_array() && !axis_json.at("values").empty(),
                 "grid axis '" + axis.path + "': 'values' must be a non-empty array");
    for (const auto& v : axis_json.at("values")) {
      axis.values.push_back(axis_value_from_json(v, axis.path));
    }
    spec.axes.push_back(std::move(axis));
  }

  // Every axis value must produce a parseable config; errors name the axis.
  const std::vector<std::vector<std::size_t>> grid_points = enumerate_grid(spec);
  for (std::size_t a = 0; a < spec.axes.size(); ++a) {
    for (std::size_t vi = 0; vi < spec.axes[a].values.size(); ++vi) {
      std::vector<std::size_t> probe(spec.axes.size(), 0);
      probe[a] = vi;
      try {
        (void)run_config_from_json(apply_axes(base, spec, probe), "grid trial");
      } catch (const ConfigError& e) {
        throw ConfigError("grid axis '" + spec.axes[a].path + "': " + e.what());
      }
    }
  }

  const std::size_t budget =
      grid.contains("budget") ? grid.at("budget").get<std::size_t>() : grid_points.size();
  const std::uint64_t grid_seed =
      grid.contains("seed") ? grid.at("seed").get<std::uint64_t>() : 0;
  const std::vector<std::size_t> selected =
      select_trials(grid_points.size(), budget, grid_seed);

  ensure_dir(out_dir);
  std::vector<TrialOutcome> outcomes(selected.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    while (true) {
      const std::size_t slot = cursor.fetch_add(1);
      if (slot >= selected.size()) return;
      const std::size_t trial = selected[slot];
      char name[32];
      std::snprintf(name, sizeof(name), "trial-%04zu", trial);
      const std::string trial_dir = join_path(out_dir, name);
      TrialOutcome outcome;
      outcome.trial_index = trial;
      outcome.directory = trial_dir;
      try {
        const std::string report_path = join_path(trial_dir, "report.json");
        if (resume && fs::exists(report_path)) {
          const json existing = load_json_file(report_path);
          outcome.validation_f1 = existing.at("best_validation_f1").get<double>();
          outcome.reused = true;
        } else {
          json trial_json = apply_axes(base, spec, grid_points[trial]);
          trial_json["out_dir"] = trial_dir;
          RunConfig rc = run_config_from_json(trial_json, std::string(name));
          const TrainResult tr = run_training(rc);
          outcome.validation_f1 = tr.report.best_validation_f1;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      outcomes[slot] = outcome;
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, selected.size()); ++t) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::sort(outcomes.begin(), outcomes.end(), [](const TrialOutcome& a, const TrialOutcome& b) {
    if (a.validation_f1 != b.validation_f1) return a.validation_f1 > b.validation_f1;
    return a.trial_index < b.trial_index;  // stable ties by enumeration order
  });

  json ranking = json::array();
  std::string ranking_text;
  for (const TrialOutcome& o : outcomes) {
    json axes_json;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      axes_json[spec.axes[a].path] =
          axis_value_to_json(spec.axes[a].values[grid_points[o.trial_index][a]]);
    }
    ranking.push_back(json{{"trial", o.trial_index},
                           {"validation_f1", o.validation_f1},
                           {"directory", o.directory},
                           {"reused", o.reused},
                           {"axes", axes_json}});
    char buf[128];
    std::snprintf(buf, sizeof(buf), "trial-%04zu  f1=%.4f%s\n", o.trial_index,
                  o.validation_f1, o.reused ? "  (resumed)" : "");
    ranking_text += buf;
  }
  write_text_file(join_path(out_dir, "ranking.json"), ranking.dump(2) + "\n");
  write_text_file(join_path(out_dir, "ranking.txt"), ranking_text);

  GridResult result;
  result.ranking = std::move(outcomes);
  result.grid_size = grid_points.size();
  return result;
}

}  // namespace deepvar
