#include "deepvar/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace deepvar {

using nlohmann::json;

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  check_config(obj.is_object(), context + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    check_config(ok, "unknown key '" + key + "' in " + context);
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  check_data(in.is_open(), "cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.is_open(), "cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.is_open(), "cannot write file: " + path);
  out << content;
  check_data(out.good(), "failed writing file: " + path);
}

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

ModelConfig parse_model(const json& j, const std::string& context) {
  require_keys(j,
               {"char_encoder", "max_char_length", "cnn_filters", "cnn_window",
                "char_lstm_states", "char_emb_dropout", "char_lstm_dropout",
                "word_lstm_states", "word_lstm_dropout", "units", "hidden_states",
                "hidden_dropout", "max_word_length", "candidate_activation",
                "dense_activation", "crf_start_stop", "fine_tune_embeddings"},
               context);
  ModelConfig c;
  const std::string enc = get_or<std::string>(j, "char_encoder", "cnn");
  check_config(enc == "cnn" || enc == "bilstm",
               context + ": char_encoder must be 'cnn' or 'bilstm', got '" + enc + "'");
  c.char_encoder = enc == "cnn" ? CharEncoderKind::kCnn : CharEncoderKind::kBilstm;
  c.max_char_length = get_or<std::size_t>(j, "max_char_length", c.max_char_length);
  c.cnn_filters = get_or<std::size_t>(j, "cnn_filters", c.cnn_filters);
  c.cnn_window = get_or<std::size_t>(j, "cnn_window", c.cnn_window);
  c.char_lstm_states = get_or<std::size_t>(j, "char_lstm_states", c.char_lstm_states);
  c.char_emb_dropout = get_or<double>(j, "char_emb_dropout", c.char_emb_dropout);
  c.char_lstm_dropout = get_or<double>(j, "char_lstm_dropout", c.char_lstm_dropout);
  c.word_lstm_states = get_or<std::size_t>(j, "word_lstm_states", c.word_lstm_states);
  c.word_lstm_dropout = get_or<double>(j, "word_lstm_dropout", c.word_lstm_dropout);
  c.units = get_or<std::size_t>(j, "units", c.units);
  c.hidden_states = get_or<std::size_t>(j, "hidden_states", c.hidden_states);
  c.hidden_dropout = get_or<double>(j, "hidden_dropout", c.hidden_dropout);
  c.max_word_length = get_or<std::size_t>(j, "max_word_length", c.max_word_length);

  const auto activation = [&](const char* key, Activation fallback) {
    const std::string s = get_or<std::string>(
        j, key,
        fallback == Activation::kTanh ? "tanh"
                                      : (fallback == Activation::kSigmoid ? "sigmoid" : "identity"));
    if (s == "tanh") return Activation::kTanh;
    if (s == "sigmoid") return Activation::kSigmoid;
    if (s == "identity") return Activation::kIdentity;
    throw ConfigError(context + ": " + key + " must be tanh|sigmoid|identity, got '" + s + "'");
  };
  c.candidate_activation = activation("candidate_activation", Activation::kTanh);
  c.dense_activation = activation("dense_activation", Activation::kTanh);
  c.crf_start_stop = get_or<bool>(j, "crf_start_stop", false);
  c.fine_tune_embeddings = get_or<bool>(j, "fine_tune_embeddings", false);
  c.validate();
  return c;
}

TrainConfig parse_train(const json& j, const std::string& context) {
  require_keys(j, {"batch_size", "max_epochs", "early_stopping", "patience"}, context);
  TrainConfig c;
  c.batch_size = get_or<std::size_t>(j, "batch_size", c.batch_size);
  c.max_epochs = get_or<std::size_t>(j, "max_epochs", c.max_epochs);
  c.early_stopping = get_or<bool>(j, "early_stopping", c.early_stopping);
  c.patience = get_or<std::size_t>(j, "patience", c.patience);
  c.validate();
  return c;
}

OptimizerConfig parse_optimizer(const json& j, const std::string& context) {
  require_keys(j,
               {"kind", "learning_rate", "decay", "momentum", "nesterov", "rms_decay",
                "beta1", "beta2", "epsilon"},
               context);
  OptimizerConfig c;
  const std::string kind = get_or<std::string>(j, "kind", "adam");
  if (kind == "sgd") {
    c.kind = OptimizerKind::kSgd;
  } else if (kind == "rmsp" || kind == "rmsprop") {
    c.kind = OptimizerKind::kRmsProp;
  } else if (kind == "adam") {
    c.kind = OptimizerKind::kAdam;
  } else {
    throw ConfigError(context + ": kind must be sgd|rmsp|adam, got '" + kind + "'");
  }
  c.learning_rate = get_or<double>(j, "learning_rate", c.learning_rate);
  c.decay = get_or<double>(j, "decay", c.decay);
  c.momentum = get_or<double>(j, "momentum", c.momentum);
  c.nesterov = get_or<bool>(j, "nesterov", c.nesterov);
  c.rms_decay = get_or<double>(j, "rms_decay", c.rms_decay);
  c.beta1 = get_or<double>(j, "beta1", c.beta1);
  c.beta2 = get_or<double>(j, "beta2", c.beta2);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
  c.validate();
  return c;
}

DataConfig parse_data(const json& j, const std::string& context) {
  require_keys(j, {"train", "validation", "test", "holdout_fraction", "holdout_seed"},
               context);
  DataConfig c;
  c.train_path = get_or<std::string>(j, "train", "");
  c.validation_path = get_or<std::string>(j, "validation", "");
  c.test_path = get_or<std::string>(j, "test", "");
  c.holdout_fraction = get_or<double>(j, "holdout_fraction", c.holdout_fraction);
  c.holdout_seed = get_or<std::uint64_t>(j, "holdout_seed", c.holdout_seed);
  return c;
}

EmbeddingsConfig parse_embeddings(const json& j, const std::string& context) {
  require_keys(j, {"path", "random_dimension", "random_seed", "fallback_to_random"},
               context);
  EmbeddingsConfig c;
  c.path = get_or<std::string>(j, "path", "");
  c.random_dimension = get_or<std::size_t>(j, "random_dimension", 0);
  c.random_seed = get_or<std::uint64_t>(j, "random_seed", 1);
  c.fallback_to_random = get_or<bool>(j, "fallback_to_random", false);
  return c;
}

TokenizerConfig parse_tokenizer(const json& j, const std::string& context) {
  require_keys(j, {"split_chars", "strip_chars", "bracket_pairs"}, context);
  TokenizerConfig c;
  c.split_chars = get_or<std::string>(j, "split_chars", c.split_chars);
  c.strip_chars = get_or<std::string>(j, "strip_chars", c.strip_chars);
  if (j.contains("bracket_pairs")) {
    c.bracket_pairs.clear();
    for (const auto& pair : j.at("bracket_pairs")) {
      const std::string s = pair.get<std::string>();
      check_config(s.size() == 2,
                   context + ": bracket pairs must be two-character strings, got '" + s + "'");
      c.bracket_pairs.emplace_back(s[0], s[1]);
    }
  }
  c.validate();
  return c;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::string& context) {
  require_keys(
      j, {"seed", "out_dir", "model", "train", "optimizer", "data", "embeddings", "tokenizer"},
      context);
  RunConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
  if (j.contains("model")) c.model = parse_model(j.at("model"), context + ".model");
  if (j.contains("train")) c.train = parse_train(j.at("train"), context + ".train");
  if (j.contains("optimizer")) {
    c.optimizer = parse_optimizer(j.at("optimizer"), context + ".optimizer");
  }
  if (j.contains("data")) c.data = parse_data(j.at("data"), context + ".data");
  if (j.contains("embeddings")) {
    c.embeddings = parse_embeddings(j.at("embeddings"), context + ".embeddings");
  }
  if (j.contains("tokenizer")) {
    c.tokenizer = parse_tokenizer(j.at("tokenizer"), context + ".tokenizer");
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["model"] = {
      {"char_encoder", c.model.char_encoder == CharEncoderKind::kCnn ? "cnn" : "bilstm"},
      {"max_char_length", c.model.max_char_length},
      {"cnn_filters", c.model.cnn_filters},
      {"cnn_window", c.model.cnn_window},
      {"char_lstm_states", c.model.char_lstm_states},
      {"char_emb_dropout", c.model.char_emb_dropout},
      {"char_lstm_dropout", c.model.char_lstm_dropout},
      {"word_lstm_states", c.model.word_lstm_states},
      {"word_lstm_dropout", c.model.word_lstm_dropout},
      {"units", c.model.units},
      {"hidden_states", c.model.hidden_states},
      {"hidden_dropout", c.model.hidden_dropout},
      {"max_word_length", c.model.max_word_length},
      {"candidate_activation",
       c.model.candidate_activation == Activation::kSigmoid ? "sigmoid" : "tanh"},
      {"dense_activation",
       c.model.dense_activation == Activation::kIdentity
           ? "identity"
           : (c.model.dense_activation == Activation::kSigmoid ? "sigmoid" : "tanh")},
      {"crf_start_stop", c.model.crf_start_stop},
      {"fine_tune_embeddings", c.model.fine_tune_embeddings}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"early_stopping", c.train.early_stopping},
                {"patience", c.train.patience}};
  j["optimizer"] = {{"kind", optimizer_kind_name(c.optimizer.kind)},
                    {"learning_rate", c.optimizer.learning_rate},
                    {"decay", c.optimizer.decay},
                    {"momentum", c.optimizer.momentum},
                    {"nesterov", c.optimizer.nesterov},
                    {"rms_decay", c.optimizer.rms_decay},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  j["data"] = {{"train", c.data.train_path},
               {"validation", c.data.validation_path},
               {"test", c.data.test_path},
               {"holdout_fraction", c.data.holdout_fraction},
               {"holdout_seed", c.data.holdout_seed}};
  j["embeddings"] = {{"path", c.embeddings.path},
                     {"random_dimension", c.embeddings.random_dimension},
                     {"random_seed", c.embeddings.random_seed},
                     {"fallback_to_random", c.embeddings.fallback_to_random}};
  json brackets = json::array();
  for (auto [open, close] : c.tokenizer.bracket_pairs) {
    brackets.push_back(std::string(1, open) + close);
  }
  j["tokenizer"] = {{"split_chars", c.tokenizer.split_chars},
                    {"strip_chars", c.tokenizer.strip_chars},
                    {"bracket_pairs", brackets}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(load_json_file(path), "config " + path);
}

RunConfig parse_run_config(const std::string& json_text, const std::string& context) {
  try {
    return run_config_from_json(json::parse(json_text), context);
  } catch (const json::exception& e) {
    throw ConfigError(context + " is not valid JSON: " + e.what());
  }
}

std::string run_config_to_json_string(const RunConfig& config) {
  return run_config_to_json(config).dump(2) + "\n";
}

}  // namespace deepvar
