#include "deepvar/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "deepvar/errors.hpp"

#include <nlohmann/json.hpp>

namespace deepvar {

namespace {

using nlohmann::json;

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

char32_t decode_single_codepoint(const std::string& s) {
  check_data(!s.empty(), "checkpoint manifest: empty alphabet symbol");
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(0);
  char32_t cp = 0;
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else {
    len = 4;
    cp = b0 & 0x07;
  }
  check_data(s.size() == len, "checkpoint manifest: alphabet symbol is not one codepoint");
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (byte(k) & 0x3F);
  return cp;
}

json model_config_to_json(const ModelConfig& c) {
  return json{
      {"char_encoder", c.char_encoder == CharEncoderKind::kCnn ? "cnn" : "bilstm"},
      {"max_char_length", c.max_char_length},
      {"cnn_filters", c.cnn_filters},
      {"cnn_window", c.cnn_window},
      {"char_lstm_states", c.char_lstm_states},
      {"char_emb_dropout", c.char_emb_dropout},
      {"char_lstm_dropout", c.char_lstm_dropout},
      {"word_lstm_states", c.word_lstm_states},
      {"word_lstm_dropout", c.word_lstm_dropout},
      {"units", c.units},
      {"hidden_states", c.hidden_states},
      {"hidden_dropout", c.hidden_dropout},
      {"max_word_length", c.max_word_length},
      {"candidate_activation", c.candidate_activation == Activation::kSigmoid ? "sigmoid" : "tanh"},
      {"dense_activation", c.dense_activation == Activation::kIdentity
                               ? "identity"
                               : (c.dense_activation == Activation::kSigmoid ? "sigmoid" : "tanh")},
      {"crf_start_stop", c.crf_start_stop},
      {"fine_tune_embeddings", c.fine_tune_embeddings},
  };
}

Activation activation_from_string(const std::string& s, const char* what) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw DataError(std::string("checkpoint manifest: bad ") + what + ": " + s);
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const std::string enc = j.at("char_encoder").get<std::string>();
  check_data(enc == "cnn" || enc == "bilstm",
             "checkpoint manifest: bad char_encoder: " + enc);
  c.char_encoder = enc == "cnn" ? CharEncoderKind::kCnn : CharEncoderKind::kBilstm;
  c.max_char_length = j.at("max_char_length").get<std::size_t>();
  c.cnn_filters = j.at("cnn_filters").get<std::size_t>();
  c.cnn_window = j.at("cnn_window").get<std::size_t>();
  c.char_lstm_states = j.at("char_lstm_states").get<std::size_t>();
  c.char_emb_dropout = j.at("char_emb_dropout").get<double>();
  c.char_lstm_dropout = j.at("char_lstm_dropout").get<double>();
  c.word_lstm_states = j.at("word_lstm_states").get<std::size_t>();
  c.word_lstm_dropout = j.at("word_lstm_dropout").get<double>();
  c.units = j.at("units").get<std::size_t>();
  c.hidden_states = j.at("hidden_states").get<std::size_t>();
  c.hidden_dropout = j.at("hidden_dropout").get<double>();
  c.max_word_length = j.at("max_word_length").get<std::size_t>();
  c.candidate_activation =
      activation_from_string(j.at("candidate_activation").get<std::string>(),
                             "candidate_activation");
  c.dense_activation =
      activation_from_string(j.at("dense_activation").get<std::string>(), "dense_activation");
  c.crf_start_stop = j.at("crf_start_stop").get<bool>();
  c.fine_tune_embeddings = j.at("fine_tune_embeddings").get<bool>();
  return c;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  check_data(in.gcount() == 4, std::string("checkpoint truncated reading ") + what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  check_data(in.gcount() == 8, std::string("checkpoint truncated reading ") + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const DeepVarModel& model,
                     const TokenizerConfig& tokenizer) {
  auto& store = const_cast<DeepVarModel&>(model).parameters();
  const std::vector<Parameter*> params = store.all();

  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["model"] = model_config_to_json(model.config());
  json alphabet = json::array();
  for (char32_t cp : model.alphabet().symbols()) alphabet.push_back(encode_utf8(cp));
  manifest["alphabet"] = alphabet;
  manifest["tokenizer"] = {{"split_chars", tokenizer.split_chars},
                           {"strip_chars", tokenizer.strip_chars}};
  json brackets = json::array();
  for (auto [open, close] : tokenizer.bracket_pairs) {
    brackets.push_back(std::string(1, open) + close);
  }
  manifest["tokenizer"]["bracket_pairs"] = brackets;
  manifest["vocab"] = model.vocab();
  manifest["embedding_dimension"] = model.word_dim();
  json tensors = json::array();
  for (const Parameter* p : params) {
    tensors.push_back(json{{"name", p->name}, {"shape", p->value.shape()}});
  }
  manifest["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  check_data(out.is_open(), "cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  write_u32(out, kCheckpointVersion);
  const std::string manifest_bytes = manifest.dump();
  write_u64(out, manifest_bytes.size());
  out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
  for (const Parameter* p : params) {
    const std::vector<double>& v = p->value.values();
    write_u64(out, v.size() * sizeof(double));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  check_data(out.good(), "failed writing checkpoint: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.is_open(), "cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  check_data(in.gcount() == 4 && std::memcmp(magic, kCheckpointMagic, 4) == 0,
             "checkpoint " + path + ": bad magic, not a model checkpoint");
  const std::uint32_t version = read_u32(in, "version");
  check_data(version == kCheckpointVersion,
             "checkpoint " + path + ": unsupported version " + std::to_string(version));
  const std::uint64_t manifest_len = read_u64(in, "manifest length");
  check_data(manifest_len > 0 && manifest_len < (1ULL << 32),
             "checkpoint " + path + ": implausible manifest length");
  std::string manifest_bytes(manifest_len, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
  check_data(static_cast<std::uint64_t>(in.gcount()) == manifest_len,
             "checkpoint " + path + ": truncated manifest");

  json manifest;
  try {
    manifest = json::parse(manifest_bytes);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": manifest is not valid JSON: " + e.what());
  }

  LoadedModel loaded;
  try {
    const ModelConfig config = model_config_from_json(manifest.at("model"));

    loaded.tokenizer.split_chars =
        manifest.at("tokenizer").at("split_chars").get<std::string>();
    loaded.tokenizer.strip_chars =
        manifest.at("tokenizer").at("strip_chars").get<std::string>();
    loaded.tokenizer.bracket_pairs.clear();
    for (const auto& pair : manifest.at("tokenizer").at("bracket_pairs")) {
      const std::string s = pair.get<std::string>();
      check_data(s.size() == 2, "checkpoint manifest: bad bracket pair: " + s);
      loaded.tokenizer.bracket_pairs.emplace_back(s[0], s[1]);
    }

    const auto alphabet_json = manifest.at("alphabet");
    check_data(alphabet_json.size() == 70, "checkpoint manifest: alphabet must have 70 symbols");
    // The standard alphabet is the only one the artifact produces; verify.
    const CharAlphabet alphabet = CharAlphabet::standard();
    for (std::size_t i = 0; i < 70; ++i) {
      check_data(decode_single_codepoint(alphabet_json[i].get<std::string>()) ==
                     alphabet.symbol(i),
                 "checkpoint manifest: alphabet symbol " + std::to_string(i) +
                     " does not match the standard table");
    }

    std::vector<std::string> vocab = manifest.at("vocab").get<std::vector<std::string>>();
    const auto dim = manifest.at("embedding_dimension").get<std::size_t>();
    check_data(dim >= 1 && !vocab.empty(), "checkpoint manifest: bad embedding table");

    // Zero table of the right geometry; tensor sections overwrite everything.
    EmbeddingTable table;
    table.dimension = dim;
    for (auto& w : vocab) {
      table.index.emplace(w, table.words.size());
      table.words.push_back(std::move(w));
      table.vectors.emplace_back(dim, 0.0);
    }
    check_data(table.words.size() == table.index.size(),
               "checkpoint manifest: duplicate vocabulary entries");
    table.unk_vector.assign(dim, 0.0);

    loaded.model = std::make_unique<DeepVarModel>(config, alphabet, table, Rng(0));

    const auto& tensors = manifest.at("tensors");
    auto params = loaded.model->parameters().all();
    check_data(tensors.size() == params.size(),
               "checkpoint manifest: tensor count " + std::to_string(tensors.size()) +
                   " does not match model parameter count " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string name = tensors[i].at("name").get<std::string>();
      const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
      check_data(name == params[i]->name,
                 "checkpoint manifest: tensor " + std::to_string(i) + " is '" + name +
                     "', expected '" + params[i]->name + "'");
      check_data(shape == params[i]->value.shape(),
                 "checkpoint manifest: tensor '" + name + "' shape mismatch");
      const std::uint64_t bytes = read_u64(in, name.c_str());
      check_data(bytes == params[i]->value.size() * sizeof(double),
                 "checkpoint: tensor '" + name + "' section length mismatch");
      in.read(reinterpret_cast<char*>(params[i]->value.values().data()),
              static_cast<std::streamsize>(bytes));
      check_data(static_cast<std::uint64_t>(in.gcount()) == bytes,
                 "checkpoint: truncated tensor section '" + name + "'");
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": manifest field error: " + e.what());
  }
  return loaded;
}

}  // namespace deepvar
