#include "deepvar/network.hpp"

#include <algorithm>
#include <cmath>

#include "deepvar/crf.hpp"
#include "deepvar/errors.hpp"

namespace deepvar {

void ModelConfig::validate() const {
  check_config(max_char_length >= 1, "model: max_char_length must be >= 1");
  check_config(max_word_length >= 1, "model: max_word_length must be >= 1");
  check_config(word_lstm_states >= 1, "model: word_lstm_states must be >= 1");
  check_config(units >= 1, "model: units must be >= 1");
  check_config(hidden_states >= 1, "model: hidden_states must be >= 1");
  if (char_encoder == CharEncoderKind::kCnn) {
    check_config(cnn_filters >= 1, "model: cnn_filters must be >= 1");
    check_config(cnn_window >= 1 && cnn_window % 2 == 1,
                 "model: cnn_window must be a positive odd number");
    check_config(cnn_window <= max_char_length,
                 "model: cnn_window must not exceed max_char_length");
  } else {
    check_config(char_lstm_states >= 1, "model: char_lstm_states must be >= 1");
  }
  for (double rate : {char_emb_dropout, char_lstm_dropout, word_lstm_dropout, hidden_dropout}) {
    check_config(rate >= 0.0 && rate < 1.0, "model: dropout rates must be in [0, 1)");
  }
}

Parameter& ParameterStore::create(std::string name, Tensor value) {
  check_config(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p->trainable) out.push_back(p.get());
  }
  return out;
}

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

Tensor orthogonal_matrix(std::size_t n, Rng& rng) {
  Tensor r({n, n});
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.normal();
  Tensor q({n, n});
  for (std::size_t i = 0; i < n; ++i) q.at(i, i) = 1.0;

  // Householder QR of the random matrix; Q accumulates the reflections.
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += r.at(i, k) * r.at(i, k);
    norm = std::sqrt(norm);
    if (norm < 1e-300) continue;
    const double alpha = r.at(k, k) > 0.0 ? -norm : norm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i] = r.at(i, k);
      if (i == k) v[i] -= alpha;
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 < 1e-300) continue;
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * r.at(i, j);
      const double coef = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) r.at(i, j) -= coef * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = k; j < n; ++j) dot += q.at(i, j) * v[j];
      const double coef = 2.0 * dot / vnorm2;
      for (std::size_t j = k; j < n; ++j) q.at(i, j) -= coef * v[j];
    }
  }
  // Fix column signs so the decomposition (and the init) is unique.
  for (std::size_t j = 0; j < n; ++j) {
    if (r.at(j, j) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) q.at(i, j) = -q.at(i, j);
    }
  }
  return q;
}

namespace {

Var apply_activation(Tape& tape, Var x, Activation a) {
  switch (a) {
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kSigmoid: return tape.sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

LstmParams make_lstm_params(ParameterStore& store, const std::string& prefix,
                            std::size_t input_size, std::size_t state_size, Rng& rng) {
  LstmParams p;
  p.input_size = input_size;
  p.state_size = state_size;
  const auto input_matrix = [&](const char* gate) -> Parameter* {
    Tensor t({state_size, input_size});
    glorot_init(t, input_size, state_size, rng);
    return &store.create(prefix + "/w" + gate, std::move(t));
  };
  const auto recurrent_matrix = [&](const char* gate) -> Parameter* {
    return &store.create(prefix + "/u" + gate, orthogonal_matrix(state_size, rng));
  };
  const auto bias = [&](const char* gate, double init) -> Parameter* {
    Tensor t({state_size});
    t.fill(init);
    return &store.create(prefix + "/b" + gate, std::move(t));
  };
  p.wi = input_matrix("i");
  p.wf = input_matrix("f");
  p.wo = input_matrix("o");
  p.wc = input_matrix("c");
  p.ui = recurrent_matrix("i");
  p.uf = recurrent_matrix("f");
  p.uo = recurrent_matrix("o");
  p.uc = recurrent_matrix("c");
  p.bi = bias("i", 0.0);
  p.bf = bias("f", 1.0);  // forget-gate bias starts open
  p.bo = bias("o", 0.0);
  p.bc = bias("c", 0.0);
  return p;
}

BilstmParams make_bilstm_params(ParameterStore& store, const std::string& prefix,
                                std::size_t input_size, std::size_t state_size, Rng& rng) {
  BilstmParams p;
  p.fwd = make_lstm_params(store, prefix + "/fwd", input_size, state_size, rng);
  p.bwd = make_lstm_params(store, prefix + "/bwd", input_size, state_size, rng);
  return p;
}

}  // namespace

LstmVars bind_lstm(Tape& tape, const LstmParams& p) {
  LstmVars v;
  v.wi = tape.param(*p.wi);
  v.wf = tape.param(*p.wf);
  v.wo = tape.param(*p.wo);
  v.wc = tape.param(*p.wc);
  v.ui = tape.param(*p.ui);
  v.uf = tape.param(*p.uf);
  v.uo = tape.param(*p.uo);
  v.uc = tape.param(*p.uc);
  v.bi = tape.param(*p.bi);
  v.bf = tape.param(*p.bf);
  v.bo = tape.param(*p.bo);
  v.bc = tape.param(*p.bc);
  return v;
}

LstmStateVar lstm_initial_state(Tape& tape, std::size_t state_size) {
  return LstmStateVar{tape.constant(Tensor({state_size})),
                      tape.constant(Tensor({state_size}))};
}

LstmStateVar lstm_cell(Tape& tape, const LstmVars& w, Var x, const LstmStateVar& prev,
                       Activation candidate_activation) {
  const auto gate_pre = [&](Var wm, Var um, Var b) {
    return tape.add(tape.add(tape.matmul(wm, x), tape.matmul(um, prev.h)), b);
  };
  Var i = tape.sigmoid(gate_pre(w.wi, w.ui, w.bi));
  Var f = tape.sigmoid(gate_pre(w.wf, w.uf, w.bf));
  Var o = tape.sigmoid(gate_pre(w.wo, w.uo, w.bo));
  Var cand = apply_activation(tape, gate_pre(w.wc, w.uc, w.bc), candidate_activation);
  Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, cand));
  Var h = tape.mul(o, tape.tanh(c));
  return LstmStateVar{h, c};
}

std::vector<Var> bilstm(Tape& tape, const BilstmParams& p, const std::vector<Var>& inputs,
                        Activation candidate_activation) {
  check_numeric(!inputs.empty(), "bilstm: empty input sequence");
  const std::size_t n = inputs.size();
  const LstmVars fwd = bind_lstm(tape, p.fwd);
  const LstmVars bwd = bind_lstm(tape, p.bwd);

  std::vector<Var> fwd_h(n);
  LstmStateVar state = lstm_initial_state(tape, p.fwd.state_size);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_cell(tape, fwd, inputs[t], state, candidate_activation);
    fwd_h[t] = state.h;
  }

  std::vector<Var> bwd_h(n);
  state = lstm_initial_state(tape, p.bwd.state_size);
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_cell(tape, bwd, inputs[t], state, candidate_activation);
    bwd_h[t] = state.h;
  }

  std::vector<Var> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = tape.concat({fwd_h[t], bwd_h[t]});
  return out;
}

Var char_repr_cnn(Tape& tape, const CharCnnParams& p, const CharEncoding& encoding) {
  check_numeric(encoding.valid_length >= 1, "char_repr_cnn: empty encoding");
  const std::size_t positions = encoding.valid_length;
  const std::size_t window = p.window;
  const std::size_t width = 70;
  const std::size_t offset = (window - 1) / 2;

  // One-hot window matrix; rows outside the real characters stay zero, which
  // is the same-padding rule.
  Tensor windows({positions, window * width});
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t w = 0; w < window; ++w) {
      const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(pos + w) -
                               static_cast<std::ptrdiff_t>(offset);
      if (r < 0 || r >= static_cast<std::ptrdiff_t>(positions)) continue;
      windows.at(pos, w * width + encoding.symbol_indices[static_cast<std::size_t>(r)]) = 1.0;
    }
  }

  Var windows_v = tape.constant(std::move(windows));
  Var filters = tape.reshape(tape.param(*p.filters), {p.num_filters, window * width});
  Var conv = tape.matmul(windows_v, tape.transpose(filters));
  conv = tape.add_to_rows(conv, tape.param(*p.bias));
  return tape.max_pool_over_time(tape.tanh(conv));
}

Var char_repr_bilstm(Tape& tape, const BilstmParams& p, const CharEncoding& encoding,
                     Activation candidate_activation, double input_dropout,
                     bool training, Rng& rng) {
  check_numeric(encoding.valid_length >= 1, "char_repr_bilstm: empty encoding");
  const std::size_t n = encoding.valid_length;
  const LstmVars fwd = bind_lstm(tape, p.fwd);
  const LstmVars bwd = bind_lstm(tape, p.bwd);

  std::vector<Var> rows(n);
  for (std::size_t t = 0; t < n; ++t) {
    Tensor one_hot({70});
    one_hot[encoding.symbol_indices[t]] = 1.0;
    rows[t] = tape.dropout(tape.constant(std::move(one_hot)), input_dropout, training, rng);
  }

  LstmStateVar state = lstm_initial_state(tape, p.fwd.state_size);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_cell(tape, fwd, rows[t], state, candidate_activation);
  }
  const Var fwd_final = state.h;

  state = lstm_initial_state(tape, p.bwd.state_size);
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_cell(tape, bwd, rows[t], state, candidate_activation);
  }
  return tape.concat({fwd_final, state.h});
}

std::vector<Var> residual_unit(Tape& tape, const StackUnitParams& p,
                               const std::vector<Var>& inputs,
                               Activation candidate_activation, double layer_dropout,
                               bool training, Rng& rng) {
  check_numeric(!inputs.empty(), "residual_unit: empty input sequence");
  for (Var x : inputs) {
    check_numeric(tape.value(x).rank() == 1 && tape.value(x).size() == p.dim,
                  "residual_unit: input dimension mismatch, expected (" +
                      std::to_string(p.dim) + "), got " + tape.value(x).shape_str());
  }
  std::vector<Var> h = bilstm(tape, p.first, inputs, candidate_activation);
  for (Var& x : h) x = tape.dropout(x, layer_dropout, training, rng);
  h = bilstm(tape, p.second, h, candidate_activation);
  for (Var& x : h) x = tape.dropout(x, layer_dropout, training, rng);

  std::vector<Var> out(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) out[t] = tape.add(h[t], inputs[t]);
  return out;
}

DeepVarModel::DeepVarModel(ModelConfig config, CharAlphabet alphabet,
                           const EmbeddingTable& table, Rng init_rng)
    : config_(std::move(config)), alphabet_(std::move(alphabet)) {
  config_.validate();
  check_data(table.dimension >= 1 && !table.words.empty(),
             "model requires a non-empty embedding table");

  vocab_ = table.words;
  vocab_index_ = table.index;
  word_dim_ = table.dimension;
  unk_row_ = vocab_.size();

  Tensor emb({vocab_.size() + 1, word_dim_});
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    for (std::size_t j = 0; j < word_dim_; ++j) emb.at(i, j) = table.vectors[i][j];
  }
  for (std::size_t j = 0; j < word_dim_; ++j) emb.at(unk_row_, j) = table.unk_vector[j];
  embedding_matrix_ = &store_.create("embeddings/matrix", std::move(emb));
  embedding_matrix_->trainable = config_.fine_tune_embeddings;

  Rng rng = init_rng.split("model-init");
  if (config_.char_encoder == CharEncoderKind::kCnn) {
    Tensor filters({config_.cnn_filters, config_.cnn_window, 70});
    glorot_init(filters, config_.cnn_window * 70, config_.cnn_filters, rng);
    char_cnn_.filters = &store_.create("char_cnn/filters", std::move(filters));
    char_cnn_.bias = &store_.create("char_cnn/bias", Tensor({config_.cnn_filters}));
    char_cnn_.num_filters = config_.cnn_filters;
    char_cnn_.window = config_.cnn_window;
  } else {
    char_bilstm_ = make_bilstm_params(store_, "char_lstm", 70, config_.char_lstm_states, rng);
  }

  const std::size_t input_dim = char_repr_dim() + word_dim_;
  const std::size_t unit_dim = 2 * config_.word_lstm_states;
  Tensor proj_w({unit_dim, input_dim});
  glorot_init(proj_w, input_dim, unit_dim, rng);
  input_proj_w_ = &store_.create("input_proj/weight", std::move(proj_w));
  input_proj_b_ = &store_.create("input_proj/bias", Tensor({unit_dim}));

  for (std::size_t u = 0; u < config_.units; ++u) {
    StackUnitParams unit;
    unit.dim = unit_dim;
    const std::string prefix = "unit" + std::to_string(u);
    unit.first = make_bilstm_params(store_, prefix + "/layer0", unit_dim,
                                    config_.word_lstm_states, rng);
    unit.second = make_bilstm_params(store_, prefix + "/layer1", unit_dim,
                                     config_.word_lstm_states, rng);
    stack_.push_back(unit);
  }

  Tensor dense_w({config_.hidden_states, unit_dim});
  glorot_init(dense_w, unit_dim, config_.hidden_states, rng);
  dense_w_ = &store_.create("dense/weight", std::move(dense_w));
  dense_b_ = &store_.create("dense/bias", Tensor({config_.hidden_states}));

  Tensor output_w({TagSet::kSize, config_.hidden_states});
  glorot_init(output_w, config_.hidden_states, TagSet::kSize, rng);
  output_w_ = &store_.create("output/weight", std::move(output_w));
  output_b_ = &store_.create("output/bias", Tensor({TagSet::kSize}));

  transitions_ = &store_.create("crf/transitions", Tensor({TagSet::kSize, TagSet::kSize}));
  if (config_.crf_start_stop) {
    start_ = &store_.create("crf/start", Tensor({TagSet::kSize}));
    stop_ = &store_.create("crf/stop", Tensor({TagSet::kSize}));
  }
}

std::size_t DeepVarModel::char_repr_dim() const {
  return config_.char_encoder == CharEncoderKind::kCnn ? config_.cnn_filters
                                                       : 2 * config_.char_lstm_states;
}

std::size_t DeepVarModel::word_row(const std::string& token_text) const {
  auto it = vocab_index_.find(token_text);
  if (it != vocab_index_.end()) return it->second;
  it = vocab_index_.find(ascii_lower(token_text));
  if (it != vocab_index_.end()) return it->second;
  return unk_row_;
}

Var DeepVarModel::forward_sentence(Tape& tape, const std::vector<std::string>& token_texts,
                                   bool training, Rng& dropout_rng) const {
  check_data(!token_texts.empty(), "forward_sentence: empty sentence");
  check_data(token_texts.size() <= config_.max_word_length,
             "forward_sentence: sentence length " + std::to_string(token_texts.size()) +
                 " exceeds max_word_length " + std::to_string(config_.max_word_length));

  Var emb = tape.param(*embedding_matrix_);
  Var proj_w = tape.param(*input_proj_w_);
  Var proj_b = tape.param(*input_proj_b_);

  std::vector<Var> seq;
  seq.reserve(token_texts.size());
  for (const std::string& text : token_texts) {
    const CharEncoding enc = encode_chars(text, alphabet_, config_.max_char_length);
    Var char_v;
    if (config_.char_encoder == CharEncoderKind::kCnn) {
      char_v = char_repr_cnn(tape, char_cnn_, enc);
    } else {
      char_v = char_repr_bilstm(tape, char_bilstm_, enc, config_.candidate_activation,
                                config_.char_lstm_dropout, training, dropout_rng);
    }
    char_v = tape.dropout(char_v, config_.char_emb_dropout, training, dropout_rng);
    Var word_v = tape.row(emb, word_row(text));
    Var x = tape.concat({char_v, word_v});
    seq.push_back(tape.add(tape.matmul(proj_w, x), proj_b));
  }

  for (const StackUnitParams& unit : stack_) {
    seq = residual_unit(tape, unit, seq, config_.candidate_activation,
                        config_.word_lstm_dropout, training, dropout_rng);
  }

  Var dense_w = tape.param(*dense_w_);
  Var dense_b = tape.param(*dense_b_);
  Var output_w = tape.param(*output_w_);
  Var output_b = tape.param(*output_b_);
  std::vector<Var> scores;
  scores.reserve(seq.size());
  for (Var x : seq) {
    Var hid = apply_activation(tape, tape.add(tape.matmul(dense_w, x), dense_b),
                               config_.dense_activation);
    hid = tape.dropout(hid, config_.hidden_dropout, training, dropout_rng);
    scores.push_back(tape.add(tape.matmul(output_w, hid), output_b));
  }
  return tape.stack_rows(scores);
}

std::vector<int> DeepVarModel::predict_tags(const std::vector<std::string>& token_texts) const {
  Tape tape;
  Rng rng(0);  // inference path draws nothing
  Var emissions = forward_sentence(tape, token_texts, /*training=*/false, rng);
  const Tensor* start = start_ ? &start_->value : nullptr;
  const Tensor* stop = stop_ ? &stop_->value : nullptr;
  return crf_viterbi(transitions_->value, tape.value(emissions), start, stop);
}

std::vector<Tensor> DeepVarModel::snapshot_values() const {
  std::vector<Tensor> out;
  for (const auto* p : const_cast<DeepVarModel*>(this)->store_.all()) out.push_back(p->value);
  return out;
}

void DeepVarModel::restore_values(const std::vector<Tensor>& snapshot) {
  auto params = store_.all();
  check_numeric(snapshot.size() == params.size(), "snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_numeric(snapshot[i].same_shape(params[i]->value), "snapshot shape mismatch");
    params[i]->value = snapshot[i];
  }
}

void DeepVarModel::zero_grads() {
  for (Parameter* p : store_.all()) p->zero_grad();
}

}  // namespace deepvar
