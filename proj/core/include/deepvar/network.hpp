#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepvar/corpus.hpp"
#include "deepvar/embeddings.hpp"
#include "deepvar/tape.hpp"

namespace deepvar {

enum class CharEncoderKind { kCnn, kBilstm };
enum class Activation { kTanh, kSigmoid, kIdentity };

struct ModelConfig {
  CharEncoderKind char_encoder = CharEncoderKind::kCnn;
  std::size_t max_char_length = 15;  // l
  std::size_t cnn_filters = 30;
  std::size_t cnn_window = 3;  // odd
  std::size_t char_lstm_states = 25;
  double char_emb_dropout = 0.0;
  double char_lstm_dropout = 0.0;
  std::size_t word_lstm_states = 50;
  double word_lstm_dropout = 0.0;
  std::size_t units = 1;  // n stacked 2-BiLSTM residual units
  std::size_t hidden_states = 50;
  double hidden_dropout = 0.0;
  std::size_t max_word_length = 115;
  Activation candidate_activation = Activation::kTanh;  // the cell candidate gate
  Activation dense_activation = Activation::kTanh;
  bool crf_start_stop = false;
  bool fine_tune_embeddings = false;

  void validate() const;  // throws ConfigError
};

// Owns parameters in creation order; order is the serialization order.
class ParameterStore {
 public:
  Parameter& create(std::string name, Tensor value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::vector<Parameter*> all();
  std::vector<Parameter*> trainable();
  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One gated recurrent cell's weights: per-gate input matrices W
// (state x input), recurrent matrices U (state x state), biases b (state).
struct LstmParams {
  Parameter *wi, *wf, *wo, *wc;
  Parameter *ui, *uf, *uo, *uc;
  Parameter *bi, *bf, *bo, *bc;
  std::size_t input_size = 0;
  std::size_t state_size = 0;
};

// The same weights bound to one tape (bind once so gradients pool per pass).
struct LstmVars {
  Var wi, wf, wo, wc, ui, uf, uo, uc, bi, bf, bo, bc;
};
LstmVars bind_lstm(Tape& tape, const LstmParams& p);

struct LstmStateVar {
  Var h, c;
};
LstmStateVar lstm_initial_state(Tape& tape, std::size_t state_size);

// i = sig(Wi x + Ui h + bi), f = sig(...), o = sig(...),
// cand = act(Wc x + Uc h + bc), c = f*c_prev + i*cand, h = o*tanh(c).
// No peephole connections.
LstmStateVar lstm_cell(Tape& tape, const LstmVars& w, Var x, const LstmStateVar& prev,
                       Activation candidate_activation);

struct BilstmParams {
  LstmParams fwd, bwd;
};

// Per-position concatenation [h_fwd_t ; h_bwd_t]; the backward LSTM consumes
// the reversed sequence.
std::vector<Var> bilstm(Tape& tape, const BilstmParams& p, const std::vector<Var>& inputs,
                        Activation candidate_activation);

struct CharCnnParams {
  Parameter* filters = nullptr;  // (num_filters, window, 70)
  Parameter* bias = nullptr;     // (num_filters)
  std::size_t num_filters = 0;
  std::size_t window = 0;
};

// Same-padded 1-D convolution over the real character positions, tanh, then
// max-pool over time. Output length num_filters; independent of padding rows.
Var char_repr_cnn(Tape& tape, const CharCnnParams& p, const CharEncoding& encoding);

// Concatenated final states of the forward and backward character LSTMs over
// the first valid_length rows only; padding rows are never consumed.
Var char_repr_bilstm(Tape& tape, const BilstmParams& p, const CharEncoding& encoding,
                     Activation candidate_activation, double input_dropout,
                     bool training, Rng& rng);

// Two stacked BiLSTM layers F plus the identity shortcut: y_t = F(x)_t + x_t.
// Both layers map dim -> dim, so dim must equal 2 * state_size.
struct StackUnitParams {
  BilstmParams first, second;
  std::size_t dim = 0;  // D
};

std::vector<Var> residual_unit(Tape& tape, const StackUnitParams& p,
                               const std::vector<Var>& inputs,
                               Activation candidate_activation, double layer_dropout,
                               bool training, Rng& rng);

// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);
// Random orthogonal square matrix via Householder QR with sign fixing.
Tensor orthogonal_matrix(std::size_t n, Rng& rng);

// The full architecture: per-token char encoder + word vector, a linear
// projection to D = 2 * word_lstm_states, n residual stack units, a dense
// hidden layer and the linear map to the 6 tag scores. CRF transitions live
// here as parameters, too.
class DeepVarModel {
 public:
  DeepVarModel(ModelConfig config, CharAlphabet alphabet, const EmbeddingTable& table,
               Rng init_rng);

  // Emission scores, shape (N, 6). Throws if N == 0 or N > max_word_length.
  Var forward_sentence(Tape& tape, const std::vector<std::string>& token_texts,
                       bool training, Rng& dropout_rng) const;

  // Viterbi decode at inference settings.
  std::vector<int> predict_tags(const std::vector<std::string>& token_texts) const;

  const ModelConfig& config() const { return config_; }
  const CharAlphabet& alphabet() const { return alphabet_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  Parameter& transitions() { return *transitions_; }
  const Parameter& transitions() const { return *transitions_; }
  Parameter* start_scores() { return start_; }    // null unless crf_start_stop
  Parameter* stop_scores() { return stop_; }
  const std::vector<StackUnitParams>& stack_units() const { return stack_; }

  std::size_t char_repr_dim() const;
  std::size_t word_dim() const { return word_dim_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::size_t word_row(const std::string& token_text) const;  // exact -> lower -> unk

  std::vector<Tensor> snapshot_values() const;
  void restore_values(const std::vector<Tensor>& snapshot);
  void zero_grads();

 private:
  struct TokenForward;  // helper scope

  ModelConfig config_;
  CharAlphabet alphabet_;
  ParameterStore store_;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> vocab_index_;
  std::size_t word_dim_ = 0;
  std::size_t unk_row_ = 0;
  Parameter* embedding_matrix_ = nullptr;  // (vocab + 1, word_dim), last row UNK

  CharCnnParams char_cnn_;
  BilstmParams char_bilstm_;
  Parameter* input_proj_w_ = nullptr;  // (D, char_dim + word_dim)
  Parameter* input_proj_b_ = nullptr;  // (D)
  std::vector<StackUnitParams> stack_;
  Parameter* dense_w_ = nullptr;   // (hidden, D)
  Parameter* dense_b_ = nullptr;   // (hidden)
  Parameter* output_w_ = nullptr;  // (6, hidden)
  Parameter* output_b_ = nullptr;  // (6)
  Parameter* transitions_ = nullptr;  // (6, 6)
  Parameter* start_ = nullptr;
  Parameter* stop_ = nullptr;
};

}  // namespace deepvar
