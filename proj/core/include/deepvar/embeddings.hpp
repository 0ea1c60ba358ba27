#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "deepvar/rng.hpp"
#include "deepvar/tensor.hpp"

namespace deepvar {

// The 70-symbol character lookup alphabet: 26 lowercase letters, 10 digits,
// 33 punctuation/other symbols, and one trailing placeholder for anything
// else. Symbols are Unicode codepoints; encoding walks UTF-8 codepoints.
class CharAlphabet {
 public:
  static CharAlphabet standard();

  std::size_t size() const { return symbols_.size(); }  // always 70
  std::size_t placeholder_index() const { return symbols_.size() - 1; }
  char32_t symbol(std::size_t i) const { return symbols_[i]; }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  // Placeholder index for unmapped codepoints. No case folding here.
  std::size_t index_of(char32_t c) const;

 private:
  explicit CharAlphabet(std::vector<char32_t> symbols);

  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, std::size_t> index_;
};

// l x 70 one-hot matrix for one token: rows [0, valid_length) each have a
// single 1, the rest are zero padding.
struct CharEncoding {
  std::size_t max_length = 0;  // l
  std::size_t valid_length = 0;
  std::vector<std::size_t> symbol_indices;  // size valid_length

  Tensor matrix(std::size_t alphabet_size = 70) const;
};

// Lowercases, walks UTF-8 codepoints, truncates to the first l characters.
// Unknown codepoints (and malformed bytes) map to the placeholder.
CharEncoding encode_chars(const std::string& token_text, const CharAlphabet& alphabet,
                          std::size_t max_length);

// Static word vectors plus the mean-vector UNK fallback.
struct EmbeddingTable {
  std::size_t dimension = 0;
  std::vector<std::string> words;  // load order; row i of the materialized matrix
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<double>> vectors;
  std::vector<double> unk_vector;

  bool contains(const std::string& w) const { return index.count(w) > 0; }
  std::size_t size() const { return words.size(); }
};

// Text format: "word v1 v2 ... vd" per line; an optional leading
// "count dimension" header line is tolerated and skipped.
EmbeddingTable load_word_vectors(const std::string& path);

// Deterministic random table over a fixed vocabulary (entries in ~U(-0.1, 0.1)).
EmbeddingTable random_embeddings(std::vector<std::string> vocab, std::size_t dimension,
                                 Rng rng);

// exact match, then lowercase match, then the UNK vector.
const std::vector<double>& lookup_word(const EmbeddingTable& table,
                                       const std::string& token_text);

std::string ascii_lower(const std::string& s);

}  // namespace deepvar
